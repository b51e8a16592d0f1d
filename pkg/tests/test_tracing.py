"""
Run tracing tests.
"""

import json

import numpy as np
import pytest


def test_span_records_output():
    from septoskill import tracing

    trace_id = tracing.start_trace('features')
    with tracing.span(trace_id, 'strokes', 'strokes', trial_id='T001') as out:
        out['strokes'] = np.int64(12)
    tracing.finish_trace(trace_id)

    trace = tracing.get_trace(trace_id)
    assert trace['status'] == 'completed'
    assert len(trace['spans']) == 1
    span = trace['spans'][0]
    assert span['status'] == 'completed'
    assert span['trial_id'] == 'T001'
    assert span['output'] == {'strokes': 12}


def test_span_marks_error_and_reraises():
    from septoskill import tracing
    from septoskill.utils import InputError

    trace_id = tracing.start_trace('calibrate')
    with pytest.raises(InputError):
        with tracing.span(trace_id, 'calibrate', 'calibrate'):
            raise InputError("no pivot interval")

    summary = tracing.summarize_trace(trace_id)
    assert summary['by_status'] == {'error': 1}
    assert summary['errors'] == [{'type': 'InputError', 'message': 'no pivot interval'}]


def test_null_trace_records_nothing(tmp_path):
    from septoskill import tracing

    with tracing.span(None, 'parse', 'parse') as out:
        out['samples'] = 10
    assert out == {'samples': 10}
    assert tracing.export_trace_jsonl(str(tmp_path / 'empty.jsonl')) == 0
    assert tracing.get_trace('trace_missing') == {}


def test_spans_keep_order():
    from septoskill import tracing

    trace_id = tracing.start_trace('classify')
    for name in ('parse', 'classify', 'report'):
        with tracing.span(trace_id, name, name):
            pass
    summary = tracing.summarize_trace(trace_id)

    assert [s['name'] for s in tracing.get_trace(trace_id)['spans']] == ['parse', 'classify', 'report']
    assert summary['span_count'] == 3
    assert summary['by_type'] == {'parse': 1, 'classify': 1, 'report': 1}


def test_export_jsonl(tmp_path):
    from septoskill import tracing

    trace_id = tracing.start_trace('report', {'argv': ['report', 'strokes.csv']})
    with tracing.span(trace_id, 'report', 'report', input={'path': 'out'}):
        pass
    tracing.finish_trace(trace_id)

    path = tmp_path / 'trace.jsonl'
    assert tracing.export_trace_jsonl(str(path), trace_id) == 2
    events = [json.loads(line) for line in path.read_text(encoding='utf-8').splitlines()]
    assert [e['event_type'] for e in events] == ['trace', 'span']
    assert events[0]['metadata'] == {'argv': ['report', 'strokes.csv']}
    assert events[1]['input'] == {'path': 'out'}
    assert events[1]['trace_id'] == trace_id


def test_reset_clears():
    from septoskill import tracing

    trace_id = tracing.start_trace('simulate')
    tracing.reset()
    assert tracing.get_trace(trace_id) == {}


def test_unknown_span_type():
    from septoskill import tracing
    from septoskill.utils import InputError

    trace_id = tracing.start_trace('features')
    with pytest.raises(InputError, match='span_type'):
        tracing.start_span(trace_id, 'smooth', 'smoothing')
    assert tracing.get_trace(trace_id)['spans'] == []
