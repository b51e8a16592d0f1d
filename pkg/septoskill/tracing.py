"""
Run tracing

Records one trace per pipeline run with one span per stage (parse,
calibrate, headcomp, strokes, features, classify, report). Spans live in
memory and can be exported as newline-delimited JSON.
"""

import json
import threading
import uuid
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from septoskill.utils import InputError, write_text_file


SCHEMA = """
=== Tracing API ===

start_trace(workflow_name, metadata=None) -> str
finish_trace(trace_id, status='completed', metadata=None) -> Dict

start_span(trace_id, name, span_type, parent_span_id=None, trial_id=None,
           input=None, metadata=None) -> str
finish_span(span_id, status='completed', output=None, error=None, metadata=None) -> Dict
span(trace_id, name, span_type, ...)    context manager; error status on exception

get_trace(trace_id) -> Dict              trace plus ordered spans
summarize_trace(trace_id) -> Dict        counts by span type/status
export_trace_jsonl(path, trace_id=None) -> int
reset() -> None
"""

SPAN_TYPES = ('parse', 'calibrate', 'register', 'headcomp', 'strokes', 'features',
              'classify', 'report', 'simulate', 'evaluate')

_lock = threading.Lock()
_traces: Dict[str, Dict] = {}
_spans: Dict[str, Dict] = {}


def _id(prefix: str) -> str:
    return f"{prefix}_{uuid.uuid4().hex}"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _plain(value: Any) -> Any:
    """JSON-safe copy (numpy scalars and arrays become Python values)."""
    if value is None:
        return None
    return json.loads(json.dumps(value, ensure_ascii=False, sort_keys=True, default=_default))


def _default(value: Any):
    if hasattr(value, 'tolist'):
        return value.tolist()
    return str(value)


def reset():
    """Drop every recorded trace."""
    with _lock:
        _traces.clear()
        _spans.clear()


def start_trace(workflow_name: str, metadata: Dict = None) -> str:
    trace_id = _id("trace")
    with _lock:
        _traces[trace_id] = {
            'id': trace_id,
            'workflow_name': workflow_name,
            'status': 'running',
            'started_at': _now(),
            'ended_at': None,
            'metadata': _plain(metadata),
            'span_ids': [],
        }
    return trace_id


def finish_trace(trace_id: str, status: str = "completed", metadata: Dict = None) -> Dict:
    with _lock:
        trace = _traces.get(trace_id)
        if trace is not None:
            trace['status'] = status
            trace['ended_at'] = _now()
            if metadata is not None:
                trace['metadata'] = _plain(metadata)
    return get_trace(trace_id)


def start_span(
    trace_id: str,
    name: str,
    span_type: str,
    parent_span_id: str = None,
    trial_id: str = None,
    input: Any = None,
    metadata: Dict = None,
) -> str:
    if span_type not in SPAN_TYPES:
        raise InputError(f"span_type must be one of {SPAN_TYPES}, got {span_type!r}")
    span_id = _id("span")
    with _lock:
        _spans[span_id] = {
            'id': span_id,
            'trace_id': trace_id,
            'parent_span_id': parent_span_id,
            'trial_id': trial_id,
            'name': name,
            'span_type': span_type,
            'status': 'running',
            'started_at': _now(),
            'ended_at': None,
            'input': _plain(input),
            'output': None,
            'error': None,
            'metadata': _plain(metadata),
        }
        if trace_id in _traces:
            _traces[trace_id]['span_ids'].append(span_id)
    return span_id


def finish_span(
    span_id: str,
    status: str = "completed",
    output: Any = None,
    error: Any = None,
    metadata: Dict = None,
) -> Dict:
    with _lock:
        item = _spans.get(span_id)
        if item is None:
            return {}
        item['status'] = status
        item['ended_at'] = _now()
        if output is not None:
            item['output'] = _plain(output)
        if error is not None:
            item['error'] = _plain(error)
        if metadata is not None:
            item['metadata'] = _plain(metadata)
        return dict(item)


@contextmanager
def span(
    trace_id: Optional[str],
    name: str,
    span_type: str,
    parent_span_id: str = None,
    trial_id: str = None,
    input: Any = None,
    metadata: Dict = None,
):
    """
    Context manager that finishes the span as completed or errored. Yields a
    dict the caller may fill with output; a None trace_id records nothing.
    """
    output: Dict = {}
    if trace_id is None:
        yield output
        return
    span_id = start_span(trace_id, name, span_type, parent_span_id=parent_span_id,
                         trial_id=trial_id, input=input, metadata=metadata)
    try:
        yield output
    except Exception as exc:
        finish_span(span_id, status="error", output=output or None,
                    error={"type": type(exc).__name__, "message": str(exc)})
        raise
    else:
        finish_span(span_id, output=output or None)


def get_trace(trace_id: str) -> Dict:
    with _lock:
        trace = _traces.get(trace_id)
        if trace is None:
            return {}
        result = {k: v for k, v in trace.items() if k != 'span_ids'}
        result['spans'] = [dict(_spans[s]) for s in trace['span_ids']]
    return result


def summarize_trace(trace_id: str) -> Dict:
    trace = get_trace(trace_id)
    if not trace:
        return {}

    by_type: Dict[str, int] = {}
    by_status: Dict[str, int] = {}
    for item in trace['spans']:
        by_type[item['span_type']] = by_type.get(item['span_type'], 0) + 1
        by_status[item['status']] = by_status.get(item['status'], 0) + 1

    return {
        "id": trace["id"],
        "workflow_name": trace["workflow_name"],
        "status": trace["status"],
        "span_count": len(trace["spans"]),
        "by_type": by_type,
        "by_status": by_status,
        "errors": [s['error'] for s in trace['spans'] if s['error']],
    }


def _event_rows(trace: Dict) -> List[Dict]:
    events = [{
        "event_type": "trace",
        "trace_id": trace["id"],
        "workflow_name": trace["workflow_name"],
        "status": trace["status"],
        "started_at": trace["started_at"],
        "ended_at": trace["ended_at"],
        "metadata": trace["metadata"],
    }]
    for item in trace["spans"]:
        row = {"event_type": "span", "span_id": item["id"]}
        row.update({k: v for k, v in item.items() if k != 'id'})
        events.append(row)
    return events


def export_trace_jsonl(path: str, trace_id: str = None) -> int:
    """Write trace and span events as JSONL. Returns the event count."""
    with _lock:
        ids = [trace_id] if trace_id else list(_traces)
    events = []
    for tid in ids:
        trace = get_trace(tid)
        if trace:
            events.extend(_event_rows(trace))
    write_text_file(path, ''.join(
        json.dumps(e, ensure_ascii=False, sort_keys=True) + '\n' for e in events))
    return len(events)


__all__ = [
    "SCHEMA",
    "SPAN_TYPES",
    "reset",
    "start_trace",
    "finish_trace",
    "start_span",
    "finish_span",
    "span",
    "get_trace",
    "summarize_trace",
    "export_trace_jsonl",
]
