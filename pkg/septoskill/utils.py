"""
septoskill utilities

Shared error base class, exit-code constants and text I/O helpers used by
every module that touches the filesystem.
"""

import os
import sys

# Process exit codes shared by the CLI and the error classes.
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_EMPTY = 3
EXIT_NUMERIC = 4

# ≥ 9 significant digits; stable under parse/format round trips.
NUMBER_FORMAT = '%.12g'


class SeptoskillError(Exception):
    """Base class for pipeline errors. Subclasses pick the exit code."""
    exit_code = EXIT_NUMERIC


class InputError(SeptoskillError):
    """Malformed or inconsistent input (exit 2)."""
    exit_code = EXIT_INPUT


class EmptyResultError(SeptoskillError):
    """A stage produced nothing usable by contract (exit 3)."""
    exit_code = EXIT_EMPTY


class NumericError(SeptoskillError):
    """A numeric stage could not produce a well-defined answer (exit 4)."""
    exit_code = EXIT_NUMERIC


class TrialError(SeptoskillError):
    """Wraps a pipeline error with the trial it happened in."""

    def __init__(self, trial_id: str, error: SeptoskillError):
        self.trial_id = trial_id
        self.error = error
        self.exit_code = getattr(error, 'exit_code', EXIT_NUMERIC)
        super().__init__(f"[{trial_id}] {type(error).__name__}: {error}")


def setup_console_encoding():
    """
    Switch the Windows console to UTF-8.

    Call at the top of entry points to avoid encode errors on °/² output.
    """
    if sys.platform == 'win32':
        sys.stdout.reconfigure(encoding='utf-8', errors='replace')
        sys.stderr.reconfigure(encoding='utf-8', errors='replace')


def read_text_file(file_path: str, encodings: list = None) -> str:
    """
    Read a text file, trying a few encodings in order.

    Args:
        file_path: path to read
        encodings: encodings to try, default ['utf-8', 'utf-8-sig']

    Raises:
        FileNotFoundError: the file does not exist
        UnicodeDecodeError: no encoding worked
    """
    if encodings is None:
        encodings = ['utf-8', 'utf-8-sig']

    if not os.path.exists(file_path):
        raise FileNotFoundError(f"File not found: {file_path}")

    for encoding in encodings:
        try:
            with open(file_path, 'r', encoding=encoding, newline='') as f:
                return f.read()
        except UnicodeDecodeError:
            continue

    raise UnicodeDecodeError(
        'multiple',
        b'',
        0, 0,
        f"Failed to decode {file_path} with encodings: {encodings}"
    )


def write_text_file(file_path: str, content: str, encoding: str = 'utf-8'):
    """
    Write a text file as UTF-8 with LF line endings, creating parent dirs.
    """
    dir_path = os.path.dirname(file_path)
    if dir_path:
        os.makedirs(dir_path, exist_ok=True)

    with open(file_path, 'w', encoding=encoding, newline='\n') as f:
        f.write(content)


__all__ = [
    "EXIT_OK",
    "EXIT_INPUT",
    "EXIT_EMPTY",
    "EXIT_NUMERIC",
    "NUMBER_FORMAT",
    "SeptoskillError",
    "InputError",
    "EmptyResultError",
    "NumericError",
    "TrialError",
    "setup_console_encoding",
    "read_text_file",
    "write_text_file",
]
