"""Exception hierarchy with stable error codes.

The string codes are part of the public surface: the CLI maps them to exit
statuses and the foreign-function bridge maps them to integer status codes
(see ``provtrack.bridge``). Everything raised by this package derives from
:class:`ProvTrackError`, except plain I/O failures which surface as the
built-in ``OSError`` family.
"""

from __future__ import annotations


class ProvTrackError(Exception):
    """Base class for errors raised by provtrack."""

    code = "internal"


class InvalidArgumentError(ProvTrackError, ValueError):
    """A caller-supplied value violates a documented constraint."""

    code = "invalid-argument"


class DuplicateRecordError(ProvTrackError):
    """A record or relation id is already present for its kind."""

    code = "duplicate-record"


class DuplicateParamError(ProvTrackError):
    """A one-shot value (param, dataset label, final model) was logged twice."""

    code = "duplicate-param"


class IllegalStateError(ProvTrackError, RuntimeError):
    """Operation called outside the start -> log* -> end lifecycle."""

    code = "illegal-state"


class NotFoundError(ProvTrackError):
    """A referenced series, run directory, or document does not exist."""

    code = "not-found"


class ParseError(ProvTrackError, ValueError):
    """Input text could not be parsed.

    ``offset`` is the byte offset of the failure when known. ``code`` is
    refined to ``duplicate-record`` when the failure is a duplicate id in
    otherwise well-formed JSON.
    """

    code = "parse-error"

    def __init__(self, message: str, offset: int | None = None, code: str | None = None):
        super().__init__(message)
        self.offset = offset
        if code is not None:
            self.code = code


class InvalidDocumentError(ProvTrackError):
    """Refusal to serialize a document that fails structural validation."""

    code = "invalid-document"

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class ExportError(ProvTrackError):
    """An external layout tool failed; carries the tool output."""

    code = "export-error"

    def __init__(self, message: str, tool_output: str = ""):
        super().__init__(message)
        self.tool_output = tool_output


# Integer status codes used on the flat bridge boundary.
STATUS_OK = 0
STATUS_CODES = {
    "ok": STATUS_OK,
    "invalid-argument": 1,
    "illegal-state": 2,
    "duplicate-record": 3,
    "duplicate-param": 4,
    "not-found": 5,
    "io-error": 6,
    "parse-error": 7,
    "invalid-document": 8,
    "export-error": 9,
    "unavailable": 10,
    "internal": 99,
}


def status_code_for(exc: BaseException) -> int:
    """Map an exception to its bridge status code."""
    if isinstance(exc, ProvTrackError):
        return STATUS_CODES.get(exc.code, STATUS_CODES["internal"])
    if isinstance(exc, OSError):
        return STATUS_CODES["io-error"]
    return STATUS_CODES["internal"]
