"""Exception hierarchy shared by every parqueue layer."""


class ParqueueError(Exception):
    """Base class for all errors raised by this package."""


class CodecError(ParqueueError):
    """A payload could not be encoded or decoded."""


class EncodingError(CodecError):
    """The value lies outside the payload grammar (bad type, 64-bit or
    32-bit range overflow, heterogeneous sequence)."""


class TruncationError(ParqueueError):
    """Input ended mid-value or mid-frame."""


class MalformedPayloadError(CodecError):
    """Bytes do not form a canonical payload (unknown tag, non-canonical
    form, trailing bytes)."""


class ProtocolError(ParqueueError):
    """A frame violated the wire protocol (bad magic, bad version,
    unknown kind, or a kind that is invalid in the current state)."""


class TransportError(ParqueueError):
    """A peer disconnected or a send/receive failed at the OS level."""


class StartupError(ParqueueError):
    """Cluster setup failed (listen/accept/connect timeout or failure)."""


class LifecycleError(ParqueueError):
    """An operation was called in the wrong supervision state."""


class ConfigurationError(ParqueueError):
    """A job or task type had no registered handler on the receiving side."""


class HandlerError(ParqueueError):
    """A user handler raised; the message names the offending job type."""
