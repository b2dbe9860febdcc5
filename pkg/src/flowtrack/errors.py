"""Exception hierarchy shared by all modules.

Every error carries a stable machine-readable ``code`` so the socket
protocol can pass module errors through unchanged.
"""


class FlowTrackError(Exception):
    """Base class for all package errors."""

    code = "error"


# --- video ---------------------------------------------------------------

class NotFoundError(FlowTrackError):
    code = "not_found"


class DimensionMismatchError(FlowTrackError):
    code = "dimension_mismatch"


class UnsupportedDepthError(FlowTrackError):
    code = "unsupported_depth"


class TooShortError(FlowTrackError):
    code = "too_short"


class BadSizeError(FlowTrackError):
    code = "bad_size"


# --- track ---------------------------------------------------------------

class FrameOutOfRangeError(FlowTrackError):
    code = "frame_out_of_range"


class BadOrderError(FlowTrackError):
    code = "bad_order"


class SameFrameError(FlowTrackError):
    code = "same_frame"


class NoAnchorsError(FlowTrackError):
    code = "no_anchors"


class NoSuchAnchorError(FlowTrackError):
    code = "no_such_anchor"


class LastAnchorError(FlowTrackError):
    code = "last_anchor"


# --- metrics -------------------------------------------------------------

class LengthMismatchError(FlowTrackError):
    code = "length_mismatch"


class NoVisibleFramesError(FlowTrackError):
    code = "no_visible_frames"


class EmptyError(FlowTrackError):
    code = "empty"


class NoPairsError(FlowTrackError):
    code = "no_pairs"


# --- experiments ---------------------------------------------------------

class NoReferenceError(FlowTrackError):
    code = "no_reference"


class EmptyFramesError(FlowTrackError):
    code = "empty_frames"


# --- readout -------------------------------------------------------------

class GeometryMismatchError(FlowTrackError):
    code = "geometry_mismatch"


class ZeroBaselineError(FlowTrackError):
    code = "zero_baseline"


class ShortTraceError(FlowTrackError):
    code = "short_trace"


class ZeroVarianceError(FlowTrackError):
    code = "zero_variance"


# --- server --------------------------------------------------------------

class ParseError(FlowTrackError):
    code = "parse_error"


class UnknownOpError(FlowTrackError):
    code = "unknown_op"


class SessionStateError(FlowTrackError):
    code = "session_state"
