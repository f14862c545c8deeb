"""Exception hierarchy shared by all modules."""


class SpineMetricsError(Exception):
    """Base class for every error raised by this package."""


# --- annotation parsing / rasterization ---

class MalformedDocument(SpineMetricsError):
    pass


class UnsupportedShape(SpineMetricsError):
    pass


class UnknownClass(SpineMetricsError):
    pass


class DegeneratePolygon(SpineMetricsError):
    pass


# --- mask arithmetic ---

class DimensionMismatch(SpineMetricsError):
    pass


class CorruptRle(SpineMetricsError):
    pass


# --- metrics ---

class ClassIndexOutOfRange(SpineMetricsError):
    pass


class EmptyMatrix(SpineMetricsError):
    pass


class EmptyInput(SpineMetricsError):
    pass


# --- instancing ---

class NoSacralAnchor(SpineMetricsError):
    pass


class MultipleSacralAnchors(SpineMetricsError):
    pass


class BrokenChain(SpineMetricsError):
    pass


# --- morphometry ---

class KernelTooLarge(SpineMetricsError):
    pass


class DegenerateShape(SpineMetricsError):
    pass


class MissingLevel(SpineMetricsError):
    pass


class DegenerateEndplate(SpineMetricsError):
    pass


# --- synthetic generation ---

class InfeasibleLayout(SpineMetricsError):
    pass
