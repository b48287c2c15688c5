"""Exception types shared across the package."""


class MeshoptError(Exception):
    """Base class for all meshopt errors."""


class DegenerateRestElement(MeshoptError):
    """A rest element has non-positive or numerically vanishing measure."""

    def __init__(self, element, measure):
        self.element = int(element)
        self.measure = float(measure)
        super().__init__(
            f"element {element} has degenerate rest measure {measure:.3e}; "
            "rest elements must be positively oriented and non-degenerate"
        )


class IndexOutOfRange(MeshoptError):
    """An element or constraint references a vertex index outside [0, n)."""


class NonDiskTopology(MeshoptError):
    """The mesh is not a disk-topology triangle mesh."""


class NotPositiveDefinite(MeshoptError):
    """A matrix expected to be SPD failed factorization."""


class NonPositiveDeterminant(MeshoptError):
    """A barrier energy was evaluated on a collapsed or inverted element."""

    def __init__(self, element=None, det=None):
        self.element = None if element is None else int(element)
        self.det = None if det is None else float(det)
        where = "deformation gradient" if element is None else f"element {element}"
        super().__init__(f"{where} has determinant {det} <= 0 under a barrier energy")


class NotDescentDirection(MeshoptError):
    """Line search was given a direction with non-negative directional derivative."""


class LineSearchStalled(MeshoptError):
    """Backtracking drove the step size below the underflow threshold."""


class UnsupportedResolution(MeshoptError):
    """A synthetic problem generator was asked for an out-of-bounds resolution."""
