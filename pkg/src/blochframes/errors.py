"""Exception hierarchy shared by all modules.

Each exception carries a CLI exit code so the front end can map failures
without inspecting messages.
"""


class BlochFrameError(Exception):
    exit_code = 1


class ValidationError(BlochFrameError):
    exit_code = 5


class GapClosed(BlochFrameError):
    exit_code = 2

    def __init__(self, k, gap):
        self.k = tuple(float(x) for x in k)
        self.gap = float(gap)
        super().__init__(f"spectral gap closed at k={self.k} (gap={self.gap:.3e})")


class GridTooCoarse(BlochFrameError):
    exit_code = 3

    def __init__(self, raw, what="invariant"):
        self.raw = float(raw)
        super().__init__(f"{what} raw value {self.raw:.6f} is not within tolerance of an integer")


class RefineGrid(BlochFrameError):
    exit_code = 3


class BranchAmbiguous(BlochFrameError):
    exit_code = 4


class TransportInconsistent(BlochFrameError):
    exit_code = 4


class NonzeroWinding(BlochFrameError):
    exit_code = 4

    def __init__(self, axis, value):
        self.axis = axis
        self.value = int(value)
        super().__init__(f"winding number {self.value} along axis {axis} (expected 0)")


class HomotopyFailure(BlochFrameError):
    exit_code = 4


class SardFailure(HomotopyFailure):
    pass


class AntipodeStuck(HomotopyFailure):
    pass


class DoublingNotTrivial(HomotopyFailure):
    pass


class StageError(BlochFrameError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"[{stage}] {cause}")
