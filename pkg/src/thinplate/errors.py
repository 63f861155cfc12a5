"""Exception and warning types shared by all solver modules.

Every error carries a short machine-readable ``kind`` and the ``module`` that
raised it, so the command-line front end can report failures as JSON.
"""


class ThinPlateError(Exception):
    kind = "error"
    module = "thinplate"

    def to_dict(self) -> dict:
        return {"module": self.module, "kind": self.kind, "message": str(self)}


class InvalidArgumentError(ThinPlateError, ValueError):
    kind = "invalid-argument"


class NoEmbeddingError(ThinPlateError):
    kind = "no-embedding"
    module = "curve"


class MassNotPSDError(ThinPlateError):
    kind = "mass-not-psd"
    module = "numerics"


class InsufficientRankError(ThinPlateError):
    kind = "insufficient-rank"
    module = "numerics"


class NoBracketError(ThinPlateError):
    kind = "no-bracket"
    module = "numerics"


class FlatCurvatureError(ThinPlateError):
    kind = "flat-curvature"
    module = "limit1d"


class BesselRangeError(ThinPlateError, ArithmeticError):
    kind = "range"
    module = "annulus"


class BranchLostError(ThinPlateError):
    kind = "branch-lost"
    module = "annulus"

    def __init__(self, message: str, last_good=None, points=()):
        super().__init__(message)
        self.last_good = last_good
        self.points = list(points)


class JacobianSignError(ThinPlateError):
    kind = "jacobian-sign"
    module = "thin2d"


class PrecisionLossWarning(RuntimeWarning):
    pass


class ConditioningWarning(RuntimeWarning):
    pass


class KernelCountWarning(RuntimeWarning):
    pass
