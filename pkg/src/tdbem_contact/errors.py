"""Error types.  Each carries a short machine-readable category."""


class TdbemError(Exception):
    category = "error"


class ConfigError(TdbemError, ValueError):
    category = "config"


class GeometryError(TdbemError, ValueError):
    category = "geometry"


class WavefrontError(TdbemError, FloatingPointError):
    category = "wavefront"


class QuadratureError(TdbemError, ArithmeticError):
    category = "quadrature"


class SingularBlockError(TdbemError, ArithmeticError):
    category = "singular"


class UzawaNonConvergence(TdbemError, RuntimeError):
    category = "uzawa_nonconvergence"

    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history or [])


class UzawaDivergence(UzawaNonConvergence):
    category = "uzawa_divergence"
