__version__ = "0.1"

from .gzheight import HeightBreakdown, SpectralEvalConfig, height  # noqa: E402
from .heegner import HeegnerLevel, enum_levels, make_level  # noqa: E402
from .quadfield import make_discriminant  # noqa: E402
from .utils import (  # noqa: E402
    HeegnerError,
    InvalidInput,
    NumericalFailure,
    RealWithError,
    ResultCache,
)
