"""Gamma function via the Lanczos approximation (g=7, 9 terms)."""
import math

from .errors import DomainError

_G = 7
_COEFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gamma(x):
    """Gamma function for real x > 0.

    Relative error stays below 1e-12 on [0.5, 50]. Arguments below 0.5 go
    through the reflection formula.
    """
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise DomainError(f"gamma requires finite x > 0, got {x!r}")
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * gamma(1.0 - x))
    x -= 1.0
    acc = _COEFS[0]
    for i in range(1, _G + 2):
        acc += _COEFS[i] / (x + i)
    t = x + _G + 0.5
    # split the power so large arguments do not overflow before exp(-t) applies
    half = t ** (0.5 * (x + 0.5))
    return _SQRT_2PI * half * (half * math.exp(-t)) * acc
