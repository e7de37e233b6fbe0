import math

from scipy.optimize import brentq

from .exceptions import ConvergenceError


def safeguarded_newton(fun, x0, lo, hi, rtol=1e-10, max_iter=100):
    """Root of ``fun`` by Newton from ``x0``, falling back to Brent on ``[lo, hi]``.

    ``fun(x)`` returns ``(value, derivative)``.  Newton is abandoned as soon as
    an iterate leaves ``(lo, hi)`` or stops being finite.
    """
    x = float(x0)
    if lo < x < hi:
        for _ in range(max_iter):
            f, df = fun(x)
            if f == 0.0:
                return x
            if not (math.isfinite(f) and math.isfinite(df)) or df == 0.0:
                break
            x_new = x - f / df
            if not (lo < x_new < hi):
                break
            if abs(x_new - x) <= rtol * abs(x_new):
                return x_new
            x = x_new
    return _bracketed(lambda v: fun(v)[0], lo, hi, rtol)


def _bracketed(f, lo, hi, rtol):
    flo, fhi = f(lo), f(hi)
    if not (math.isfinite(flo) and math.isfinite(fhi)) or flo * fhi > 0:
        raise ConvergenceError(f"no sign change on [{lo:g}, {hi:g}]")
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    return brentq(f, lo, hi, xtol=1e-300, rtol=max(rtol, 4.5e-16), maxiter=500)
