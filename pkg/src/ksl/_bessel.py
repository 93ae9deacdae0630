"""Modified Bessel function of the second kind, evaluated in log-space.

Half-integer orders use the terminating closed form.  Other orders reduce to
a fractional order ``mu`` in [-1/2, 1/2]; ``K_mu`` and ``K_{mu+1}`` come from
Temme's series for ``x <= 2`` and from Steed's continued fraction otherwise,
and the forward recurrence (stable for ``K``) climbs to the requested order.
The recurrence is rescaled on the fly so that orders up to 50 at tiny
arguments stay representable as logarithms.
"""

from __future__ import annotations

import math

from .errors import NumericalError, ValidationError

_EPS = 1e-16
_MAXIT = 10000
_XMIN = 2.0
_RESCALE = 1e250

# Power series coefficients of 1/Gamma(z) (Abramowitz and Stegun 6.1.34),
# index k holds the coefficient of z**k.
_RGAMMA = (
    0.0,
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
)


def _temme_gammas(mu: float) -> tuple[float, float, float, float]:
    """Return gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for |mu| <= 1/2."""
    if abs(mu) < 0.1:
        # gam1 and gam2 from the odd/even parts of the 1/Gamma(1+z) series,
        # avoiding the cancellation in the defining difference quotient.
        mu2 = mu * mu
        gam1 = 0.0
        gam2 = 0.0
        p = 1.0
        for k in range(2, len(_RGAMMA), 2):
            gam1 -= _RGAMMA[k] * p
            gam2 += _RGAMMA[k - 1] * p
            p *= mu2
        gpl = 1.0 / math.gamma(1.0 + mu)
        gmi = 1.0 / math.gamma(1.0 - mu)
        return gam1, gam2, gpl, gmi
    gpl = 1.0 / math.gamma(1.0 + mu)
    gmi = 1.0 / math.gamma(1.0 - mu)
    return (gmi - gpl) / (2.0 * mu), (gmi + gpl) / 2.0, gpl, gmi


def _k_fractional(mu: float, x: float) -> tuple[float, float, float]:
    """Scaled ``K_mu(x)``, ``K_{mu+1}(x)`` and the log of the scale.

    The returned pair times ``exp(offset)`` gives the true values; the
    offset is ``-x`` on the continued-fraction branch so that large
    arguments never underflow.
    """
    mu2 = mu * mu
    if x <= _XMIN:
        x2 = 0.5 * x
        pimu = math.pi * mu
        fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = mu * d
        fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
        gam1, gam2, gpl, gmi = _temme_gammas(mu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        total = ff
        e = math.exp(e)
        p = 0.5 * e / gpl
        q = 0.5 / (e * gmi)
        c = 1.0
        d = x2 * x2
        total1 = p
        for i in range(1, _MAXIT):
            ff = (i * ff + p + q) / (i * i - mu2)
            c *= d / i
            p /= i - mu
            q /= i + mu
            term = c * ff
            total += term
            total1 += c * (p - i * ff)
            if abs(term) < abs(total) * _EPS:
                break
        else:
            raise NumericalError(f"Bessel series failed to converge at nu={mu}, r={x}")
        return total, total1 * 2.0 / x, 0.0
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu2
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, _MAXIT):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    else:
        raise NumericalError(f"Bessel continued fraction failed to converge at nu={mu}, r={x}")
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * x)) / s
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1, -x


def _is_half_integer(nu: float) -> bool:
    return abs(nu - 0.5 - round(nu - 0.5)) == 0.0 and nu > 0


def _log_k_half_integer(nu: float, x: float) -> float:
    n = int(round(nu - 0.5))
    # sqrt(pi/(2x)) e^{-x} sum_k (n+k)!/(k!(n-k)!) (2x)^{-k}, summed in logs
    log2x = math.log(2.0 * x)
    logs = []
    log_coef = 0.0
    for k in range(n + 1):
        if k > 0:
            log_coef += math.log((n + k) * (n - k + 1) / k)
        logs.append(log_coef - k * log2x)
    top = max(logs)
    total = math.fsum(math.exp(v - top) for v in logs)
    return 0.5 * math.log(math.pi / (2.0 * x)) - x + top + math.log(total)


def log_bessel_k(nu: float, r: float) -> float:
    """Natural logarithm of ``K_nu(r)``.

    Parameters
    ----------
    nu : float
        Order, ``nu > 0``.
    r : float
        Argument, ``r > 0``.

    Returns
    -------
    float
        ``log K_nu(r)``.  Finite whenever the inputs are finite.
    """
    nu = float(nu)
    r = float(r)
    if not (math.isfinite(nu) and math.isfinite(r)):
        raise ValidationError(f"bessel_k needs finite inputs, got nu={nu}, r={r}")
    if nu <= 0:
        raise ValidationError(f"bessel_k needs nu > 0, got {nu}")
    if r <= 0:
        raise ValidationError(f"bessel_k needs r > 0, got {r}")
    if _is_half_integer(nu):
        return _log_k_half_integer(nu, r)
    nl = int(nu + 0.5)
    mu = nu - nl
    kmu, k1, log_scale = _k_fractional(mu, r)
    two_over_x = 2.0 / r
    for i in range(1, nl + 1):
        knext = (mu + i) * two_over_x * k1 + kmu
        kmu, k1 = k1, knext
        if k1 > _RESCALE:
            kmu /= _RESCALE
            k1 /= _RESCALE
            log_scale += math.log(_RESCALE)
    return math.log(kmu) + log_scale


def bessel_k(nu: float, r: float) -> float:
    """Modified Bessel function of the second kind ``K_nu(r)``.

    Raises
    ------
    NumericalError
        If the value is not representable as a double.
    """
    lk = log_bessel_k(nu, r)
    if lk > 709.78:
        raise NumericalError(f"bessel_k overflows at nu={nu}, r={r} (log value {lk:.6g})")
    return math.exp(lk)
