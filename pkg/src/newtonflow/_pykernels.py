"""Pure-numpy implementations of the hot per-point kernels.

Every function here has a twin with the same signature in ``_ckernels.pyx``;
``newtonflow.kernels`` picks one at import time.
"""
import numpy as np

TWO_PI = 2.0 * np.pi
BACKEND = "python"


def wrap_angle(x):
    """Map to (-pi, pi]."""
    return x - TWO_PI * np.ceil((x - np.pi) / TWO_PI)


def psi_closed_form(z, poly, log_b, log_lam, pp_b, pp_ptr, pp_coef, constant):
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(all="ignore"):
        out = np.zeros_like(z)
        for c in poly[::-1]:
            out = out * z + c
        for b, lam in zip(log_b, log_lam):
            out = out + lam * np.log(z - b)
        for k, b in enumerate(pp_b):
            w = 1.0 / (z - b)
            acc = np.zeros_like(z)
            for c in pp_coef[pp_ptr[k]:pp_ptr[k + 1]][::-1]:
                acc = (acc + c) * w
            out = out + acc
        out = out + constant
    return out


def _row_factors(z, u, w2, nrows):
    """``exp(2iuz)``, ``exp(-2iuz)`` and ``q**r = exp(2iu*r*w2)`` for r = 1..nrows.

    Row ``+r`` of the lattice sum depends on ``X = exp(2iu(z + r w2)) = A q**r``
    and row ``-r`` on ``Y = exp(-2iu(z - r w2)) = B q**r``; with ``z`` reduced
    into the cell both have modulus below one.
    """
    A = np.exp(2j * u * z)
    q = np.exp(2j * u * w2) ** np.arange(1, nrows + 1)
    return A, 1.0 / A, q


def wp_sum(z, u, w2, nrows, shift):
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(all="ignore"):
        acc = 1.0 / np.sin(u * z) ** 2
        A, B, q = _row_factors(z, u, w2, nrows)
        for qr in q:
            # 1/sin(x)^2 = -4X/(X-1)^2 with X = exp(2ix), symmetric in X <-> 1/X
            X, Y = A * qr, B * qr
            acc = acc - 4.0 * X / (X - 1.0) ** 2 - 4.0 * Y / (Y - 1.0) ** 2
        return u * u * acc + shift


def wp_prime_sum(z, u, w2, nrows):
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(all="ignore"):
        s = np.sin(u * z)
        acc = np.cos(u * z) / s**3
        A, B, q = _row_factors(z, u, w2, nrows)
        for qr in q:
            # cos/sin^3 = -4iX(X+1)/(X-1)^3, and the sign flips under X -> 1/X
            X, Y = A * qr, B * qr
            acc = acc - 4j * X * (X + 1.0) / (X - 1.0) ** 3 + 4j * Y * (Y + 1.0) / (Y - 1.0) ** 3
        return -2.0 * u**3 * acc


def wzeta_sum(z, u, w2, nrows, quad):
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(all="ignore"):
        acc = 1.0 / np.tan(u * z)
        A, B, q = _row_factors(z, u, w2, nrows)
        for qr in q:
            # cot x = i(X+1)/(X-1), and the sign flips under X -> 1/X
            X, Y = A * qr, B * qr
            acc = acc + 1j * (X + 1.0) / (X - 1.0) - 1j * (Y + 1.0) / (Y - 1.0)
        return u * acc + quad * z


def wsigma_prod(z, u, row_sin2, quad):
    z = np.asarray(z, dtype=np.complex128)
    with np.errstate(all="ignore"):
        s = np.sin(u * z)
        prod = s / u * np.exp(0.5 * quad * z * z)
        s2 = s * s
        for d in row_sin2:
            prod = prod * (1.0 - s2 / d)
        return prod


def strip_bins(rho, nbins):
    rho = np.asarray(rho, dtype=np.float64)
    width = TWO_PI / nbins
    with np.errstate(all="ignore"):
        idx = np.ceil((wrap_angle(rho) + np.pi) / width) - 1.0
    idx = np.clip(np.nan_to_num(idx, nan=0.0), 0, nbins - 1).astype(np.int32)
    idx[~np.isfinite(rho)] = -1
    return idx


def level_mask(rho_plus, rho_minus, rho0):
    rp = np.asarray(rho_plus, dtype=np.float64)
    rm = np.asarray(rho_minus, dtype=np.float64)
    with np.errstate(all="ignore"):
        a = wrap_angle(rp - rho0)
        b = wrap_angle(rm - rho0)
        half = 0.5 * np.pi
        return (a * b < 0) & (np.abs(a) < half) & (np.abs(b) < half)
