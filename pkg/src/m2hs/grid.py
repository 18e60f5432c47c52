"""Uniform periodic grids on the circle R/Z and spectral operations on them.

Grid functions are plain numpy arrays whose last axis holds the samples at
the nodes x_j = j/n.  Leading axes are treated as a batch.  A function with a
linear part, such as a diffeomorphism phi(x) = x + p(x) with p periodic, is
handled as a pair (slope, periodic remainder).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import NearZero, NonMonotone

DEFAULT_N = 512
EPS_MONO = 1e-8
EPS_ZERO = 1e-10


def check_size(n: int) -> int:
    n = int(n)
    if n < 8 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 8, got {n}")
    return n


def nodes(n: int) -> np.ndarray:
    """Grid nodes x_j = j/n, j = 0..n-1."""
    return np.arange(check_size(n)) / n


def _kint(n: int) -> np.ndarray:
    return np.fft.fftfreq(n, 1.0 / n)


def differentiate(f, order: int = 1) -> np.ndarray:
    """Spectral derivative along the last axis.

    The Nyquist mode is dropped, which is exact for band-limited data and
    keeps the derivative of a real field real.
    """
    f = np.asarray(f)
    n = f.shape[-1]
    if np.iscomplexobj(f):
        k = _kint(n)
        k[n // 2] = 0.0
        return np.fft.ifft((2j * np.pi * k) ** order * np.fft.fft(f, axis=-1), axis=-1)
    k = np.arange(n // 2 + 1, dtype=float)
    k[-1] = 0.0
    return np.fft.irfft((2j * np.pi * k) ** order * np.fft.rfft(f, axis=-1), n, axis=-1)


def antiderivative_parts(f):
    """Split the antiderivative of f vanishing at 0 into (slope, remainder).

    F(x) = slope * x + remainder(x) with slope = mean(f) and remainder periodic
    with remainder(0) = 0.
    """
    f = np.asarray(f)
    n = f.shape[-1]
    if np.iscomplexobj(f):
        fh = np.fft.fft(f, axis=-1)
        k = _kint(n)
        k[0] = 1.0
        gh = fh / (2j * np.pi * k)
        gh[..., 0] = 0.0
        gh[..., n // 2] = 0.0
        g = np.fft.ifft(gh, axis=-1)
        mean = fh[..., 0] / n
    else:
        fh = np.fft.rfft(f, axis=-1)
        k = np.arange(n // 2 + 1, dtype=float)
        k[0] = 1.0
        gh = fh / (2j * np.pi * k)
        gh[..., 0] = 0.0
        gh[..., -1] = 0.0
        g = np.fft.irfft(gh, n, axis=-1)
        mean = fh[..., 0].real / n
    return mean, g - g[..., :1]


def antiderivative0(f) -> np.ndarray:
    """Values of x -> integral_0^x f on the grid.

    The zero-mean part is integrated spectrally and the mean contributes the
    linear term x * mean(f), so the result is periodic iff mean(f) = 0.
    """
    f = np.asarray(f)
    mean, rem = antiderivative_parts(f)
    x = np.arange(f.shape[-1]) / f.shape[-1]
    return np.asarray(mean)[..., None] * x + rem


def quadrature(f):
    """Integral over the circle (rectangle rule, spectrally accurate)."""
    return np.mean(f, axis=-1)


def hermitian_inner(f, g):
    """<f, g> = integral of conj(f) g, complex linear in the second slot."""
    return np.mean(np.conj(f) * g, axis=-1)


def norm(f):
    return np.sqrt(np.real(hermitian_inner(f, f)))


class TrigInterpolant:
    """Trigonometric interpolant of grid data, evaluable anywhere.

    The Nyquist coefficient is attached to cos(pi n x) so that real data gives
    a real interpolant.  An optional linear part ``slope * x`` is added on top.
    """

    def __init__(self, values, slope: float = 0.0):
        values = np.asarray(values)
        self.n = n = values.shape[-1]
        self.slope = slope
        self.real = not np.iscomplexobj(values)
        c = np.fft.fft(values) / n
        self.nyquist = c[n // 2]
        if self.real:
            self.k = np.arange(1, n // 2)
            self.c0 = c[0].real
            self.nyquist = self.nyquist.real
            self.c = c[1 : n // 2]
        else:
            k = _kint(n).astype(int)
            keep = k != -(n // 2)
            self.k = k[keep]
            self.c = c[keep]

    def evaluate(self, x, orders=(0,), chunk: int = 1024):
        """Return a tuple of derivatives of the interpolant at points x."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = [np.empty(flat.shape, dtype=float if self.real else complex) for _ in orders]
        kw = 2.0 * np.pi * self.k
        for lo in range(0, flat.size, chunk):
            xs = flat[lo : lo + chunk]
            basis = np.exp(1j * np.multiply.outer(xs, kw))
            arg = np.pi * self.n * xs
            for slot, d in enumerate(orders):
                coeff = self.c * (1j * kw) ** d
                val = basis @ coeff
                nyq = self.nyquist * (np.pi * self.n) ** d * _cos_derivative(arg, d)
                if self.real:
                    val = self.c0 * (d == 0) + 2.0 * val.real + nyq
                else:
                    val = val + nyq
                if d == 0:
                    val = val + self.slope * xs
                elif d == 1:
                    val = val + self.slope
                out[slot][lo : lo + chunk] = val
        return tuple(o.reshape(x.shape) for o in out)

    def __call__(self, x):
        return self.evaluate(x, (0,))[0]

    def derivative(self, x, order: int = 1):
        return self.evaluate(x, (order,))[0]


def _cos_derivative(arg, d):
    return [np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a), np.sin][d % 4](arg)


def evaluate_many(arrays, x, chunk: int = 1024) -> np.ndarray:
    """Trigonometric interpolants of several grid arrays at the same points.

    Returns shape (len(arrays),) + x.shape, complex.
    """
    a = np.atleast_2d(np.asarray(arrays))
    n = a.shape[-1]
    c = np.fft.fft(a, axis=-1) / n
    k = _kint(n)
    ny = n // 2
    nyq = c[:, ny].copy()
    c[:, ny] = 0.0
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty((a.shape[0], flat.size), dtype=complex)
    for lo in range(0, flat.size, chunk):
        xs = flat[lo : lo + chunk]
        basis = np.exp(2j * np.pi * np.multiply.outer(xs, k))
        out[:, lo : lo + chunk] = (basis @ c.T).T + np.multiply.outer(nyq, np.cos(np.pi * n * xs))
    return out.reshape((a.shape[0],) + x.shape)


def interp_eval(f, x, slope: float = 0.0):
    """Trigonometric interpolation of grid data f at arbitrary points x."""
    return TrigInterpolant(f, slope)(x)


def upsample(f, factor: int) -> np.ndarray:
    """Values of the trigonometric interpolant on a grid refined by ``factor``."""
    f = np.asarray(f)
    n = f.shape[-1]
    m = n * factor
    if np.iscomplexobj(f):
        c = np.fft.fft(f, axis=-1)
        out = np.zeros(f.shape[:-1] + (m,), dtype=complex)
        h = n // 2
        out[..., :h] = c[..., :h]
        out[..., m - h + 1 :] = c[..., h + 1 :]
        out[..., h] = 0.5 * c[..., h]
        out[..., m - h] = 0.5 * c[..., h]
        return np.fft.ifft(out, axis=-1) * factor
    c = np.fft.rfft(f, axis=-1)
    out = np.zeros(f.shape[:-1] + (m // 2 + 1,), dtype=complex)
    out[..., : n // 2] = c[..., : n // 2]
    out[..., n // 2] = 0.5 * c[..., n // 2]
    return np.fft.irfft(out, m, axis=-1) * factor


def solve_increasing(fun, targets, xs, vs, tol: float = 1e-14, maxiter: int = 80):
    """Solve fun(x)[0] = y for each target y by safeguarded Newton iteration.

    ``fun`` returns (value, derivative) at an array of points.  ``xs`` and
    ``vs`` are a monotone table of the function used for bracketing.
    """
    targets = np.asarray(targets, dtype=float)
    idx = np.clip(np.searchsorted(vs, targets, side="right") - 1, 0, len(xs) - 2)
    lo = xs[idx].copy()
    hi = xs[idx + 1].copy()
    dv = vs[idx + 1] - vs[idx]
    w = np.where(dv > 0, (targets - vs[idx]) / np.where(dv > 0, dv, 1.0), 0.5)
    x = lo + np.clip(w, 0.0, 1.0) * (hi - lo)
    active = np.arange(targets.size)
    for _ in range(maxiter):
        val, der = fun(x[active])
        r = val - targets[active]
        keep = (np.abs(r) > tol) & (hi[active] - lo[active] > 4e-16)
        active, r, der = active[keep], r[keep], der[keep]
        if active.size == 0:
            break
        lo[active] = np.where(r < 0, x[active], lo[active])
        hi[active] = np.where(r > 0, x[active], hi[active])
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = x[active] - r / der
        bad = ~np.isfinite(xn) | (xn <= lo[active]) | (xn >= hi[active])
        x[active] = np.where(bad, 0.5 * (lo[active] + hi[active]), xn)
    return x


def invert_monotone(phi_rem, y=None, strict: bool = True, eps_mono: float = EPS_MONO,
                    tol: float = 1e-13) -> np.ndarray:
    """Inverse of phi(x) = x + phi_rem(x) evaluated at points y.

    By default y is the grid itself.  In strict mode a derivative at or below
    ``eps_mono`` anywhere on the grid raises NonMonotone.  Otherwise flat or
    slightly non-monotone stretches are bracketed from the left, so values on
    a flat take the left limit.
    """
    phi_rem = np.asarray(phi_rem, dtype=float)
    n = phi_rem.shape[-1]
    if strict:
        dmin = np.min(1.0 + differentiate(phi_rem))
        if dmin <= eps_mono:
            raise NonMonotone(f"min phi' = {dmin:.3e} <= {eps_mono:.1e}")
    y = nodes(n) if y is None else np.asarray(y, dtype=float)
    shift = np.floor(y)
    frac = y - shift
    interp = TrigInterpolant(phi_rem, slope=1.0)
    factor = 8
    xs = np.arange(n * factor + 1) / (n * factor)
    fine = upsample(phi_rem, factor)
    vs = np.append(xs[:-1] + fine, 1.0 + fine[0])
    vs = np.maximum.accumulate(vs)
    x = solve_increasing(lambda z: interp.evaluate(z, (0, 1)), frac, xs, vs, tol=tol)
    return x + shift


def unwrap_phase(f, eps_zero: float = EPS_ZERO):
    """Continuous phase of a nowhere-vanishing periodic complex function.

    Returns (theta, winding) where theta(0) lies in (-pi, pi] and
    theta(x + 1) = theta(x) + 2 pi winding.
    """
    f = np.asarray(f)
    m = np.min(np.abs(f))
    if m <= eps_zero:
        raise NearZero(f"min |f| = {m:.3e} <= {eps_zero:.1e}")
    theta = np.unwrap(np.angle(f))
    closing = np.angle(np.exp(1j * (theta[0] - theta[-1])))
    winding = int(round((theta[-1] + closing - theta[0]) / (2.0 * np.pi)))
    return theta, winding


@dataclass(frozen=True)
class GridFunction:
    """Grid samples with an optional linear part, for storage and exchange.

    The represented function is x -> slope * x + values(x).
    """

    values: np.ndarray
    slope: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise ValueError("grid function must be one dimensional")
        check_size(v.size)
        if not np.all(np.isfinite(v)) or not np.isfinite(self.slope):
            raise ValueError("grid function has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    def full(self) -> np.ndarray:
        return self.slope * nodes(self.n) + self.values

    def to_dict(self) -> dict:
        v = self.values
        return {
            "n": self.n,
            "slope": float(self.slope),
            "values_re": np.real(v).tolist(),
            "values_im": np.imag(v).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridFunction":
        re = np.asarray(d["values_re"], dtype=float)
        im = np.asarray(d.get("values_im", np.zeros_like(re)), dtype=float)
        if re.size != int(d["n"]) or im.size != re.size:
            raise ValueError("grid function length does not match n")
        values = re + 1j * im if np.any(im) else re
        return cls(values, float(d.get("slope", 0.0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        return cls.from_dict(json.loads(text))

    def to_csv(self, path) -> None:
        x = nodes(self.n)
        full = self.full()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re", "im"])
            for xi, vi in zip(x, full):
                w.writerow([repr(float(xi)), repr(float(np.real(vi))), repr(float(np.imag(vi)))])

    @classmethod
    def from_csv(cls, path, slope: float = 0.0) -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        values = data[:, 1] + 1j * data[:, 2] if np.any(data[:, 2]) else data[:, 1]
        return cls(values - slope * data[:, 0], slope)
