"""Correlation-length extraction by nonlinear least squares."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

ZERO_THRESHOLD = 1e-6
FLAT_TOL = 1e-6
GRAD_TOL = 1e-10

MIN_POINTS = {"pure_exponential": 2, "offset_exponential": 4}


class FitError(ValueError):
    pass


@dataclass
class DecayFit:
    """Result of fitting ``c0 exp(-r/xi)`` or ``a + b exp(-r/xi)``.

    ``xi`` is ``None`` when no length could be assigned, e.g. for a flat
    series (``flat=True``) or an all-zero one.
    """

    model: str
    xi: float | None
    c0: float | None = None
    a: float | None = None
    b: float | None = None
    residual_norm: float = 0.0
    fit_range: tuple[int, int] | None = None
    converged: bool = False
    flat: bool = False
    n_points: int = 0
    gradient_norm: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fit_range"] = list(self.fit_range) if self.fit_range else None
        return d


@dataclass
class ScalingFit:
    exponent: float
    prefactor: float
    r_squared: float
    quantity_transform: str = "log(y) vs log(N)"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _model(params, r, model):
    if model == "pure_exponential":
        c0, xi = params
        return c0 * np.exp(-r / xi)
    a, b, xi = params
    return a + b * np.exp(-r / xi)


def _jacobian(params, r, model):
    if model == "pure_exponential":
        c0, xi = params
        e = np.exp(-r / xi)
        return np.column_stack([e, c0 * e * r / xi**2])
    a, b, xi = params
    e = np.exp(-r / xi)
    return np.column_stack([np.ones_like(r), e, b * e * r / xi**2])


def default_fit_range(r, y, std_error=None, zero_threshold: float = ZERO_THRESHOLD) -> tuple[int, int]:
    """``[1, r_max]`` with ``r_max`` the largest distance above the noise floor."""
    r = np.asarray(r)
    y = np.asarray(y, dtype=float)
    se = np.zeros_like(y) if std_error is None else np.asarray(std_error, dtype=float)
    floor = np.maximum(zero_threshold, 3.0 * se)
    above = r[(y > floor) & (r >= 1)]
    if above.size == 0:
        return (1, 1)
    return (1, int(above.max()))


def _initial_guess(r, y, model):
    if model == "pure_exponential":
        a = 0.0
    else:
        tail = y[-max(1, len(y) // 3):]
        a = float(np.mean(tail))
        # the log-linear estimate below needs y - a > 0 near the head
        a = min(a, float(np.min(y)) - 1e-3 * (np.max(y) - np.min(y)))
    z = y - a
    ok = z > 0
    if ok.sum() >= 2:
        slope = np.polyfit(r[ok], np.log(z[ok]), 1)[0]
        xi = -1.0 / slope if slope < 0 else 1.0
    else:
        xi = 1.0
    xi = float(np.clip(xi, 0.05, 1e3))
    b = float((y[0] - a) * np.exp(r[0] / xi))
    if model == "pure_exponential":
        return np.array([b, xi])
    return np.array([a, b, xi])


def fit_decay(
    r,
    y,
    model: str = "offset_exponential",
    fit_range: tuple[int, int] | None = None,
    weights: str = "uniform",
    std_error=None,
    zero_threshold: float = ZERO_THRESHOLD,
    flat_tol: float = FLAT_TOL,
) -> DecayFit:
    """Fit an exponential decay to a measure-versus-distance series.

    Parameters
    ----------
    r, y
        Distances and values.
    model
        ``'pure_exponential'`` (concurrence) or ``'offset_exponential'``
        (discord).
    fit_range
        Inclusive ``(r_min, r_max)``; defaults to :func:`default_fit_range`.
    weights
        ``'uniform'`` or ``'inverse_variance'`` (needs ``std_error``; points
        with zero error fall back to uniform weighting).

    Notes
    -----
    ``gradient_norm`` is that of the normalized problem; ``converged``
    requires it below ``GRAD_TOL``.
    """
    if model not in MIN_POINTS:
        raise ValueError(f"unknown model {model!r}")
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    se = None if std_error is None else np.asarray(std_error, dtype=float)
    if fit_range is None:
        fit_range = default_fit_range(r, y, se, zero_threshold)
    lo, hi = fit_range
    in_range = (r >= lo) & (r <= hi)
    full = y[in_range]
    if full.size == 0 or np.all(np.abs(full) < zero_threshold):
        return DecayFit(model, None, fit_range=(int(lo), int(hi)), message="all-zero series")
    mask = in_range & (y >= zero_threshold) if model == "pure_exponential" else in_range
    rr, yy = r[mask], y[mask]

    if full.size >= 2 and np.ptp(full) < flat_tol:
        return DecayFit(
            model,
            None,
            a=float(np.mean(full)) if model == "offset_exponential" else None,
            fit_range=tuple(fit_range),
            flat=True,
            n_points=int(full.size),
            message="flat series: correlation length unbounded",
        )
    if yy.size < MIN_POINTS[model]:
        raise FitError(f"{model} needs >= {MIN_POINTS[model]} points in range, got {yy.size}")

    if weights == "inverse_variance" and se is not None:
        s = se[mask]
        w = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 1.0)
        if np.any(s > 0):
            w = np.where(s > 0, w, w[s > 0].max())
    elif weights in ("uniform", "inverse_variance"):
        w = np.ones_like(yy)
    else:
        raise ValueError(f"unknown weighting {weights!r}")

    # Fit in normalized units (y / max|y|, r measured from the window start,
    # unit-max weights) so the result is exactly equivariant under scaling of
    # y and shifts of r.
    scale = float(np.abs(yy).max())
    r0 = float(rr[0])
    rn, yn, wn = rr - r0, yy / scale, w / w.max()
    p0 = _initial_guess(rn, yn, model)

    def resid(p):
        return wn * (_model(p, rn, model) - yn)

    def jac(p):
        return wn[:, None] * _jacobian(p, rn, model)

    if yy.size == len(p0) and model == "pure_exponential":
        # exactly determined: interpolate
        slope = np.log(yn[1] / yn[0]) / rn[1]
        pn = np.array([yn[0], -1.0 / slope]) if slope < 0 else p0
        msg = "exactly determined"
    else:
        res = optimize.least_squares(
            resid, p0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000
        )
        pn = res.x
        msg = "exactly determined" if yy.size == len(p0) else res.message
    gnorm = float(np.linalg.norm(jac(pn).T @ resid(pn)))
    xi = float(pn[-1])
    ok = bool(np.all(np.isfinite(pn)) and xi > 0)
    amp = scale * np.exp(r0 / xi) if ok else np.nan
    if model == "pure_exponential":
        p = np.array([pn[0] * amp, xi])
    else:
        p = np.array([pn[0] * scale, pn[1] * amp, xi])
    out = DecayFit(
        model,
        xi if ok else None,
        residual_norm=float(np.linalg.norm(w * (_model(p, rr, model) - yy))),
        fit_range=(int(lo), int(hi)),
        converged=ok and gnorm < GRAD_TOL,
        n_points=int(yy.size),
        gradient_norm=gnorm,
        message=str(msg),
    )
    if model == "pure_exponential":
        out.c0 = float(p[0])
    else:
        out.a, out.b = float(p[0]), float(p[1])
    return out


def fit_series(series, model: str | None = None, **kw) -> DecayFit:
    """:func:`fit_decay` on a :class:`~qclength.quench.QuenchSeries`."""
    if model is None:
        model = "pure_exponential" if series.measure == "concurrence" else "offset_exponential"
    return fit_decay(series.distances, series.mean, model, std_error=series.std_error, **kw)


def fit_scaling(xs, ys, quantity_transform: str = "log(y) vs log(N)") -> ScalingFit:
    """Power law ``y = prefactor * x**exponent`` by log-log regression."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size != y.size or x.size < 3:
        raise ValueError("need >= 3 (x, y) pairs")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs positive inputs")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ScalingFit(float(slope), float(np.exp(intercept)), r2, quantity_transform)
