"""Catalog of confining and decaying potentials with unit-ball envelopes.

All catalog families are radial, V(x) = v(|x|).  Confining potentials grow to
infinity along every ray; decaying potentials vanish at infinity.  The
envelopes V_up(x) = sup over the closed unit ball B(x, 1) and V_low = inf over
the same ball control ground-state tails, and the spherical profiles

    g_up(r)  = ( average over the unit sphere of (1 v V_up(r theta))^-2 )^(1/2)
    g_low(r) = ( same with V_low )

feed the long-time integral tests.  Larger V means smaller g, so g_up <= g_low
pointwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np

FAMILIES = ("polynomial", "double_well", "exp_poly_log", "well", "coulomb",
            "yukawa", "poschl_teller", "morse", "custom")

CONFINING_FAMILIES = ("polynomial", "double_well", "exp_poly_log")

# families whose radial profile is monotone non-decreasing on every
# subinterval of [0, inf) (possibly after the origin singularity)
_MONOTONE_FAMILIES = ("polynomial", "exp_poly_log", "coulomb", "yukawa",
                      "poschl_teller")


@dataclass(frozen=True)
class Potential:
    """A potential from the catalog; ``params`` are family-specific.

    polynomial:    V = coeff |x|^(2 degree) + offset          (confining)
    double_well:   V = |x|^4 - b |x|^2                        (confining)
    exp_poly_log:  V = exp(exp_rate r^exp_power) r^poly_power
                       * log(1+r)^log_power                   (confining)
    well:          V = -depth on |x| <= radius, else 0        (decaying)
    coulomb:       V = -min(a1 r^-b1, a2 r^-b2)               (decaying)
    yukawa:        V = -min(a1 r^-b1, a2 r^-b2 exp(-b r))     (decaying)
    poschl_teller: V = -a / cosh(b r)^2                       (decaying)
    morse:         V = a ((1 - exp(-b (r - r0)))^2 - 1)       (decaying)
    custom:        V given by params["func"], d = 1 only; kind from
                   params["kind"].
    """

    family: str
    params: Mapping = field(default_factory=dict)
    d: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "custom" and self.d != 1:
            raise ValueError("custom potentials are supported in d = 1 only")
        _validate_params(self.family, self.params)

    @property
    def kind(self) -> str:
        if self.family == "custom":
            return self.params["kind"]
        return "confining" if self.family in CONFINING_FAMILIES else "decaying"

    @property
    def is_radial(self) -> bool:
        return self.family != "custom"

    def radial(self, r):
        """v(r) for radial families (r >= 0, scalar or array)."""
        return _radial_eval(self.family, self.params, r)

    def log_radial(self, r):
        """log v(r) for confining families at radii where v > 0."""
        if self.kind != "confining":
            raise ValueError("log_radial is defined for confining potentials")
        return _log_radial_eval(self.family, self.params, r)

    def __call__(self, x):
        return potential_eval(self, x)

    def to_config(self) -> dict:
        if self.family == "custom":
            raise ValueError("custom potentials cannot be serialized")
        cfg = {"family": self.family, "d": self.d, "kind": self.kind}
        cfg.update({k: float(v) for k, v in self.params.items()})
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "Potential":
        cfg = dict(cfg)
        family = cfg.pop("family")
        d = int(cfg.pop("d", 1))
        cfg.pop("kind", None)
        return cls(family=family, params=cfg, d=d)


def _validate_params(family: str, p: Mapping):
    def need(*names):
        for nm in names:
            if nm not in p:
                raise ValueError(f"{family} potential needs parameter {nm!r}")

    if family == "polynomial":
        need("degree")
        if int(p["degree"]) < 1:
            raise ValueError("polynomial degree must be >= 1")
        if p.get("coeff", 1.0) <= 0:
            raise ValueError("polynomial coefficient must be positive (confining)")
    elif family == "double_well":
        need("b")
        if p["b"] <= 0:
            raise ValueError("double well needs b > 0")
    elif family == "exp_poly_log":
        need("exp_rate", "exp_power", "poly_power", "log_power")
        if any(p[k] < 0 for k in ("exp_rate", "exp_power", "poly_power", "log_power")):
            raise ValueError("exp_poly_log exponents must be nonnegative")
        grows = (p["exp_rate"] > 0 and p["exp_power"] > 0) or p["poly_power"] > 0 \
            or p["log_power"] > 0
        if not grows:
            raise ValueError("exp_poly_log parameters give a bounded potential")
    elif family == "well":
        need("depth", "radius")
        if p["depth"] <= 0 or p["radius"] <= 0:
            raise ValueError("well needs positive depth and radius")
    elif family in ("coulomb", "yukawa"):
        need("a1", "b1", "a2", "b2")
        if family == "yukawa":
            need("b")
    elif family == "poschl_teller":
        need("a", "b")
    elif family == "morse":
        need("a", "b", "r0")
    elif family == "custom":
        need("func", "kind")
        if p["kind"] not in ("confining", "decaying"):
            raise ValueError("custom potential kind must be confining or decaying")


def _radial_eval(family: str, p: Mapping, r):
    r = np.asarray(r, dtype=float)
    if family == "polynomial":
        out = p.get("coeff", 1.0) * r ** (2 * int(p["degree"])) + p.get("offset", 0.0)
    elif family == "double_well":
        out = r**4 - p["b"] * r**2
    elif family == "exp_poly_log":
        with np.errstate(over="ignore"):   # inf far out is the honest value
            out = (np.exp(p["exp_rate"] * r ** p["exp_power"]) * r ** p["poly_power"]
                   * np.log1p(r) ** p["log_power"])
    elif family == "well":
        out = np.where(r <= p["radius"], -p["depth"], 0.0)
    elif family == "coulomb":
        with np.errstate(divide="ignore", over="ignore"):
            out = -np.minimum(p["a1"] * r ** (-p["b1"]), p["a2"] * r ** (-p["b2"]))
    elif family == "yukawa":
        with np.errstate(divide="ignore", over="ignore"):
            out = -np.minimum(p["a1"] * r ** (-p["b1"]),
                              p["a2"] * r ** (-p["b2"]) * np.exp(-p["b"] * r))
    elif family == "poschl_teller":
        out = -p["a"] / np.cosh(p["b"] * r) ** 2
    elif family == "morse":
        out = p["a"] * ((1.0 - np.exp(-p["b"] * (r - p["r0"]))) ** 2 - 1.0)
    else:
        raise ValueError(f"no radial profile for family {family!r}")
    return out if out.ndim else float(out)


def _log_radial_eval(family: str, p: Mapping, r):
    """log v(r) without overflow; confining families only, r large enough
    that v(r) > 0."""
    r = np.asarray(r, dtype=float)
    if family == "exp_poly_log":
        out = (p["exp_rate"] * r ** p["exp_power"] + p["poly_power"] * np.log(r)
               + p["log_power"] * np.log(np.log1p(r)))
    elif family == "polynomial":
        base = p.get("coeff", 1.0) * r ** (2 * int(p["degree"])) + p.get("offset", 0.0)
        out = np.log(base)
    elif family == "double_well":
        out = np.log(r**4 - p["b"] * r**2)
    else:
        raise ValueError(f"no log profile for family {family!r}")
    return out if out.ndim else float(out)


def potential_eval(V: Potential, x):
    """Evaluate V at a point or an array of points (last axis = dimension)."""
    x = np.asarray(x, dtype=float)
    if not V.is_radial:
        func = V.params["func"]
        out = np.vectorize(func, otypes=[float])(x)
        return out if out.ndim else float(out)
    if V.d == 1:
        r = np.abs(x)
    elif x.ndim and x.shape[-1] == V.d:
        r = np.linalg.norm(x, axis=-1)
    else:
        r = np.abs(x)
    return V.radial(r)


@dataclass(frozen=True)
class UnitBallEnvelope:
    """sup and inf of V over the closed unit ball centred at a point."""

    v_up: float
    v_low: float

    def __iter__(self):
        return iter((self.v_up, self.v_low))


def unit_ball_envelope(V: Potential, x, samples: int = 64,
                       method: str = "auto") -> UnitBallEnvelope:
    """sup/inf of V over B(x, 1).

    For radial families the image of the ball under |.| is the interval
    [max(0, |x|-1), |x|+1], so the envelope reduces to extremizing the radial
    profile there: monotone families use the endpoints exactly, the rest add
    their known interior critical points.  ``method="sampled"`` forces a
    deterministic low-discrepancy search with ``samples`` points instead.
    """
    if samples < 8:
        raise ValueError("need samples >= 8")
    x = np.asarray(x, dtype=float)
    if V.is_radial:
        r0 = float(np.abs(x)) if V.d == 1 and x.ndim == 0 else float(np.linalg.norm(x))
        lo, hi = max(0.0, r0 - 1.0), r0 + 1.0
        if method == "sampled":
            vals = V.radial(_search_points(lo, hi, samples))
            return UnitBallEnvelope(float(np.max(vals)), float(np.min(vals)))
        return _radial_envelope(V, lo, hi)
    func = V.params["func"]
    pts = _search_points(float(x) - 1.0, float(x) + 1.0, max(samples, 64))
    vals = np.array([func(p) for p in pts])
    return UnitBallEnvelope(float(np.max(vals)), float(np.min(vals)))


def _search_points(lo: float, hi: float, samples: int) -> np.ndarray:
    # golden-ratio low-discrepancy fill plus interval ends and midpoint
    g = (math.sqrt(5) - 1) / 2
    u = np.mod(np.arange(1, samples + 1) * g, 1.0)
    return np.concatenate(([lo, 0.5 * (lo + hi), hi], lo + (hi - lo) * np.sort(u)))


def _radial_envelope(V: Potential, lo: float, hi: float) -> UnitBallEnvelope:
    fam, p = V.family, V.params
    cands = [lo, hi]
    if fam == "well":
        a = p["radius"]
        if lo <= a:
            cands.append(min(a, hi))
        if lo <= a < hi:
            cands.append(np.nextafter(a, np.inf))
    elif fam == "double_well":
        rmin = math.sqrt(p["b"] / 2.0)
        if lo < rmin < hi:
            cands.append(rmin)
    elif fam == "morse":
        if lo < p["r0"] < hi:
            cands.append(p["r0"])
    elif fam not in _MONOTONE_FAMILIES:
        vals = V.radial(_search_points(lo, hi, 64))
        return UnitBallEnvelope(float(np.max(vals)), float(np.min(vals)))
    vals = V.radial(np.asarray(cands))
    return UnitBallEnvelope(float(np.max(vals)), float(np.min(vals)))


def almost_constant_on_unit_balls(V: Potential, r_grid=None, threshold: float = 4.0,
                                  r_min: float = 10.0) -> tuple[bool, float]:
    """Diagnostic: is V_up comparable to V_low along a test ray beyond r_min?

    Returns (flag, worst ratio of (1 v V_up)/(1 v V_low) on the grid).  The
    threshold is a reporting convention, not a theorem constant.
    """
    if r_grid is None:
        r_grid = np.geomspace(r_min, 100.0 * r_min, 25)
    worst = 1.0
    for r in np.atleast_1d(r_grid):
        up, low = unit_ball_envelope(V, r)
        worst = max(worst, max(1.0, up) / max(1.0, low))
    return worst <= threshold, worst


def g_profiles(V: Potential, r: float, n_angles: int = 64) -> tuple[float, float]:
    """Spherical profiles (g_up(r), g_low(r)) for r > 1.

    In d = 1 the sphere is the two-point set {-r, r} and the average is over
    those points; in d = 2 a uniform angular average is used (one evaluation
    suffices for radial V).
    """
    if r <= 1.0:
        raise ValueError("g profiles are defined for r > 1")
    if V.is_radial:
        up, low = unit_ball_envelope(V, r)
        return 1.0 / max(1.0, up), 1.0 / max(1.0, low)
    if V.d == 1:
        pts = [-r, r]
    else:
        ang = np.linspace(0.0, 2 * math.pi, n_angles, endpoint=False)
        pts = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)
    ups, lows = [], []
    for pt in pts:
        env = unit_ball_envelope(V, pt)
        ups.append(1.0 / max(1.0, env.v_up) ** 2)
        lows.append(1.0 / max(1.0, env.v_low) ** 2)
    return math.sqrt(float(np.mean(ups))), math.sqrt(float(np.mean(lows)))


def log_g_profiles(V: Potential, r, side: str = "up"):
    """log g_up or log g_low for radial confining families, overflow-safe.

    Uses the exact radial envelope: V_up(r) = v(r + 1), V_low(r) = v(r - 1)
    for monotone profiles (the catalog confining families are monotone for r
    past the double-well minimum).
    """
    r = np.asarray(r, dtype=float)
    shift = 1.0 if side == "up" else -1.0
    rr = np.maximum(r + shift, 1e-12)
    logv = np.asarray(V.log_radial(rr))
    # g = 1 / (1 v V): log g = -max(0, log V)
    out = -np.maximum(0.0, logv)
    return out if out.ndim else float(out)


def ou_potential(gamma: float) -> Potential:
    """Harmonic potential gamma^2 x^2 / 2 - gamma / 2 whose ground state
    transform is the Ornstein-Uhlenbeck process with rate gamma."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return Potential(family="polynomial",
                     params={"degree": 1, "coeff": gamma**2 / 2.0,
                             "offset": -gamma / 2.0})


def harmonic_potential(coeff: float = 1.0) -> Potential:
    return Potential(family="polynomial", params={"degree": 1, "coeff": coeff})


def finite_well(depth: float, radius: float = 1.0) -> Potential:
    return Potential(family="well", params={"depth": depth, "radius": radius})
