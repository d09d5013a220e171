"""Distance-based wireless channel model.

The nominal rate follows an erf-of-root-SNR law with power-law path loss.
Because that law never actually reaches zero, the usable model truncates it:
past a transition distance the rate continues along its tangent line until
it hits zero at the cutoff distance, and is exactly zero beyond.  The
resulting curve is continuous everywhere and C1 at the transition knot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.special import erf

# Distances below this are treated as coincident agents (rate 1, zero gradient).
EPS_DIST = 1e-6

_BISECT_LO = 1e-3
_BISECT_HI = 1e4
_BISECT_XTOL = 1e-9


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw)


@dataclass(frozen=True)
class ChannelParams:
    """Radio parameters of the rate model.

    Powers are stored in dBm; the rate formulas operate on mW.
    """

    transmit_power_dbm: float = 0.0
    noise_floor_dbm: float = -70.0
    gain_constant: float = 5.01e-6
    path_loss_exponent: float = 2.52
    rate_cutoff: float = 0.25

    def __post_init__(self):
        if not self.gain_constant > 0:
            raise ValueError(f"gain_constant must be positive, got {self.gain_constant}")
        if not self.path_loss_exponent > 0:
            raise ValueError(f"path_loss_exponent must be positive, got {self.path_loss_exponent}")
        if not 0.0 < self.rate_cutoff < 1.0:
            raise ValueError(f"rate_cutoff must lie in (0, 1), got {self.rate_cutoff}")

    @property
    def transmit_power_mw(self) -> float:
        return dbm_to_mw(self.transmit_power_dbm)

    @property
    def noise_floor_mw(self) -> float:
        return dbm_to_mw(self.noise_floor_dbm)

    def with_power(self, transmit_power_dbm: float) -> "ChannelParams":
        """Same radio, different transmit power."""
        return ChannelParams(
            transmit_power_dbm=transmit_power_dbm,
            noise_floor_dbm=self.noise_floor_dbm,
            gain_constant=self.gain_constant,
            path_loss_exponent=self.path_loss_exponent,
            rate_cutoff=self.rate_cutoff,
        )


@dataclass(frozen=True)
class ChannelCurve:
    """Truncated rate curve: nominal law up to the transition distance,
    tangent line down to zero at the cutoff distance, zero beyond."""

    params: ChannelParams
    transition_distance_m: float
    cutoff_distance_m: float
    slope_at_transition: float  # rate per meter, negative


def _snr_coeff(params: ChannelParams) -> float:
    # nominal rate = erf(sqrt(c * d^-n)) with c = P_T * K / P_N0
    return params.transmit_power_mw * params.gain_constant / params.noise_floor_mw


def nominal_rate(d, params: ChannelParams):
    """Untruncated normalized rate at distance ``d`` (meters).

    Accepts a scalar or array; equals 1 at d = 0 (limit of the erf) and
    decreases strictly toward zero for growing d.
    """
    c = _snr_coeff(params)
    n = params.path_loss_exponent
    d_arr = np.asarray(d, dtype=float)
    # tiny d overflows d^-n to inf; erf(inf) = 1 is the right limit anyway
    with np.errstate(divide="ignore", over="ignore"):
        snr = np.where(d_arr > 0.0, c * d_arr ** (-n), np.inf)
    out = erf(np.sqrt(snr))
    if np.isscalar(d) or d_arr.ndim == 0:
        return float(out)
    return out


def _nominal_rate_derivative(d: float, params: ChannelParams) -> float:
    """Analytic d/dd of the nominal rate at d > 0."""
    c = _snr_coeff(params)
    n = params.path_loss_exponent
    u = math.sqrt(c) * d ** (-n / 2.0)
    # d/dd erf(u) = 2/sqrt(pi) exp(-u^2) u'
    du = math.sqrt(c) * (-n / 2.0) * d ** (-n / 2.0 - 1.0)
    return 2.0 / math.sqrt(math.pi) * math.exp(-u * u) * du


def derive_curve(params: ChannelParams) -> ChannelCurve:
    """Locate the transition and cutoff knots for the given parameters.

    The transition distance is the unique root of nominal_rate(d) = rate_cutoff
    (the rate is strictly monotone), found by bisection; the cutoff distance is
    where the tangent line at the transition crosses zero.
    """
    cutoff = params.rate_cutoff
    f = lambda d: nominal_rate(d, params) - cutoff
    if not (f(_BISECT_LO) > 0.0 > f(_BISECT_HI)):
        raise ValueError(
            "rate_cutoff is not bracketed on [{:g}, {:g}] m for these parameters".format(
                _BISECT_LO, _BISECT_HI
            )
        )
    d_t = bisect(f, _BISECT_LO, _BISECT_HI, xtol=_BISECT_XTOL)
    slope = _nominal_rate_derivative(d_t, params)
    d_c = d_t - cutoff / slope
    return ChannelCurve(
        params=params,
        transition_distance_m=d_t,
        cutoff_distance_m=d_c,
        slope_at_transition=slope,
    )


def rate(d, curve: ChannelCurve):
    """Truncated rate at distance ``d`` (scalar or array)."""
    p = curve.params
    d_t = curve.transition_distance_m
    d_c = curve.cutoff_distance_m
    d_arr = np.asarray(d, dtype=float)
    linear = p.rate_cutoff + curve.slope_at_transition * (d_arr - d_t)
    out = np.where(
        d_arr <= d_t,
        nominal_rate(d_arr, p),
        np.where(d_arr <= d_c, linear, 0.0),
    )
    if np.isscalar(d) or d_arr.ndim == 0:
        return float(out)
    return out


def rate_derivative(d: float, curve: ChannelCurve) -> float:
    """dR/dd of the truncated rate; zero outside (EPS_DIST, cutoff]."""
    if d < EPS_DIST or d > curve.cutoff_distance_m:
        return 0.0
    if d <= curve.transition_distance_m:
        return _nominal_rate_derivative(d, curve.params)
    return curve.slope_at_transition


def rate_gradient(x_i, x_j, curve: ChannelCurve) -> np.ndarray:
    """Gradient of R(|x_i - x_j|) with respect to x_i.

    Points toward x_j (the rate improves by closing distance).  Zero beyond
    the cutoff distance and for near-coincident agents.
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    diff = x_i - x_j
    d = float(np.linalg.norm(diff))
    if d < EPS_DIST or d > curve.cutoff_distance_m:
        return np.zeros(2)
    return rate_derivative(d, curve) * diff / d
