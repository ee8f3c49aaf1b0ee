"""Effective lattice coefficients for modes scattered off a shaped cloud.

The chemical potential, hopping and interaction integrals factorize into an
analytic azimuthal Fourier factor times a radial overlap computed by
adaptive Gauss-Legendre quadrature. A full 2D tensor-grid quadrature with
no factorization is kept alongside as an independent oracle.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
from scipy.special import roots_legendre

from .density import DensityProfile, angular_density, density_at, validate_nonnegative
from .modes import BeamParameters, ModeIndex, mode_amplitude, mode_detuning, radial_profile

__all__ = [
    "ModeWindow",
    "CouplingSet",
    "QuadratureNotConverged",
    "azimuthal_factor",
    "radial_overlap_t",
    "radial_overlap_u",
    "compute_couplings",
    "brute_force_coupling",
    "hopping_uniformity",
    "write_couplings",
    "write_heatmap",
    "write_uniformity",
]

RADIAL_RTOL = 1e-10
RADIAL_ATOL = 1e-13
MIN_RADIAL_ORDER = 16
MAX_RADIAL_ORDER = 2**14

FLOAT_FMT = ".17g"


class QuadratureNotConverged(RuntimeError):
    """Adaptive quadrature hit its node cap before the estimates settled."""

    def __init__(self, order: int, delta: float):
        self.order = order
        self.delta = delta
        super().__init__(
            f"quadrature not converged at {order} nodes (last change {delta:.3e})"
        )


@dataclass(frozen=True)
class ModeWindow:
    """Rectangular set of modes: azimuthal l_min..l_max times radial p_values."""

    l_min: int
    l_max: int
    p_values: tuple[int, ...] = (0,)

    def __post_init__(self):
        object.__setattr__(self, "p_values", tuple(int(p) for p in self.p_values))
        if self.l_min > self.l_max:
            raise ValueError(f"l_min {self.l_min} exceeds l_max {self.l_max}")
        if not self.p_values:
            raise ValueError("p_values must be non-empty")
        if any(p < 0 for p in self.p_values):
            raise ValueError("radial indices must be non-negative")
        if len(set(self.p_values)) != len(self.p_values):
            raise ValueError("radial indices must be distinct")

    @cached_property
    def modes(self) -> tuple[ModeIndex, ...]:
        return tuple(
            ModeIndex(l, p)
            for p in self.p_values
            for l in range(self.l_min, self.l_max + 1)
        )

    @property
    def size(self) -> int:
        return (self.l_max - self.l_min + 1) * len(self.p_values)

    @cached_property
    def _index(self) -> dict[ModeIndex, int]:
        return {mode: i for i, mode in enumerate(self.modes)}

    def index_of(self, mode: ModeIndex) -> int:
        try:
            return self._index[mode]
        except KeyError:
            raise KeyError(f"mode {mode} is outside the window") from None

    def __contains__(self, mode: ModeIndex) -> bool:
        return mode in self._index

    @property
    def central_mode(self) -> ModeIndex:
        """Mode at the middle azimuthal index of the first radial sector."""
        return ModeIndex((self.l_min + self.l_max) // 2, self.p_values[0])

    def to_dict(self) -> dict:
        return {"l_min": self.l_min, "l_max": self.l_max, "p_values": list(self.p_values)}


@dataclass
class CouplingSet:
    """Lattice coefficients over a mode window.

    mu is real, t complex Hermitian with a zero stored diagonal (the diagonal
    overlap is folded into mu), u symmetric non-negative; interaction_sign
    records whether u enters the many-body energy attractively or repulsively.
    """

    window: ModeWindow
    mu: np.ndarray
    t: np.ndarray
    u: np.ndarray
    interaction_sign: str
    metadata: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.window.size


@lru_cache(maxsize=64)
def _gauss_nodes(order: int) -> tuple[np.ndarray, np.ndarray]:
    # scipy's Newton-based nodes stay cheap at the highest orders
    return roots_legendre(order)


def _radial_grid(order: int, upper: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gauss_nodes(order)
    r = 0.5 * (x + 1.0) * upper
    return r, 0.5 * upper * w


def azimuthal_factor(delta_l: int, profile: DensityProfile) -> complex:
    """Fourier integral of the angular density against exp(-i delta_l phi).

    Nonzero only when |delta_l| is an order carried by the profile:
    2 pi c_0 cos(phase_0) at delta_l = 0, and pi c_k exp(+-i phase_k) at
    delta_l = +-k. A hop raising l by k therefore carries the phase +phase_k.
    """
    if delta_l == 0:
        h = profile.harmonic(0)
        return complex(2.0 * np.pi * h.c * np.cos(h.phase))
    h = profile.harmonic(abs(delta_l))
    if h is None or h.c == 0.0:
        return 0j
    sign = 1.0 if delta_l > 0 else -1.0
    return np.pi * h.c * np.exp(sign * 1j * h.phase)


def _adaptive_radial(integrand, upper: float) -> tuple[float, int]:
    """Gauss-Legendre on [0, upper] with order doubling to a 1e-10 relative
    tolerance (absolute floor 1e-13 so essentially-zero overlaps terminate)."""
    previous = None
    delta = math.inf
    order = MIN_RADIAL_ORDER
    while order <= MAX_RADIAL_ORDER:
        r, w = _radial_grid(order, upper)
        value = float(np.dot(w, integrand(r) * r))
        if previous is not None:
            delta = abs(value - previous)
            if delta <= max(RADIAL_RTOL * abs(value), RADIAL_ATOL):
                return value, order
        previous = value
        order *= 2
    raise QuadratureNotConverged(order // 2, delta)


def radial_overlap_t(
    n: ModeIndex, m: ModeIndex, profile: DensityProfile, beam: BeamParameters
) -> float:
    """Radial hopping overlap: integral of g_n g_m r dr over the cloud disk."""
    value, _ = _radial_overlap_t(n, m, profile, beam)
    return value


def _radial_overlap_t(n, m, profile, beam):
    return _adaptive_radial(
        lambda r: radial_profile(n, r, beam) * radial_profile(m, r, beam),
        profile.radius,
    )


def radial_overlap_u(
    n: ModeIndex, m: ModeIndex, profile: DensityProfile, beam: BeamParameters
) -> float:
    """Radial interaction overlap: integral of g_n^2 g_m^2 r dr over the disk."""
    value, _ = _radial_overlap_u(n, m, profile, beam)
    return value


def _radial_overlap_u(n, m, profile, beam):
    return _adaptive_radial(
        lambda r: radial_profile(n, r, beam) ** 2 * radial_profile(m, r, beam) ** 2,
        profile.radius,
    )


def compute_couplings(
    window: ModeWindow,
    profile: DensityProfile,
    beam: BeamParameters,
    threads: int = 1,
) -> CouplingSet:
    """Assemble the chemical potential vector and hopping/interaction matrices.

    Every entry factorizes into the analytic azimuthal factor times a radial
    overlap; entries whose azimuthal index difference matches no harmonic of
    the profile are exact zeros. Hermiticity of t and symmetry of u hold by
    construction from the upper triangle. Entries are independent, so the
    pair loop may run on several threads with bit-identical results.
    """
    validate_nonnegative(profile)
    modes = window.modes
    count = len(modes)
    g_scale = beam.first_order_scale * beam.longitudinal_fill
    u_scale = beam.second_order_scale * beam.longitudinal_fill
    a0 = azimuthal_factor(0, profile).real

    mu = np.zeros(count)
    t = np.zeros((count, count), dtype=complex)
    u = np.zeros((count, count))

    pairs = [(i, j) for i in range(count) for j in range(i, count)]

    def one_pair(pair):
        i, j = pair
        n, m = modes[i], modes[j]
        az = azimuthal_factor(n.l - m.l, profile)
        if az != 0j:
            overlap, order_t = _radial_overlap_t(n, m, profile, beam)
        else:
            overlap, order_t = 0.0, 0
        overlap_u, order_u = _radial_overlap_u(n, m, profile, beam)
        return i, j, az, overlap, overlap_u, max(order_t, order_u)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_pair, pairs))
    else:
        results = [one_pair(pair) for pair in pairs]

    orders = set()
    for i, j, az, overlap, overlap_u, order in results:
        orders.add(order)
        if i == j:
            mu[i] = g_scale * a0 * overlap + mode_detuning(modes[i], beam)
        else:
            t[i, j] = g_scale * az * overlap
            t[j, i] = t[i, j].conjugate()
        u[i, j] = u_scale * a0 * overlap_u
        u[j, i] = u[i, j]

    metadata = {
        "profile": profile.to_dict(),
        "beam": {
            "waist": beam.waist,
            "gouy_rate": beam.gouy_rate,
            "longitudinal_fill": beam.longitudinal_fill,
            "first_order_scale": beam.first_order_scale,
            "second_order_scale": beam.second_order_scale,
            "interaction_sign": beam.interaction_sign,
        },
        "window": window.to_dict(),
        "quadrature": {
            "radial_orders": sorted(orders - {0}),
            "rtol": RADIAL_RTOL,
            "atol": RADIAL_ATOL,
        },
        "conventions": {
            "mode_phase": "exp(-i l phi)",
            "hopping_term": "t[i, j] multiplies bdag_i b_j (normal ordered)",
            "hopping_phase": "hop from l to l+k carries phase +phase_k",
            "diagonal": "overlap diagonal folded into mu; t[i, i] stored as 0",
        },
    }
    return CouplingSet(
        window=window,
        mu=mu,
        t=t,
        u=u,
        interaction_sign=beam.interaction_sign,
        metadata=metadata,
    )


def brute_force_coupling(
    n: ModeIndex,
    m: ModeIndex,
    kind: str,
    profile: DensityProfile,
    beam: BeamParameters,
) -> complex:
    """Full 2D quadrature of a coupling integral, with no factorization.

    Tensor-product grid: Gauss-Legendre radially on [0, R], trapezoid
    azimuthally with enough nodes to resolve every angular frequency of the
    integrand. kind selects the integrand: "t" pairs the two mode profiles,
    "u" their squared magnitudes, "mu" uses |f_n|^2 alone (m is ignored).
    The detuning offset is not included in "mu".
    """
    if kind not in ("t", "u", "mu"):
        raise ValueError(f"kind must be 't', 'u' or 'mu', got {kind!r}")
    validate_nonnegative(profile)
    max_k = max(profile.active_orders, default=0)
    n_phi = 8 * (abs(n.l) + abs(m.l) + max_k) + 64
    phi = np.arange(n_phi) * (2.0 * np.pi / n_phi)
    w_phi = 2.0 * np.pi / n_phi

    g_scale = beam.first_order_scale * beam.longitudinal_fill
    u_scale = beam.second_order_scale * beam.longitudinal_fill

    previous = None
    delta = math.inf
    order = 2 * MIN_RADIAL_ORDER
    while order <= MAX_RADIAL_ORDER:
        r, w_r = _radial_grid(order, profile.radius)
        rho = density_at(profile, r[:, None], phi[None, :])
        f_n = mode_amplitude(n, r[:, None], phi[None, :], beam)
        if kind == "t":
            f_m = mode_amplitude(m, r[:, None], phi[None, :], beam)
            integrand = rho * f_n * np.conj(f_m)
            scale = g_scale
        elif kind == "u":
            f_m = mode_amplitude(m, r[:, None], phi[None, :], beam)
            integrand = rho * np.abs(f_n) ** 2 * np.abs(f_m) ** 2
            scale = u_scale
        else:
            integrand = rho * np.abs(f_n) ** 2
            scale = g_scale
        value = complex(scale * w_phi * np.dot(w_r * r, integrand.sum(axis=1)))
        if previous is not None:
            delta = abs(value - previous)
            if delta <= max(RADIAL_RTOL * abs(value), RADIAL_ATOL):
                return value
        previous = value
        order *= 2
    raise QuadratureNotConverged(order // 2, delta)


def hopping_uniformity(couplings: CouplingSet) -> dict[int, dict[str, float]]:
    """Spread of |t| across the window for each hopping range k.

    For every active range the magnitudes |t[n, n+k]| along each radial
    sector are collected and summarized; rel_spread is (max - min) / mean.
    The azimuthal dependence of the radial overlaps makes this spread
    nonzero in general; it is reported, not bounded.
    """
    window = couplings.window
    report: dict[int, dict[str, float]] = {}
    span = window.l_max - window.l_min
    for k in range(1, span + 1):
        mags = []
        for p in window.p_values:
            for l in range(window.l_min, window.l_max - k + 1):
                i = window.index_of(ModeIndex(l, p))
                j = window.index_of(ModeIndex(l + k, p))
                mags.append(abs(couplings.t[i, j]))
        mags = np.asarray(mags)
        if mags.size == 0 or np.all(mags == 0.0):
            continue
        mean = float(mags.mean())
        report[k] = {
            "mean": mean,
            "min": float(mags.min()),
            "max": float(mags.max()),
            "rel_spread": float((mags.max() - mags.min()) / mean) if mean else 0.0,
        }
    return report


def _fmt(x: float) -> str:
    return format(x, FLOAT_FMT)


def write_couplings(couplings: CouplingSet, outdir: str | Path) -> list[Path]:
    """Export mu.csv, t_matrix.csv, u_matrix.csv and summary.json to outdir."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    modes = couplings.window.modes
    written = []

    path = outdir / "mu.csv"
    lines = ["l,p,mu"]
    for i, mode in enumerate(modes):
        lines.append(f"{mode.l},{mode.p},{_fmt(couplings.mu[i])}")
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    path = outdir / "t_matrix.csv"
    lines = ["l,p,l',p',re,im"]
    for i, a in enumerate(modes):
        for j, b in enumerate(modes):
            z = couplings.t[i, j]
            lines.append(f"{a.l},{a.p},{b.l},{b.p},{_fmt(z.real)},{_fmt(z.imag)}")
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    path = outdir / "u_matrix.csv"
    lines = ["l,p,l',p',value"]
    for i, a in enumerate(modes):
        for j, b in enumerate(modes):
            lines.append(f"{a.l},{a.p},{b.l},{b.p},{_fmt(couplings.u[i, j])}")
    path.write_text("\n".join(lines) + "\n")
    written.append(path)

    path = outdir / "summary.json"
    summary = dict(couplings.metadata)
    summary["interaction_sign"] = couplings.interaction_sign
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written.append(path)
    return written


def write_heatmap(couplings: CouplingSet, path: str | Path) -> Path:
    """Export |t| and arg t per mode pair for banded-structure plots."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    modes = couplings.window.modes
    lines = ["l,p,l',p',abs,arg"]
    for i, a in enumerate(modes):
        for j, b in enumerate(modes):
            z = couplings.t[i, j]
            lines.append(
                f"{a.l},{a.p},{b.l},{b.p},{_fmt(abs(z))},{_fmt(float(np.angle(z)))}"
            )
    path.write_text("\n".join(lines) + "\n")
    return path


def write_uniformity(couplings: CouplingSet, path: str | Path) -> Path:
    """Export the per-range hopping-magnitude spread report."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    report = hopping_uniformity(couplings)
    lines = ["k,mean,min,max,rel_spread"]
    for k in sorted(report):
        row = report[k]
        lines.append(
            f"{k},{_fmt(row['mean'])},{_fmt(row['min'])},"
            f"{_fmt(row['max'])},{_fmt(row['rel_spread'])}"
        )
    path.write_text("\n".join(lines) + "\n")
    return path
