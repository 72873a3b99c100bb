"""CV teleportation acting on Fock-space density matrices.

Three routes to the same single-mode channel:

* ``teleport_mode``: pure loss of transmissivity g^2 followed by a Gaussian
  random displacement carrying the remaining added noise (any loss l);
* ``transfer_operator_channel``: direct quadrature of the Kraus family
  T(beta) = sqrt((1-q^2)/pi) D(g beta) q^n D(-beta) over Bell outcomes beta (l = 0);
* ``photon_transfer_prob``: closed-form photon statistics for |0> and |1> inputs (l = 0).

Noise variances are per quadrature in units where the vacuum has 1/2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import comb, gammaln

from .fock import (
    DensityMatrix,
    FockError,
    TruncationWarning,
    apply_mode_superop,
    displacement_elements,
    kraus_superop,
    tail_mass,
)

TAIL_TOL = 1e-6
SIGMA2_REJECT = 1e-9


class UnphysicalParameters(FockError):
    pass


class GridError(FockError):
    """Quadrature grid too coarse: the integrated trace missed its target."""


class AcceptanceError(FockError):
    pass


@dataclass(frozen=True)
class TeleportParams:
    g: float
    r: float
    l: float = 0.0

    def __post_init__(self):
        if self.g < 0:
            raise FockError(f"gain must be >= 0, got {self.g}")
        if self.r < 0:
            raise FockError(f"squeezing must be >= 0, got {self.r}")
        if not 0 <= self.l < 1:
            raise FockError(f"loss must lie in [0, 1), got {self.l}")

    @property
    def q(self) -> float:
        return math.tanh(self.r)

    @property
    def g_opt(self) -> float:
        return math.tanh(self.r)

    @classmethod
    def from_dict(cls, obj) -> TeleportParams:
        return cls(float(obj["g"]), float(obj["r"]), float(obj.get("l", 0.0)))


@dataclass(frozen=True)
class GaussianChannelForm:
    amp_gain: float
    added_var: float
    loss_transmissivity: float
    classical_var: float


@dataclass(frozen=True)
class AcceptanceWindow:
    radius: float

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius >= 0):
            raise FockError(f"window radius must be finite and >= 0, got {self.radius}")


@dataclass(frozen=True)
class QuadratureGrid:
    """Polar grid over Bell outcomes: Gauss-Legendre in |beta|, trapezoid in angle.

    ``radius=None`` picks 6 * max(1, sqrt(V)) with V = 1/(1 - q^2), the
    variance scale of the outcome distribution.
    """

    radial_nodes: int = 64
    angular_nodes: int = 64
    radius: Optional[float] = None
    trace_tol: float = 1e-6

    def resolve_radius(self, q: float) -> float:
        if self.radius is not None:
            return float(self.radius)
        return 6.0 * max(1.0, math.sqrt(1.0 / (1.0 - q * q)))


def optimal_gain(r: float) -> float:
    if r < 0:
        raise FockError("squeezing must be >= 0")
    return math.tanh(r)


# ---------------------------------------------------------------- closed forms


def photon_transfer_prob(i: int, n: int, g: float, q: float) -> float:
    """Probability of n output photons when |i> (i = 0 or 1) is teleported at gain g, q = tanh r."""
    if i not in (0, 1):
        raise FockError("closed form exists only for |0> and |1> inputs")
    if n < 0:
        return 0.0
    if not 0 <= q < 1:
        raise FockError(f"q must lie in [0, 1), got {q}")
    den = 1 + g * g - 2 * g * q
    assert den > 0, "1 + g^2 - 2gq must be positive for 0 <= q < 1"
    d = g - q
    ratio = d * d / den  # geometric factor; written this way so large n cannot underflow den**n
    if i == 0:
        return (1 - q * q) * ratio**n / den
    if n == 0:
        return (1 - q * q) * (1 - g * q) ** 2 / den**2
    lead = (1 - g * q) ** 2 * d * d + n * g * g * (1 - q * q) ** 2
    return (1 - q * q) * ratio ** (n - 1) * lead / den**3


def added_noise_variance(params: TeleportParams) -> float:
    """Added noise per output quadrature for squeezed beams that each suffered loss l."""
    g, r, l = params.g, params.r, params.l
    s_minus = (1 - l) * math.exp(-2 * r) + l
    s_plus = (1 - l) * math.exp(2 * r) + l
    return ((1 + g) ** 2 * s_minus + (1 - g) ** 2 * s_plus) / 4


def gaussian_form(params: TeleportParams) -> GaussianChannelForm:
    """Split the teleporter into pure loss (tau = g^2) followed by classical noise."""
    g = params.g
    if g > 1:
        raise UnphysicalParameters("gains above 1 need an amplifier stage, not a loss stage")
    v = added_noise_variance(params)
    sigma2 = v - (1 - g * g) / 2
    if sigma2 < -SIGMA2_REJECT:
        raise UnphysicalParameters(f"classical noise variance {sigma2:.3g} < 0")
    sigma2 = max(sigma2, 0.0)
    return GaussianChannelForm(g, v, g * g, sigma2)


# ---------------------------------------------------------------- Gaussian route


@lru_cache(maxsize=256)
def _loss_superop(tau: float, cutoff: int) -> np.ndarray:
    # A_k|n> = sqrt(C(n, k)) tau^((n-k)/2) (1-tau)^(k/2) |n-k>
    d = cutoff + 1
    kraus = np.zeros((d, d, d), dtype=complex)
    for k in range(d):
        src = np.arange(k, d)
        kraus[k, src - k, src] = np.sqrt(comb(src, k)) * tau ** ((src - k) / 2) * (1 - tau) ** (k / 2)
    s = kraus_superop(kraus)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=256)
def _noise_superop(sigma2: float, cutoff: int) -> np.ndarray:
    # Integrand is exp(-u (1 + 1/sigma2)) times a polynomial in u = |beta|^2 of
    # degree <= 2*cutoff after angular averaging, and a trig polynomial of
    # degree <= 2*cutoff in angle, so both quadratures are exact.
    d = cutoff + 1
    n_rad = cutoff + 4
    n_ang = 4 * cutoff + 4
    t, wt = np.polynomial.laguerre.laggauss(n_rad)
    kappa = 1.0 + 1.0 / sigma2
    u = t / kappa
    phi = 2 * np.pi * np.arange(n_ang) / n_ang
    beta = (np.sqrt(u)[:, None] * np.exp(1j * phi)[None, :]).ravel()
    # d^2 beta = (1/2) du dphi and the weight (pi sigma2)^-1 exp(-u/sigma2); the
    # Laguerre weight exp(-t) = exp(-kappa u) absorbs it together with the
    # exp(-u) carried by the two displacement factors, which is stripped below.
    w = (wt / kappa)[:, None] * np.full(n_ang, 2 * np.pi / n_ang)[None, :]
    w = w.ravel() * 0.5 / (np.pi * sigma2)
    dmat = displacement_elements(beta, cutoff) * np.exp(0.5 * np.abs(beta) ** 2)[:, None, None]
    kraus = np.sqrt(w)[:, None, None] * dmat
    s = kraus_superop(kraus)
    s.setflags(write=False)
    return s


def _finish(rho: DensityMatrix, out: np.ndarray, mode: int, diag: dict, reason: str = "truncation"):
    space = rho.space
    out = 0.5 * (out + out.conj().T)
    ref = rho.trace()
    tail = tail_mass(out, space, ref)
    diag = dict(diag)
    diag["tail_mass"] = tail
    diag["trace_error"] = float(ref - np.trace(out).real)
    if tail > TAIL_TOL:
        diag["warning"] = f"tail mass {tail:.3g} above {TAIL_TOL:g}"
        warnings.warn(f"tail mass {tail:.3g} exceeds {TAIL_TOL:g}; raise the cutoff", TruncationWarning, stacklevel=3)
    tr = float(np.trace(out).real)
    sub = rho.subnormalized or tr < 1 - 1e-9
    if sub and "reason" not in diag:
        diag["reason"] = rho.diagnostics.get("reason", reason)
    return DensityMatrix(space, out, subnormalized=sub, diagnostics=diag)


def loss_channel(rho: DensityMatrix, mode: int, tau: float) -> DensityMatrix:
    """Pure-loss (amplitude damping) channel of transmissivity tau on one mode."""
    if not 0 <= tau <= 1:
        raise FockError(f"transmissivity must lie in [0, 1], got {tau}")
    s = _loss_superop(float(tau), rho.space.cutoff)
    out = apply_mode_superop(rho.elements, rho.space, mode, s)
    return _finish(rho, out, mode, {"transmissivity": tau})


def classical_noise_channel(rho: DensityMatrix, mode: int, sigma2: float) -> DensityMatrix:
    """Gaussian random displacement adding sigma2 to each quadrature variance of one mode."""
    if sigma2 < 0:
        raise FockError(f"noise variance must be >= 0, got {sigma2}")
    if sigma2 == 0:
        return rho
    s = _noise_superop(float(sigma2), rho.space.cutoff)
    out = apply_mode_superop(rho.elements, rho.space, mode, s)
    return _finish(rho, out, mode, {"classical_var": sigma2})


def teleport_mode(rho: DensityMatrix, mode: int, params: TeleportParams) -> DensityMatrix:
    form = gaussian_form(params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        lossy = loss_channel(rho, mode, form.loss_transmissivity)
    out = classical_noise_channel(lossy, mode, form.classical_var)
    diag = dict(out.diagnostics)
    diag.update(transmissivity=form.loss_transmissivity, classical_var=form.classical_var, added_var=form.added_var)
    return DensityMatrix(out.space, out.elements, out.subnormalized, diag)


def teleport_dual_rail(rho: DensityMatrix, params: TeleportParams, order: Sequence[int] = (0, 1)) -> DensityMatrix:
    """Teleport both rails through independent uses of the same teleporter."""
    if rho.space.modes != 2:
        raise FockError("dual-rail teleportation needs a two-mode state")
    if sorted(order) != [0, 1]:
        raise FockError("order must be a permutation of (0, 1)")
    out = rho
    for m in order:
        out = teleport_mode(out, m, params)
    return out


# ---------------------------------------------------------------- transfer-operator route


def _raising_exp(c: np.ndarray, d: int) -> np.ndarray:
    """<m|exp(c a^dag)|k> = c^(m-k) sqrt(m!/k!)/(m-k)! for m >= k, vectorized over c."""
    m = np.arange(d)[:, None]
    k = np.arange(d)[None, :]
    diff = m - k
    ok = diff >= 0
    dd = np.where(ok, diff, 0)
    coef = np.where(ok, np.exp(0.5 * (gammaln(m + 1) - gammaln(k + 1)) - gammaln(dd + 1)), 0.0)
    return coef * c[..., None, None] ** dd


def _lowering_exp(c: np.ndarray, d: int) -> np.ndarray:
    """<m|exp(c a)|k>, the transpose of the raising form."""
    return np.swapaxes(_raising_exp(c, d), -1, -2)


def _polar_nodes(q: float, grid: QuadratureGrid, radius: float):
    x, wx = np.polynomial.legendre.leggauss(grid.radial_nodes)
    rad = 0.5 * radius * (x + 1)
    w_rad = 0.5 * radius * wx * rad  # Jacobian |beta|
    phi = 2 * np.pi * np.arange(grid.angular_nodes) / grid.angular_nodes
    beta = (rad[:, None] * np.exp(1j * phi)[None, :]).ravel()
    w = (w_rad[:, None] * np.full(grid.angular_nodes, 2 * np.pi / grid.angular_nodes)[None, :]).ravel()
    return beta, w


def _transfer_kraus(beta: np.ndarray, g: float, q: float, d: int) -> np.ndarray:
    """Cutoff block of T(beta), exact: normal ordering keeps every sum inside the cutoff.

    T(beta) = sqrt((1-q^2)/pi) exp(-(1+g^2-2gq)|beta|^2/2)
              exp((g-q) beta a^dag) exp(-g beta* a) q^n exp(beta* a)
    """
    u = np.abs(beta) ** 2
    pref = np.sqrt((1 - q * q) / np.pi) * np.exp(-0.5 * (1 + g * g - 2 * g * q) * u)
    qn = q ** np.arange(d)
    left = _raising_exp((g - q) * beta, d) @ _lowering_exp(-g * beta.conj(), d)
    right = qn[:, None] * _lowering_exp(beta.conj(), d)
    return pref[:, None, None] * (left @ right)


def _transfer_effect(beta: np.ndarray, w: np.ndarray, q: float, d: int) -> np.ndarray:
    """Integrated T^dag T over the nodes, exact on the cutoff block (untruncated output trace)."""
    u = np.abs(beta) ** 2
    # T^dag T = (1-q^2)/pi exp(-(1-q^2)|beta|^2) M^dag M,  M = exp(-q beta* a) q^n exp(beta* a)
    scale = (1 - q * q) / np.pi * np.exp(-(1 - q * q) * u) * w
    qn = q ** np.arange(d)
    mm = _lowering_exp(-q * beta.conj(), d) @ (qn[:, None] * _lowering_exp(beta.conj(), d))
    return np.einsum("j,jka,jkb->ab", scale, mm.conj(), mm)


def _effect_trace(effect: np.ndarray, rho: DensityMatrix, mode: int) -> float:
    space = rho.space
    if space.modes == 1:
        return float(np.trace(effect @ rho.elements).real)
    eye = np.eye(space.local_dim)
    full = np.kron(effect, eye) if mode == 0 else np.kron(eye, effect)
    return float(np.trace(full @ rho.elements).real)


def _integrated_channel(rho, mode, g, q, grid, radius):
    if not 0 <= q < 1:
        raise FockError(f"q must lie in [0, 1), got {q}")
    if g < 0:
        raise FockError("gain must be >= 0")
    d = rho.space.local_dim
    beta, w = _polar_nodes(q, grid, radius)
    kraus = np.sqrt(w)[:, None, None] * _transfer_kraus(beta, g, q, d)
    out = apply_mode_superop(rho.elements, rho.space, mode, kraus_superop(kraus))
    effect = _transfer_effect(beta, w, q, d)
    full_trace = _effect_trace(effect, rho, mode)
    nodes = {"radial_nodes": grid.radial_nodes, "angular_nodes": grid.angular_nodes, "radius": radius}
    return out, full_trace, effect, nodes


def transfer_operator_channel(
    rho: DensityMatrix, mode: int, g: float, q: float, grid: QuadratureGrid = QuadratureGrid()
) -> DensityMatrix:
    """Teleport one mode by integrating the transfer-operator Kraus family (lossless squeezing)."""
    radius = grid.resolve_radius(q)
    out, full_trace, _, nodes = _integrated_channel(rho, mode, g, q, grid, radius)
    err = rho.trace() - full_trace
    if abs(err) > grid.trace_tol:
        raise GridError(f"integrated trace off by {err:.3g} (tolerance {grid.trace_tol:g}); refine the grid")
    return _finish(rho, out, mode, dict(nodes, grid_trace_error=err))


def conditional_teleport(
    rho: DensityMatrix,
    mode: int,
    g: float,
    q: float,
    window: AcceptanceWindow,
    grid: QuadratureGrid = QuadratureGrid(),
):
    """Keep only Bell outcomes with |beta| <= window.radius.

    Returns the subnormalized output and the acceptance probability (its
    untruncated trace). Renormalization is left to the caller.
    """
    out, accept, _, nodes = _integrated_channel(rho, mode, g, q, grid, window.radius)
    return _conditional_result(rho, out, accept, nodes, window)


def conditional_teleport_dual_rail(
    rho: DensityMatrix, g: float, q: float, window: AcceptanceWindow, grid: QuadratureGrid = QuadratureGrid()
):
    """Windowed teleportation of both rails; accepted only if both Bell outcomes fall inside."""
    if rho.space.modes != 2:
        raise FockError("dual-rail teleportation needs a two-mode state")
    d = rho.space.local_dim
    beta, w = _polar_nodes(q, grid, window.radius)
    kraus = np.sqrt(w)[:, None, None] * _transfer_kraus(beta, g, q, d)
    s = kraus_superop(kraus)
    out = apply_mode_superop(rho.elements, rho.space, 0, s)
    out = apply_mode_superop(out, rho.space, 1, s)
    effect = _transfer_effect(beta, w, q, d)
    accept = float(np.trace(np.kron(effect, effect) @ rho.elements).real)
    nodes = {"radial_nodes": grid.radial_nodes, "angular_nodes": grid.angular_nodes, "radius": window.radius}
    return _conditional_result(rho, out, accept, nodes, window)


def _conditional_result(rho, out, accept, nodes, window):
    if accept < 1e-12:
        raise AcceptanceError(f"acceptance probability {accept:.3g} for window {window.radius}")
    out = 0.5 * (out + out.conj().T)
    diag = dict(nodes, acceptance_prob=accept, reason="conditional",
                tail_mass=float(max(accept - np.trace(out).real, 0.0)))
    sub = np.trace(out).real < 1 - 1e-9 or rho.subnormalized
    return DensityMatrix(rho.space, out, subnormalized=bool(sub), diagnostics=diag), accept
