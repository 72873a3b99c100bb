"""Figures of merit: Uhlmann fidelity, qubit-subspace fidelity, classical bounds, gain sweeps."""

from __future__ import annotations

import csv
import io
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .channel import TeleportParams, photon_transfer_prob, teleport_dual_rail
from .fock import (
    DEFAULT_CUTOFF,
    DensityMatrix,
    EmptySubspaceError,
    FockError,
    FockSpace,
    TruncationWarning,
    matrix_sqrt_psd,
    spectral_floor,
    subspace_block,
)
from .qubit import (
    QUBIT_BASIS,
    DualRailQubit,
    InputMixture,
    decompose_fractions,
    input_density,
)

QUBIT_LIMIT = 2 / 3


def uhlmann_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """[Tr sqrt(sqrt(rho) sigma sqrt(rho))]^2, clipped to [0, 1]."""
    if rho.space != sigma.space:
        raise FockError("fidelity needs states on the same space")
    root = matrix_sqrt_psd(rho.elements)
    inner = root @ sigma.elements @ root
    inner = 0.5 * (inner + inner.conj().T)
    lam = np.linalg.eigvalsh(inner)
    lam = np.where(lam > spectral_floor(lam), lam, 0.0)
    f = float(np.sum(np.sqrt(lam)) ** 2)
    return min(max(f, 0.0), 1.0)


def qubit_fidelity(psi: DualRailQubit, rho_out: DensityMatrix) -> float:
    block, _ = subspace_block(rho_out, QUBIT_BASIS)
    v = psi.vector()
    return float(np.real(v.conj() @ block @ v))


def classical_threshold(eta: float) -> float:
    if not 0 <= eta <= 1:
        raise FockError(f"eta must lie in [0, 1], got {eta}")
    return 1 - eta / 3


# ---------------------------------------------------------------- classical teleporter


@dataclass(frozen=True)
class ClassicalStrategy:
    """x: chance of sending a guessed qubit after a vacuum QND outcome;
    y: chance of sending vacuum after a qubit QND outcome."""

    x: float
    y: float

    def __post_init__(self):
        for name in ("x", "y"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise FockError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class ClassicalOptimum:
    x: float
    y: float
    fidelity: float


def classical_strategy_fidelity(s: ClassicalStrategy, eta: float) -> float:
    a = eta * (s.x * (1 - eta) / 2 + 2 * (1 - s.y) * eta / 3)
    b = (1 - eta) * ((1 - s.x) * (1 - eta) + s.y * eta)
    return (math.sqrt(max(a, 0.0)) + math.sqrt(max(b, 0.0))) ** 2


def _dfdy(x: float, y: float, eta: float) -> float:
    # Sign of the y-derivative of sqrt(A) + sqrt(B); the outer square is monotone.
    a = eta * (x * (1 - eta) / 2 + 2 * (1 - y) * eta / 3)
    b = (1 - eta) * ((1 - x) * (1 - eta) + y * eta)
    da = -2 * eta * eta / 3
    db = (1 - eta) * eta
    out = 0.0
    if a > 0:
        out += da / (2 * math.sqrt(a))
    if b > 0:
        out += db / (2 * math.sqrt(b))
    return out


def _golden_max(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    inv = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    # Ties go to the smallest argument (x is degenerate at eta = 1).
    best = lo
    for cand in (a, 0.5 * (a + b), b, hi):
        if f(cand) > f(best):
            best = cand
    return best


def optimize_classical_strategy(eta: float, step: float = 0.01, sweeps: int = 4) -> ClassicalOptimum:
    """Grid search then per-coordinate refinement of the classical strategy.

    Golden-section search fixes x; y is polished by a root of the analytic
    derivative because function values alone cannot place a smooth interior
    maximum closer than about sqrt(machine epsilon).
    """
    if not 0 < eta <= 1:
        raise FockError(f"eta must lie in (0, 1], got {eta}")

    def fid(x, y):
        return classical_strategy_fidelity(ClassicalStrategy(x, y), eta)

    grid = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    vals = np.array([[fid(x, y) for y in grid] for x in grid])
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    x, y = float(grid[i]), float(grid[j])
    for _ in range(sweeps):
        x = _golden_max(lambda t: fid(t, y), max(0.0, x - step), min(1.0, x + step))
        y = _golden_max(lambda t: fid(x, t), 0.0, 1.0)
        lo, hi = max(0.0, y - step), min(1.0, y + step)
        if _dfdy(x, lo, eta) > 0 > _dfdy(x, hi, eta):
            y = brentq(lambda t: _dfdy(x, t, eta), lo, hi, xtol=1e-15, rtol=1e-15)
    return ClassicalOptimum(x, y, fid(x, y))


def simulate_classical_teleporter(
    eta: float, s: ClassicalStrategy, psi: DualRailQubit, trials: int, seed: int
) -> DensityMatrix:
    """Monte Carlo of the QND-then-estimate classical teleporter; returns Bob's average state."""
    return _classical_mc(eta, s, psi, trials, seed, batches=1)[0]


def classical_mc_fidelity(
    eta: float, s: ClassicalStrategy, psi: DualRailQubit, trials: int, seed: int, batches: int = 50
):
    """Fidelity of the Monte Carlo average with the input and its batch-means standard error."""
    avg, per_batch = _classical_mc(eta, s, psi, trials, seed, batches)
    mix = InputMixture(eta, psi)
    rho_in = input_density(mix, avg.space)
    f = uhlmann_fidelity(rho_in, avg)
    fb = np.array([uhlmann_fidelity(rho_in, b) for b in per_batch])
    se = float(fb.std(ddof=1) / math.sqrt(batches)) if batches > 1 else float("nan")
    return f, se


def _classical_mc(eta, s, psi, trials, seed, batches):
    if trials < 1:
        raise FockError("need at least one trial")
    rng = np.random.default_rng(seed)
    qnd_qubit = rng.random(trials) < eta
    coin = rng.random(trials)
    cos_t = rng.uniform(-1.0, 1.0, trials)
    phi = rng.uniform(0.0, 2 * np.pi, trials)
    pick = rng.random(trials)

    # Work in the frame (e1, e2) = (psi, psi_perp); Bloch-uniform bases.
    s_half = np.sqrt((1 - cos_t) / 2)  # sin(theta/2)
    c_half = np.sqrt((1 + cos_t) / 2)  # cos(theta/2)
    ph = np.exp(1j * phi)
    b_plus = np.stack([s_half, c_half * ph], axis=1)
    b_minus = np.stack([c_half, -s_half * ph], axis=1)

    send_guess = ~qnd_qubit & (coin < s.x)
    estimate = qnd_qubit & (coin >= s.y)
    # Projecting psi = e1 onto b_plus happens with probability sin^2(theta/2).
    hit_plus = pick < s_half**2
    sent = np.where((estimate & ~hit_plus)[:, None], b_minus, b_plus)
    has_qubit = send_guess | estimate
    vecs = np.where(has_qubit[:, None], sent, 0.0)

    frame = np.array([psi.vector(), psi.orthogonal().vector()]).T  # columns e1, e2
    space = FockSpace(2, 2)
    idx_vac = space.index(0, 0)
    idx_q = [space.index(*o) for o in QUBIT_BASIS]

    def average(sel):
        n = sel.sum() if sel.dtype == bool else len(sel)
        v = vecs[sel]
        block = frame @ (v.T @ v.conj()) @ frame.conj().T / n
        rho = np.zeros((space.dim, space.dim), dtype=complex)
        rho[idx_vac, idx_vac] = 1 - np.trace(block).real
        rho[np.ix_(idx_q, idx_q)] = block
        return DensityMatrix(space, 0.5 * (rho + rho.conj().T))

    avg = average(np.arange(trials))
    per_batch = [average(chunk) for chunk in np.array_split(np.arange(trials), batches)] if batches > 1 else []
    return avg, per_batch


# ---------------------------------------------------------------- closed-form theory


def theory_fidelities(eta: float, g: float, q: float):
    """(F_state, F_qubit) for the qubit-plus-vacuum input through the lossless teleporter."""
    p00 = photon_transfer_prob(0, 0, g, q)
    p01 = photon_transfer_prob(0, 1, g, q)
    p10 = photon_transfer_prob(1, 0, g, q)
    p11 = photon_transfer_prob(1, 1, g, q)
    stay = (1 - eta) * p00 + eta * p10
    move = (1 - eta) * p01 + eta * p11
    f_state = p00 * (math.sqrt((1 - eta) * stay) + math.sqrt(eta * move)) ** 2
    f_qubit = p00 * move / (p00 * move + p01 * stay)
    return f_state, f_qubit


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class FidelityReport:
    f_state: float
    f_qubit: Optional[float]
    f_thr: float
    eta_in: float
    vacuum: float
    qubit: float
    multiphoton: float
    success_prob: Optional[float]
    g: Optional[float] = None

    @property
    def beats_threshold(self) -> bool:
        return self.f_state > self.f_thr

    @property
    def beats_qubit_limit(self) -> bool:
        return self.f_qubit is not None and self.f_qubit > QUBIT_LIMIT

    @property
    def fractions_out(self) -> dict:
        return {"vacuum": self.vacuum, "qubit": self.qubit, "multiphoton": self.multiphoton}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beats_threshold"] = self.beats_threshold
        d["beats_qubit_limit"] = self.beats_qubit_limit
        return d


def fidelity_report(
    rho_in: DensityMatrix, rho_out: DensityMatrix, psi: DualRailQubit, eta: float, g: Optional[float] = None
) -> FidelityReport:
    fin = decompose_fractions(rho_in)
    fout = decompose_fractions(rho_out)
    try:
        f_qubit = qubit_fidelity(psi, rho_out)
    except EmptySubspaceError:
        f_qubit = None
    success = fout.qubit / fin.qubit if fin.qubit > 1e-12 else None
    return FidelityReport(
        f_state=uhlmann_fidelity(rho_in, rho_out),
        f_qubit=f_qubit,
        f_thr=classical_threshold(eta),
        eta_in=eta,
        vacuum=fout.vacuum,
        qubit=fout.qubit,
        multiphoton=fout.multiphoton,
        success_prob=success,
        g=g,
    )


def teleport_report(mix: InputMixture, params: TeleportParams, cutoff: int = DEFAULT_CUTOFF):
    """Run one teleportation of the mixed input; returns (rho_in, rho_out, report)."""
    space = FockSpace(2, cutoff)
    rho_in = input_density(mix, space)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        rho_out = teleport_dual_rail(rho_in, params)
    return rho_in, rho_out, fidelity_report(rho_in, rho_out, mix.qubit, mix.eta, g=params.g)


@dataclass(frozen=True)
class GainSweep:
    r: float
    l: float
    reports: tuple
    best_gain_state: float
    best_gain_qubit: Optional[float]

    def csv(self) -> str:
        return sweep_csv([self])


CSV_COLUMNS = ("r", "l", "g", "f_state", "f_qubit", "f_thr", "vacuum", "qubit", "multiphoton", "success_prob")


def sweep_csv(sweeps: Sequence[GainSweep]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for sw in sweeps:
        for rep in sw.reports:
            row = [sw.r, sw.l] + [getattr(rep, c) for c in CSV_COLUMNS[2:]]
            w.writerow(["" if v is None else repr(float(v)) for v in row])
    return buf.getvalue()


def _argmax_small(gains, values) -> Optional[float]:
    best = None
    for g, v in sorted(zip(gains, values)):
        if v is None:
            continue
        if best is None or v > best[1]:
            best = (g, v)
    return None if best is None else best[0]


def sweep_gain(
    mix: InputMixture,
    r: float,
    l: float,
    gains: Sequence[float],
    cutoff: int = DEFAULT_CUTOFF,
    threads: Optional[int] = None,
) -> GainSweep:
    """One report per gain plus argmax gains (ties go to the smaller gain)."""
    gains = [float(g) for g in gains]
    if not gains:
        raise FockError("gain grid is empty")
    if threads is None:
        threads = int(os.environ.get("FOCKPORT_THREADS", "1"))

    def run(g):
        return teleport_report(mix, TeleportParams(g, r, l), cutoff)[2]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = tuple(pool.map(run, gains))
    else:
        reports = tuple(run(g) for g in gains)
    return GainSweep(
        r=r,
        l=l,
        reports=reports,
        best_gain_state=_argmax_small(gains, [rep.f_state for rep in reports]),
        best_gain_qubit=_argmax_small(gains, [rep.f_qubit for rep in reports]),
    )
