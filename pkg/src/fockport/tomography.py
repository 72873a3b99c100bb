"""Simulated homodyne detection and maximum-likelihood state reconstruction.

The quadrature at phase theta is x_theta = (a e^{-i theta} + a^dag e^{i theta})/sqrt(2);
its eigenvectors satisfy <n|x_theta> = e^{i n theta} psi_n(x) with psi_n the
Hermite functions of the vacuum-variance-1/2 convention.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .fock import DensityMatrix, FockError, FockSpace, resize, tensor


class MLEError(FockError):
    pass


@dataclass(frozen=True)
class TomographySettings:
    phases: tuple = tuple(np.pi * np.arange(12) / 12)
    samples_per_phase: int = 8333
    cutoff: int = 5
    max_iters: int = 5000
    convergence_tol: float = 1e-9
    seed: int = 0
    bins: int = 200
    x_max: float = 8.0
    dilution: float = 0.5
    max_dilutions: int = 30

    def __post_init__(self):
        if self.samples_per_phase < 1:
            raise FockError("samples_per_phase must be >= 1")
        if self.convergence_tol <= 0:
            raise FockError("convergence_tol must be > 0")
        if any(not 0 <= p < np.pi for p in self.phases):
            raise FockError("phases must lie in [0, pi)")
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> TomographySettings:
        obj = json.loads(text)
        if "phases" in obj:
            obj["phases"] = tuple(obj["phases"])
        return cls(**obj)


@dataclass(frozen=True)
class QuadratureSample:
    phase: float
    value: float

    def __post_init__(self):
        if not 0 <= self.phase < np.pi:
            raise FockError(f"phase {self.phase} outside [0, pi)")


@dataclass(frozen=True, eq=False)
class HomodyneDataset:
    """Phase-tagged quadrature samples, one row per (theta, x)."""

    thetas: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise FockError("thetas and values must be equal-length 1-D arrays")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        for t, x in zip(self.thetas, self.values):
            yield QuadratureSample(float(t), float(x))

    @classmethod
    def from_samples(cls, samples) -> HomodyneDataset:
        samples = list(samples)
        return cls([s.phase for s in samples], [s.value for s in samples])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "x"])
        for t, x in zip(self.thetas, self.values):
            w.writerow([repr(float(t)), repr(float(x))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> HomodyneDataset:
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0] == ["theta", "x"]:
            rows = rows[1:]
        arr = np.array([[float(a), float(b)] for a, b in rows]).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])


def hermite_functions(x, nmax: int) -> np.ndarray:
    """psi_n(x) for n = 0..nmax by the stable three-term recurrence; shape (nmax+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((nmax + 1,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for n in range(1, nmax):
        out[n + 1] = math.sqrt(2.0 / (n + 1)) * x * out[n] - math.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _single_mode(rho: DensityMatrix):
    if rho.space.modes != 1:
        raise FockError("homodyne model is single-mode; trace out a mode first")


def quadrature_pdf(rho: DensityMatrix, theta: float):
    """Return p(x) for the quadrature x_theta of a single-mode state."""
    _single_mode(rho)
    n = np.arange(rho.space.local_dim)
    ph = np.exp(1j * n * theta)
    # p = sum_mn rho_mn e^{-i m theta} e^{i n theta} psi_m psi_n
    kernel = ph.conj()[:, None] * rho.elements * ph[None, :]

    def pdf(x):
        psi = hermite_functions(x, rho.space.cutoff)
        return np.real(np.einsum("m...,mn,n...->...", psi, kernel, psi))

    return pdf


def sample_homodyne(rho: DensityMatrix, settings: TomographySettings, grid_points: int = 8001) -> HomodyneDataset:
    """Inverse-CDF sampling on a fixed grid, one independent substream per phase."""
    _single_mode(rho)
    xs = np.linspace(-settings.x_max, settings.x_max, grid_points)
    thetas, values = [], []
    for k, theta in enumerate(settings.phases):
        p = np.clip(quadrature_pdf(rho, theta)(xs), 0.0, None)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(xs))])
        cdf /= cdf[-1]
        rng = np.random.default_rng([settings.seed, k])
        u = rng.random(settings.samples_per_phase)
        values.append(np.interp(u, cdf, xs))
        thetas.append(np.full(settings.samples_per_phase, theta))
    return HomodyneDataset(np.concatenate(thetas), np.concatenate(values))


def _bin_overlaps(edges: np.ndarray, cutoff: int, order: int = 8) -> np.ndarray:
    """G[b, m, n] = integral over bin b of psi_m psi_n dx (Gauss-Legendre per bin)."""
    t, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    x = 0.5 * (hi - lo) * t[None, :] + 0.5 * (hi + lo)
    wx = 0.5 * (hi - lo) * w[None, :]
    psi = hermite_functions(x, cutoff)  # (d, bins, order)
    return np.einsum("mbk,nbk,bk->bmn", psi, psi, wx)


@dataclass
class _Likelihood:
    povm: np.ndarray  # (elements, d, d), Tr(rho Pi) = probability
    freq: np.ndarray  # counts per element
    weight: np.ndarray  # 1 / (samples at that phase * number of phases)

    def probs(self, rho):
        return np.real(np.einsum("jnm,mn->j", self.povm, rho))

    def loglik(self, p):
        mask = self.freq > 0
        return float(np.sum(self.freq[mask] * np.log(np.clip(p[mask], 1e-300, None))))

    def r_operator(self, p):
        mask = self.freq > 0
        coef = self.freq[mask] * self.weight[mask] / p[mask]
        return np.einsum("j,jnm->nm", coef, self.povm[mask])


def _build_likelihood(data: HomodyneDataset, settings: TomographySettings) -> _Likelihood:
    if len(data) == 0:
        raise MLEError("empty dataset")
    phases = np.unique(data.thetas)
    edges = np.linspace(-settings.x_max, settings.x_max, settings.bins + 1)
    g = _bin_overlaps(edges, settings.cutoff)
    n = np.arange(settings.cutoff + 1)
    povm, freq, weight = [], [], []
    for theta in phases:
        x = data.values[data.thetas == theta]
        counts, _ = np.histogram(x, bins=edges)
        ph = np.exp(1j * n * theta)
        # Pi[n, m] = e^{i(n - m) theta} G[n, m]
        povm.append(ph[None, :, None] * g * ph.conj()[None, None, :])
        freq.append(counts.astype(float))
        weight.append(np.full(len(counts), 1.0 / (len(x) * len(phases))))
    return _Likelihood(np.concatenate(povm), np.concatenate(freq), np.concatenate(weight))


def mle_reconstruct(data: HomodyneDataset, settings: TomographySettings) -> DensityMatrix:
    """Iterative R rho R maximum likelihood with dilution on likelihood decrease.

    The diluted step uses (I + eps R) rho (I + eps R), renormalized; eps starts
    unbounded (plain R rho R) and shrinks by ``settings.dilution`` whenever a
    step would lower the likelihood. Diagnostics record the accepted
    log-likelihood history and the stop status.
    """
    if len(np.unique(data.thetas)) < 4:
        raise MLEError("need at least 4 distinct phases to recover coherences")
    lik = _build_likelihood(data, settings)
    d = settings.cutoff + 1
    eye = np.eye(d)
    rho = eye / d
    p = lik.probs(rho)
    ll = lik.loglik(p)
    history = [ll]
    status = "max_iters"
    for it in range(settings.max_iters):
        r = lik.r_operator(p)
        eps = math.inf
        for _ in range(settings.max_dilutions + 1):
            step = r if math.isinf(eps) else (eye + eps * r) / (1 + eps)
            cand = step @ rho @ step.conj().T
            cand = 0.5 * (cand + cand.conj().T)
            cand /= np.trace(cand).real
            pc = lik.probs(cand)
            llc = lik.loglik(pc)
            if llc >= ll:
                break
            eps = 1.0 if math.isinf(eps) else eps * settings.dilution
        else:
            status = "stalled"
            break
        gain = llc - ll
        rho, p, ll = cand, pc, llc
        history.append(ll)
        if gain < settings.convergence_tol:
            status = "converged"
            break
    diag = {"iterations": len(history) - 1, "status": status, "loglik": history}
    return DensityMatrix(FockSpace(1, settings.cutoff), rho, diagnostics=diag)


def reconstruct_dual_rail_product(
    per_mode_data: Sequence[HomodyneDataset], settings: TomographySettings
) -> DensityMatrix:
    """Tensor of independent single-mode reconstructions.

    Valid only for product outputs such as teleported |0,1> or |1,0>; any
    entanglement between the rails is lost by construction.
    """
    if len(per_mode_data) != 2:
        raise FockError("need exactly two single-mode datasets")
    a, b = (mle_reconstruct(ds, settings) for ds in per_mode_data)
    return tensor(a, b)


def random_density(cutoff: int, rank: int, rng: np.random.Generator) -> DensityMatrix:
    """Ginibre-random single-mode state of given rank."""
    d = cutoff + 1
    z = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = z @ z.conj().T
    rho /= np.trace(rho).real
    return DensityMatrix(FockSpace(1, cutoff), 0.5 * (rho + rho.conj().T))


def truncate_normalized(rho: DensityMatrix, cutoff: int) -> DensityMatrix:
    """Resize to ``cutoff`` and renormalize (for comparing against reconstructions)."""
    small = resize(rho, cutoff)
    m = small.elements / small.trace()
    return DensityMatrix(small.space, m)
