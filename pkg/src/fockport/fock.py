"""Truncated Fock-space states and operators for one or two bosonic modes.

Quadratures follow x = (a + a^dagger)/sqrt(2), so the vacuum variance is 1/2.
Two-mode objects store mode 0 as the outer (slow) index, row-major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
TRACE_TOL = 1e-9
DEFAULT_CUTOFF = 12


class FockError(ValueError):
    """Invalid input to a Fock-space operation."""


class PSDViolation(FockError):
    pass


class EmptySubspaceError(FockError):
    pass


class TruncationWarning(UserWarning):
    """Probability mass close to the photon-number cutoff exceeded tolerance."""


@dataclass(frozen=True)
class FockSpace:
    modes: int
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.modes not in (1, 2):
            raise FockError(f"only 1 or 2 modes are supported, got {self.modes}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 2:
            raise FockError(f"cutoff must be an integer >= 2, got {self.cutoff}")

    @property
    def local_dim(self) -> int:
        return self.cutoff + 1

    @property
    def dim(self) -> int:
        return self.local_dim**self.modes

    def single(self) -> FockSpace:
        return FockSpace(1, self.cutoff)

    def index(self, *occupation: int) -> int:
        if len(occupation) != self.modes:
            raise FockError(f"expected {self.modes} occupation numbers, got {occupation}")
        idx = 0
        for n in occupation:
            if not 0 <= n <= self.cutoff:
                raise FockError(f"occupation {occupation} outside cutoff {self.cutoff}")
            idx = idx * self.local_dim + n
        return idx

    def occupations(self) -> np.ndarray:
        """Array of shape (dim, modes) listing the occupation of every basis ket."""
        grids = np.indices((self.local_dim,) * self.modes).reshape(self.modes, -1)
        return grids.T


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    if shape is not None and arr.shape != shape:
        raise FockError(f"expected shape {shape}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PureState:
    space: FockSpace
    amplitudes: np.ndarray
    trunc_tol: float = 1e-12

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", _frozen(self.amplitudes, (self.space.dim,)))
        norm2 = float(np.vdot(self.amplitudes, self.amplitudes).real)
        if not 1 - self.trunc_tol <= norm2 <= 1 + 1e-12:
            raise FockError(f"squared norm {norm2} outside [1 - {self.trunc_tol}, 1]")

    def density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(self.space, np.outer(v, v.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian PSD matrix on a truncated Fock space.

    ``subnormalized`` marks outputs whose trace is legitimately below one, either
    because a conditional channel rejected part of the state or because
    probability leaked past the cutoff. ``diagnostics`` carries channel
    bookkeeping (tail mass, trace error, node counts) and never enters equality.
    """

    space: FockSpace
    elements: np.ndarray
    subnormalized: bool = False
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        d = self.space.dim
        object.__setattr__(self, "elements", _frozen(self.elements, (d, d)))
        object.__setattr__(self, "diagnostics", MappingProxyType(dict(self.diagnostics)))
        rho = self.elements
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > HERMITIAN_TOL:
            raise FockError(f"matrix not Hermitian (max deviation {herm:.3g})")
        lam = np.linalg.eigvalsh(rho)
        if lam[0] < -PSD_TOL:
            raise PSDViolation(f"negative eigenvalue {lam[0]:.3g}")
        tr = self.trace()
        if not tr > 0 or tr > 1 + TRACE_TOL:
            raise FockError(f"trace {tr} outside (0, 1]")
        if tr < 1 - TRACE_TOL and not self.subnormalized:
            raise FockError(f"trace {tr} < 1 on a state not flagged subnormalized")

    def trace(self) -> float:
        return float(np.trace(self.elements).real)

    def populations(self) -> np.ndarray:
        """Diagonal photon-number probabilities, shaped (N+1,)*modes."""
        diag = np.diagonal(self.elements).real
        return diag.reshape((self.space.local_dim,) * self.space.modes)

    def element(self, ket: Sequence[int], bra: Sequence[int]) -> complex:
        return complex(self.elements[self.space.index(*ket), self.space.index(*bra)])

    def to_dict(self) -> dict:
        flat = self.elements.ravel()
        return {
            "modes": self.space.modes,
            "cutoff": self.space.cutoff,
            "elements": [[float(z.real), float(z.imag)] for z in flat],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: Mapping, subnormalized: bool = False) -> DensityMatrix:
        space = FockSpace(int(obj["modes"]), int(obj["cutoff"]))
        pairs = np.asarray(obj["elements"], dtype=float)
        if pairs.shape != (space.dim**2, 2):
            raise FockError("element list does not match modes/cutoff")
        values = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(space.dim, space.dim)
        return cls(space, values, subnormalized=subnormalized)

    @classmethod
    def from_json(cls, text: str, subnormalized: bool = False) -> DensityMatrix:
        return cls.from_dict(json.loads(text), subnormalized=subnormalized)


@dataclass(frozen=True, eq=False)
class FockOperator:
    space: FockSpace
    matrix: np.ndarray
    diagnostics: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        d = self.space.dim
        object.__setattr__(self, "matrix", _frozen(self.matrix, (d, d)))
        object.__setattr__(self, "diagnostics", MappingProxyType(dict(self.diagnostics)))

    def dagger(self) -> FockOperator:
        return FockOperator(self.space, self.matrix.conj().T)

    def __matmul__(self, other: FockOperator) -> FockOperator:
        if other.space != self.space:
            raise FockError("operator spaces differ")
        return FockOperator(self.space, self.matrix @ other.matrix)

    def conjugate(self, rho: DensityMatrix) -> DensityMatrix:
        """Return U rho U^dagger."""
        if rho.space != self.space:
            raise FockError("operator and state spaces differ")
        out = self.matrix @ rho.elements @ self.matrix.conj().T
        return DensityMatrix(self.space, _hermitize(out), subnormalized=rho.subnormalized)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


# ---------------------------------------------------------------- constructors


def ket(space: FockSpace, *occupation: int) -> PureState:
    v = np.zeros(space.dim, dtype=complex)
    v[space.index(*occupation)] = 1.0
    return PureState(space, v)


def fock_dm(space: FockSpace, *occupation: int) -> DensityMatrix:
    return ket(space, *occupation).density()


def vacuum(space: FockSpace) -> DensityMatrix:
    return fock_dm(space, *([0] * space.modes))


def identity(space: FockSpace) -> FockOperator:
    return FockOperator(space, np.eye(space.dim))


def annihilation(space: FockSpace, mode: int = 0) -> FockOperator:
    a = np.diag(np.sqrt(np.arange(1, space.local_dim)), k=1)
    return FockOperator(space, _embed_local(a, space, mode))


def number_operator(space: FockSpace, mode: int = 0) -> FockOperator:
    n = np.diag(np.arange(space.local_dim, dtype=float))
    return FockOperator(space, _embed_local(n, space, mode))


def _embed_local(op: np.ndarray, space: FockSpace, mode: int) -> np.ndarray:
    _check_mode(space, mode)
    if space.modes == 1:
        return op
    eye = np.eye(space.local_dim)
    return np.kron(op, eye) if mode == 0 else np.kron(eye, op)


def _check_mode(space: FockSpace, mode: int):
    if not 0 <= mode < space.modes:
        raise FockError(f"mode index {mode} out of range for {space.modes}-mode space")


# ---------------------------------------------------------------- structure


def tensor(a, b):
    """Tensor product of two single-mode density matrices or operators."""
    if type(a) is not type(b):
        raise FockError("tensor operands must be of the same kind")
    if a.space.modes != 1 or b.space.modes != 1 or a.space.cutoff != b.space.cutoff:
        raise FockError("tensor needs two single-mode operands with equal cutoff")
    space = FockSpace(2, a.space.cutoff)
    if isinstance(a, DensityMatrix):
        return DensityMatrix(
            space,
            np.kron(a.elements, b.elements),
            subnormalized=a.subnormalized or b.subnormalized,
        )
    if isinstance(a, FockOperator):
        return FockOperator(space, np.kron(a.matrix, b.matrix))
    raise FockError(f"cannot tensor {type(a).__name__}")


def partial_trace(rho: DensityMatrix, mode: int) -> DensityMatrix:
    """Trace out ``mode`` (0 or 1) of a two-mode density matrix."""
    if rho.space.modes != 2:
        raise FockError("partial_trace needs a two-mode state")
    _check_mode(rho.space, mode)
    d = rho.space.local_dim
    t = rho.elements.reshape(d, d, d, d)
    red = np.einsum("ixjx->ij", t) if mode == 1 else np.einsum("xixj->ij", t)
    return DensityMatrix(rho.space.single(), red, subnormalized=rho.subnormalized)


def resize(rho: DensityMatrix, cutoff: int) -> DensityMatrix:
    """Embed into a larger cutoff or truncate to a smaller one (no renormalization)."""
    old = rho.space
    new = FockSpace(old.modes, cutoff)
    keep = min(old.local_dim, new.local_dim)
    t = rho.elements.reshape((old.local_dim,) * (2 * old.modes))
    out = np.zeros((new.local_dim,) * (2 * old.modes), dtype=complex)
    sl = (slice(0, keep),) * (2 * old.modes)
    out[sl] = t[sl]
    out = out.reshape(new.dim, new.dim)
    sub = rho.subnormalized or np.trace(out).real < 1 - TRACE_TOL
    return DensityMatrix(new, out, subnormalized=sub)


def apply_mode_superop(elements: np.ndarray, space: FockSpace, mode: int, superop: np.ndarray):
    """Apply S[a, b, k, l] (rho_kl -> rho'_ab) to one mode of a raw density array."""
    _check_mode(space, mode)
    d = space.local_dim
    if space.modes == 1:
        return np.einsum("abkl,kl->ab", superop, elements)
    t = elements.reshape(d, d, d, d)
    if mode == 0:
        out = np.einsum("abkl,kxly->axby", superop, t)
    else:
        out = np.einsum("abkl,xkyl->xayb", superop, t)
    return out.reshape(space.dim, space.dim)


def kraus_superop(kraus: np.ndarray) -> np.ndarray:
    """S[a, b, k, l] = sum_j K_j[a, k] conj(K_j[b, l]) for a stack of Kraus matrices."""
    j, d, _ = kraus.shape
    flat = kraus.reshape(j, d * d)
    s = (flat.T @ flat.conj()).reshape(d, d, d, d)
    return s.transpose(0, 2, 1, 3)


def mode_populations(elements: np.ndarray, space: FockSpace, mode: int) -> np.ndarray:
    diag = np.diagonal(elements).real.reshape((space.local_dim,) * space.modes)
    if space.modes == 1:
        return diag
    return diag.sum(axis=1 - mode)


# ---------------------------------------------------------------- displacement


def displacement_elements(beta, cutoff: int) -> np.ndarray:
    """<m|D(beta)|n> for 0 <= m, n <= cutoff, vectorized over an array of betas.

    Returns shape beta.shape + (cutoff+1, cutoff+1). Elements are the exact
    infinite-space values; no truncation enters.
    """
    beta = np.asarray(beta, dtype=complex)
    d = cutoff + 1
    m = np.arange(d)[:, None]
    n = np.arange(d)[None, :]
    lo = np.minimum(m, n)
    diff = np.abs(m - n)
    pref = np.exp(0.5 * (gammaln(lo + 1) - gammaln(lo + diff + 1)))
    b = beta[..., None, None]
    x = np.abs(b) ** 2
    power = np.where(m >= n, b**diff, (-b.conj()) ** diff)
    return pref * power * np.exp(-0.5 * x) * eval_genlaguerre(lo, diff, x)


def displacement_operator(beta: complex, cutoff: int = DEFAULT_CUTOFF) -> FockOperator:
    space = FockSpace(1, cutoff)
    diag = {"beta_abs2": abs(beta) ** 2}
    if abs(beta) ** 2 > cutoff / 4:
        diag["warning"] = "|beta|^2 > cutoff/4: truncated matrix is far from unitary"
    return FockOperator(space, displacement_elements(beta, cutoff), diagnostics=diag)


# ---------------------------------------------------------------- matrix functions


def spectral_floor(lam: np.ndarray) -> float:
    """Eigenvalues at or below this are round-off; their square roots would leak ~1e-8."""
    return lam.size * np.finfo(float).eps * float(np.max(np.abs(lam), initial=0.0))


def matrix_sqrt_psd(rho: DensityMatrix | np.ndarray) -> FockOperator | np.ndarray:
    """Hermitian PSD square root by eigendecomposition.

    Eigenvalues in [-PSD_TOL, 0) are clamped to zero and the spectrum rescaled
    to the original trace. Accepts a DensityMatrix (returns a FockOperator) or a
    raw Hermitian array (returns an array).
    """
    raw = isinstance(rho, np.ndarray)
    m = rho if raw else rho.elements
    lam, vecs = np.linalg.eigh(_hermitize(m))
    if lam[0] < -PSD_TOL:
        raise PSDViolation(f"negative eigenvalue {lam[0]:.3g}")
    total = lam.sum()
    clamped = np.where(lam > spectral_floor(lam), lam, 0.0)
    if clamped.sum() > 0:
        clamped *= total / clamped.sum()
    root = (vecs * np.sqrt(clamped)) @ vecs.conj().T
    return root if raw else FockOperator(rho.space, root)


def subspace_block(rho: DensityMatrix, basis: Sequence[Sequence[int]]):
    """Renormalized block <b_i|rho|b_j> over Fock kets, and its weight before renormalizing."""
    if len(set(map(tuple, basis))) != len(basis):
        raise FockError("subspace basis kets must be distinct")
    idx = [rho.space.index(*b) for b in basis]
    block = rho.elements[np.ix_(idx, idx)]
    weight = float(np.trace(block).real)
    if weight < 1e-12:
        raise EmptySubspaceError(f"subspace weight {weight:.3g} is empty")
    return block / weight, weight


def tail_mass(elements: np.ndarray, space: FockSpace, reference_trace: float = 1.0) -> float:
    """Mass lost past the cutoff plus mass on photon numbers above cutoff - 2 in any mode."""
    pops = np.diagonal(elements).real.reshape((space.local_dim,) * space.modes)
    hi = space.cutoff - 2
    if space.modes == 1:
        edge = pops[hi + 1 :].sum()
    else:
        edge = pops[hi + 1 :, :].sum() + pops[: hi + 1, hi + 1 :].sum()
    lost = reference_trace - pops.sum()
    return float(max(lost, 0.0) + edge)
