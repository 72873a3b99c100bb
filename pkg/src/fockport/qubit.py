"""Dual-rail qubit inputs: encoding, mixed input model, basis-change unitary."""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
import scipy.linalg as sla

from .fock import (
    DensityMatrix,
    FockError,
    FockOperator,
    FockSpace,
    PureState,
    annihilation,
    vacuum,
)

QUBIT_BASIS = ((0, 1), (1, 0))


@dataclass(frozen=True)
class DualRailQubit:
    """alpha|0,1> + beta|1,0>, a single photon shared between two modes."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "beta", complex(self.beta))
        norm = abs(self.alpha) ** 2 + abs(self.beta) ** 2
        if abs(norm - 1) > 1e-12:
            raise FockError(f"|alpha|^2 + |beta|^2 = {norm}, expected 1")

    @classmethod
    def normalized(cls, alpha: complex, beta: complex) -> DualRailQubit:
        n = math.sqrt(abs(alpha) ** 2 + abs(beta) ** 2)
        return cls(alpha / n, beta / n)

    @classmethod
    def from_bloch(cls, theta: float, phi: float) -> DualRailQubit:
        return cls(math.cos(theta / 2), cmath.exp(1j * phi) * math.sin(theta / 2))

    def orthogonal(self) -> DualRailQubit:
        return DualRailQubit(-self.beta.conjugate(), self.alpha.conjugate())

    def vector(self) -> np.ndarray:
        """Amplitudes on (|0,1>, |1,0>)."""
        return np.array([self.alpha, self.beta])


ZERO_ONE = DualRailQubit(1, 0)
ONE_ZERO = DualRailQubit(0, 1)
PSI_1 = DualRailQubit.normalized(1, -1j)
PSI_2 = DualRailQubit.normalized(2, -1)
NAMED_QUBITS = {"01": ZERO_ONE, "10": ONE_ZERO, "psi1": PSI_1, "psi2": PSI_2}


@dataclass(frozen=True)
class InputMixture:
    """eta |psi><psi| + (1 - eta) complement; complement defaults to two-mode vacuum."""

    eta: float
    qubit: DualRailQubit
    complement: Optional[DensityMatrix] = None

    def __post_init__(self):
        if not 0 <= self.eta <= 1:
            raise FockError(f"eta must lie in [0, 1], got {self.eta}")
        c = self.complement
        if c is not None:
            if c.space.modes != 2:
                raise FockError("complement must be a two-mode state")
            for occ in QUBIT_BASIS:
                if abs(c.element(occ, occ)) > 1e-12:
                    raise FockError("complement overlaps the qubit subspace")

    @classmethod
    def from_dict(cls, obj: Mapping) -> InputMixture:
        a = complex(*obj["alpha"])
        b = complex(*obj["beta"])
        return cls(float(obj["eta"]), DualRailQubit(a, b))

    @classmethod
    def from_json(cls, text: str) -> InputMixture:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        q = self.qubit
        return {
            "eta": self.eta,
            "alpha": [q.alpha.real, q.alpha.imag],
            "beta": [q.beta.real, q.beta.imag],
        }


def encode_qubit(q: DualRailQubit, space: FockSpace) -> PureState:
    if space.modes != 2:
        raise FockError("dual-rail encoding needs a two-mode space")
    v = np.zeros(space.dim, dtype=complex)
    v[space.index(0, 1)] = q.alpha
    v[space.index(1, 0)] = q.beta
    return PureState(space, v)


def input_density(mix: InputMixture, space: FockSpace) -> DensityMatrix:
    comp = mix.complement if mix.complement is not None else vacuum(space)
    if comp.space != space:
        raise FockError("complement lives in a different space")
    psi = encode_qubit(mix.qubit, space).density().elements
    rho = mix.eta * psi + (1 - mix.eta) * comp.elements
    return DensityMatrix(space, rho)


def _mode_matrix(q: DualRailQubit) -> np.ndarray:
    # Acts on creation operators (a_0^dag, a_1^dag): a_k^dag -> sum_j W[j, k] a_j^dag.
    # Columns are chosen so beta a_0^dag + alpha a_1^dag maps to a_1^dag.
    a, b = q.alpha, q.beta
    return np.array([[a, -b], [b.conjugate(), a.conjugate()]])


def qubit_rotation_unitary(q: DualRailQubit, space: FockSpace) -> FockOperator:
    """Passive two-mode unitary U with U(alpha|0,1> + beta|1,0>) = |0,1> and U|0,0> = |0,0>.

    The 2x2 mode transformation W = exp(iH) is lifted to Fock space as
    exp(i sum_jk H_jk a_j^dag a_k), which conserves total photon number.
    """
    if space.modes != 2:
        raise FockError("qubit rotation needs a two-mode space")
    w = _mode_matrix(q)
    t, z = sla.schur(w, output="complex")
    angles = np.angle(np.diag(t))
    h = (z * angles) @ z.conj().T
    ops = [annihilation(space, k).matrix for k in range(2)]
    gen = sum(h[j, k] * ops[j].conj().T @ ops[k] for j in range(2) for k in range(2))
    u = sla.expm(1j * gen)
    return FockOperator(space, u)


@dataclass(frozen=True)
class Fractions:
    vacuum: float
    qubit: float
    multiphoton: float
    qubit_block: np.ndarray

    def as_dict(self) -> dict:
        return {"vacuum": self.vacuum, "qubit": self.qubit, "multiphoton": self.multiphoton}


def decompose_fractions(rho: DensityMatrix) -> Fractions:
    """Vacuum, single-photon (qubit) and multi-photon weights of a two-mode state."""
    if rho.space.modes != 2:
        raise FockError("fraction decomposition needs a two-mode state")
    sp = rho.space
    idx = [sp.index(*o) for o in QUBIT_BASIS]
    block = rho.elements[np.ix_(idx, idx)].copy()
    vac = float(rho.elements[sp.index(0, 0), sp.index(0, 0)].real)
    qub = float(np.trace(block).real)
    # Truncation leaks high photon numbers, so the reference stays 1 unless the
    # deficit comes from conditioning.
    total = rho.trace() if rho.diagnostics.get("reason") == "conditional" else 1.0
    multi = max(total - vac - qub, 0.0)
    return Fractions(vac, qub, multi, block)
