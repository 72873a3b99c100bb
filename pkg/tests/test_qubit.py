import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fockport.fock import DensityMatrix, FockError, FockSpace, fock_dm, number_operator
from fockport.qubit import (
    ONE_ZERO,
    NAMED_QUBITS,
    PSI_1,
    PSI_2,
    ZERO_ONE,
    DualRailQubit,
    InputMixture,
    decompose_fractions,
    encode_qubit,
    input_density,
    qubit_rotation_unitary,
)

SPACE = FockSpace(2, 4)


def test_named_qubit_amplitudes():
    assert PSI_1.alpha == pytest.approx(1 / math.sqrt(2))
    assert PSI_1.beta == pytest.approx(-1j / math.sqrt(2))
    assert PSI_2.vector() == pytest.approx(np.array([2, -1]) / math.sqrt(5))
    assert set(NAMED_QUBITS) == {"01", "10", "psi1", "psi2"}


def test_one_zero_puts_photon_in_mode_zero():
    v = encode_qubit(ONE_ZERO, SPACE).amplitudes
    assert v[SPACE.index(1, 0)] == 1


def test_norm_validated():
    with pytest.raises(FockError):
        DualRailQubit(1, 1)


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_bloch_orthogonal(theta, phi):
    q = DualRailQubit.from_bloch(theta, phi)
    assert abs(np.vdot(q.vector(), q.orthogonal().vector())) < 1e-12


def test_input_mixture_matches_formula():
    rho = input_density(InputMixture(0.69, PSI_1), SPACE)
    psi = encode_qubit(PSI_1, SPACE).density().elements
    expected = 0.69 * psi + 0.31 * fock_dm(SPACE, 0, 0).elements
    np.testing.assert_allclose(rho.elements, expected, atol=1e-15)


def test_complement_must_avoid_qubit_subspace():
    with pytest.raises(FockError):
        InputMixture(0.5, PSI_1, complement=fock_dm(SPACE, 0, 1))
    ok = InputMixture(0.5, PSI_1, complement=fock_dm(SPACE, 1, 1))
    assert input_density(ok, SPACE).element((1, 1), (1, 1)) == pytest.approx(0.5)


@pytest.mark.parametrize("eta", [-0.1, 1.1])
def test_eta_range(eta):
    with pytest.raises(FockError):
        InputMixture(eta, PSI_1)


def test_mixture_json_round_trip():
    mix = InputMixture(0.69, PSI_2)
    back = InputMixture.from_json('{"eta": 0.69, "alpha": [%r, 0], "beta": [%r, 0]}' % (PSI_2.alpha.real, PSI_2.beta.real))
    assert back == mix
    assert InputMixture.from_dict(mix.to_dict()) == mix


@pytest.mark.parametrize("name", sorted(NAMED_QUBITS))
def test_rotation_maps_qubit_to_zero_one(name):
    q = NAMED_QUBITS[name]
    u = qubit_rotation_unitary(q, SPACE).matrix
    out = u @ encode_qubit(q, SPACE).amplitudes
    target = encode_qubit(ZERO_ONE, SPACE).amplitudes
    assert abs(np.vdot(target, out)) == pytest.approx(1.0, abs=1e-12)
    vac = np.zeros(SPACE.dim)
    vac[0] = 1
    np.testing.assert_allclose(u @ vac, vac, atol=1e-12)


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
@settings(max_examples=25, deadline=None)
def test_rotation_is_passive(theta, phi):
    u = qubit_rotation_unitary(DualRailQubit.from_bloch(theta, phi), SPACE).matrix
    np.testing.assert_allclose(u.conj().T @ u, np.eye(SPACE.dim), atol=1e-10)
    n_tot = number_operator(SPACE, 0).matrix + number_operator(SPACE, 1).matrix
    np.testing.assert_allclose(u @ n_tot, n_tot @ u, atol=1e-10)


def test_fractions():
    rho = DensityMatrix(SPACE, 0.2 * fock_dm(SPACE, 0, 0).elements + 0.5 * fock_dm(SPACE, 1, 0).elements
                        + 0.3 * fock_dm(SPACE, 1, 1).elements)
    fr = decompose_fractions(rho)
    assert (fr.vacuum, fr.qubit, fr.multiphoton) == pytest.approx((0.2, 0.5, 0.3))
    assert fr.qubit_block[1, 1] == pytest.approx(0.5)
