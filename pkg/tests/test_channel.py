import math
import warnings

import numpy as np
import pytest
from scipy.stats import binom

from fockport.channel import (
    AcceptanceError,
    AcceptanceWindow,
    GridError,
    QuadratureGrid,
    TeleportParams,
    UnphysicalParameters,
    added_noise_variance,
    classical_noise_channel,
    conditional_teleport,
    conditional_teleport_dual_rail,
    gaussian_form,
    loss_channel,
    optimal_gain,
    photon_transfer_prob,
    teleport_dual_rail,
    teleport_mode,
    transfer_operator_channel,
)
from fockport.fock import DensityMatrix, FockError, FockSpace, TruncationWarning, fock_dm, vacuum
from fockport.qubit import NAMED_QUBITS, encode_qubit

ONE = FockSpace(1, 12)


def thermal(nbar, n):
    return nbar**n / (1 + nbar) ** (n + 1)


def random_low_state(space, rng, nmax=2):
    low = np.all(space.occupations() <= nmax, axis=1)
    z = np.zeros((space.dim, 3), dtype=complex)
    z[low] = rng.normal(size=(low.sum(), 3)) + 1j * rng.normal(size=(low.sum(), 3))
    m = z @ z.conj().T
    return DensityMatrix(space, m / np.trace(m).real)


class TestParameters:
    def test_optimal_gain(self):
        assert optimal_gain(1.01) == pytest.approx(math.tanh(1.01))

    @pytest.mark.parametrize("kw", [dict(g=-0.1, r=1), dict(g=0.5, r=-1), dict(g=0.5, r=1, l=1.0)])
    def test_invalid(self, kw):
        with pytest.raises(FockError):
            TeleportParams(**kw)

    def test_gain_above_one_rejected(self):
        with pytest.raises(UnphysicalParameters):
            gaussian_form(TeleportParams(1.2, 1.0))

    @pytest.mark.parametrize("g", [0.3, 0.63, 0.79, 1.0])
    @pytest.mark.parametrize("r", [0.0, 0.71, 1.56])
    def test_classical_noise_is_thermal_occupation(self, g, r):
        # Vacuum through the teleporter is thermal with nbar = (g - q)^2 / (1 - q^2).
        q = math.tanh(r)
        form = gaussian_form(TeleportParams(g, r))
        assert form.classical_var == pytest.approx((g - q) ** 2 / (1 - q * q), abs=1e-12)
        assert form.loss_transmissivity == pytest.approx(g * g)

    def test_optimal_gain_is_pure_loss(self):
        assert gaussian_form(TeleportParams(math.tanh(0.9), 0.9)).classical_var == 0.0

    def test_loss_adds_noise(self):
        assert added_noise_variance(TeleportParams(0.79, 1.01, 0.25)) > added_noise_variance(TeleportParams(0.79, 1.01))


class TestClosedForms:
    @pytest.mark.parametrize("g,q", [(0.2, 0.1), (0.79, 0.77), (1.0, 0.5), (0.5, 0.85)])
    @pytest.mark.parametrize("i", [0, 1])
    def test_sum_to_one(self, i, g, q):
        total = sum(photon_transfer_prob(i, n, g, q) for n in range(2000))
        assert total == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("g,q", [(0.3, 0.6), (1.0, 0.2)])
    def test_vacuum_input_is_geometric(self, g, q):
        nbar = (g - q) ** 2 / (1 - q * q)
        for n in range(8):
            assert photon_transfer_prob(0, n, g, q) == pytest.approx(thermal(nbar, n), rel=1e-12)

    def test_mean_photon_of_single_photon_input(self):
        g, q = 0.8, 0.4
        mean = sum(n * photon_transfer_prob(1, n, g, q) for n in range(3000))
        nbar = (g - q) ** 2 / (1 - q * q)
        assert mean == pytest.approx(g * g + nbar, abs=1e-10)

    def test_only_zero_and_one(self):
        with pytest.raises(FockError):
            photon_transfer_prob(2, 0, 0.5, 0.5)


class TestGaussianRoute:
    @pytest.mark.parametrize("tau", [0.0, 0.3, 1.0])
    def test_loss_on_fock_state_is_binomial(self, tau):
        out = loss_channel(fock_dm(ONE, 4), 0, tau)
        np.testing.assert_allclose(out.populations()[:5], binom.pmf(np.arange(5), 4, tau), atol=1e-14)

    def test_noise_on_vacuum_is_thermal(self):
        out = classical_noise_channel(vacuum(FockSpace(1, 30)), 0, 0.4)
        np.testing.assert_allclose(out.populations()[:10], thermal(0.4, np.arange(10)), atol=1e-12)

    def test_zero_noise_is_identity(self):
        rho = fock_dm(ONE, 1)
        assert classical_noise_channel(rho, 0, 0.0) is rho

    @pytest.mark.filterwarnings("ignore::fockport.fock.TruncationWarning")
    @pytest.mark.parametrize("g,r", [(0.5, 0.71), (0.79, 1.01), (1.0, 0.3)])
    @pytest.mark.parametrize("i", [0, 1])
    def test_matches_closed_form(self, i, g, r):
        out = teleport_mode(fock_dm(ONE, i), 0, TeleportParams(g, r))
        ref = [photon_transfer_prob(i, n, g, math.tanh(r)) for n in range(13)]
        np.testing.assert_allclose(out.populations(), ref, atol=1e-12)

    @pytest.mark.parametrize("name", sorted(NAMED_QUBITS))
    def test_optimal_gain_output_is_attenuated_input(self, name):
        sp = FockSpace(2, 8)
        r = 1.01
        g = math.tanh(r)
        psi = encode_qubit(NAMED_QUBITS[name], sp).density()
        out = teleport_dual_rail(psi, TeleportParams(g, r))
        np.testing.assert_allclose(out.elements, g * g * psi.elements + (1 - g * g) * vacuum(sp).elements, atol=1e-12)

    def test_mode_order_irrelevant(self):
        sp = FockSpace(2, 8)
        rho = random_low_state(sp, np.random.default_rng(0), nmax=2)
        p = TeleportParams(0.7, 0.8, 0.1)
        a = teleport_dual_rail(rho, p, order=(0, 1))
        b = teleport_dual_rail(rho, p, order=(1, 0))
        np.testing.assert_allclose(a.elements, b.elements, atol=1e-13)

    def test_truncation_warning_and_flag(self):
        with pytest.warns(TruncationWarning):
            out = teleport_mode(fock_dm(FockSpace(1, 4), 1), 0, TeleportParams(1.0, 0.0))
        assert out.subnormalized
        assert out.diagnostics["tail_mass"] > 1e-6

    def test_no_warning_when_tail_small(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error", TruncationWarning)
            out = teleport_mode(fock_dm(FockSpace(1, 30), 1), 0, TeleportParams(0.79, 1.01))
        assert out.trace() == pytest.approx(1.0, abs=1e-9)


class TestTransferRoute:
    def test_matches_gaussian_route_on_coherences(self):
        rho = random_low_state(ONE, np.random.default_rng(4), nmax=2)
        g, r = 0.7, 0.9
        a = teleport_mode(rho, 0, TeleportParams(g, r))
        b = transfer_operator_channel(rho, 0, g, math.tanh(r))
        np.testing.assert_allclose(b.elements, a.elements, atol=1e-6)

    def test_grid_self_check(self):
        with pytest.raises(GridError):
            transfer_operator_channel(fock_dm(ONE, 1), 0, 0.8, 0.6, QuadratureGrid(radius=1.0))

    def test_conditional_limits(self):
        rho = fock_dm(ONE, 1)
        full = transfer_operator_channel(rho, 0, 0.5, 0.5)
        wide, acc = conditional_teleport(rho, 0, 0.5, 0.5, AcceptanceWindow(6.0))
        assert acc == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(wide.elements, full.elements, atol=1e-6)
        _, small = conditional_teleport(rho, 0, 0.5, 0.5, AcceptanceWindow(0.05))
        assert small < 0.01

    def test_conditional_output_trace_is_acceptance(self):
        out, acc = conditional_teleport(fock_dm(FockSpace(1, 20), 0), 0, 0.3, 0.3, AcceptanceWindow(0.8))
        assert out.subnormalized
        assert out.diagnostics["reason"] == "conditional"
        assert out.trace() == pytest.approx(acc, abs=1e-8)

    def test_empty_window_raises(self):
        with pytest.raises(AcceptanceError):
            conditional_teleport(fock_dm(ONE, 1), 0, 0.5, 0.5, AcceptanceWindow(1e-9))
        with pytest.raises(FockError):
            AcceptanceWindow(-1.0)

    def test_dual_rail_window_improves_overlap(self):
        sp = FockSpace(2, 10)
        ket = encode_qubit(NAMED_QUBITS["psi1"], sp)
        q = 0.3
        out, acc = conditional_teleport_dual_rail(ket.density(), q, q, AcceptanceWindow(0.5))
        uncond = teleport_dual_rail(ket.density(), TeleportParams(q, math.atanh(q)))
        v = ket.amplitudes
        assert np.real(v.conj() @ out.elements @ v) / acc > np.real(v.conj() @ uncond.elements @ v)
        assert 0 < acc < 1
