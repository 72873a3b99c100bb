"""Acceptance criteria as plain functions returning structured results.

Each ``criterion_N`` returns a :class:`CriterionResult` whose ``measured``
payload is deterministic for a fixed seed (no timings), so manifests built
from these results are byte-reproducible.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .channel import (
    AcceptanceWindow,
    TeleportParams,
    conditional_teleport_dual_rail,
    optimal_gain,
    photon_transfer_prob,
    teleport_dual_rail,
    teleport_mode,
    transfer_operator_channel,
)
from .fock import DensityMatrix, FockSpace, TruncationWarning, fock_dm, vacuum
from .metrics import (
    ClassicalStrategy,
    classical_mc_fidelity,
    optimize_classical_strategy,
    qubit_fidelity,
    sweep_gain,
    teleport_report,
    uhlmann_fidelity,
)
from .qubit import NAMED_QUBITS, PSI_1, ZERO_ONE, DualRailQubit, InputMixture, encode_qubit
from .tomography import TomographySettings, mle_reconstruct, random_density, sample_homodyne

SQUEEZINGS = (0.71, 1.01, 1.56)
COARSE_GAINS = (0.50, 0.63, 0.79, 1.0)
TABLE_BEST_GAIN = {0.71: 0.63, 1.01: 0.79}
ETA_EXP = 0.69


@dataclass
class CriterionResult:
    number: int
    title: str
    tolerance: str
    passed: Optional[bool]
    measured: dict = field(default_factory=dict)
    informational: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "EXTERNAL"}[self.passed]
        failed = [k for k, ok in self.checks.items() if not ok]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"[{status}] criterion {self.number}: {self.title} | tol {self.tolerance}{tail}"

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "checks": self.checks,
            "measured": self.measured,
            "informational": self.informational,
        }


def _result(number, title, tolerance, checks, measured, informational=None):
    return CriterionResult(number, title, tolerance, all(checks.values()), measured, informational or {}, checks)


def _quiet(fn: Callable, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        return fn(*args, **kwargs)


def criterion_1(cutoff: int = 12) -> CriterionResult:
    space = FockSpace(2, cutoff)
    vac = vacuum(space).elements
    worst = {}
    for r in SQUEEZINGS:
        g = optimal_gain(r)
        for name, q in NAMED_QUBITS.items():
            psi = encode_qubit(q, space).density()
            out = _quiet(teleport_dual_rail, psi, TeleportParams(g, r))
            expected = g * g * psi.elements + (1 - g * g) * vac
            worst[f"r={r},{name}"] = float(np.max(np.abs(out.elements - expected)))
    err = max(worst.values())
    return _result(1, "ideal teleporter equals pure attenuation", "1e-6 entrywise",
                   {"entrywise": err <= 1e-6}, {"max_abs_error": err})


GRID_GAINS = (0.2, 0.4, 0.6, 0.8, 1.0)
GRID_QS = (0.1, 0.3, 0.5, 0.7, 0.85)


def criterion_2(cutoff: int = 12) -> CriterionResult:
    space = FockSpace(1, cutoff)
    err_gauss, err_transfer = 0.0, 0.0
    for g in GRID_GAINS:
        for q in GRID_QS:
            params = TeleportParams(g, math.atanh(q))
            for i in (0, 1):
                rho = fock_dm(space, i)
                closed = np.array([photon_transfer_prob(i, n, g, q) for n in range(cutoff + 1)])
                gauss = _quiet(teleport_mode, rho, 0, params).populations()
                trans = _quiet(transfer_operator_channel, rho, 0, g, q).populations()
                err_gauss = max(err_gauss, float(np.max(np.abs(gauss - closed))))
                err_transfer = max(err_transfer, float(np.max(np.abs(trans - closed))))
    return _result(2, "closed-form photon transfer matches both channel routes", "1e-6 gaussian, 1e-4 transfer",
                   {"gaussian_route": err_gauss <= 1e-6, "transfer_route": err_transfer <= 1e-4},
                   {"max_error_gaussian": err_gauss, "max_error_transfer": err_transfer})


def criterion_3(seed: int, trials: int = 1_000_000) -> CriterionResult:
    etas = [round(0.1 * k, 1) for k in range(1, 11)]
    opt_err, mc = 0.0, {}
    mc_ok = True
    for k, eta in enumerate(etas):
        best = optimize_classical_strategy(eta)
        y_ref = (1 - eta) / (3 - eta)
        opt_err = max(opt_err, abs(best.x), abs(best.y - y_ref), abs(best.fidelity - (1 - eta / 3)))
        f_mc, se = classical_mc_fidelity(eta, ClassicalStrategy(best.x, best.y), PSI_1, trials, seed=[seed, 3, k])
        z = abs(f_mc - best.fidelity) / se
        mc_ok &= z <= 4
        mc[str(eta)] = {"mc": f_mc, "se": se, "z": z}
    f693 = optimize_classical_strategy(0.693).fidelity
    return _result(3, "classical bound optimum and Monte Carlo check", "1e-9 optimum, 4 SE MC, 3 decimals F*(0.693)",
                   {"optimum": opt_err <= 1e-9, "monte_carlo": bool(mc_ok), "table_value": round(f693, 3) == 0.769},
                   {"max_optimum_error": opt_err, "f_star_0.693": f693, "monte_carlo": mc})


def bloch_qubits(n: int, seed) -> list:
    rng = np.random.default_rng(seed)
    cos_t = rng.uniform(-1, 1, n)
    phi = rng.uniform(0, 2 * np.pi, n)
    return [DualRailQubit.from_bloch(math.acos(c), p) for c, p in zip(cos_t, phi)]


def criterion_4(seed: int, cutoff: int = 12) -> CriterionResult:
    params = TeleportParams(0.79, 1.01, 0.25)
    fs, fq = [], []
    for q in bloch_qubits(8, [seed, 4]):
        rep = teleport_report(InputMixture(ETA_EXP, q), params, cutoff)[2]
        fs.append(rep.f_state)
        fq.append(rep.f_qubit)
    spread_s, spread_q = max(fs) - min(fs), max(fq) - min(fq)
    return _result(4, "fidelities independent of the input qubit", "1e-9 spread",
                   {"f_state": spread_s <= 1e-9, "f_qubit": spread_q <= 1e-9},
                   {"f_state": fs[0], "f_qubit": fq[0], "spread_f_state": spread_s, "spread_f_qubit": spread_q})


def fine_qubit_argmax(r: float, cutoff: int = 12) -> float:
    """F_qubit argmax at l=0: 0.01 grid, then 0.001 refinement around the best point."""
    mix = InputMixture(ETA_EXP, PSI_1)
    coarse = np.round(np.arange(0.40, 1.0 + 1e-9, 0.01), 3)
    best = sweep_gain(mix, r, 0.0, coarse, cutoff).best_gain_qubit
    fine = np.round(np.arange(max(best - 0.01, 0.0), min(best + 0.01, 1.0) + 1e-9, 0.001), 4)
    return sweep_gain(mix, r, 0.0, fine, cutoff).best_gain_qubit


def criterion_5(cutoff: int = 12) -> CriterionResult:
    checks, measured, info = {}, {}, {}
    mix = InputMixture(ETA_EXP, PSI_1)
    for r, table_g in TABLE_BEST_GAIN.items():
        g_fine = fine_qubit_argmax(r, cutoff)
        checks[f"fine_r={r}"] = abs(g_fine - math.tanh(r)) <= 0.005
        sw = sweep_gain(mix, r, 0.0, COARSE_GAINS, cutoff)
        checks[f"coarse_r={r}"] = sw.best_gain_qubit == table_g
        measured[f"r={r}"] = {"fine_argmax_f_qubit": g_fine, "tanh_r": math.tanh(r),
                              "coarse_best_f_qubit": sw.best_gain_qubit}
        info[f"r={r}"] = {"coarse_best_f_state_l0": sw.best_gain_state,
                          "coarse_best_f_state_l0.25": sweep_gain(mix, r, 0.25, COARSE_GAINS, cutoff).best_gain_state}
    return _result(5, "optimal gain sits at tanh r", "0.005 fine, exact coarse selection", checks, measured, info)


LOSS_SCAN = tuple(round(0.01 * k, 2) for k in range(17, 33))


def criterion_6(cutoff: int = 12, l_override: Optional[float] = None) -> CriterionResult:
    mix = InputMixture(ETA_EXP, PSI_1)

    def at(l):
        return teleport_report(mix, TeleportParams(0.79, 1.01, l), cutoff)[2]

    losses = LOSS_SCAN if l_override is None else (l_override,)
    inside = []
    scan = {}
    for l in losses:
        rep = at(l)
        scan[str(l)] = [rep.f_state, rep.f_qubit]
        if abs(rep.f_state - 0.817) <= 0.02 and abs(rep.f_qubit - 0.875) <= 0.04:
            inside.append(l)
    lossless = at(0.0)
    succ = teleport_report(InputMixture(1.0, ZERO_ONE), TeleportParams(0.63, 0.71, 0.0), cutoff)[2].success_prob
    checks = {
        "envelope_in_loss_range": bool(inside),
        "lossless_exceeds": lossless.f_state > 0.837 and lossless.f_qubit > 0.915,
        # g = 0.63 is not tanh(0.71), so g^2 is matched at its quoted 3 decimals.
        "success_equals_g2": round(succ, 3) == round(0.63**2, 3),
        "success_vs_experiment": abs(succ - 0.43) <= 0.04,
    }
    # Where the envelope is actually met, for the record.
    feasible = []
    for k in range(71):
        rep = at(0.005 * k)
        if abs(rep.f_state - 0.817) <= 0.02 and abs(rep.f_qubit - 0.875) <= 0.04:
            feasible.append(round(0.005 * k, 3))
    info = {"feasible_l": [min(feasible), max(feasible)] if feasible else None}
    if l_override is not None:
        info["l_override"] = l_override
        info["f_state_overshoot"] = scan[str(l_override)][0] - 0.817
    return _result(6, "model reproduces measured fidelities in the fitted loss range",
                   "F_state 0.817+-0.02, F_qubit 0.875+-0.04, success 0.43+-0.04", checks,
                   {"loss_scan": scan, "l_inside_envelope": inside,
                    "lossless": [lossless.f_state, lossless.f_qubit], "success_prob": succ}, info)


def criterion_7(cutoff: int = 12) -> CriterionResult:
    mix = InputMixture(ETA_EXP, PSI_1)
    checks, measured = {}, {}
    for r in SQUEEZINGS:
        for l in (0.0, 0.25):
            m_unit = teleport_report(mix, TeleportParams(1.0, r, l), cutoff)[2].multiphoton
            m_opt = teleport_report(mix, TeleportParams(math.tanh(r), r, l), cutoff)[2].multiphoton
            checks[f"r={r},l={l}"] = m_unit > m_opt
            measured[f"r={r},l={l}"] = [m_unit, m_opt]
    return _result(7, "gain tuning suppresses extra photons", "strict inequality", checks, measured)


def criterion_8(cutoff: int = 12) -> CriterionResult:
    q, radius = 0.3, 0.5
    r = math.atanh(q)
    space = FockSpace(2, cutoff)
    ket = encode_qubit(PSI_1, space)
    psi = ket.density()

    def renorm(dm):
        return DensityMatrix(space, dm.elements / dm.trace())

    def overlap(dm):
        return float(np.real(ket.amplitudes.conj() @ dm.elements @ ket.amplitudes))

    uncond = _quiet(teleport_dual_rail, psi, TeleportParams(q, r))
    cond, accept = _quiet(conditional_teleport_dual_rail, psi, q, q, AcceptanceWindow(radius))
    f_unc, f_cond = overlap(uncond), overlap(renorm(cond))

    unit_unc = _quiet(teleport_dual_rail, psi, TeleportParams(1.0, r))
    unit_cond, _ = _quiet(conditional_teleport_dual_rail, psi, 1.0, q, AcceptanceWindow(radius))
    fq_unc, fq_cond = qubit_fidelity(PSI_1, unit_unc), qubit_fidelity(PSI_1, renorm(unit_cond))

    wide, accept_wide = _quiet(conditional_teleport_dual_rail, psi, q, q, AcceptanceWindow(6.0))
    dev = max(float(np.max(np.abs(wide.elements - uncond.elements))), abs(accept_wide - 1.0))
    checks = {
        "g=q_fidelity_improves": f_cond > f_unc,
        "g=1_qubit_fidelity_improves": fq_cond > fq_unc,
        "acceptance_below_one": accept < 1.0,
        "wide_window_converges": dev <= 1e-3,
    }
    return _result(8, "post-selected teleportation", "strict improvement, 1e-3 convergence", checks,
                   {"fidelity_g=q": [f_unc, f_cond], "f_qubit_g=1": [fq_unc, fq_cond],
                    "acceptance": accept, "wide_window_deviation": dev})


def criterion_9(seed: int, n_states: int = 10) -> CriterionResult:
    fids, monotone, statuses = [], True, []
    for i in range(n_states):
        rho = random_density(5, 6, np.random.default_rng([seed, 9, i]))
        settings = TomographySettings(seed=seed * 1000 + i)
        est = mle_reconstruct(sample_homodyne(rho, settings), settings)
        fids.append(uhlmann_fidelity(rho, est))
        monotone &= bool(np.all(np.diff(est.diagnostics["loglik"]) >= 0))
        statuses.append(est.diagnostics["status"])
    return _result(9, "homodyne tomography round trip", "fidelity >= 0.98 each",
                   {"fidelity": min(fids) >= 0.98, "monotone_likelihood": monotone},
                   {"fidelities": fids, "min_fidelity": min(fids), "status": statuses})


def run_all(seed: int = 20240, cutoff: int = 12, mc_trials: int = 1_000_000,
            l_override: Optional[float] = None) -> list:
    results = [
        criterion_1(cutoff),
        criterion_2(cutoff),
        criterion_3(seed, mc_trials),
        criterion_4(seed, cutoff),
        criterion_5(cutoff),
        criterion_6(cutoff, l_override),
        criterion_7(cutoff),
        criterion_8(cutoff),
        criterion_9(seed),
    ]
    results.append(CriterionResult(
        10, "byte-identical manifests for a repeated seed", "exact bytes", None,
        informational={"note": "checked by running reproduce twice and comparing the manifests"}))
    return results
