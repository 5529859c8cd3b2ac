import math
from functools import reduce

import numpy as np
import pytest

from conftest import SWEEP
from jctraj.dynamics import SimParams, run_trajectory
from jctraj.ensemble import (
    BLOCK,
    ConvergenceReport,
    average_entropy,
    convergence_report,
    reconstruct_density,
    run_ensemble,
    trajectory_seed,
)
from jctraj.errors import TimeNotSampled, TruncationError
from jctraj.hilbert import initial_state, partial_trace
from jctraj.observables import bloch_vector, purity, trace_distance

# a single jump leaves a sqrt(D) c_{D-1} kink; at 24 levels that is ~1e-12
STEADY = SimParams(g=0.0, F=1.0, gamma=2.0, fock_dim=24)


class TestSeeds:
    def test_distinct_and_stable(self):
        seeds = [trajectory_seed(42, i) for i in range(1000)]
        assert len(set(seeds)) == 1000
        assert seeds[0] == trajectory_seed(42, 0)
        assert trajectory_seed(42, 5) != trajectory_seed(43, 5)

    def test_64_bit(self):
        assert all(0 <= trajectory_seed(7, i) < 2**64 for i in range(50))


class TestRunEnsemble:
    def test_single_trajectory_is_its_projector(self):
        p = SimParams.driven(2.0)
        times = [0.0, 1.0, math.pi]
        res = run_ensemble(p, 1, 9, times)
        rec = run_trajectory(p, trajectory_seed(9, 0), times)
        for rho, psi in zip(res.mean_density, rec.states):
            np.testing.assert_allclose(rho.matrix, psi.density().matrix, atol=1e-15)
            assert abs(purity(rho) - 1) < 1e-12
        assert np.isnan(res.entropy_se).all()

    def test_reconstruct_density(self):
        p = SimParams.driven(2.0)
        times = [0.0, 2.0]
        recs = [run_trajectory(p, trajectory_seed(4, i), times) for i in range(10)]
        res = run_ensemble(p, 10, 4, times)
        rho = reconstruct_density([r.states[-1] for r in recs])
        np.testing.assert_allclose(res.density_at(2.0).matrix, rho.matrix, atol=1e-14)

    @pytest.mark.parametrize("T", [1, 37, 130])
    def test_steady_state_without_coupling(self, T):
        res = run_ensemble(STEADY, T, 5)
        rho0 = initial_state(STEADY).density()
        assert max(trace_distance(r, rho0) for r in res.mean_density) < 1e-8

    def test_result_invariants(self):
        res = run_ensemble(SimParams.driven(2.0), 200, 1, np.linspace(0, math.pi, 15))
        for rho in res.mean_density:
            assert np.array_equal(rho.matrix, rho.matrix.conj().T)
            assert abs(rho.trace() - 1) < 1e-8
        assert np.all((res.mean_entropy >= 0) & (res.mean_entropy <= 1))
        assert res.mean_jump_count[0] == 0
        assert np.all(np.diff(res.mean_jump_count) >= 0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            run_ensemble(SimParams.driven(2.0), 0, 1)

    def test_truncation_names_trajectory(self):
        p = SimParams(F=1.0, gamma=0.1, fock_dim=5, alpha_override=0)
        with pytest.raises(TruncationError) as info:
            run_ensemble(p, 2 * BLOCK + 3, 0)
        assert info.value.trajectory is not None and info.value.trajectory >= 0
        assert f"trajectory {info.value.trajectory}" in str(info.value)


class TestDeterminism:
    params = SimParams.driven(2.0, t_final=1.0)

    def test_repeatable(self):
        a = run_ensemble(self.params, 100, 3)
        b = run_ensemble(self.params, 100, 3)
        assert all(np.array_equal(x.matrix, y.matrix) for x, y in zip(a.mean_density, b.mean_density))

    def test_independent_of_workers(self):
        ref = run_ensemble(self.params, 150, 3, workers=1)
        for w in (2, 8):
            res = run_ensemble(self.params, 150, 3, workers=w)
            assert all(np.array_equal(x.matrix, y.matrix) for x, y in zip(ref.mean_density, res.mean_density))
            assert np.array_equal(ref.mean_entropy, res.mean_entropy)
            assert np.array_equal(ref.mean_jump_count, res.mean_jump_count)

    def test_merge_grouping(self):
        parts = []
        res = run_ensemble(self.params, 5 * BLOCK, 8, _sums=parts)
        assert len(parts) == 5
        right = reduce(lambda acc, p: p + acc, reversed(parts))
        tree = (parts[0] + parts[1]) + ((parts[2] + parts[3]) + parts[4])
        for total in (right, tree):
            rho = total.rho / total.count
            rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
            for a, b in zip(rho, res.mean_density):
                assert np.max(np.abs(a - b.matrix)) <= 1e-12
            assert np.max(np.abs(total.entropy / total.count - res.mean_entropy)) <= 1e-12


class TestAverageEntropy:
    def test_zero_at_start(self):
        res = run_ensemble(SimParams.driven(2.0), 50, 1)
        assert average_entropy(res, 0.0) == 0

    def test_unsampled_time(self):
        res = run_ensemble(SimParams.driven(2.0), 10, 1, [0.0, 1.0])
        with pytest.raises(TimeNotSampled):
            average_entropy(res, 0.5)

    @pytest.mark.slow
    @pytest.mark.parametrize("gamma,reference,reference_se", [
        # T = 100000, base seed 2024
        (0.02, 0.6224647163755437, 6.757213977694865e-05),
        (2.0, 0.5018605653050896, 0.0006019324176677449),
    ])
    def test_half_cycle_against_high_statistics_run(self, sweep_ensembles, gamma, reference, reference_se):
        res, _ = sweep_ensembles[gamma]
        i = res.index_of(math.pi / 2)
        se = math.hypot(res.entropy_se[i], reference_se)
        assert abs(average_entropy(res, math.pi / 2) - reference) < 3 * se


class TestConvergence:
    def test_steady_state_has_no_spread(self):
        rep = convergence_report(run_ensemble(STEADY, 64, 2, np.linspace(0, math.pi, 20)))
        assert isinstance(rep, ConvergenceReport)
        assert rep.max_trace_distance < 1e-8
        assert rep.max_standard_error < 1e-8

    def test_standard_errors_scale_with_size(self):
        p = SimParams.driven(2.0)
        times = np.linspace(0, math.pi, 11)
        small = run_ensemble(p, 1000, 11, times)
        large = run_ensemble(p, 2000, 12, times)
        for field in ("entropy_se", "jump_count_se", "density_se"):
            ratio = np.mean(getattr(large, field)[1:]) / np.mean(getattr(small, field)[1:])
            assert abs(ratio * math.sqrt(2) - 1) < 0.2, field

    @pytest.mark.slow
    def test_oracle_distance_at_gamma_2(self, sweep_ensembles, sweep_oracles):
        res, _ = sweep_ensembles[2.0]
        rep = convergence_report(res, sweep_oracles[2.0][1])
        assert rep.max_trace_distance <= 0.02


@pytest.mark.slow
class TestSweepShape:
    def test_atom_purity_dip_deepest_at_gamma_2(self, sweep_ensembles):
        # minimum over the cycle of the ensemble atom purity
        lows = {
            g: min(purity(partial_trace(r, "atom")) for r in sweep_ensembles[g][0].mean_density)
            for g in SWEEP
        }
        assert min(lows, key=lows.get) == 2.0

    def test_quarter_cycle_rotation_at_gamma_20(self, sweep_oracles):
        times, series, _ = sweep_oracles[20.0]
        i = int(np.argmin(np.abs(times - math.pi / 4)))
        b = bloch_vector(partial_trace(series[i], "atom")).as_array()
        assert np.linalg.norm(b - [-1, 0, 0]) < 0.15
