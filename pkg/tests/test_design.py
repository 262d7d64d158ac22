from __future__ import annotations

import numpy as np
import pytest
import scipy.linalg

from swobs import (
    AssumptionError,
    DesignError,
    LtiPlant,
    ObserverBank,
    SkewSymmetrizer,
    SwitchingSchedule,
    Topology,
    assemble_bank,
    build_local_observer,
    default_targets,
    kalman_decompose,
    place_poles,
    skew_symmetrize,
)
from swobs._linalg import numerical_rank, spectrum_match_error

from oracles import rand_partitioned_plant, rand_structured_skew, rotation


def spectrum(A, L, C):
    return np.linalg.eigvals(A - L @ C)


class TestPlacePoles:
    def test_scalar(self):
        L = place_poles(np.array([[0.0]]), np.array([[1.0]]), [-1.0])
        assert L == pytest.approx(np.array([[1.0]]))

    def test_random_single_output(self):
        rng = np.random.default_rng(31)
        done = 0
        while done < 20:
            q = int(rng.integers(1, 7))
            A = rng.standard_normal((q, q))
            C = rng.standard_normal((1, q))
            if numerical_rank(np.vstack([C @ np.linalg.matrix_power(A, k) for k in range(q)])) < q:
                continue
            re = -rng.uniform(0.5, 4.0, q)
            im = np.zeros(q)
            n_pairs = q // 2 if rng.random() < 0.7 else 0
            for p in range(n_pairs):
                re[2 * p + 1] = re[2 * p]
                im[2 * p] = rng.uniform(0.5, 3.0)
                im[2 * p + 1] = -im[2 * p]
            desired = re + 1j * im
            L = place_poles(A, C, desired)
            assert spectrum_match_error(spectrum(A, L, C), desired) <= 1e-6 * max(1.0, np.abs(desired).max())
            done += 1

    def test_random_multi_output(self):
        rng = np.random.default_rng(37)
        for _ in range(10):
            q = int(rng.integers(2, 6))
            m = int(rng.integers(2, 4))
            A = rng.standard_normal((q, q))
            C = rng.standard_normal((m, q))
            desired = -rng.uniform(0.5, 3.0, q) + 0j
            L = place_poles(A, C, desired)
            assert L.shape == (q, m)
            assert spectrum_match_error(spectrum(A, L, C), desired) <= 1e-6 * max(1.0, np.abs(desired).max())

    def test_unobservable_pair_rejected(self):
        A = np.diag([1.0, 2.0])
        C = np.array([[1.0, 0.0]])
        with pytest.raises(DesignError):
            place_poles(A, C, [-1.0, -2.0])

    def test_unpaired_complex_rejected(self):
        with pytest.raises(DesignError):
            place_poles(rotation(1.0), np.array([[1.0, 0.0]]), [-1 + 1j, -2.0])

    def test_unstable_target_rejected(self):
        with pytest.raises(DesignError):
            place_poles(np.array([[0.0]]), np.array([[1.0]]), [1.0])

    def test_empty_block(self):
        L = place_poles(np.zeros((0, 0)), np.zeros((1, 0)), [])
        assert L.shape == (0, 1)

    def test_default_targets_are_stable_and_distinct(self):
        t = default_targets(5)
        assert len(set(t)) == 5
        assert all(z.real < 0 and z.imag == 0 for z in t)


class TestBuildLocalObserver:
    def test_fully_observable_agent_has_zero_weighting(self):
        rng = np.random.default_rng(41)
        A = rand_structured_skew(rng, n_pairs=2)
        plant = LtiPlant(A=A, C=np.eye(4), partition=(4,))
        decomp = kalman_decompose(plant, 0, A)
        L_obs = place_poles(decomp.A_obs, decomp.C_obs, default_targets(4))
        L, M = build_local_observer(plant, SkewSymmetrizer.identity(4), decomp, L_obs, 1.0)
        assert np.linalg.norm(M) <= 1e-12
        assert np.allclose(L, decomp.transform @ L_obs, atol=1e-12)

    def test_blind_agent_projects_everything(self):
        A = rotation(1.0)
        plant = LtiPlant(A=A, C=np.zeros((1, 2)), partition=(1,))
        decomp = kalman_decompose(plant, 0, A)
        assert decomp.n_unobs == 2
        L, M = build_local_observer(
            plant, SkewSymmetrizer.identity(2), decomp, np.zeros((0, 1)), 1.0
        )
        assert np.linalg.norm(L) == 0.0
        assert np.allclose(M, np.eye(2), atol=1e-12)

    def test_weighting_is_projection_when_untransformed(self, three_inertia):
        # on the transformed plant (P = I there), M must be the orthogonal
        # projection onto the kernel basis
        sk = skew_symmetrize(three_inertia.plant.A)
        working = LtiPlant(
            A=sk.P_inv @ three_inertia.plant.A @ sk.P,
            C=three_inertia.plant.C @ sk.P,
            partition=three_inertia.plant.partition,
        )
        for i in range(3):
            d = kalman_decompose(working, i, working.A)
            L_obs = place_poles(d.A_obs, d.C_obs, default_targets(d.n_obs))
            _, M = build_local_observer(working, SkewSymmetrizer.identity(6), d, L_obs, 1.0)
            assert np.linalg.norm(M @ M - M) <= 1e-10
            assert np.linalg.norm(M - M.T) <= 1e-10
            U = d.unobs_basis
            assert np.linalg.norm(M @ U - U) <= 1e-10


class TestAssembleBank:
    def test_three_inertia_design(self, three_inertia, three_inertia_bank):
        bank = three_inertia_bank
        assert bank.margin == pytest.approx(2.0, abs=1e-6)
        assert [obs.decomposition.n_unobs for obs in bank.observers] == [2, 2, 4]
        for obs, targets in zip(bank.observers, three_inertia.targets):
            assert spectrum_match_error(obs.achieved, targets) <= 1e-6 * 6.0
        # consensus weighting acts as the kernel projection in transformed coordinates
        P, P_inv = bank.P.P, bank.P.P_inv
        for obs in bank.observers:
            U = obs.decomposition.unobs_basis
            Mt = P_inv @ obs.M @ P
            assert np.linalg.norm((np.eye(6) - U @ U.T) @ Mt @ U) <= 1e-10
            assert np.linalg.norm(Mt @ U - U) <= 1e-10

    def test_third_agent_weighting_rank(self, three_inertia_bank):
        assert numerical_rank(three_inertia_bank.observers[2].M) == 4

    def test_achieved_spectra_respect_margin(self, three_inertia_bank):
        for obs in three_inertia_bank.observers:
            worst = max(z.real for z in obs.achieved)
            allowed = max(z.real for z in obs.targets)
            assert worst <= allowed + 1e-6

    def test_distinct_gains(self, three_inertia):
        bank = assemble_bank(
            three_inertia.plant,
            three_inertia.schedule,
            gains=(0.5, 1.0, 2.0),
            targets=three_inertia.targets,
            T_c=three_inertia.T_c,
        )
        assert tuple(bank.gains()) == (0.5, 1.0, 2.0)
        G = bank.gain_block_diag()
        assert np.array_equal(np.diag(G), np.array([0.5] * 2 + [1.0] * 2 + [2.0] * 4))

    def test_single_agent_reduces_to_luenberger(self):
        rng = np.random.default_rng(43)
        A = rand_structured_skew(rng, n_pairs=2)
        plant = LtiPlant(A=A, C=np.eye(4), partition=(4,))
        top = Topology.from_edges(1, [])
        sched = SwitchingSchedule.periodic([top], [(1.0, 0)])
        bank = assemble_bank(plant, sched, targets=[default_targets(4)], T_c=1.0)
        assert bank.N == 1
        obs = bank.observers[0]
        assert obs.decomposition.n_unobs == 0
        assert np.linalg.norm(obs.M) <= 1e-12
        closed = plant.A - obs.L @ plant.C
        assert spectrum_match_error(np.linalg.eigvals(closed), default_targets(4)) <= 1e-6

    def test_skew_plant_transform_paths_agree(self):
        rng = np.random.default_rng(47)
        A = rand_structured_skew(rng, n_pairs=2, n_zero=1)
        plant = rand_partitioned_plant(rng, A, N=2)
        tops = [Topology.from_edges(2, [(0, 1, 1.0)])]
        sched = SwitchingSchedule.periodic(tops, [(1.0, 0)])
        with_p = assemble_bank(plant, sched, T_c=1.0, use_transform=True)
        without_p = assemble_bank(plant, sched, T_c=1.0, use_transform=False)
        assert np.array_equal(with_p.P.P, np.eye(5))
        for a, b in zip(with_p.observers, without_p.observers):
            assert np.abs(a.L - b.L).max() <= 1e-12
            assert np.abs(a.M - b.M).max() <= 1e-12

    def test_assumption_failures_are_named(self, three_inertia):
        sched = three_inertia.schedule
        bad_plant = LtiPlant(A=np.array([[0.0, 1.0], [0.0, 0.0]]), C=np.eye(2), partition=(1, 1))
        sched2 = SwitchingSchedule.periodic(
            [Topology.from_edges(2, [(0, 1, 1.0)])], [(1.0, 0)]
        )
        with pytest.raises(AssumptionError) as info:
            assemble_bank(bad_plant, sched2, T_c=1.0)
        assert info.value.assumption == "neutral_stability"

        deaf = LtiPlant(A=rotation(1.0), C=np.zeros((2, 2)), partition=(1, 1))
        with pytest.raises(AssumptionError) as info:
            assemble_bank(deaf, sched2, T_c=1.0)
        assert info.value.assumption == "joint_observability"

        lonely = SwitchingSchedule.periodic(
            [Topology.from_edges(3, [(0, 1, 1.0)])], [(1.0, 0)]
        )
        with pytest.raises(AssumptionError) as info:
            assemble_bank(three_inertia.plant, lonely, T_c=1.0)
        assert info.value.assumption == "joint_connectivity"

    def test_serialization_round_trip(self, three_inertia, three_inertia_bank):
        data = three_inertia_bank.to_jsonable()
        import json

        restored = ObserverBank.from_jsonable(json.loads(json.dumps(data)), three_inertia.plant)
        assert restored.margin == three_inertia_bank.margin
        for a, b in zip(restored.observers, three_inertia_bank.observers):
            assert np.array_equal(a.L, b.L)
            assert np.array_equal(a.M, b.M)
            assert np.array_equal(a.decomposition.transform, b.decomposition.transform)
            assert a.targets == b.targets

    def test_stacked_kernel_basis_shape(self, three_inertia_bank):
        U = three_inertia_bank.stacked_kernel_basis()
        assert U.shape == (18, 8)
        A_un = three_inertia_bank.unobs_block_diag()
        assert A_un.shape == (8, 8)
        assert np.linalg.norm(A_un + A_un.T) <= 1e-8
