from __future__ import annotations

import math

import numpy as np
import pytest

from swobs import (
    DomainError,
    JointConnectivityViolation,
    SwitchingSchedule,
    Topology,
    active_index,
    assumption_windows,
    check_joint_connectivity,
    laplacian,
    union_laplacian,
)

from oracles import rand_jointly_connected_schedule, union_topology


def path_topologies() -> list[Topology]:
    return [Topology.from_edges(3, [(0, 1, 1.0)]), Topology.from_edges(3, [(1, 2, 1.0)])]


class TestTopology:
    def test_rejects_self_loop(self):
        with pytest.raises(DomainError):
            Topology.from_edges(2, [(1, 1, 1.0)])

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(DomainError):
            Topology.from_edges(2, [(0, 1, 0.0)])

    def test_rejects_duplicate(self):
        with pytest.raises(DomainError):
            Topology.from_edges(3, [(0, 1, 1.0), (1, 0, 2.0)])

    def test_weight_lookup_symmetric(self):
        top = Topology.from_edges(3, [(2, 0, 1.5)])
        assert top.weight(0, 2) == top.weight(2, 0) == 1.5
        assert top.weight(0, 1) == 0.0


class TestLaplacian:
    def test_empty_graph(self):
        assert np.array_equal(laplacian(Topology.from_edges(3, [])), np.zeros((3, 3)))

    def test_single_edge(self):
        L = laplacian(Topology.from_edges(2, [(0, 1, 1.0)]))
        assert np.array_equal(L, np.array([[1.0, -1.0], [-1.0, 1.0]]))

    def test_random_topology_properties(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            N = int(rng.integers(2, 8))
            edges = []
            for i in range(N):
                for j in range(i + 1, N):
                    if rng.random() < 0.4:
                        edges.append((i, j, float(rng.uniform(0.1, 3.0))))
            L = laplacian(Topology.from_edges(N, edges))
            assert np.array_equal(L, L.T)
            assert np.abs(L @ np.ones(N)).max() <= 1e-12
            assert np.linalg.eigvalsh(L).min() >= -1e-10


class TestSchedule:
    def test_paper_switching_signal(self, three_inertia):
        sched = three_inertia.schedule
        assert active_index(sched, 0.5) == 0
        assert active_index(sched, 2.0) == 1
        assert active_index(sched, 1.0) == 1  # half-open: the new piece starts
        assert active_index(sched, 3.0) == 0
        assert active_index(sched, 60.0) == 0

    def test_negative_time_rejected(self, three_inertia):
        with pytest.raises(DomainError):
            active_index(three_inertia.schedule, -0.1)

    def test_aperiodic_last_piece_persists(self):
        sched = SwitchingSchedule(
            topologies=tuple(path_topologies()),
            instants=(0.0, 1.0, 2.5),
            indices=(0, 1, 0),
            dwell=1.0,
        )
        assert sched.active_index(100.0) == 0
        assert sched.active_index(1.7) == 1

    def test_dwell_violation_rejected(self):
        with pytest.raises(DomainError):
            SwitchingSchedule(
                topologies=tuple(path_topologies()),
                instants=(0.0, 0.1),
                indices=(0, 1),
                dwell=1.0,
            )

    def test_periodic_wrap_gap_checked(self):
        with pytest.raises(DomainError):
            SwitchingSchedule(
                topologies=tuple(path_topologies()),
                instants=(0.0, 1.0),
                indices=(0, 1),
                dwell=1.0,
                period=1.5,
            )

    def test_pieces_partition_window(self, three_inertia):
        sched = three_inertia.schedule
        pieces = sched.pieces_in(0.7, 7.3)
        assert pieces[0][0] == 0.7 and pieces[-1][1] == 7.3
        for (s0, e0, _), (s1, _, _) in zip(pieces, pieces[1:]):
            assert e0 == s1
        assert sum(e - s for s, e, _ in pieces) == pytest.approx(6.6, abs=1e-12)


class TestUnionLaplacian:
    def test_single_piece(self, three_inertia):
        sched = three_inertia.schedule
        assert np.array_equal(union_laplacian(sched, (0.0, 1.0)), sched.laplacians[0])

    def test_paper_window_is_connected_path(self, three_inertia):
        L = union_laplacian(three_inertia.schedule, (0.0, 3.0))
        assert np.array_equal(L, laplacian(Topology.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])))
        assert np.linalg.eigvalsh(L)[1] > 0.5

    def test_distinct_single_edges_sum_to_path(self):
        sched = SwitchingSchedule.periodic(path_topologies(), [(1.0, 0), (1.0, 1)])
        L = union_laplacian(sched, (0.0, 2.0))
        expected = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
        assert np.array_equal(L, expected)

    def test_empty_window_rejected(self, three_inertia):
        with pytest.raises(DomainError):
            union_laplacian(three_inertia.schedule, (1.0, 1.0))

    def test_agrees_with_edgewise_union(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            N = int(rng.integers(3, 6))
            sched, T_c = rand_jointly_connected_schedule(rng, N, n_topologies=3)
            window = (0.0, sched.period)
            L = union_laplacian(sched, window)
            tops = [sched.topologies[p] for _, _, p in sched.pieces_in(*window)]
            L_ref = laplacian(union_topology(tops, N))
            assert np.abs(L - L_ref).max() <= 1e-12


class TestJointConnectivity:
    def test_static_connected(self):
        top = Topology.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)])
        sched = SwitchingSchedule.periodic([top], [(1.0, 0)])
        cert = check_joint_connectivity(sched, T_c=2.0)
        assert len(set(np.round(cert.fiedler_values, 9))) == 1
        assert min(cert.fiedler_values) > 0

    def test_paper_schedule_certifies(self, three_inertia):
        cert = check_joint_connectivity(three_inertia.schedule, three_inertia.T_c)
        assert all(f > 0 for f in cert.fiedler_values)
        assert cert.window_instants[0] == 0.0
        starts = np.diff(cert.window_instants)
        assert np.all(starts >= three_inertia.schedule.dwell - 1e-12)
        assert np.all(starts <= three_inertia.T_c + 1e-12)

    def test_isolated_node_fails_with_window(self):
        tops = [Topology.from_edges(3, [(0, 1, 1.0)]), Topology.from_edges(3, [])]
        sched = SwitchingSchedule.periodic(tops, [(1.0, 0), (1.0, 1)])
        with pytest.raises(JointConnectivityViolation) as info:
            check_joint_connectivity(sched, T_c=2.0)
        assert info.value.certified  # genuinely disconnected, not just uncertified
        assert info.value.window[0] == 0.0

    def test_zero_eigenvalue_multiplicity_equivalence(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            N = int(rng.integers(3, 6))
            sched, T_c = rand_jointly_connected_schedule(rng, N)
            for a, b in assumption_windows(sched, T_c):
                L = union_laplacian(sched, (a, b if math.isfinite(b) else a + sched.period))
                eigs = np.sort(np.linalg.eigvalsh(L))
                multiplicity = int(np.count_nonzero(np.abs(eigs) <= 1e-9 * N))
                assert multiplicity == 1
            check_joint_connectivity(sched, T_c)

    def test_greedy_gap_reports_uncertified(self):
        top = Topology.from_edges(2, [(0, 1, 1.0)])
        sched = SwitchingSchedule(
            topologies=(top,), instants=(0.0, 5.0), indices=(0, 0), dwell=1.0, period=10.0
        )
        with pytest.raises(JointConnectivityViolation) as info:
            check_joint_connectivity(sched, T_c=2.0)
        assert not info.value.certified

    def test_aperiodic_tail_window(self):
        tops = path_topologies()
        sched = SwitchingSchedule(
            topologies=(Topology.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0)]), tops[0]),
            instants=(0.0, 1.0),
            indices=(1, 0),
            dwell=1.0,
        )
        windows = assumption_windows(sched, T_c=3.0)
        assert math.isinf(windows[-1][1])
        # the tail topology alone is a single edge on 3 nodes: disconnected
        with pytest.raises(JointConnectivityViolation):
            check_joint_connectivity(sched, T_c=3.0)
