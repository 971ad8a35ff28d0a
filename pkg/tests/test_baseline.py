import numpy as np
import pytest
from scipy.linalg import expm

from fermiblock.baseline import (
    bfs_ball_sizes,
    chebyshev_vectors,
    dynamics_entry_bound,
    local_dynamics_entry,
    local_thermal_entry,
    support_growth,
    thermal_entry_bound,
)
from fermiblock.correlation import exact_reference
from fermiblock.oracles import build_margulis, build_tight_binding, chain_spec, materialize, square_spec

CHAIN64 = build_tight_binding(chain_spec(64))
H64 = materialize(CHAIN64)


def site_projector(site):
    return lambda k, l: 1.0 if k == l == site else 0.0


def test_thermal_beta_zero():
    o = build_tight_binding(chain_spec(16))
    for i, j in [(3, 3), (3, 4), (0, 15)]:
        v = local_thermal_entry(o, 0.0, i, j, 1)
        assert abs(v - 0.5 * (i == j)) <= thermal_entry_bound(0.0, 2.0, 1)


def test_thermal_chain_beta4_nearest_neighbour():
    exact = exact_reference(H64, "thermal", beta=4.0)
    bound = thermal_entry_bound(4.0, 2.0, 600)
    for i, j in [(31, 32), (10, 11), (0, 1)]:
        assert abs(local_thermal_entry(CHAIN64, 4.0, i, j, 600) - exact[i, j]) <= bound


def test_thermal_entries_decay_with_distance():
    exact = exact_reference(H64, "thermal", beta=1.0)
    assert abs(exact[20, 50]) < 1e-6
    v = local_thermal_entry(CHAIN64, 1.0, 20, 50, 200)
    assert abs(v) < 1e-6


def test_thermal_light_cone_zero():
    # a degree-K series cannot connect sites farther than K apart
    assert local_thermal_entry(CHAIN64, 2.0, 0, 40, 30) == 0


def test_thermal_work_counter():
    v, work = local_thermal_entry(CHAIN64, 1.0, 5, 6, 20, with_work=True)
    assert work > 0
    state = chebyshev_vectors(CHAIN64, 5, 20)
    assert state.entry_calls == work
    # on the uniform chain T_k(h/2)|j> = (|j+k> + |j-k>)/2 away from the ends
    assert state.support_sizes[10] == 2


def test_dynamics_t_zero():
    M0 = site_projector(7)
    assert local_dynamics_entry(CHAIN64, M0, 0.0, 7, 7, 5) == 1
    assert local_dynamics_entry(CHAIN64, M0, 0.0, 7, 8, 5) == 0


def test_dynamics_chain32_t4():
    o = build_tight_binding(chain_spec(32))
    h = materialize(o)
    M0 = np.zeros((32, 32))
    M0[15, 15] = 1
    exact = expm(4j * h) @ M0 @ expm(-4j * h)
    for i, j in [(15, 15), (14, 17), (10, 20)]:
        v = local_dynamics_entry(o, site_projector(15), 4.0, i, j, 60)
        assert abs(v - exact[i, j]) < 1e-8
        assert abs(v - exact[i, j]) <= dynamics_entry_bound(4.0, 2.0, 60)["rigorous"] + 1e-14


def test_dynamics_light_cone_zero():
    o = build_tight_binding(chain_spec(64))
    assert local_dynamics_entry(o, site_projector(10), 1.0, 40, 40, 12) == 0
    assert local_dynamics_entry(o, site_projector(10), 1.0, 22, 10, 12) != 0


def test_dynamics_bounds():
    b = dynamics_entry_bound(2.0, 1.0, 16)
    assert b["instantiated"] == pytest.approx((2 / 4) ** 17)
    assert dynamics_entry_bound(0.0, 2.0, 5) == {"instantiated": 0.0, "rigorous": 0.0}


def test_support_growth_chain():
    sizes = support_growth(build_tight_binding(chain_spec(64)), 32, 20)
    assert all(s <= 2 * k + 1 for k, s in enumerate(sizes))
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))
    # bipartite chain: h^k|j> lives on the k+1 sites of matching parity
    assert sizes == list(range(1, 22))


def test_support_growth_square():
    sizes = support_growth(build_tight_binding(square_spec((32, 32))), 16 * 32 + 16, 12)
    assert all(s <= (2 * k + 1) ** 2 for k, s in enumerate(sizes))
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))


def test_support_growth_margulis():
    o = build_margulis(8)
    sizes = support_growth(o, 0, 6)
    assert sizes == bfs_ball_sizes(o, 0, 6)
    assert sizes[6] >= 32
