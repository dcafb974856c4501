import json

import numpy as np
import pytest

from gigaqbx.expansions import truncation_bound
from gigaqbx.experiments import green_density, green_setup
from gigaqbx.fmm import (CostLedger, Density, FmmConfig, GeometryBundle, build_geometry_tree,
                         direct_qbx, execute, list_entry_cost, modeled_flops)
from gigaqbx.fmm.cost import LIST_COST_NAMES
from gigaqbx.fmm.io import write_ledger, write_potentials
from gigaqbx.kernels import SourceEnsemble, direct_sum
from gigaqbx.mesh import gen_sphere
from gigaqbx.tree.lists import build_lists
from gigaqbx.tree.octree import build_tree


@pytest.fixture(scope="module")
def sphere():
    return green_setup(gen_sphere(1.0, 1, 4), 11)


def point_bundle(sources, normals, weights, targets):
    return GeometryBundle(np.asarray(sources, float), np.asarray(normals, float),
                          np.asarray(weights, float), np.zeros((0, 3)), np.zeros(0),
                          np.asarray(targets, float), np.full(len(targets), -1))


# {{{ cost model

def test_one_u_pair_costs_500(rng):
    tree = build_tree(rng.random((10, 3)), rng.random((2, 3)))
    led = modeled_flops(build_lists(tree), tree, 15, 5)
    assert led.lists["U"] == {"entries": 1, "n_s": 10, "n_t": 2, "flops": 500}
    assert led.list_total == 500


def test_empty_tree_costs_nothing():
    tree = build_tree(np.zeros((0, 3)))
    led = modeled_flops(build_lists(tree), tree, 15, 5)
    assert led.total == 0 and led.list_total == 0


def test_v_entry_costs_p_cubed():
    assert list_entry_cost("V", 15, 5, 123, 456) == 3375
    led = CostLedger()
    assert led.add("V", 15, 5, 7, 9) == 3375
    assert led.lists["V"]["flops"] == 3375


@pytest.mark.parametrize("name, expect", [("U", 25 * 3 * 4), ("W_close", 25 * 3 * 4),
                                          ("X_close", 25 * 3 * 4), ("V", 1000),
                                          ("W_far", 4000), ("X_far", 300)])
def test_entry_formulas(name, expect):
    assert list_entry_cost(name, 10, 5, 3, 4) == expect


def test_entry_unknown_list():
    with pytest.raises(ValueError):
        list_entry_cost("Y", 1, 1, 1, 1)


@pytest.mark.parametrize("seed", range(5))
def test_ledger_matches_recomputation(seed):
    rng = np.random.default_rng(seed)
    src = rng.random((400, 3))
    ctr = rng.random((60, 3))
    tree = build_tree(src, rng.random((30, 3)), ctr, rng.uniform(0.001, 0.05, 60), n_max=16)
    lists = build_lists(tree, 10 ** 3 / 5 ** 2)
    led = modeled_flops(lists, tree, 10, 5)
    ns = tree.owned_counts("source")
    nt = tree.owned_counts("center") + tree.owned_counts("target")
    total = 0
    for name in LIST_COST_NAMES:
        flops = sum(list_entry_cost(name, 10, 5, ns[x], nt[b])
                    for b in lists.boxes for x in lists.get(name, b))
        assert led.lists[name]["flops"] == flops
        total += flops
    assert led.list_total == total
    list_stages = ("direct_near", "m2l", "list3_far", "list4_far")
    assert sum(led.stages[s] for s in list_stages) == total
    json.dumps(led.to_dict())

# }}}


# {{{ config

def test_config_order_invariant():
    with pytest.raises(ValueError):
        FmmConfig(p_fmm=3, p_qbx=5)
    FmmConfig(p_fmm=3, p_qbx=5, allow_low_fmm_order=True)


@pytest.mark.parametrize("t_f", [-0.1, 2 * np.sqrt(3) - 2, 1.5])
def test_config_tf_invariant(t_f):
    with pytest.raises(ValueError):
        FmmConfig(t_f=t_f)


def test_config_demotion():
    assert FmmConfig(p_fmm=15, p_qbx=5).demotion == 135
    assert FmmConfig(demote_threshold=None).demotion is None

# }}}


# {{{ evaluation

def test_single_far_target(rng):
    s = np.array([[0.1, 0.2, 0.3]])
    t = np.array([[5.0, -4.0, 6.0]])
    b = point_bundle(s, [[0, 0, 1]], [1.0], t)
    den = Density(single=np.array([2.5]))
    ref = direct_sum(SourceEnsemble(s, np.array([2.5])), t)
    assert np.array_equal(direct_qbx(b, den, 5), ref)
    got = execute(b, den, FmmConfig(n_max=1)).potential
    r = np.linalg.norm(t - s)
    assert abs(got[0] - ref[0]) <= 2.5 * truncation_bound("multipole", 0.5 * np.sqrt(3), r, 10) + 1e-15


def test_point_fmm_far_field(rng):
    s = rng.random((300, 3))
    t = rng.random((200, 3)) + [3.0, 0, 0]
    b = point_bundle(s, rng.normal(size=(300, 3)), rng.random(300), t)
    den = Density(single=rng.normal(size=300), double=rng.normal(size=300))
    ref = direct_qbx(b, den, 5)
    got = execute(b, den, FmmConfig(p_fmm=12, n_max=20)).potential
    assert np.abs(got - ref).max() <= 1e-6 * np.abs(ref).max()


def test_zero_density(sphere):
    b = sphere.bundle
    n = b.source_positions.shape[0]
    den = Density(np.zeros(n), np.zeros(n))
    assert not np.any(direct_qbx(b, den, 5))
    res = execute(b, den, FmmConfig())
    assert not np.any(res.potential)
    assert res.ledger.total == 0


def test_flagged_targets_raise(sphere):
    b = sphere.bundle
    bad = GeometryBundle(b.source_positions, b.source_normals, b.source_weights, b.center_positions,
                         b.center_radii, b.targets, b.target_center, np.array([0]))
    den = green_density(b)
    with pytest.raises(ValueError):
        direct_qbx(bad, den, 5)
    with pytest.raises(ValueError):
        execute(bad, den)


def test_superposition(sphere, rng):
    b = sphere.bundle
    n = b.source_positions.shape[0]
    cfg = FmmConfig()
    geo = build_geometry_tree(b, cfg)
    d1 = Density(rng.normal(size=n), rng.normal(size=n))
    d2 = Density(rng.normal(size=n), rng.normal(size=n))
    a, c = 1.7, -0.6
    d12 = Density(a * d1.single + c * d2.single, a * d1.double + c * d2.double)
    u1 = execute(b, d1, cfg, geo).potential
    u2 = execute(b, d2, cfg, geo).potential
    u12 = execute(b, d12, cfg, geo).potential
    assert np.abs(u12 - (a * u1 + c * u2)).max() <= 1e-12 * np.abs(u12).max()


def test_determinism(sphere):
    den = green_density(sphere.bundle)
    a = execute(sphere.bundle, den, FmmConfig()).potential
    b = execute(sphere.bundle, den, FmmConfig()).potential
    assert a.tobytes() == b.tobytes()


def test_geometry_reuse(sphere):
    den = green_density(sphere.bundle)
    cfg = FmmConfig()
    a = execute(sphere.bundle, den, cfg).potential
    b = execute(sphere.bundle, den, cfg, build_geometry_tree(sphere.bundle, cfg)).potential
    assert np.array_equal(a, b)


@pytest.mark.parametrize("norm", ["l2", "linf"])
def test_fmm_gap_within_bound(sphere, norm):
    den = green_density(sphere.bundle)
    ref = direct_qbx(sphere.bundle, den, 5)
    scale = np.abs(den.double).max()
    for p in (5, 10):
        got = execute(sphere.bundle, den, FmmConfig(p_fmm=p, norm=norm, n_max=64)).potential
        assert np.abs(got - ref).max() / scale <= 0.75 ** (p + 1)


def test_fmm_gap_decays(sphere):
    den = green_density(sphere.bundle)
    ref = direct_qbx(sphere.bundle, den, 5)
    gaps = [np.abs(execute(sphere.bundle, den, FmmConfig(p_fmm=p, n_max=64)).potential - ref).max()
            for p in (5, 10, 15)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_demotion_does_not_change_result_much(sphere):
    den = green_density(sphere.bundle)
    a = execute(sphere.bundle, den, FmmConfig(p_fmm=15, n_max=64)).potential
    b = execute(sphere.bundle, den, FmmConfig(p_fmm=15, n_max=64, demote_threshold=None)).potential
    assert np.abs(a - b).max() <= 1e-4 * np.abs(a).max()

# }}}


# {{{ export

def test_writers(tmp_path, sphere):
    den = green_density(sphere.bundle)
    res = execute(sphere.bundle, den, FmmConfig())
    npy, csv_path = write_potentials(str(tmp_path / "pot"), sphere.targets, res.potential)
    assert np.array_equal(np.load(npy), res.potential)
    rows = open(csv_path).read().splitlines()
    assert rows[0] == "x,y,z,potential" and len(rows) == res.potential.size + 1
    assert float(rows[1].split(",")[3]) == res.potential[0]
    path = write_ledger(str(tmp_path / "ledger.json"), res.ledger)
    data = json.load(open(path))
    assert data["total"] == res.ledger.total
    assert data["list_total"] == sum(v["flops"] for v in data["lists"].values())

# }}}
