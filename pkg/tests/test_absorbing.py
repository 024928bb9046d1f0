import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from batchedmg import (
    ConfigurationError,
    ContractError,
    CountTable,
    DataError,
    EstimatedModel,
    InfrequentSet,
    build_absorbing,
    check_multiplicative_accuracy,
    estimate_transition,
)
from batchedmg.absorbing import estimate_all
from batchedmg.solving import occupancy, pair_values

from conftest import random_game, random_policies

DIMS = (1, 2, 1, 1)


def counts(row, dims=DIMS, h=0, s=0):
    H, S, A, B = dims
    n4 = np.zeros((H, S, A, B, S), dtype=int)
    n4[h, s, 0, 0] = row
    return CountTable(n4)


# ---------------------------------------------------------------- infrequent set


def test_infrequent_set_mask_roundtrip():
    f = InfrequentSet((2, 2, 2, 2), [(1, 0, 1, 0, 1)])
    assert (1, 0, 1, 0, 1) in f and len(f) == 1
    assert InfrequentSet.from_mask(f.mask) == f
    g = f.union(InfrequentSet((2, 2, 2, 2), [(0, 0, 0, 0, 0)]))
    assert f.issubset(g) and not g.issubset(f)
    with pytest.raises(ConfigurationError):
        InfrequentSet((2, 2, 2, 2), [(2, 0, 0, 0, 0)])


# ---------------------------------------------------------------- construction


def test_build_absorbing_redirects_mass():
    rng = np.random.default_rng(0)
    g = random_game(rng, H=1, S=3, A=1, B=1)
    p = g.transition[0, 0, 0, 0]
    m = build_absorbing(g, InfrequentSet(g.dims, [(0, 0, 0, 0, 1)]))
    row = m.transition[0, 0, 0, 0]
    assert row[1] == 0.0 and row[3] == pytest.approx(p[1])
    assert np.allclose(row[[0, 2]], p[[0, 2]])
    assert np.allclose(m.transition[:, 3, :, :, 3], 1.0)


def test_build_absorbing_empty_and_full():
    g = random_game(np.random.default_rng(1), H=2, S=2)
    assert np.allclose(build_absorbing(g, InfrequentSet(g.dims)).transition[:, :2, :, :, :2], g.transition)
    full = build_absorbing(g, InfrequentSet.from_mask(np.ones((2, 2, 2, 2, 2), bool)))
    assert np.allclose(full.transition[..., 2], 1.0)


def test_invalid_model_rejected():
    P = np.zeros((1, 3, 1, 1, 3))
    P[0, :, 0, 0, 2] = 1.0
    EstimatedModel(P, InfrequentSet(DIMS))
    bad = P.copy()
    bad[0, 0, 0, 0] = [0.5, 0.0, 0.0]
    with pytest.raises(ConfigurationError):
        EstimatedModel(bad, InfrequentSet(DIMS))
    leaky = P.copy()
    leaky[0, 2, 0, 0] = [1.0, 0.0, 0.0]  # absorbing state must loop
    with pytest.raises(ConfigurationError):
        EstimatedModel(leaky, InfrequentSet(DIMS))


# ---------------------------------------------------------------- estimation


def test_estimate_plain_frequencies():
    m = estimate_transition(counts([7, 3]), InfrequentSet(DIMS), 0, EstimatedModel.uniform(DIMS))
    assert np.allclose(m.transition[0, 0, 0, 0], [0.7, 0.3, 0.0])


def test_estimate_with_infrequent_target():
    f = InfrequentSet(DIMS, [(0, 0, 0, 0, 1)])
    m = estimate_transition(counts([7, 3]), f, 0, EstimatedModel.uniform(DIMS, f))
    assert np.allclose(m.transition[0, 0, 0, 0], [0.7, 0.0, 0.3])


def test_unvisited_row_is_absorbing_point_mass():
    m = estimate_transition(counts([0, 0]), InfrequentSet(DIMS), 0, EstimatedModel.uniform(DIMS))
    assert np.allclose(m.transition[0, 0, 0, 0], [0.0, 0.0, 1.0])


def test_negative_counts_rejected():
    with pytest.raises(DataError):
        counts([-1, 2])
    n4 = np.zeros((1, 2, 1, 1, 2))
    n4[0, 0, 0, 0] = [0.5, 2]
    with pytest.raises(DataError):
        CountTable(n4)


def test_other_layers_untouched():
    dims = (3, 2, 1, 1)
    base = EstimatedModel.uniform(dims)
    m = estimate_transition(counts([4, 1], dims, h=1), InfrequentSet(dims), 1, base)
    assert np.array_equal(m.transition[0], base.transition[0])
    assert np.array_equal(m.transition[2], base.transition[2])
    assert np.allclose(m.transition[1, 0, 0, 0], [0.8, 0.2, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_estimate_rows_stochastic_and_idempotent(seed):
    rng = np.random.default_rng(seed)
    dims = (2, 3, 2, 2)
    data = CountTable(rng.integers(0, 4, size=(2, 3, 2, 2, 3)))
    f = InfrequentSet.from_mask(rng.random((2, 3, 2, 2, 3)) < 0.2)
    m1 = estimate_all(data, f, EstimatedModel.uniform(dims, f))
    assert np.allclose(m1.transition.sum(-1), 1.0)
    assert np.all(m1.transition[:, :3, :, :, :3][f.mask] == 0.0)
    m2 = estimate_all(data, f, m1)
    assert np.array_equal(m1.transition, m2.transition)


def test_json_roundtrip():
    g = random_game(np.random.default_rng(2))
    m = build_absorbing(g, InfrequentSet(g.dims, [(0, 1, 0, 1, 0)]))
    back = EstimatedModel.from_json(m.to_json())
    assert np.array_equal(back.transition, m.transition) and back.infrequent == m.infrequent


# ---------------------------------------------------------------- accuracy check


def test_accuracy_identity_and_violation():
    g = random_game(np.random.default_rng(3), H=1, S=2, A=1, B=1)
    f = InfrequentSet(g.dims)
    m = build_absorbing(g, f)
    rep = check_multiplicative_accuracy(m, m, 0.5)
    assert rep.ok and rep.worst_ratio == 0.0 and rep.n_checked == 4
    P = np.array(m.transition)
    P[0, 0, 0, 0, :2] *= [1.5, 0.0]
    P[0, 0, 0, 0, 2] = 1.0 - P[0, 0, 0, 0, :2].sum()
    bad = EstimatedModel(P, f)
    ok, worst, violations = check_multiplicative_accuracy(m, bad, 0.4)
    assert not ok and set(violations) == {(0, 0, 0, 0, 0), (0, 0, 0, 0, 1)}
    assert worst == pytest.approx(1.0)


def test_accuracy_mismatched_sets_is_contract_error():
    g = random_game(np.random.default_rng(4))
    a = build_absorbing(g, InfrequentSet(g.dims))
    b = build_absorbing(g, InfrequentSet(g.dims, [(0, 0, 0, 0, 0)]))
    with pytest.raises(ContractError):
        check_multiplicative_accuracy(a, b, 0.5)


# ---------------------------------------------------------------- properties


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_absorbing_visitation_never_exceeds_true(seed):
    rng = np.random.default_rng(seed)
    g = random_game(rng, H=3, S=3)
    f = InfrequentSet.from_mask(rng.random((3, 3, 2, 2, 3)) < 0.3)
    mu, nu = random_policies(rng, 3, 3, 2, 2)
    d_true = occupancy(build_absorbing(g, InfrequentSet(g.dims)), mu, nu)[:, :3]
    d_abs = occupancy(build_absorbing(g, f), mu, nu)[:, :3]
    assert np.all(d_abs <= d_true + 1e-12)


def _perturb(model: EstimatedModel, theta, rng) -> EstimatedModel:
    """Scale every original entry by a factor in [1 - theta, 1 + theta], s† takes the rest."""
    S = model.n_states
    P = np.array(model.transition)
    orig = P[:, :S, :, :, :S]
    u = rng.uniform(1 - theta, 1 + theta, size=orig.shape)
    over = (orig * u).sum(-1) > 1.0
    u[over] = np.minimum(u[over], 1.0)
    orig *= u
    P[:, :S, :, :, S] = 1.0 - orig.sum(-1)
    return EstimatedModel(P, model.infrequent, model.initial_state)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 4))
def test_accurate_models_sandwich_values(seed, H):
    rng = np.random.default_rng(seed)
    g = random_game(rng, H=H, S=2)
    f = InfrequentSet.from_mask(rng.random((H, 2, 2, 2, 2)) < 0.2)
    p1 = build_absorbing(g, f)
    p2 = _perturb(p1, 1.0 / H, rng)
    assert check_multiplicative_accuracy(p1, p2, 1.0 / H).ok
    mus = np.stack([random_policies(rng, H, 2, 2, 2)[0].dist for _ in range(8)])
    nus = np.stack([random_policies(rng, H, 2, 2, 2)[1].dist for _ in range(8)])
    r = rng.random((H, 2, 2, 2))
    v1, v2 = pair_values(p1, r, mus, nus), pair_values(p2, r, mus, nus)
    assert np.all(v1 / 4 <= v2 + 1e-12) and np.all(v2 <= 3 * v1 + 1e-12)
