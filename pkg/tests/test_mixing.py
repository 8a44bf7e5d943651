import numpy as np
import pytest

from decentgrad.graph import Topology, build_complete, build_random_connected, build_ring
from decentgrad.mixing import (
    contraction_factor,
    from_array,
    laplacian_weights,
    metropolis,
    mixing_from_config,
    projections,
    validate,
)

TOL = 1e-12


def sample_topologies():
    tops = [build_ring(d) for d in (2, 3, 4, 8, 13)]
    tops += [build_complete(d) for d in (2, 3, 5, 9)]
    tops += [build_random_connected(2 + s % 15, 0.3, seed=s) for s in range(8)]
    return tops


def test_metropolis_ring4_entries():
    w = metropolis(build_ring(4)).entries
    # all degrees 2, so neighbor weights and diagonals are all 1/3
    expected = np.array(
        [
            [1 / 3, 1 / 3, 0.0, 1 / 3],
            [1 / 3, 1 / 3, 1 / 3, 0.0],
            [0.0, 1 / 3, 1 / 3, 1 / 3],
            [1 / 3, 0.0, 1 / 3, 1 / 3],
        ]
    )
    np.testing.assert_allclose(w, expected, atol=TOL)


def test_metropolis_single_edge():
    w = metropolis(build_ring(2)).entries
    np.testing.assert_array_equal(w, np.array([[0.5, 0.5], [0.5, 0.5]]))


def test_metropolis_requires_connected():
    with pytest.raises(ValueError):
        metropolis(Topology(3, frozenset({(0, 1)})))


def test_contraction_ring4_exact():
    # circulant eigenvalues 1/3 + (2/3)cos(2*pi*k/4): nonprincipal moduli {1/3}
    assert metropolis(build_ring(4)).contraction == pytest.approx(1 / 3, abs=1e-10)


def test_contraction_ring8_circulant_formula():
    expected = (1 + 2 * np.cos(np.pi / 4)) / 3
    assert metropolis(build_ring(8)).contraction == pytest.approx(expected, abs=1e-10)


def test_contraction_uniform_complete_is_zero():
    # metropolis on the complete graph gives the exact averaging matrix P
    for d in (2, 3, 6):
        w = metropolis(build_complete(d))
        np.testing.assert_allclose(w.entries, np.full((d, d), 1.0 / d), atol=TOL)
        assert w.contraction == pytest.approx(0.0, abs=1e-12)


def test_laplacian_matches_metropolis_on_ring4():
    a = laplacian_weights(build_ring(4), 1 / 3).entries
    b = metropolis(build_ring(4)).entries
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_laplacian_single_edge_half():
    w = laplacian_weights(build_ring(2), 0.5).entries
    np.testing.assert_array_equal(w, np.array([[0.5, 0.5], [0.5, 0.5]]))


def test_laplacian_epsilon_bounds():
    t = build_ring(4)
    for eps in (0.0, 0.5, -0.1, 1.0):
        with pytest.raises(ValueError):
            laplacian_weights(t, eps)
    # shrinking epsilon drives the matrix to the identity and contraction to 1
    w = laplacian_weights(t, 1e-6)
    np.testing.assert_allclose(w.entries, np.eye(4), atol=1e-5)
    assert w.contraction > 1 - 1e-5


def test_metropolis_equals_laplacian_on_regular_graphs():
    # on a deg-regular graph, metropolis == I - L/(1+deg)
    for d in range(3, 11):
        t = build_ring(d)
        eps = 1.0 / (1 + 2)
        np.testing.assert_allclose(
            metropolis(t).entries, laplacian_weights(t, eps).entries, atol=1e-14
        )


@pytest.mark.parametrize("builder", ["metropolis", "laplacian"])
def test_builder_invariants(builder):
    for t in sample_topologies():
        if builder == "metropolis":
            w = metropolis(t)
        else:
            w = laplacian_weights(t, 0.75 / t.degrees().max())
        arr = w.entries
        d = t.num_agents
        ones = np.ones(d)
        assert np.max(np.abs(arr @ ones - ones)) <= TOL
        assert np.max(np.abs(ones @ arr - ones)) <= TOL
        assert validate(arr, t).passed
        assert w.contraction < 1.0
        # identity used in the disagreement decay argument
        _, p_perp = projections(d)
        np.testing.assert_allclose(p_perp @ arr @ p_perp, arr @ p_perp, atol=TOL)


def test_validate_identity_vs_ring():
    report = validate(np.eye(4), build_ring(4))
    by_name = {c.name: c.passed for c in report.checks}
    assert by_name["sparsity"]  # no forbidden nonzeros
    assert not by_name["simple_unit_eigenvalue"]  # eigenvalue 1 has multiplicity 4
    assert contraction_factor(np.eye(4)) == pytest.approx(1.0)


def test_validate_negative_entry():
    w = metropolis(build_ring(4)).entries.copy()
    w[0, 1] = -0.1
    w[1, 0] = -0.1
    report = validate(w, build_ring(4))
    assert not {c.name: c.passed for c in report.checks}["nonnegativity"]


def test_validate_metropolis_ring8_all_pass():
    t = build_ring(8)
    assert validate(metropolis(t).entries, t).passed


def test_validate_off_pattern_entry():
    t = build_ring(4)
    w = np.full((4, 4), 0.25)  # doubly stochastic but ignores sparsity
    report = validate(w, t)
    assert not {c.name: c.passed for c in report.checks}["sparsity"]


def test_from_array_rejects_invalid():
    t = build_ring(4)
    with pytest.raises(ValueError):
        from_array(np.eye(4), t)
    w = from_array(metropolis(t).entries, t)
    assert w.contraction == pytest.approx(1 / 3, abs=1e-10)


def test_entries_are_immutable():
    w = metropolis(build_ring(4))
    with pytest.raises(ValueError):
        w.entries[0, 0] = 0.9


def test_csv_round_trip(tmp_path):
    w = metropolis(build_ring(5))
    path = tmp_path / "w.csv"
    w.save_csv(path)
    back = np.array(
        [[float(v) for v in line.split(",")] for line in path.read_text().strip().splitlines()]
    )
    np.testing.assert_array_equal(back, w.entries)


def test_single_agent_matrix():
    t = Topology(1, frozenset())
    w = metropolis(t)
    np.testing.assert_array_equal(w.entries, np.array([[1.0]]))
    assert w.contraction == 0.0


def test_mixing_from_config():
    t = build_ring(4)
    np.testing.assert_array_equal(
        mixing_from_config(t, {"kind": "metropolis"}).entries, metropolis(t).entries
    )
    np.testing.assert_array_equal(
        mixing_from_config(t, {"kind": "laplacian", "epsilon": 0.25}).entries,
        laplacian_weights(t, 0.25).entries,
    )
    with pytest.raises(ValueError):
        mixing_from_config(t, {"kind": "magic"})
