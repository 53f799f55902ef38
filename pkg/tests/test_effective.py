from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsym import (
    CLOCK,
    PAULI,
    BranchAmbiguity,
    DriveSequence,
    IllConditionedFit,
    OperatorExpr,
    Segment,
    TruncationUnsupported,
    build_kicked,
    build_recursive,
    build_shortened_level2,
    build_two_block_14,
    clock_term,
    commutator,
    pauli_sum,
    sigma,
)
from hsym.effective import (
    EffectiveSeries,
    bch_symbolic,
    default_t_grid,
    extract_orders,
    matrix_log_effective,
    order_accuracy_slope,
    projection_coefficient,
    series_residual,
)


def rand_op(rng, L, n=4):
    terms = []
    for _ in range(n):
        sites = {
            int(s): "xyz"[rng.integers(3)]
            for s in rng.choice(L, min(2, L), replace=False)
        }
        terms.append((float(rng.normal()), sites))
    return pauli_sum(L, terms)


def echo_pair_sequence(h, k, l_prev=4):
    """exp(-iK l T) exp(-iHT) exp(+iK l T) exp(-iHT), normalized by 2l+2."""
    return DriveSequence(
        "echo-pair",
        0.1,
        (
            Segment("K", 1.0, Fraction(l_prev)),
            Segment("H", 1.0, Fraction(1)),
            Segment("K", -1.0, Fraction(l_prev)),
            Segment("H", 1.0, Fraction(1)),
        ),
        {"K": k, "H": h},
        q_duration_periods=Fraction(2 * l_prev + 2),
    )


def worst_order_mismatch(seq, M):
    sym = bch_symbolic(seq, M)
    num = extract_orders(seq, M)
    worst = 0.0
    for m in range(M + 1):
        a = sym.operator(m).to_dense()
        b = num.operator(m)
        scale = max(np.linalg.norm(a), 1e-12)
        worst = max(worst, np.linalg.norm(a - b) / scale)
    return worst


# ----------------------------------------------------------------------
# symbolic route
# ----------------------------------------------------------------------

def test_echo_pair_matches_closed_form_coefficients(rng):
    L = 3
    h = rand_op(rng, L)
    k = rand_op(rng, L)
    seq = echo_pair_sequence(h, k, l_prev=4)
    series = bch_symbolic(seq, 2)
    q0, q1, q2 = series.order_operators()
    assert q0.allclose(h * 0.2)
    assert q1.allclose(commutator(h, k) * (1j * 0.4))
    expected_q2 = (
        commutator(h, commutator(h, k)) + commutator(k, commutator(k, h)) * 4.0
    ) * (-0.2)
    assert q2.allclose(expected_q2)


def test_echo_pair_coefficients_scale_with_inner_length(rng):
    L = 3
    h = rand_op(rng, L)
    k = rand_op(rng, L)
    for l_prev in (1, 4, 10):
        l_n = 2 * l_prev + 2
        series = bch_symbolic(echo_pair_sequence(h, k, l_prev), 1)
        assert series.operator(0).allclose(h * (2.0 / l_n))
        assert series.operator(1).allclose(commutator(h, k) * (1j * l_prev / l_n))


def test_single_segment_is_exact(rng):
    h = rand_op(rng, 2)
    seq = DriveSequence(
        "one", 0.2, (Segment("H", 1.0, Fraction(1)),), {"H": h}
    )
    series = bch_symbolic(seq, 2)
    assert series.operator(0).allclose(h)
    assert series.operator(1).n_terms == 0
    assert series.operator(2).n_terms == 0
    q = matrix_log_effective(seq, 0.2)
    assert np.allclose(q, h.to_dense(), atol=1e-12)


def test_commuting_segments_truncate_to_weighted_mean():
    L = 2
    a = pauli_sum(L, [(0.8, {0: "z"})])
    b = pauli_sum(L, [(0.5, {1: "z"}), (0.2, {0: "z", 1: "z"})])
    seq = DriveSequence(
        "commuting",
        0.3,
        (Segment("A", 1.0, Fraction(3)), Segment("B", -1.0, Fraction(1))),
        {"A": a, "B": b},
    )
    series = bch_symbolic(seq, 2)
    assert series.operator(0).allclose((a * 3.0 - b) * 0.25)
    assert series.operator(1).n_terms == 0
    assert series.operator(2).n_terms == 0
    numeric = extract_orders(seq, 2)
    assert np.linalg.norm(numeric.operator(1)) < 1e-10
    assert np.linalg.norm(numeric.operator(2)) < 1e-9


def test_truncation_cap():
    h = pauli_sum(1, [(1.0, {0: "x"})])
    seq = DriveSequence("one", 0.1, (Segment("H", 1.0, Fraction(1)),), {"H": h})
    with pytest.raises(TruncationUnsupported):
        bch_symbolic(seq, 4)
    with pytest.raises(ValueError):
        bch_symbolic(seq, -1)


def test_kicked_sequences_rejected():
    L = 2
    h = clock_term(L, 0.3, {0: (2, 0)})
    px = OperatorExpr.from_sites(CLOCK, L, 1.0, {i: "z0x1" for i in range(L)})
    seq = build_kicked([("H0", h, 1)], ("PX", px), T=0.2, label="k",
                       fraction=Fraction(1))
    with pytest.raises(ValueError):
        bch_symbolic(seq, 1)
    with pytest.raises(ValueError):
        extract_orders(seq, 1, T_grid=[0.1, 0.2, 0.3])


def test_q0_hermitian(rng):
    seq = build_recursive(
        [("H0", rand_op(rng, 2)), ("H1", rand_op(rng, 2))], T=0.2
    )
    q0 = bch_symbolic(seq, 0).operator(0)
    assert q0.is_hermitian(tol=1e-12)
    q0_num = extract_orders(seq, 0).operator(0)
    assert np.allclose(q0_num, q0_num.conj().T, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    signs=st.lists(st.sampled_from([-1.0, 1.0]), min_size=1, max_size=5),
    fracs=st.lists(st.fractions(min_value=Fraction(1, 8), max_value=4),
                   min_size=5, max_size=5),
)
def test_bch_degree_one_matches_duration_weighted_sum(signs, fracs):
    rng = np.random.default_rng(11)
    ops = [rand_op(rng, 2) for _ in range(3)]
    segs = tuple(
        Segment(f"H{i % 3}", s, Fraction(f))
        for i, (s, f) in enumerate(zip(signs, fracs))
    )
    seq = DriveSequence(
        "prop", 0.1, segs, {f"H{i}": ops[i] for i in range(3)}
    )
    assert bch_symbolic(seq, 0).operator(0).allclose(seq.leading_order())


# ----------------------------------------------------------------------
# numeric route
# ----------------------------------------------------------------------

def test_identity_sequence_gives_zero_operator():
    z = OperatorExpr.zero(PAULI, 2)
    seq = DriveSequence("null", 0.3, (Segment("H", 1.0, Fraction(1)),), {"H": z})
    q = matrix_log_effective(seq, 0.3)
    assert np.linalg.norm(q) < 1e-12


def test_branch_ambiguity_raised_at_cut():
    h = pauli_sum(1, [(1.0, {0: "z"})])
    seq = DriveSequence("spin", 1.0, (Segment("H", 1.0, Fraction(1)),), {"H": h})
    with pytest.raises(BranchAmbiguity):
        matrix_log_effective(seq, np.pi)


def test_single_qubit_echo_leading_order():
    h0 = pauli_sum(1, [(1.0, {0: "x"})])
    h1 = pauli_sum(1, [(1.0, {0: "z"})])
    seq = build_recursive([("H0", h0), ("H1", h1)], T=1e-3)
    target = h1.to_dense() / 2.0
    errs = []
    for t in (2e-3, 1e-3, 5e-4):
        errs.append(np.linalg.norm(matrix_log_effective(seq, t) - target))
    assert errs[1] < 2e-3
    # first-order convergence toward the closed-form leading term
    assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.2)


def test_echo_cancels_base_generator_in_q0(rng):
    h0 = pauli_sum(2, [(1.0, {0: "x"}), (1.0, {1: "x"})])
    h1 = rand_op(rng, 2)
    seq = build_recursive([("H0", h0), ("H1", h1)], T=0.1)
    q0 = extract_orders(seq, 0).operator(0)
    coeff = projection_coefficient(q0, h0.to_dense())
    assert abs(coeff) < 1e-10


@pytest.mark.parametrize("M", [0, 1, 2, 3])
def test_order_of_accuracy(rng, M):
    seq = build_recursive(
        [("H0", rand_op(rng, 2)), ("H1", rand_op(rng, 2))], T=0.1
    )
    ts = np.geomspace(0.02, 0.2, 8)
    slope = order_accuracy_slope(seq, M, ts)
    assert slope == pytest.approx(M + 1, abs=0.15)


def test_dual_route_agreement(rng):
    L = 3
    h = [rand_op(rng, L) for _ in range(4)]
    cases = [
        build_recursive(list(zip("ABC", h)), T=0.1),
        build_two_block_14(*h, T=0.1, label="tb"),
        echo_pair_sequence(h[0], h[1]),
    ]
    for seq in cases:
        assert worst_order_mismatch(seq, 2) < 1e-8


def test_dual_route_agreement_shortened_level2():
    L = 4
    h0 = pauli_sum(L, [(1.0, {0: "z", 1: "z"})])
    h1 = pauli_sum(L, [(0.8, {2: "x", 3: "x"}), (0.5, {2: "z"})])
    h2 = pauli_sum(L, [(0.5, {2: "z", 3: "z"}), (0.7, {3: "y"})])
    seq = build_shortened_level2(h0, h1, h2, T=0.1)
    assert worst_order_mismatch(seq, 2) < 1e-8


def test_series_residual_vanishes_when_exact(rng):
    h = rand_op(rng, 2)
    seq = DriveSequence("one", 0.2, (Segment("H", 1.0, Fraction(1)),), {"H": h})
    series = bch_symbolic(seq, 1)
    assert series_residual(seq, series, 0.2) < 1e-12


def test_extract_orders_grid_validation(rng):
    seq = build_recursive([("H0", rand_op(rng, 2))], T=0.1)
    with pytest.raises(ValueError):
        extract_orders(seq, 2, T_grid=[0.1, 0.2])
    with pytest.raises(ValueError):
        extract_orders(seq, 1, T_grid=[-0.1, 0.1, 0.2])


def test_ill_conditioned_grid_rejected(rng):
    seq = build_recursive([("H0", rand_op(rng, 2)), ("H1", rand_op(rng, 2))], T=0.1)
    grid = [0.1, 0.1 * (1 + 1e-12), 0.1 * (1 + 2e-12), 0.1 * (1 + 3e-12), 0.1 * (1 + 4e-12)]
    with pytest.raises(IllConditionedFit):
        extract_orders(seq, 2, T_grid=grid)


def test_default_grid_is_geometric_decade(rng):
    seq = build_recursive([("H0", rand_op(rng, 2)), ("H1", rand_op(rng, 2))], T=0.1)
    grid = default_t_grid(seq)
    assert len(grid) == 9
    ratios = [grid[i] / grid[i + 1] for i in range(len(grid) - 1)]
    assert np.allclose(ratios, ratios[0])
    assert grid[0] / grid[-1] == pytest.approx(10.0)


# ----------------------------------------------------------------------
# series container
# ----------------------------------------------------------------------

def test_series_evaluate_and_json(rng):
    seq = build_recursive([("H0", rand_op(rng, 2)), ("H1", rand_op(rng, 2))], T=0.1)
    sym = bch_symbolic(seq, 1)
    num = extract_orders(seq, 1)
    t = 0.05
    dense_sum = sym.operator(0).to_dense() + sym.operator(1).to_dense() * t
    assert np.allclose(sym.evaluate(t), dense_sum, atol=1e-14)

    data = sym.to_json_dict()
    assert data["truncation"] == 1
    assert data["source"] == "bch"
    assert "operator" in data["orders"][0]

    data_num = num.to_json_dict()
    assert data_num["source"] == "matrix-log"
    assert "dense_re" in data_num["orders"][0]

    with pytest.raises(KeyError):
        sym.operator(5)


def test_series_total_duration_tracks_normalization(rng):
    h = [rand_op(rng, 2) for _ in range(4)]
    tb = build_two_block_14(*h, T=0.7, label="tb")
    series = bch_symbolic(tb, 0)
    assert series.total_duration == pytest.approx(0.7)
    rec = build_recursive(list(zip("AB", h)), T=0.7)
    assert bch_symbolic(rec, 0).total_duration == pytest.approx(4 * 0.7)
