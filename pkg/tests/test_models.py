"""Model-family tests: generator forms, drive structure, closed-form orders."""

import cmath
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm

from hsym import (
    OperatorExpr,
    SectorEmpty,
    build_generalization2,
    certify_commutes,
    certify_ladder,
    clock_term,
    commutator,
    pauli_sum,
)
from hsym.effective import bch_symbolic, extract_orders
from hsym.models import (
    ClockDisorder,
    ClockParams,
    ClockProduct,
    HaarInSector,
    HotiEdgeProduct,
    HotiEigenstate,
    HotiParams,
    SpinChainParams,
    build_clock_kicked,
    build_hoti,
    build_su2_branch,
    build_su2_random,
    build_u1_floquet,
    build_u1_random,
    cell_index,
    clock_generators,
    clock_ladder,
    corner_density,
    densities_by_cell,
    boundary_density,
    edge_cells,
    edge_density,
    edge_run_cells,
    global_shift,
    hoti_bloch_blocks,
    hoti_generators,
    hoti_symmetry_check,
    parity_z,
    prepare_initial,
    sample_disorder,
    spin_generators,
    su2_ladder,
    tau_sigma,
    total_spin,
    u1_generators,
    u1_ladder,
    unroll_clock_four_periods,
)
from hsym.operators import CLOCK


def dense_unitary(seq, T=None):
    """Direct product-of-exponentials oracle, independent of the library path."""
    T = seq.period if T is None else T
    u = None
    for seg in seq.segments:
        gen = seq.generator(seg.generator)
        mat = gen.to_dense() if isinstance(gen, OperatorExpr) else np.asarray(gen)
        if seg.is_kick:
            factor = mat if seg.sign_coeff > 0 else mat.conj().T
        else:
            factor = expm(-1j * seg.sign_coeff * float(seg.duration_fraction) * T * mat)
        u = factor if u is None else u @ factor
    return u


def rel_diff(got, want):
    if isinstance(want, OperatorExpr):
        return (got - want).coeff_norm() / max(want.coeff_norm(), 1e-300)
    got, want = np.asarray(got), np.asarray(want)
    return np.linalg.norm(got - want) / max(np.linalg.norm(want), 1e-300)


# ----------------------------------------------------------------------
# spin generators
# ----------------------------------------------------------------------

def test_spin_generator_forms_two_sites():
    p = SpinChainParams(L=2, J=1.0, J_prime=3.0, delta_x=2.0, epsilon=0.5)
    gens = spin_generators(p)
    h3 = pauli_sum(2, [(1.0, {0: a, 1: a}) for a in "xyz"])
    assert gens["H3"].allclose(h3)
    h2 = pauli_sum(2, [(3.0, {0: "x", 1: "x"}), (3.0, {0: "y", 1: "y"}),
                       (-3.0, {0: "z", 1: "z"})])
    assert gens["H2"].allclose(h2)
    h1 = pauli_sum(2, [(-3.0, {0: "y", 1: "y"}), (3.0, {0: "z", 1: "z"})])
    assert gens["H1"].allclose(h1)
    assert gens["H0+"].allclose(pauli_sum(2, [(2.5, {i: "x"}) for i in range(2)]))
    assert gens["H0-"].allclose(pauli_sum(2, [(1.5, {i: "x"}) for i in range(2)]))


def test_zero_epsilon_merges_field_branches():
    gens = spin_generators(SpinChainParams(L=3, epsilon=0.0))
    assert gens["H0+"].allclose(gens["H0-"])


def test_field_commutes_with_h1_plus_h2():
    gens = spin_generators(SpinChainParams(L=4))
    for branch in ("H0+", "H0-"):
        comm = commutator(gens[branch], gens["H1"] + gens["H2"])
        assert comm.coeff_norm() < 1e-12


def test_spin_commutant_pattern():
    L = 4
    gens = spin_generators(SpinChainParams(L=L))
    ladder = su2_ladder(L)
    su2, u1, z2, _ = ladder.groups
    assert certify_commutes(gens["H3"], su2).passes
    assert certify_commutes(gens["H2"], u1).passes
    assert not certify_commutes(gens["H2"], su2).passes
    assert certify_commutes(gens["H1"], z2).passes
    assert not certify_commutes(gens["H1"], u1).passes
    assert not certify_commutes(gens["H0+"], z2).passes


def test_periodic_boundary_adds_wrap_bond():
    open_h3 = spin_generators(SpinChainParams(L=4))["H3"]
    per_h3 = spin_generators(SpinChainParams(L=4, boundary="periodic"))["H3"]
    extra = per_h3 - open_h3
    assert extra.allclose(pauli_sum(4, [(1.0, {3: a, 0: a}) for a in "xyz"]))


# ----------------------------------------------------------------------
# spin drives and closed-form orders
# ----------------------------------------------------------------------

def su2_sequence(L=3, T=1.0):
    return build_su2_branch(SpinChainParams(L=L), T, "+")


def test_su2_branch_structure():
    seq = su2_sequence()
    assert seq.n_segments == 14
    assert seq.q_periods == 1
    assert all(s.duration_fraction == Fraction(1, 14) for s in seq.segments)
    assert seq.leading_order().allclose(seq.generator("H3") * (1 / 7), tol=1e-12)
    assert seq.ladder is not None


def test_su2_closed_form_orders():
    seq = su2_sequence()
    h1, h2, h3 = (seq.generator(n) for n in ("H1", "H2", "H3"))
    series = bch_symbolic(seq, 2)
    assert rel_diff(series.operator(0), h3 * (1 / 7)) < 1e-12
    assert rel_diff(series.operator(1), commutator(h2, h3) * (-1j / 98)) < 1e-12
    q2 = (
        commutator(h3, commutator(h1, h2))
        - commutator(h3, commutator(h3, h2))
        - commutator(h2, commutator(h2, h3)) * 2
    ) * (1 / 2744)
    assert rel_diff(series.operator(2), q2) < 1e-12


def test_su2_ladder_certification():
    seq = su2_sequence()
    report = certify_ladder(bch_symbolic(seq, 2), seq.ladder)
    assert report.matches_prediction
    assert report.verdict(0, "SU(2)") == "PASS"
    assert report.verdict(1, "SU(2)") == "FAIL"
    assert report.verdict(1, "U(1)") == "PASS"
    assert report.verdict(2, "U(1)") == "FAIL"
    assert report.verdict(2, "Z2") == "PASS"
    assert report.predicted_first_broken == {0: None, 1: "SU(2)", 2: "U(1)"}


def test_su2_random_drive_branches():
    drive = build_su2_random(SpinChainParams(L=3), 0.5, seed=7)
    assert len(drive.branches) == 2
    assert drive.period == 0.5
    plus, minus = drive.branches
    assert plus.generator("H0").allclose(
        pauli_sum(3, [(16.0, {i: "x"}) for i in range(3)])
    )
    assert minus.generator("H0").allclose(
        pauli_sum(3, [(4.0, {i: "x"}) for i in range(3)])
    )


def test_u1_closed_form_orders():
    seq = build_u1_floquet(SpinChainParams(L=3), 1.0)
    h0, h1, h2 = (seq.generator(n) for n in ("H0", "H1", "H2"))
    series = bch_symbolic(seq, 2)
    assert rel_diff(series.operator(0), h2 * (1 / 3)) < 1e-12
    assert rel_diff(series.operator(1), commutator(h1, h2) * (-1j / 36)) < 1e-12
    q2 = commutator(h0 + h1 - h2, commutator(h1, h2)) * (-1 / 432)
    assert rel_diff(series.operator(2), q2) < 1e-12


def test_u1_ladder_certification():
    seq = build_u1_floquet(SpinChainParams(L=3), 1.0)
    report = certify_ladder(bch_symbolic(seq, 2), seq.ladder)
    assert report.matches_prediction
    assert report.verdict(1, "U(1)") == "FAIL"
    assert report.verdict(1, "Z2") == "PASS"
    assert report.verdict(2, "Z2") == "FAIL"


def test_u1_random_branches_split_at_second_order():
    drive = build_u1_random(SpinChainParams(L=3), 1.0, seed=1)
    plus, minus = drive.branches
    sp, sm = bch_symbolic(plus, 2), bch_symbolic(minus, 2)
    assert rel_diff(sp.operator(0), sm.operator(0)) < 1e-12
    assert rel_diff(sp.operator(1), sm.operator(1)) < 1e-12
    split = (sp.operator(2) - sm.operator(2)).coeff_norm()
    assert split / sp.operator(2).coeff_norm() > 1e-2


# ----------------------------------------------------------------------
# clock chain
# ----------------------------------------------------------------------

def clock_instance(L=3, seed=11):
    p = ClockParams(L=L)
    rng = np.random.default_rng(seed)
    gens, disorder = clock_generators(p, rng=rng)
    return p, gens, disorder


def test_clock_generators_hermitian_and_reproducible():
    p, gens, disorder = clock_instance()
    for name in ("H0", "H1"):
        mat = gens[name].to_dense()
        assert np.linalg.norm(mat - mat.conj().T) < 1e-12
    gens2, disorder2 = clock_generators(p, rng=np.random.default_rng(11))
    assert disorder == disorder2
    assert gens["H1"].allclose(gens2["H1"])
    rebuilt = ClockDisorder.from_json_dict(disorder.to_json_dict())
    gens3, _ = clock_generators(p, disorder=rebuilt)
    assert gens["H1"].allclose(gens3["H1"])


def test_clock_degenerate_ranges_are_deterministic():
    p = ClockParams(
        L=2, j_range=(1.0, 1.0), g_range=(0.2, 0.2),
        h_range=(0.4, 0.4), b_range=(1.5, 1.5), eta=0.0,
    )
    _, disorder = clock_generators(p, rng=np.random.default_rng(0))
    assert disorder.j == (1.0,)
    assert disorder.g == (0.2, 0.2)
    assert disorder.h == (0.4, 0.4)
    assert disorder.b == (1.5, 1.5)


def test_clock_disorder_within_ranges():
    p = ClockParams(L=5)
    disorder = sample_disorder(p, np.random.default_rng(3))
    assert all(0.5 <= j < 1.5 for j in disorder.j)
    assert all(0.0 <= g < 0.3 for g in disorder.g)
    assert all(0.0 <= h < 0.6 for h in disorder.h)
    assert all(0.0 <= b < 2.5 for b in disorder.b)


def test_clock_symmetry_pattern():
    p, gens, _ = clock_instance()
    px = global_shift(p.L, 1)
    px2 = global_shift(p.L, 2)
    assert commutator(gens["H1"], px2).coeff_norm() < 1e-12
    assert commutator(gens["H1"], px).coeff_norm() > 1e-3
    assert commutator(gens["H0"], px).coeff_norm() > 1e-3
    assert commutator(gens["H0"], px2).coeff_norm() > 1e-3
    # with the on-site Z^2 term switched off the full shift symmetry returns
    p0 = ClockParams(L=3, h_range=(0.0, 0.0))
    gens0, _ = clock_generators(p0, rng=np.random.default_rng(5))
    assert commutator(gens0["H1"], px).coeff_norm() < 1e-12


def test_clock_kicked_structure():
    p = ClockParams(L=2)
    seq, _ = build_clock_kicked(p, 0.5, rng=np.random.default_rng(2))
    assert seq.n_segments == 5
    names = [s.generator for s in seq.segments]
    assert names == ["H0", "H1", "H0", "H1", "PX"]
    signs = [s.sign_coeff for s in seq.segments[:4]]
    assert signs == [-1.0, 1.0, 1.0, 1.0]
    assert all(s.duration_fraction == Fraction(1, 4) for s in seq.segments[:4])
    assert seq.segments[-1].is_kick
    assert seq.q_periods == 1


def test_unroll_matches_four_kicked_periods():
    p = ClockParams(L=2)
    seq, _ = build_clock_kicked(p, 0.37, rng=np.random.default_rng(8))
    unrolled = unroll_clock_four_periods(seq)
    assert unrolled.n_segments == 16
    assert not any(s.is_kick for s in unrolled.segments)
    assert unrolled.q_periods == 4
    u1 = dense_unitary(seq)
    u4 = np.linalg.matrix_power(u1, 4)
    assert np.linalg.norm(dense_unitary(unrolled) - u4) < 1e-12


def clock_q0_expected(p, disorder):
    L = p.L
    out = OperatorExpr.zero(CLOCK, L)
    chi = p.eta * cmath.exp(1j * p.phi)
    for (i, j), J in zip(p.bonds, disorder.j):
        out = out + clock_term(L, 0.5 * J, {i: (2, 0), j: (2, 0)})
        out = out - clock_term(L, 0.5 * J * chi, {i: (3, 0), j: (1, 0)})
        out = out - clock_term(L, 0.5 * J * chi.conjugate(), {i: (1, 0), j: (3, 0)})
    for i, g in enumerate(disorder.g):
        out = out + clock_term(L, 0.5 * g, {i: (0, 2)})
    for i, h in enumerate(disorder.h):
        out = out - clock_term(L, 0.25 * h, {i: (0, 1)})
        out = out - clock_term(L, 0.25 * h, {i: (0, 3)})
    return out


def clock_q1_expected(p, disorder):
    L = p.L
    out = OperatorExpr.zero(CLOCK, L)
    for i, h in enumerate(disorder.h):
        z2 = clock_term(L, 1.0, {i: (2, 0)})
        x_pair = clock_term(L, 1.0, {i: (0, 1)}) + clock_term(L, 1.0, {i: (0, 3)})
        out = out + commutator(z2, x_pair) * (1j * h * h / 16)
    return out


def test_clock_closed_form_orders():
    p = ClockParams(L=2)
    seq, disorder = build_clock_kicked(p, 1.0, rng=np.random.default_rng(21))
    series = bch_symbolic(unroll_clock_four_periods(seq), 1)
    assert rel_diff(series.operator(0), clock_q0_expected(p, disorder)) < 1e-12
    assert rel_diff(series.operator(1), clock_q1_expected(p, disorder)) < 1e-12


def test_clock_ladder_certification():
    p = ClockParams(L=3)
    seq, _ = build_clock_kicked(p, 1.0, rng=np.random.default_rng(23))
    series = bch_symbolic(unroll_clock_four_periods(seq), 2)
    report = certify_ladder(series, clock_ladder(p.L))
    assert report.matches_prediction
    assert report.verdict(0, "Z4") == "PASS"
    assert report.verdict(1, "Z4") == "FAIL"
    assert report.verdict(1, "Z2") == "PASS"
    assert report.verdict(2, "Z2") == "FAIL"


def test_clock_dual_route_agreement():
    p = ClockParams(L=2)
    seq, _ = build_clock_kicked(p, 1.0, rng=np.random.default_rng(31))
    unrolled = unroll_clock_four_periods(seq)
    series = bch_symbolic(unrolled, 2)
    numeric = extract_orders(unrolled, 2)
    for m in range(3):
        sym = series.operator(m).to_dense()
        num = numeric.operator(m)
        scale = max(np.linalg.norm(sym), 1.0)
        assert np.linalg.norm(sym - num) / scale < 1e-8


# ----------------------------------------------------------------------
# lattice model
# ----------------------------------------------------------------------

def test_bloch_block_at_zone_center():
    p = HotiParams(L=4, M=1.0, J=1.0)
    blocks = hoti_bloch_blocks(p)
    expected = 3.0 * tau_sigma("z", "0")
    assert rel_diff(blocks["H2"](0.0, 0.0), expected) < 1e-12
    assert rel_diff(blocks["H0"](0.3, -0.7), 12.0 * tau_sigma("x", "y")) < 1e-12


def test_real_space_blocks_match_bloch_on_torus():
    p = HotiParams(L=6)
    h2 = hoti_generators(p, periodic=True)["H2"]
    block = hoti_bloch_blocks(p)["H2"]
    L = p.L
    ks = 2 * math.pi * np.arange(L) / L
    cells = [(x, y) for y in range(L) for x in range(L)]
    cols = []
    for ky in ks:
        for kx in ks:
            wave = np.array([cmath.exp(1j * (kx * x + ky * y)) for x, y in cells]) / L
            cols.append(np.kron(wave[:, None], np.eye(4)))
    v = np.hstack(cols)
    folded = v.conj().T @ h2 @ v
    idx = 0
    for ky in ks:
        for kx in ks:
            got = folded[idx:idx + 4, idx:idx + 4]
            assert np.linalg.norm(got - block(kx, ky)) < 1e-9
            idx += 4
    off = folded.copy()
    for start in range(0, 4 * L * L, 4):
        off[start:start + 4, start:start + 4] = 0.0
    assert np.linalg.norm(off) < 1e-9


def test_symmetry_checks_follow_expected_pattern():
    p = HotiParams(L=4)
    blocks = hoti_bloch_blocks(p)
    grid = [(0.3, 1.1), (-0.9, 0.4), (2.0, -2.5)]
    assert hoti_symmetry_check(blocks["H2"], "T", grid) < 1e-12
    assert hoti_symmetry_check(blocks["H2"], "I", grid) < 1e-12
    assert hoti_symmetry_check(blocks["H1"], "T", grid) > 1e-3
    assert hoti_symmetry_check(blocks["H1"], "I", grid) < 1e-12
    assert hoti_symmetry_check(blocks["H1p"], "T", grid) > 1e-3
    assert hoti_symmetry_check(blocks["H1p"], "I", grid) < 1e-12
    assert hoti_symmetry_check(blocks["H0"], "T", grid) > 1e-3
    assert hoti_symmetry_check(blocks["H0"], "I", grid) > 1e-3
    broken = hoti_bloch_blocks(p, broken=True)
    assert hoti_symmetry_check(broken["H1"], "I", grid) > 1e-3
    assert hoti_symmetry_check(broken["H1p"], "T", grid) > 1e-3


def test_hoti_drive_structure():
    p = HotiParams(L=3)
    seq = build_hoti(p, 0.2)
    assert seq.n_segments == 14
    assert seq.total_fraction == 1
    assert seq.q_periods == 1
    lead = seq.leading_order()
    assert rel_diff(lead, seq.generator("H2") / 5.0) < 1e-12


def test_hoti_drive_equals_nested_composition():
    from hsym import DriveSequence, Segment

    p = HotiParams(L=2)
    gens = hoti_generators(p)
    f10, f20 = Fraction(1, 10), Fraction(1, 20)

    def half_block(first, second, label):
        segs = (
            Segment("H0", 1.0, f10),
            Segment(first, 1.0, f20), Segment(second, 1.0, f20),
            Segment("H0", -1.0, f10),
            Segment(first, 1.0, f20), Segment(second, 1.0, f20),
        )
        return DriveSequence(label=label, period=0.2, segments=segs,
                             generators={"H0": gens["H0"], "H1": gens["H1"],
                                         "H1p": gens["H1p"]})

    inner = half_block("H1", "H1p", "inner")
    inner_swapped = half_block("H1p", "H1", "inner-swapped")
    composed = build_generalization2(
        inner, inner_swapped, "H2", gens["H2"], r_fraction=Fraction(1, 10)
    )
    direct = build_hoti(p, 0.2)
    assert [
        (s.generator, s.sign_coeff, s.duration_fraction) for s in composed.segments
    ] == [
        (s.generator, s.sign_coeff, s.duration_fraction) for s in direct.segments
    ]
    assert np.linalg.norm(dense_unitary(composed) - dense_unitary(direct)) < 1e-12


def test_hoti_first_order_closed_form():
    p = HotiParams(L=3)
    seq = build_hoti(p, 0.2)
    gens = hoti_generators(p)
    series = bch_symbolic(seq, 1)

    def comm(a, b):
        return a @ b - b @ a

    q1 = (-1j / 200) * (
        comm(gens["H1"], gens["H1p"])
        + 2 * comm(gens["H1"] + gens["H1p"], gens["H2"])
    )
    assert rel_diff(series.operator(0), gens["H2"] / 5.0) < 1e-12
    assert rel_diff(series.operator(1), q1) < 1e-12


def test_first_order_onsite_term_is_inversion_even():
    p = HotiParams(L=2)
    blocks = hoti_bloch_blocks(p)

    def q1_block(kx, ky):
        h1, h1p, h2 = blocks["H1"](kx, ky), blocks["H1p"](kx, ky), blocks["H2"](kx, ky)
        return (-1j / 200) * ((h1 @ h1p - h1p @ h1)
                              + 2 * ((h1 + h1p) @ h2 - h2 @ (h1 + h1p)))

    grid = [(0.4, -1.3), (1.9, 0.2), (-0.6, 2.8)]
    assert hoti_symmetry_check(q1_block, "I", grid) < 1e-12
    assert hoti_symmetry_check(q1_block, "T", grid) > 1e-3
    onsite = q1_block(0.0, 0.0) - 2 * (-1j / 200) * (
        (blocks["H1"](0, 0) + blocks["H1p"](0, 0)) @ blocks["H2"](0, 0)
        - blocks["H2"](0, 0) @ (blocks["H1"](0, 0) + blocks["H1p"](0, 0))
    )
    expected = (p.delta1 ** 2 / 100) * (tau_sigma("0", "x") - tau_sigma("0", "y"))
    assert rel_diff(onsite, expected) < 1e-12

    broken = hoti_bloch_blocks(p, broken=True)

    def q1_broken(kx, ky):
        h1, h1p, h2 = broken["H1"](kx, ky), broken["H1p"](kx, ky), broken["H2"](kx, ky)
        return (-1j / 200) * ((h1 @ h1p - h1p @ h1)
                              + 2 * ((h1 + h1p) @ h2 - h2 @ (h1 + h1p)))

    assert hoti_symmetry_check(q1_broken, "I", grid) > 1e-3


def test_corner_and_edge_density_helpers():
    p = HotiParams(L=5)
    cells = np.zeros(25)
    cells[cell_index(5, 0, 0)] = 0.8
    cells[cell_index(5, 4, 4)] = 0.4
    assert corner_density(p, cells) == pytest.approx(0.6)
    run = edge_run_cells(5)
    assert run == [(1, 0), (2, 0), (3, 0), (4, 0)]
    for x, _ in run:
        cells[cell_index(5, x, 0)] = 0.5
    assert edge_density(p, cells) == pytest.approx(2 * 4 * 0.5 / 5)
    assert edge_run_cells(19) == [(x, 0) for x in range(5, 15)]


def test_boundary_density_averages_all_edge_cells():
    p = HotiParams(L=5)
    cells = np.zeros(25)
    boundary = edge_cells(5)
    assert len(boundary) == 16
    for x, y in boundary:
        cells[cell_index(5, x, y)] = 0.25
    cells[cell_index(5, 2, 2)] = 9.0  # bulk cells must not contribute
    assert boundary_density(p, cells) == pytest.approx(0.25)


# ----------------------------------------------------------------------
# initial states
# ----------------------------------------------------------------------

def test_clock_product_hits_uniform_level_index():
    state = prepare_initial(ClockProduct(3), 2)
    assert state.shape == (16,)
    assert state[15] == 1.0 and np.count_nonzero(state) == 1
    state1 = prepare_initial(ClockProduct(1), 2)
    assert state1[5] == 1.0


def test_haar_sector_magnetization_is_exact():
    L = 16
    state = prepare_initial(HaarInSector(n_down=6, theta=0.0, seed=4), L)
    weights = np.abs(state) ** 2
    idx = np.arange(2 ** L, dtype=np.int64)
    downs = np.zeros(2 ** L)
    for bit in range(L):
        downs += (idx >> bit) & 1
    sz = float(np.sum(weights * (L - 2 * downs)))
    assert abs(sz - 4.0) < 1e-10
    assert abs(np.linalg.norm(state) - 1.0) < 1e-12


def test_tilted_sector_state_gains_transverse_magnetization():
    L = 6
    state = prepare_initial(HaarInSector(n_down=2, seed=9), L)
    sy = total_spin(L, "y").to_dense()
    sz = total_spin(L, "z").to_dense()
    assert abs(state.conj() @ (sy @ state)) > 0.05
    assert abs(state.conj() @ (sz @ state)) > 0.05


def test_sector_bounds_raise():
    with pytest.raises(SectorEmpty):
        prepare_initial(HaarInSector(n_down=7, seed=0), 6)


def test_haar_state_reproducibility():
    a = prepare_initial(HaarInSector(n_down=2, seed=5), 6)
    b = prepare_initial(HaarInSector(n_down=2, seed=5), 6)
    c = prepare_initial(HaarInSector(n_down=2, seed=6), 6)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_edge_product_occupies_boundary():
    p = HotiParams(L=5)
    phi = prepare_initial(HotiEdgeProduct(), p)
    n_edge_cells = len(edge_cells(5))
    assert phi.shape == (100, n_edge_cells)
    gram = phi.conj().T @ phi
    assert np.linalg.norm(gram - np.eye(n_edge_cells)) < 1e-12
    cells = densities_by_cell(p, phi)
    for x, y in edge_cells(5):
        assert cells[cell_index(5, x, y)] == pytest.approx(1.0)
    assert cells[cell_index(5, 2, 2)] == 0.0
    assert corner_density(p, cells) == pytest.approx(1.0)


def test_eigenstate_preparation_selects_zero_mode():
    p = HotiParams(L=5)
    q0 = hoti_generators(p)["H2"] / 5.0
    evals, evecs = np.linalg.eigh(q0)
    state = prepare_initial(HotiEigenstate(), p)
    k = int(np.argmin(np.abs(evals)))
    assert abs(abs(state.conj() @ evecs[:, k]) - 1.0) < 1e-9
    explicit = prepare_initial(HotiEigenstate(index=0), p)
    resid = q0 @ explicit - evals[0] * explicit
    assert np.linalg.norm(resid) < 1e-10


def test_parity_of_tilt_free_sector_state():
    L = 4
    state = prepare_initial(HaarInSector(n_down=2, theta=0.0, seed=12), L)
    pz = parity_z(L).to_dense()
    val = (state.conj() @ (pz @ state)).real
    assert val == pytest.approx(1.0)
