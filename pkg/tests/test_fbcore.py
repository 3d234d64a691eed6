import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbmcest.errors import ParameterError
from fbmcest.fbcore import (CellRole, FrameGrid, PrototypeFilter, analyze, atom, concat_frames,
                            design_prototype, oqam_destagger, oqam_stagger, random_qpsk_frame,
                            signal_length, synthesize, synthesize_direct)

# worst |Re(y) - d| over 20 random frames, measured on the designed pulses, plus margin
NEAR_PR_BOUND = {(8, 3): 0.015, (64, 3): 0.02, (512, 3): 0.02, (64, 4): 0.002}


@pytest.mark.parametrize("M,K", [(8, 3), (64, 3), (64, 4), (512, 3)])
def test_prototype_unit_energy_and_symmetry(M, K):
    g = design_prototype(M, K).coefficients
    assert g.size == K * M
    assert np.dot(g, g) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_array_equal(g, g[::-1])


def test_prototype_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        design_prototype(9, 3)
    with pytest.raises(ParameterError):
        design_prototype(64, 5)
    g = design_prototype(8, 3).coefficients
    with pytest.raises(ParameterError):
        PrototypeFilter(2 * g, 8, 3)
    with pytest.raises(ParameterError):
        PrototypeFilter(np.roll(g, 1), 8, 3)


def test_prototype_csv_roundtrip(tmp_path):
    f = design_prototype(16, 4)
    f.to_csv(tmp_path / "g.csv")
    back = PrototypeFilter.from_csv(tmp_path / "g.csv", 16)
    np.testing.assert_array_equal(back.coefficients, f.coefficients)
    assert back.K == 4


def test_polyphase_layout():
    f = design_prototype(8, 3)
    np.testing.assert_array_equal(f.polyphase[:, 1], f.coefficients[8:16])


def test_single_atom_at_origin_is_the_pulse():
    f = design_prototype(16, 3)
    d = np.zeros((16, 1))
    d[0, 0] = 1.0
    np.testing.assert_allclose(synthesize(d, f), f.coefficients, atol=1e-14)


@pytest.mark.parametrize("M,K", [(8, 3), (16, 4)])
def test_fast_synthesis_matches_direct_sum(M, K, rng):
    f = design_prototype(M, K)
    d = rng.standard_normal((M, 5)) + 1j * rng.standard_normal((M, 5))
    np.testing.assert_allclose(synthesize(d, f), synthesize_direct(d, f), atol=1e-12)


def test_analysis_is_adjoint_of_synthesis(rng):
    f = design_prototype(16, 3)
    N = 6
    d = rng.standard_normal((16, N)) + 1j * rng.standard_normal((16, N))
    s = rng.standard_normal(signal_length(N, f)) + 1j * rng.standard_normal(signal_length(N, f))
    lhs = np.vdot(s, synthesize(d, f))
    rhs = np.vdot(analyze(s, f, N), d)
    assert lhs == pytest.approx(rhs, abs=1e-10)


def test_analysis_matches_atom_correlation(rng):
    f = design_prototype(8, 3)
    s = rng.standard_normal(signal_length(4, f)) + 0j
    y = analyze(s, f, 4)
    for p, q in [(0, 0), (3, 1), (7, 3)]:
        assert y[p, q] == pytest.approx(np.vdot(atom(f, p, q, s.size), s), abs=1e-12)


def test_analysis_subset_of_symbols(rng, filt64):
    fr = random_qpsk_frame(64, 8, rng)
    s = synthesize(fr, filt64)
    np.testing.assert_allclose(analyze(s, filt64, 8, [1, 5]), analyze(s, filt64, 8)[:, [1, 5]],
                               atol=1e-12)


def test_synthesis_is_linear(rng, filt64):
    a = random_qpsk_frame(64, 4, rng)
    b = random_qpsk_frame(64, 4, rng)
    both = FrameGrid(a.values + b.values)
    np.testing.assert_allclose(synthesize(both, filt64),
                               synthesize(a, filt64) + synthesize(b, filt64), atol=1e-12)


def test_diagonal_and_first_neighbour_inner_products(filt64):
    M = 64
    d = np.zeros((M, 5))
    d[10, 2] = 1.0
    y = analyze(synthesize(d, filt64), filt64, 5)
    assert y[10, 2] == pytest.approx(1.0, abs=1e-12)
    for p, q in [(9, 2), (11, 2), (10, 1), (10, 3), (11, 3), (9, 1)]:
        assert abs(y[p, q].real) < 1e-12
        assert abs(y[p, q].imag) > 0.1


@pytest.mark.parametrize("M,K", sorted(NEAR_PR_BOUND))
def test_near_pr_residual_regression(M, K):
    f = design_prototype(M, K)
    worst = 0.0
    for seed in range(20 if M < 512 else 3):
        fr = random_qpsk_frame(M, 16, np.random.default_rng(seed))
        y = analyze(synthesize(fr, f), f, 16)
        worst = max(worst, np.max(np.abs(y.real - fr.values)))
    assert worst < NEAR_PR_BOUND[(M, K)]


def test_truncated_signal_rejected(filt64):
    with pytest.raises(ParameterError):
        analyze(np.zeros(100), filt64, 3)


def test_frame_dimension_mismatch(filt64):
    with pytest.raises(ParameterError):
        synthesize(np.zeros((32, 3)), filt64)


def test_stagger_definition():
    qam = np.zeros((4, 2), dtype=complex)
    qam[1, 1] = (1 + 1j) / np.sqrt(2)
    g = oqam_stagger(qam)
    assert g.values[1, 2] == pytest.approx(1 / np.sqrt(2))
    assert g.values[1, 3] == pytest.approx(1 / np.sqrt(2))
    assert not np.any(oqam_stagger(np.zeros((4, 3))).values)
    with pytest.raises(ParameterError):
        oqam_destagger(np.zeros((4, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_stagger_roundtrip(T, seed):
    r = np.random.default_rng(seed)
    qam = r.standard_normal((8, T)) + 1j * r.standard_normal((8, T))
    np.testing.assert_array_equal(oqam_destagger(oqam_stagger(qam)), qam)


def test_framegrid_invariants():
    with pytest.raises(ParameterError):
        FrameGrid(np.ones((4, 2)) * 1j)
    with pytest.raises(ParameterError):
        FrameGrid(np.ones((4, 2)), roles=np.full((4, 2), CellRole.NULL))
    g = FrameGrid(np.ones((4, 2)))
    with pytest.raises(ValueError):
        g.values[0, 0] = 2.0
    with pytest.raises(ParameterError):
        FrameGrid.from_symbols(np.array([[1 + 1j]]))
    h = FrameGrid.from_symbols(np.array([[1j, 0], [-1, 2]]))
    np.testing.assert_array_equal(h.symbols, [[1j, 0], [-1, 2]])
    assert h.roles[0, 1] == CellRole.NULL
    assert concat_frames(h, h).N == 4
