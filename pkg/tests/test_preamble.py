import numpy as np
import pytest

import golden
from fbmcest.errors import ParameterError
from fbmcest.fbcore import CellRole, design_prototype
from fbmcest.interference import (InterferenceTable, closed_form_weights, exact_pseudo_pilots,
                                  interference, pseudo_pilots)
from fbmcest.preamble import (Family, PreambleSpec, check_sparse, generate, pop_matrices,
                              predicted_magnitudes, sparse_layout)


def grid(spec, antenna=0):
    return generate(spec)[antenna].symbols


@pytest.mark.parametrize("fam,table", [("iam-r", golden.IAM_R), ("iam-c", golden.IAM_C),
                                       ("icm-a", golden.ICM_A), ("icm-b", golden.ICM_B),
                                       ("icm-d", golden.ICM_D)])
def test_golden_fixed_tables(fam, table):
    np.testing.assert_array_equal(grid(PreambleSpec(fam, 8)), table)


@pytest.mark.parametrize("d0,d1", [(1, 1), (1, -1), (-1, 1), (-1, -1)])
def test_golden_iam_i(d0, d1):
    spec = PreambleSpec("iam-i", 8, triplet_signs=(d0, -d1, -d0))
    np.testing.assert_array_equal(grid(spec), golden.iam_i(d0, d1))


def test_iam_i_seeded_triplets_have_the_fixed_shape():
    mid = grid(PreambleSpec("iam-i", 64, seed=7))[:, 1]
    trip = mid[:63].reshape(21, 3) / mid[:63:3, None]
    np.testing.assert_array_equal(trip, np.tile([1, -1j, -1], (21, 1)))


def test_golden_e_iam_c_both_signs():
    np.testing.assert_array_equal(grid(PreambleSpec("e-iam-c", 8)), golden.E_IAM_C_POS)
    np.testing.assert_array_equal(grid(PreambleSpec("e-iam-c", 8, negative_epsilon=True)),
                                  golden.E_IAM_C_NEG)
    t = golden.E_IAM_C_POS
    np.testing.assert_array_equal(t[:, 2], -t[:, 0])


def test_epsilon_sign_selects_variant():
    neg = InterferenceTable(0.25, 0.5, 0.2, -0.01, 8)
    spec = PreambleSpec("e-iam-c", 8).with_epsilon_of(neg)
    np.testing.assert_array_equal(grid(spec), golden.E_IAM_C_NEG)


def test_golden_icm_c():
    spec = PreambleSpec("icm-c", 8, icm_data=(1, -1, 1, (1, -1, 1, -1)))
    fr = generate(spec)[0]
    np.testing.assert_array_equal(fr.symbols, golden.ICM_C)
    assert np.all(fr.roles[0::2, 1] == CellRole.PILOT)
    assert np.all(fr.roles[1::2, :] == CellRole.STRUCTURED)


def test_golden_mimo_iam_c():
    frames = generate(PreambleSpec("iam-c", 8, n_tx=2))
    np.testing.assert_array_equal(frames[0].symbols, golden.MIMO_IAM_C_TX1)
    np.testing.assert_array_equal(frames[1].symbols, golden.MIMO_IAM_C_TX2)
    assert frames[0].meta["pilot_symbols"] == [1, 3]


def test_mimo_e_iam_c_length():
    frames = generate(PreambleSpec("e-iam-c", 8, n_tx=2))
    assert frames[0].N == 6
    assert frames[1].meta["pilot_symbols"] == [1, 4]
    np.testing.assert_array_equal(frames[1].symbols[:, 3:], -frames[0].symbols[:, 3:])


def test_golden_sparse_example():
    spec = PreambleSpec("mimo-sparse", 8, n_tx=2, L_h=2, starts=(0, 2),
                        D=np.array([[1, 1], [1, -1]]))
    frames = generate(spec)
    np.testing.assert_array_equal(frames[0].symbols[:, 1], golden.SPARSE_MID_TX1)
    np.testing.assert_array_equal(frames[1].symbols[:, 1], golden.SPARSE_MID_TX2)
    for f in frames:
        assert not np.any(f.symbols[:, [0, 2]])


def test_pop_layout():
    g = grid(PreambleSpec("pop", 8))
    np.testing.assert_array_equal(g[:, 0], (-1.0) ** np.arange(8))
    assert not np.any(g[:, 1])


def test_sparse_feasibility_checks():
    assert check_sparse(512, 32, 2, (0, 2)) == 16
    with pytest.raises(ParameterError):
        check_sparse(512, 256, 2, (0, 2))  # N = 2 < 2 N_t
    with pytest.raises(ParameterError):
        check_sparse(512, 32, 2, (0, 1))  # adjacent pilot sets
    with pytest.raises(ParameterError):
        check_sparse(512, 32, 2, (0, 16))  # outside 0..N-1
    with pytest.raises(ParameterError):
        check_sparse(96, 7, 1, (0,))
    with pytest.raises(ParameterError):
        sparse_layout(PreambleSpec("mimo-sparse", 64, n_tx=2, L_h=8, D=np.ones((2, 2))))


def test_mimo_iam_needs_power_of_two():
    with pytest.raises(ParameterError):
        generate(PreambleSpec("iam-c", 16, n_tx=3))


def test_mimo_pop_needs_enough_receivers():
    with pytest.raises(ParameterError):
        generate(PreambleSpec("mimo-pop", 16, n_tx=2, n_rx=1))


def test_pop_matrices_well_conditioned():
    D = pop_matrices(PreambleSpec("mimo-pop", 32, n_tx=2, n_rx=2, seed=4))
    assert D.shape == (32, 2, 4)
    assert np.all(np.linalg.cond(D) < 10)
    assert set(np.unique(D)) <= {-1.0, 1.0}


def test_generation_is_deterministic():
    a = grid(PreambleSpec("iam-i", 64, seed=11))
    b = grid(PreambleSpec("iam-i", 64, seed=11))
    np.testing.assert_array_equal(a, b)


def test_predicted_magnitudes_published_values(table512):
    d = 1.0
    assert predicted_magnitudes(PreambleSpec("iam-r", 512), table512)[0] == pytest.approx(
        np.sqrt(1 + 4 * table512.beta ** 2))
    assert predicted_magnitudes(PreambleSpec("iam-c", 512), table512)[0] == pytest.approx(1.5, abs=1e-6)
    assert predicted_magnitudes(PreambleSpec("e-iam-c", 512), table512)[0] == pytest.approx(2.6076, abs=5e-5)
    iam_i = predicted_magnitudes(PreambleSpec("iam-i", 512), table512)
    assert iam_i[1] == pytest.approx(1.5 * d, abs=1e-6)
    assert iam_i[0] == pytest.approx(np.hypot(1 + table512.beta, table512.beta))


def test_predicted_iam_i_textbook_value():
    t = InterferenceTable(0.25, 0.5, 0.2, 0.0, 64)
    mags = predicted_magnitudes(PreambleSpec("iam-i", 64), t)
    assert mags[4] == pytest.approx(1.5)
    assert mags[3] == pytest.approx(1.2748, abs=1e-4)


def test_zero_beta_hypothetical():
    t = InterferenceTable(0.0, 0.5, 0.2, 0.0, 64)
    assert predicted_magnitudes(PreambleSpec("iam-r", 64, amplitude=2.0), t)[0] == 2.0


def test_predicted_magnitudes_need_iam():
    with pytest.raises(ParameterError):
        predicted_magnitudes(PreambleSpec("pop", 8), InterferenceTable(0.25, 0.5, 0.2, 0.0, 8))


@pytest.mark.parametrize("fam", ["iam-r", "iam-i", "iam-c", "e-iam-c"])
def test_generated_interior_magnitudes_match_formulas(fam, filt512, table512):
    spec = PreambleSpec(fam, 512, seed=2).with_epsilon_of(table512)
    fr = generate(spec)[0]
    c = exact_pseudo_pilots(fr, filt512, [1])[:, 0]
    pred = predicted_magnitudes(spec, table512)
    interior = slice(2, 510)
    np.testing.assert_allclose(np.abs(c[interior]), pred[interior], atol=1e-5)


def test_band_edge_values_follow_the_wrap(filt64):
    # at p = 0 the +-1 neighbours of IAM-C arrive with opposite relative sign
    t = closed_form_weights(filt64)
    fr = generate(PreambleSpec("iam-c", 64))[0]
    c = pseudo_pilots(fr, t, 1)
    assert abs(c[0]) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(c, exact_pseudo_pilots(fr, filt64, [1])[:, 0], atol=1e-10)


def test_icm_c_interference_cancels_at_pilots(filt64):
    t = closed_form_weights(filt64)
    r = np.random.default_rng(3)
    for _ in range(5):
        a, b, c = r.choice([-1.0, 1.0], 3)
        dk = r.choice([-1.0, 1.0], 32)
        fr = generate(PreambleSpec("icm-c", 64, icm_data=(a, b, c, dk)))[0]
        y = exact_pseudo_pilots(fr, filt64, [1])[:, 0]
        # first-order window: interior even subcarriers see only the pilot value
        interior = np.arange(2, 62, 2)
        base = fr.symbols[interior, 1]
        u = interference(fr, t, 1, check=False)
        np.testing.assert_allclose(u[interior], 0.0, atol=1e-10)
        assert np.all(np.abs(y[interior] - base) < 0.05)
