"""SNMF engine: signature solves, factorization, normalization, k selection."""

import numpy as np
import pytest

from loadforge.errors import (
    DegenerateActivationsError,
    InvalidInputError,
    NormalizationError,
)
from loadforge.factorize import (
    CurrentMatrix,
    FactorModel,
    SignatureBank,
    SolverOptions,
    infer_activations,
    normalize_model,
    reconstruction_snr,
    select_k,
    snmf,
    solve_signatures,
    train_category,
)
from loadforge.stats import power_from_current


def planted(n, t, k, seed, low=0.2, high=1.0):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=(n, k))
    a = rng.uniform(low, high, size=(k, t))
    return s, a, CurrentMatrix(s @ a)


# ---------------------------------------------------------------------------
# solve_signatures
# ---------------------------------------------------------------------------

def test_solve_signatures_identity_activations():
    rng = np.random.default_rng(0)
    data = rng.normal(size=(6, 3))
    s = solve_signatures(CurrentMatrix(data), np.eye(3))
    np.testing.assert_allclose(s, data, rtol=1e-9)


def test_solve_signatures_exact_rank_one():
    rng = np.random.default_rng(1)
    sig = rng.normal(size=(10, 1))
    act = rng.uniform(0.5, 2.0, size=(1, 7))
    s = solve_signatures(CurrentMatrix(sig @ act), act)
    np.testing.assert_allclose(s, sig, atol=1e-10)


def test_solve_signatures_matches_independent_lstsq_oracle():
    rng = np.random.default_rng(2)
    data = rng.normal(size=(8, 12))
    a = rng.uniform(0.1, 1.0, size=(2, 12))
    s = solve_signatures(CurrentMatrix(data), a)
    # independent dense solve of min ||A^T S^T - I^T||
    oracle = np.linalg.lstsq(a.T, data.T, rcond=None)[0].T
    np.testing.assert_allclose(s, oracle, rtol=1e-8, atol=1e-10)
    # residual orthogonal to the row space of A
    residual = (data - s @ a) @ a.T
    assert np.linalg.norm(residual) <= 1e-8 * np.linalg.norm(data)


def test_solve_signatures_degenerate_activation_row():
    rng = np.random.default_rng(3)
    data = rng.normal(size=(5, 6))
    a = rng.uniform(0.1, 1.0, size=(2, 6))
    a[1] = 0.0
    with pytest.raises(DegenerateActivationsError) as info:
        solve_signatures(CurrentMatrix(data), a)
    assert info.value.component == 1


# ---------------------------------------------------------------------------
# snmf
# ---------------------------------------------------------------------------

def test_snmf_rank_one_exact_recovery():
    _, _, data = planted(30, 40, 1, seed=4)
    result = snmf(data, 1)
    assert result.snr_db >= 100.0


def test_snmf_planted_recovery_and_monotonicity():
    _, _, data = planted(60, 150, 3, seed=5)
    result = snmf(data, 3, SolverOptions(max_iters=200, seed=0))
    assert result.snr_db >= 50.0
    assert result.iterations <= 200
    hs = result.half_step_objective
    for before, after in zip(hs, hs[1:]):
        assert after <= before * (1.0 + 1e-9) + 1e-12 * hs[0]


def test_snmf_objective_non_increasing_on_random_data():
    rng = np.random.default_rng(6)
    data = CurrentMatrix(rng.normal(size=(25, 35)))
    result = snmf(data, 4, SolverOptions(max_iters=60, seed=1))
    hs = result.half_step_objective
    for before, after in zip(hs, hs[1:]):
        assert after <= before * (1.0 + 1e-9) + 1e-12 * hs[0]


def test_snmf_activations_nonnegative():
    rng = np.random.default_rng(7)
    data = CurrentMatrix(rng.normal(size=(20, 30)))
    result = snmf(data, 3, SolverOptions(max_iters=40, seed=2))
    assert (result.model.activations >= 0).all()


def test_snmf_zero_matrix_collapses_to_zero_model():
    result = snmf(CurrentMatrix(np.zeros((4, 5))), 2)
    np.testing.assert_array_equal(result.model.reconstruction(), np.zeros((4, 5)))


def test_snmf_rejects_bad_k():
    rng = np.random.default_rng(8)
    data = CurrentMatrix(rng.normal(size=(4, 6)))
    with pytest.raises(InvalidInputError):
        snmf(data, 5)
    with pytest.raises(InvalidInputError):
        snmf(data, 0)


# ---------------------------------------------------------------------------
# normalization / train_category
# ---------------------------------------------------------------------------

def test_train_category_resistive_constant_kilowatt(v0_230):
    # 230 V RMS across 52.9 ohm dissipates exactly 1000 W
    resistance = 230.0 ** 2 / 1000.0
    current = np.tile((v0_230 / resistance)[:, None], (1, 25))
    result = train_category(CurrentMatrix(current), 1, v0_230)
    np.testing.assert_allclose(result.model.activations, 1000.0, rtol=1e-2)
    power = power_from_current(CurrentMatrix(result.model.reconstruction()), v0_230)
    np.testing.assert_allclose(power.watts, 1000.0, rtol=1e-6)


def test_train_category_scale_equivariance(v0_230):
    rng = np.random.default_rng(9)
    sig = v0_230[:, None] / 40.0 + rng.normal(scale=0.05, size=(200, 1))
    act = rng.uniform(0.5, 2.0, size=(1, 30))
    base = CurrentMatrix(sig @ act)
    scaled = CurrentMatrix(3.5 * (sig @ act))
    opts = SolverOptions(seed=3)
    res_base = train_category(base, 1, v0_230, opts)
    res_scaled = train_category(scaled, 1, v0_230, opts)
    np.testing.assert_allclose(
        res_scaled.model.signatures, res_base.model.signatures, rtol=1e-8
    )
    np.testing.assert_allclose(
        res_scaled.model.activations, 3.5 * res_base.model.activations, rtol=1e-8
    )


def test_train_category_k1_activation_is_power(v0_230):
    rng = np.random.default_rng(10)
    sig = v0_230[:, None] / 60.0 + 0.02 * rng.normal(size=(200, 1))
    act = rng.uniform(100.0, 900.0, size=(1, 40))
    data = CurrentMatrix(sig @ act)
    result = train_category(data, 1, v0_230)
    power = power_from_current(data, v0_230)
    np.testing.assert_allclose(result.model.activations[0], power.watts, rtol=1e-6)


def test_normalization_power_identity_multicomponent(v0_230):
    rng = np.random.default_rng(11)
    sig = rng.normal(size=(200, 3)) + v0_230[:, None] / 150.0
    act = rng.uniform(10.0, 500.0, size=(3, 60))
    result = train_category(CurrentMatrix(sig @ act), 3, v0_230)
    recon_power = power_from_current(
        CurrentMatrix(result.model.reconstruction()), v0_230
    )
    column_sums = result.model.activations.sum(axis=0)
    np.testing.assert_allclose(recon_power.watts, column_sums, rtol=1e-6)


def test_normalize_model_rescale_preserves_reconstruction(v0_230):
    rng = np.random.default_rng(12)
    sig = rng.normal(size=(200, 2)) + v0_230[:, None] / 100.0
    act = rng.uniform(0.1, 1.0, size=(2, 9))
    model = FactorModel(sig, act)
    normalized = normalize_model(model, v0_230)
    np.testing.assert_allclose(
        normalized.reconstruction(), model.reconstruction(), rtol=1e-9
    )
    projections = (normalized.signatures.T @ v0_230) / v0_230.size
    np.testing.assert_allclose(projections, 1.0, atol=1e-9)


def test_normalize_model_zero_projection_raises(v0_230):
    quadrature = np.cos(2.0 * np.pi * np.arange(200) / 200.0)
    model = FactorModel(quadrature[:, None], np.ones((1, 4)))
    with pytest.raises(NormalizationError) as info:
        normalize_model(model, v0_230)
    assert info.value.component == 0


def test_normalize_model_negative_projection_raises(v0_230):
    model = FactorModel(-v0_230[:, None], np.ones((1, 4)))
    with pytest.raises(NormalizationError):
        normalize_model(model, v0_230)


# ---------------------------------------------------------------------------
# infer_activations
# ---------------------------------------------------------------------------

def _trained_bank(v0, seed):
    rng = np.random.default_rng(seed)
    sig_a = v0[:, None] / 52.9 + 0.01 * rng.normal(size=(200, 1))
    sig_b = np.roll(v0, 10)[:, None] / 80.0 + 0.01 * rng.normal(size=(200, 1))
    return SignatureBank(categories=[("heater", sig_a), ("motor", sig_b)])


def test_infer_activations_exact_identifiable_case(v0_230):
    bank = _trained_bank(v0_230, seed=13)
    stacked = bank.concatenated()
    rng = np.random.default_rng(14)
    truth = rng.uniform(0.0, 5.0, size=(2, 30))
    recovered = infer_activations(CurrentMatrix(stacked @ truth), bank)
    np.testing.assert_allclose(recovered, truth, atol=1e-6)


def test_infer_activations_zero_current(v0_230):
    bank = _trained_bank(v0_230, seed=15)
    out = infer_activations(CurrentMatrix(np.zeros((200, 8))), bank)
    np.testing.assert_array_equal(out, np.zeros((2, 8)))


def test_infer_activations_two_category_power_under_noise(v0_230):
    bank = _trained_bank(v0_230, seed=16)
    stacked = bank.concatenated()
    rng = np.random.default_rng(17)
    truth = rng.uniform(1.0, 10.0, size=(2, 50))
    clean = stacked @ truth
    # additive noise at -60 dB of the signal energy
    noise = rng.normal(size=clean.shape)
    noise *= np.sqrt(1e-6 * np.sum(clean ** 2) / np.sum(noise ** 2))
    recovered = infer_activations(CurrentMatrix(clean + noise), bank)
    slices = bank.row_slices()
    for cat_id, rows in slices.items():
        got = recovered[rows].sum(axis=0)
        expected = truth[rows].sum(axis=0)
        np.testing.assert_allclose(got, expected, rtol=1e-2)


def test_infer_matches_training_activations_on_unmixed_data(v0_230):
    rng = np.random.default_rng(18)
    sig = v0_230[:, None] / 45.0 + 0.02 * rng.normal(size=(200, 1))
    act = rng.uniform(50.0, 400.0, size=(1, 25))
    data = CurrentMatrix(sig @ act)
    trained = train_category(data, 1, v0_230)
    bank = SignatureBank(categories=[("only", trained.model.signatures)])
    recovered = infer_activations(data, bank)
    np.testing.assert_allclose(recovered, trained.model.activations, atol=1e-6)


def test_bank_rejects_mismatched_sample_counts():
    with pytest.raises(InvalidInputError):
        SignatureBank(categories=[("a", np.ones((10, 1))), ("b", np.ones((12, 1)))])


# ---------------------------------------------------------------------------
# reconstruction_snr / select_k
# ---------------------------------------------------------------------------

def test_snr_sentinels():
    rng = np.random.default_rng(19)
    data = rng.normal(size=(4, 4))
    exact = FactorModel(data, np.eye(4))
    assert reconstruction_snr(CurrentMatrix(data), exact) == float("inf")
    zero = FactorModel(np.zeros((4, 1)), np.zeros((1, 4)))
    assert reconstruction_snr(CurrentMatrix(data), zero) == float("-inf")


def test_snr_fifty_decibel_ratio():
    recon = np.ones((10, 10))
    residual = np.full((10, 10), np.sqrt(1e-5))
    model = FactorModel(recon[:, :1], np.ones((1, 10)))
    snr = reconstruction_snr(CurrentMatrix(recon + residual), model)
    np.testing.assert_allclose(snr, 50.0, atol=1e-9)


def test_select_k_planted_ranks():
    for rank in (1, 2, 3):
        _, _, data = planted(40, 80, rank, seed=20 + rank)
        sel = select_k(data, 50.0, 5, SolverOptions(seed=0))
        assert sel.k == rank
        assert not sel.below_target


def test_select_k_negative_target_picks_one():
    _, _, data = planted(20, 30, 3, seed=24)
    sel = select_k(data, -10.0, 4)
    assert sel.k == 1


def test_select_k_flags_below_target():
    rng = np.random.default_rng(25)
    data = CurrentMatrix(rng.normal(size=(12, 20)))  # full-rank noise
    sel = select_k(data, 200.0, 2)
    assert sel.below_target
    assert sel.k == 2
