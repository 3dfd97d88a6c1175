"""Forced-embedding detector tests"""

import math

import numpy as np
import pytest

from stegwave.core import detector
from stegwave.core.detector import (
    AnalyticModel,
    BlockDiffStats,
    CalibrationCurve,
    analytic_pr,
    block_diff_stats,
    calibrate,
    estimate_k,
    estimate_k_model,
    eta,
    expected_eta,
    forced_embedding_curve,
    interpolate_k,
    measure_lsb_stats,
    measure_pair,
    model_table,
    p_prime_chain,
    sigma_mc,
    snr_ll,
)
from stegwave.core.errors import (
    CalibrationError,
    ConfigurationError,
    DimensionMismatchError,
    InsufficientDataError,
)
from stegwave.core.imageio import ImagePlane
from stegwave.core.prng import derive_seed
from stegwave.core.stego import StegoParams, embed_lsb, embed_lsb_traced
from stegwave.core.wavelet import ll_plane
from stegwave.corpora import natural_image, natural_rgb


def plane(array):
    return ImagePlane.from_array(np.asarray(array, dtype=np.uint8))


def monte_carlo_pr(i, p_prime, blocks, rng):
    even = rng.random((blocks, 16)) < p_prime
    replaced = rng.random((blocks, 16)) < i
    new_bit = rng.random((blocks, 16)) < 0.5
    # an even pixel that receives bit 1 goes up by one, an odd pixel receiving 0 goes down
    step = np.where(replaced & even & new_bit, 1, 0) - np.where(replaced & ~even & ~new_bit, 1, 0)
    return float(np.mean(step.sum(axis=1) != 0))


# -- block statistics ------------------------------------------------------

def test_identical_images_have_no_changed_blocks(gray_image):
    assert block_diff_stats(gray_image, gray_image) == BlockDiffStats(0, 0, 0, 16 * 12)


def test_single_increment():
    base = np.full((8, 8), 100, dtype=np.uint8)
    modified = base.copy()
    base[1, 2] += 1
    assert block_diff_stats(plane(base), plane(modified)) == BlockDiffStats(1, 1, 1, 4)


def test_cancellation_within_block():
    base = np.full((4, 4), 50, dtype=np.uint8)
    modified = base.copy()
    modified[0, 0] += 1
    modified[3, 3] -= 1
    assert block_diff_stats(plane(base), plane(modified)) == BlockDiffStats(0, 0, 0, 1)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        block_diff_stats(plane(np.zeros((4, 4))), plane(np.zeros((4, 8))))
    with pytest.raises(DimensionMismatchError):
        snr_ll(plane(np.zeros((4, 4))), plane(np.zeros((8, 4))))


def test_x0_counts_changed_ll_coefficients(gray_image):
    forced = embed_lsb(gray_image, StegoParams(level=0.4, seed=8))
    stats = block_diff_stats(gray_image, forced)
    assert stats.x0 == np.count_nonzero(ll_plane(gray_image) != ll_plane(forced))
    assert abs(stats.x2) <= stats.x1
    assert stats.x1 >= stats.x0
    assert stats.x0 <= stats.blocks_total


def test_x2_matches_embedder_changes(rgb_image):
    trace = embed_lsb_traced(rgb_image, StegoParams(level=0.5, seed=21))
    before = np.concatenate([p.pixels.ravel() for p in rgb_image.planes()]).astype(np.int64)
    after = np.concatenate([p.pixels.ravel() for p in trace.image.planes()]).astype(np.int64)
    x2 = sum(block_diff_stats(a, b).x2 for a, b in zip(rgb_image.planes(), trace.image.planes()))
    assert x2 == int((before - after)[trace.positions].sum())


# -- eta and Gamma ---------------------------------------------------------

def test_eta_scale():
    assert eta([BlockDiffStats(0, 0, 0, 30000)] * 3, 800, 600) == 0.0
    assert eta([BlockDiffStats(30000, 30000, 0, 30000)] * 3, 800, 600) == 93.75
    assert eta([BlockDiffStats(9600, 9600, 0, 30000)], 800, 600) == 10.0
    with pytest.raises(InsufficientDataError):
        eta([], 800, 600)


def test_snr_ll_example():
    base = np.ones((40, 40), dtype=np.uint8)
    modified = base.copy()
    modified[:4, :4] = 2
    assert snr_ll(plane(base), plane(modified)) == pytest.approx(20.0)
    assert snr_ll(plane(base), plane(base)) == math.inf
    assert snr_ll(plane(np.zeros((8, 8))), plane(np.ones((8, 8)))) == -math.inf


def test_snr_ll_ratio_invariance(rng):
    base = rng.integers(0, 100, size=(16, 16))
    modified = base + rng.integers(0, 2, size=(16, 16))
    assert snr_ll(plane(2 * base), plane(2 * modified)) == pytest.approx(snr_ll(plane(base), plane(modified)))


def test_measure_pair_of_identical_rgb(rgb_image):
    assert measure_pair(rgb_image, rgb_image) == (0.0, math.inf)


# -- analytic model --------------------------------------------------------

def test_p_prime_chain():
    assert p_prime_chain(0.5, 0.3, 0.9) == pytest.approx((0.5, 0.5))
    assert p_prime_chain(0.35, 0.0, 0.0) == (0.35, 0.35)
    assert p_prime_chain(0.35, 0.5, 0.0)[0] == pytest.approx(0.425)
    with pytest.raises(ConfigurationError):
        p_prime_chain(1.2, 0.0, 0.0)
    model = AnalyticModel(p=0.65, k=0.2, i=0.4)
    assert model.pr() == analytic_pr(0.4, model.p_prime)


def test_analytic_pr_values():
    assert analytic_pr(0.0, 0.3) == 0.0
    assert analytic_pr(0.6, 0.0) == pytest.approx(1.0 - 0.7 ** 16)
    assert analytic_pr(1.0, 0.5) == pytest.approx(0.8601, abs=5e-4)
    assert analytic_pr(0.2, 0.5) == pytest.approx(0.6573, abs=5e-4)
    with pytest.raises(ConfigurationError):
        analytic_pr(0.5, -0.1)


def test_analytic_pr_increases_with_i():
    grid = [round(0.1 * n, 1) for n in range(1, 11)]
    for p_prime in [round(0.05 * n, 2) for n in range(1, 20)]:
        values = [analytic_pr(i, p_prime) for i in grid]
        assert all(b > a for a, b in zip(values, values[1:]))


def test_analytic_pr_decreases_with_k():
    k_grid = [round(0.1 * n, 1) for n in range(11)]
    for p in (0.35, 0.65):
        for i in (0.2, 0.7, 1.0):
            values = [analytic_pr(i, p_prime_chain(p, k, i)[0]) for k in k_grid]
            assert all(b < a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("p_prime", [0.35, 0.5, 0.65])
@pytest.mark.parametrize("i", [0.2, 0.6, 1.0])
def test_analytic_pr_matches_simulation(i, p_prime):
    rng = np.random.default_rng(derive_seed(42, int(i * 10), int(p_prime * 100)))
    assert abs(analytic_pr(i, p_prime) - monte_carlo_pr(i, p_prime, 200_000, rng)) <= 0.006


def test_expected_eta():
    assert expected_eta(0.0, 0.5, 3, 800, 600) == 0.0
    assert expected_eta(1.0, 0.5, 3, 800, 600) == pytest.approx(93.75 * analytic_pr(1.0, 0.5))
    assert expected_eta(1.0, 0.5, 3, 800, 600) == pytest.approx(80.63, abs=0.05)
    assert expected_eta(1.0, 0.5, 1, 800, 600) == pytest.approx(80.63 / 3, abs=0.02)
    with pytest.raises(InsufficientDataError):
        expected_eta(0.5, 0.5, 1, 3, 600)


def test_constant_cover_drops_faster_than_balanced_cover():
    def drop(p):
        start = expected_eta(0.2, p_prime_chain(p, 0.0, 0.2)[0], 3, 800, 600)
        end = expected_eta(0.2, p_prime_chain(p, 1.0, 0.2)[0], 3, 800, 600)
        return start - end

    assert drop(1.0) > drop(0.5)
    assert drop(0.5) == 0.0


def test_sigma_mc():
    blocks = 3 * 200 * 150
    assert sigma_mc(0.6, 3, 800, 600) == pytest.approx(500 / 480000 * math.sqrt(blocks * 0.6 * 0.4))
    assert sigma_mc(0.0, 3, 800, 600) == 0.0


def test_model_table():
    rows = model_table(0.5, [0.0], [0.0])
    assert rows == [(0.0, 0.0, 0.5, 0.0, 0.0)]
    rows = model_table(0.65, [0.0, 0.5], [0.2, 1.0], channels=1, width=64, height=48)
    assert [(k, i) for k, i, *_ in rows] == [(0.0, 0.2), (0.0, 1.0), (0.5, 0.2), (0.5, 1.0)]
    assert rows[2][2] == pytest.approx(0.575)


def test_measure_lsb_stats():
    assert measure_lsb_stats(plane(np.full((4, 4), 6))).p_hat == 1.0
    image = natural_image(128, 128, seed=4, p_even=0.65)
    assert abs(measure_lsb_stats(image).p_hat - 0.65) < 0.02


# -- forced embedding curves -----------------------------------------------

def test_forced_curve_zero_level(rgb_image):
    reading = forced_embedding_curve(rgb_image, [0.0], seed=3)[0]
    assert (reading.eta, reading.gamma_db) == (0.0, math.inf)


def test_forced_curve_validates_levels(rgb_image):
    with pytest.raises(ConfigurationError):
        forced_embedding_curve(rgb_image, [0.5, 0.2], seed=1)
    with pytest.raises(ConfigurationError):
        forced_embedding_curve(rgb_image, [1.5], seed=1)


def test_forced_curve_follows_model():
    image = natural_rgb(128, 128, seed=9)
    levels = [0.0, 0.2, 0.5, 1.0]
    readings = forced_embedding_curve(image, levels, seed=5)
    etas = [r.eta for r in readings]
    assert all(b >= a for a, b in zip(etas, etas[1:]))
    p_hat = measure_lsb_stats(image).p_hat
    for r in readings:
        expected = expected_eta(r.i, p_hat, 3, 128, 128)
        sigma = sigma_mc(analytic_pr(r.i, p_hat), 3, 128, 128)
        assert abs(r.eta - expected) <= 4 * sigma + 1e-9


def test_forced_curve_is_deterministic(rgb_image):
    assert forced_embedding_curve(rgb_image, [0.3, 0.6], seed=4) == forced_embedding_curve(rgb_image, [0.3, 0.6], seed=4)


# -- calibration -----------------------------------------------------------

def test_single_point_calibration(rgb_image):
    curve = calibrate([rgb_image], [0.0], 0.2, seed=7)
    forced = embed_lsb(rgb_image, StegoParams(level=0.2, seed=derive_seed(7, 0, 0, 0, 1)))
    assert curve.points == ((0.0, measure_pair(rgb_image, forced)[0]),)
    assert (curve.width, curve.height, curve.channels) == (64, 48, 3)


def test_calibration_independent_of_workers():
    images = [natural_rgb(48, 48, seed=s) for s in range(3)]
    serial = calibrate(images, [0.0, 0.5, 1.0], 0.2, seed=2, repeats=2)
    threaded = calibrate(images, [0.0, 0.5, 1.0], 0.2, seed=2, repeats=2, workers=4)
    assert serial.points == threaded.points
    assert serial.rows == threaded.rows
    assert len(serial.rows) == 3 * 3 * 2


def test_calibration_trend_over_k():
    images = [natural_rgb(256, 256, seed=s) for s in range(3)]
    curve = calibrate(images, [0.0, 1.0], 0.2, seed=5, repeats=3)
    assert curve.etas[1] < curve.etas[0]


def test_calibration_errors(rgb_image):
    with pytest.raises(InsufficientDataError):
        calibrate([], [0.0], 0.2, seed=1)
    with pytest.raises(ConfigurationError):
        calibrate([rgb_image], [0.5, 0.0], 0.2, seed=1)
    with pytest.raises(CalibrationError):
        CalibrationCurve(i_fixed=0.2, points=((0.1, 5.0), (0.1, 4.0)))


# -- estimation ------------------------------------------------------------

DECREASING = CalibrationCurve(i_fixed=0.2, points=((0.0, 62.0), (0.1, 61.5), (0.2, 61.0), (0.4, 60.5)))


def test_interpolation_nodes_midpoints_and_clamping():
    assert interpolate_k(61.5, DECREASING) == pytest.approx(0.1)
    assert interpolate_k(60.75, DECREASING) == pytest.approx(0.3)
    assert interpolate_k(70.0, DECREASING) == 0.0
    assert interpolate_k(10.0, DECREASING) == 0.4
    increasing = CalibrationCurve(i_fixed=0.2, points=((0.0, 1.0), (1.0, 3.0)))
    assert interpolate_k(2.0, increasing) == pytest.approx(0.5)


def test_estimate_k_uses_measured_eta(mocker, rgb_image):
    measured = mocker.patch.object(detector, "measured_eta", return_value=61.25)
    assert estimate_k(rgb_image, DECREASING, seed=3, repeats=4) == pytest.approx(0.15)
    measured.assert_called_once_with(rgb_image, 0.2, 3, 4)


def test_estimate_k_rejects_bad_curves(rgb_image, gray_image):
    with pytest.raises(CalibrationError):
        estimate_k(rgb_image, CalibrationCurve(i_fixed=0.2, points=((0.0, 60.0),)), seed=1)
    with pytest.raises(CalibrationError):
        estimate_k(rgb_image, CalibrationCurve(i_fixed=0.2, points=((0.0, 60.0), (0.1, 61.0), (0.2, 60.5))), seed=1)
    curve = CalibrationCurve(i_fixed=0.2, points=DECREASING.points, width=64, height=48, channels=3)
    with pytest.raises(DimensionMismatchError):
        estimate_k(gray_image, curve, seed=1)


def test_model_only_estimate_inverts_the_model(mocker, rgb_image):
    cover_p, k, i = 0.65, 0.4, 0.5
    p_prime = p_prime_chain(cover_p, k, i)[0]
    mocker.patch.object(detector, "measured_eta",
                        return_value=expected_eta(i, p_prime, 3, rgb_image.width, rgb_image.height))
    assert estimate_k_model(rgb_image, i, seed=1, cover_p=cover_p) == pytest.approx(k, abs=1e-6)


def test_model_only_estimate_on_embedded_image():
    cover = natural_rgb(256, 256, seed=12, p_even=0.65)
    stego = embed_lsb(cover, StegoParams(level=0.5, seed=4))
    k_hat = estimate_k_model(stego, 1.0, seed=2, cover_p=0.65, repeats=2)
    assert abs(k_hat - 0.5) <= 0.2


def test_model_only_estimate_errors(rgb_image):
    with pytest.raises(ConfigurationError):
        estimate_k_model(rgb_image, 0.5, seed=1, cover_p=0.5)
    with pytest.raises(ConfigurationError):
        estimate_k_model(rgb_image, 0.0, seed=1)
