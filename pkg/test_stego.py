"""LSB embedder and SplitMix64 tests"""

import numpy as np
import pytest

from stegwave.core.errors import ConfigurationError
from stegwave.core.imageio import ImagePlane, RgbImage
from stegwave.core.prng import SplitMix64, derive_seed, mix64, splitmix64_block
from stegwave.core.stego import (
    EmbedOrder,
    StegoParams,
    data_bits,
    embed_lsb,
    embed_lsb_traced,
    extract_lsb_plane,
    lsb_fraction_even,
    select_positions,
)
from stegwave.corpora import natural_rgb


def flat(image):
    return np.concatenate([plane.pixels.ravel() for plane in image.planes()]).astype(np.int64)


def test_splitmix64_reference_values():
    # published outputs for seed 0
    generator = SplitMix64(0)
    assert [generator.next() for _ in range(3)] == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]


def test_block_matches_scalar_generator():
    generator = SplitMix64(0xDEADBEEF)
    expected = [generator.next() for _ in range(20)]
    assert splitmix64_block(0xDEADBEEF, 20).tolist() == expected
    assert splitmix64_block(0xDEADBEEF, 5, offset=15).tolist() == expected[15:]


def test_derive_seed_is_stable_per_index():
    assert derive_seed(9, 0, 1) == derive_seed(9, 0, 1)
    assert derive_seed(9, 0, 1) != derive_seed(9, 1, 0)
    assert derive_seed(9) == 9
    assert derive_seed(9, 4) == mix64((9 + 0x9E3779B97F4A7C15 * 5) & ((1 << 64) - 1))


def test_params_validation():
    with pytest.raises(ConfigurationError):
        StegoParams(level=1.5)
    with pytest.raises(ConfigurationError):
        StegoParams(level=0.5, seed=-1)
    assert StegoParams(level=0.5, order="sequential").order is EmbedOrder.SEQUENTIAL


def test_level_zero_is_identity(rgb_image):
    assert embed_lsb(rgb_image, StegoParams(level=0.0, seed=7)) == rgb_image


def test_full_level_changes_about_half():
    image = natural_rgb(400, 400, seed=2)
    out = embed_lsb(image, StegoParams(level=1.0, seed=3))
    changed = np.count_nonzero(flat(image) != flat(out)) / (400 * 400 * 3)
    assert abs(changed - 0.5) <= 0.005


def test_only_lsbs_change(rgb_image):
    out = embed_lsb(rgb_image, StegoParams(level=0.6, seed=11))
    before, after = flat(rgb_image), flat(out)
    assert np.all(np.abs(after - before) <= 1)
    assert np.array_equal(before >> 1, after >> 1)


def test_position_count_and_distinctness(rgb_image):
    params = StegoParams(level=0.37, seed=5)
    trace = embed_lsb_traced(rgb_image, params)
    total = rgb_image.width * rgb_image.height * 3
    assert trace.positions.size == int(0.37 * total)
    assert np.unique(trace.positions).size == trace.positions.size
    assert trace.positions.min() >= 0 and trace.positions.max() < total
    assert trace.changed == np.count_nonzero(flat(rgb_image) != flat(trace.image))


def test_deterministic_and_seed_sensitive(rgb_image):
    a = embed_lsb_traced(rgb_image, StegoParams(level=0.3, seed=1))
    b = embed_lsb_traced(rgb_image, StegoParams(level=0.3, seed=1))
    c = embed_lsb_traced(rgb_image, StegoParams(level=0.3, seed=2))
    assert a.image == b.image
    assert not np.array_equal(np.sort(a.positions), np.sort(c.positions))


def test_sequential_order_fills_raster_from_red():
    positions = select_positions(100, 10, seed=4, order=EmbedOrder.SEQUENTIAL)
    assert positions.tolist() == list(range(10))
    image = RgbImage.from_array(np.zeros((4, 4, 3), dtype=np.uint8))
    trace = embed_lsb_traced(image, StegoParams(level=0.25, seed=4, order=EmbedOrder.SEQUENTIAL))
    assert trace.positions.tolist() == list(range(12))
    # first 12 flat positions cover the red plane only
    assert np.array_equal(trace.image.channels[1].pixels, image.channels[1].pixels)


def test_randomized_positions_follow_partial_shuffle():
    total, count, seed = 50, 6, 99
    perm = list(range(total))
    draws = [int(v) for v in splitmix64_block(seed ^ 0xA5A5A5A5A5A5A5A5, count)]
    for t in range(count):
        j = t + draws[t] % (total - t)
        perm[t], perm[j] = perm[j], perm[t]
    assert select_positions(total, count, seed, EmbedOrder.RANDOMIZED).tolist() == perm[:count]


def test_data_bits_are_stream_msbs():
    expected = [int(v) >> 63 for v in splitmix64_block(17, 32)]
    assert data_bits(17, 32).tolist() == expected


def test_extract_lsb_plane():
    plane = extract_lsb_plane(ImagePlane(2, 1, np.array([2, 3])))
    assert plane.bits.tolist() == [0, 1]
    even = ImagePlane.from_array(np.full((4, 4), 8, dtype=np.uint8))
    assert not extract_lsb_plane(even).bits.any()
    assert lsb_fraction_even(even) == 1.0


def test_extracted_bits_match_emitted_payload(rgb_image):
    trace = embed_lsb_traced(rgb_image, StegoParams(level=1.0, seed=23))
    bits = extract_lsb_plane(trace.image).bits
    assert np.array_equal(bits[trace.positions], trace.data_bits)


def test_lsb_plane_packs_msb_first():
    image = ImagePlane.from_array(np.array([[1, 0, 0, 0, 0, 0, 0, 1]], dtype=np.uint8))
    assert extract_lsb_plane(image).to_bytes() == bytes([0x81])


def test_rgb_plane_order():
    image = RgbImage.from_array(np.array([[[1, 0, 1]]], dtype=np.uint8))
    assert extract_lsb_plane(image).bits.tolist() == [1, 0, 1]
