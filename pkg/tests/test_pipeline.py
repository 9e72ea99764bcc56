import math

import numpy as np
import pytest
from scipy import fft as sfft

from sparse_restore.mediaio import (AudioSignal, GrayImage, MediaFormatError, read_indices,
                                    read_mask, read_pgm, read_wav, to_pcm16, write_indices,
                                    write_pgm, write_wav)
from sparse_restore.model import SupportSet
from sparse_restore.pipeline import (BlockPlan, corrupt_gaussian, corrupt_impulse, declick,
                                     inpaint_image, make_scratch_mask, mse_db, overlap_add,
                                     scratch, synthetic_audio, synthetic_image)


def test_mse_examples():
    assert mse_db([1.0, 2.0], [1.0, 2.0]) == -math.inf
    assert mse_db([0.0], [1.0]) == pytest.approx(0.0, abs=1e-15)
    assert mse_db([0.1, 0, 0, 0], np.zeros(4)) == pytest.approx(10 * math.log10(0.01 / 4), abs=1e-12)
    assert mse_db([0.1, 0, 0, 0], np.zeros(4)) == pytest.approx(-26.02, abs=0.01)
    assert mse_db([1.0, 3.0], [0.0, 0.0]) == mse_db([0.0, 0.0], [1.0, 3.0])
    with pytest.raises(ValueError):
        mse_db([1.0], [1.0, 2.0])


def test_corrupt_impulse():
    y = np.linspace(-1, 1, 1000)
    out, S = corrupt_impulse(y, 0.0, 0.1, 1)
    assert np.array_equal(out, y) and len(S) == 0
    out, S = corrupt_impulse(y, 1.0, 0.0, 1)
    assert np.array_equal(out, y) and len(S) == 1000
    a, Sa = corrupt_impulse(y, 0.1, 0.1, 7)
    b, Sb = corrupt_impulse(y, 0.1, 0.1, 7)
    assert len(Sa) == 100 and Sa == Sb and np.array_equal(a, b)
    changed = np.flatnonzero(a != y)
    assert set(changed) <= set(Sa.indices)


def test_corrupt_gaussian():
    y = np.zeros(100_000)
    out = corrupt_gaussian(y, -30.0, 3)
    assert abs(mse_db(y, out) + 30.0) <= 0.1
    assert np.array_equal(out, corrupt_gaussian(y, -30.0, 3))
    with pytest.raises(ValueError):
        corrupt_gaussian(y, -math.inf, 3)


def test_scratch_mask():
    assert len(make_scratch_mask(64, 64, 0.0, 1)) == 0
    S = make_scratch_mask(64, 64, 0.15, 1)
    assert 0.145 <= len(S) / 4096 <= 0.155
    assert S == make_scratch_mask(64, 64, 0.15, 1)
    with pytest.raises(ValueError):
        make_scratch_mask(4, 4, 1.5, 0)


def test_block_plan_windows():
    p = BlockPlan()
    assert p.hop == 960
    assert np.allclose(p.fade_in + p.fade_out, 1.0, atol=1e-15)
    assert np.all((p.fade_in >= 0) & (p.fade_in <= 1))
    assert (p.padded_length(5000) - 64) % 960 == 0
    with pytest.raises(ValueError):
        BlockPlan(8, 8)


@pytest.mark.parametrize("length", [1, 100, 1024, 1025, 5000, 20000])
@pytest.mark.parametrize("plan", [BlockPlan(), BlockPlan(64, 16), BlockPlan(32, 0)])
def test_overlap_add_identity(length, plan, rng):
    x = rng.standard_normal(length)
    padded = np.zeros(plan.padded_length(length))
    padded[:length] = x
    blocks = [padded[s:s + plan.block_size] for s in plan.starts(length)]
    out = overlap_add(blocks, plan, length)
    assert out.size == length
    assert np.abs(out - x).max() <= 1e-10


def test_declick_pass_through(rng):
    # full-band DR with no clicks is A A^T z = z per block
    x = rng.standard_normal(3000)
    out, info = declick(x, "dr", dct_band=1024, click_support=SupportSet.empty(3000))
    assert out.samples.size == 3000
    assert np.abs(out.samples - x).max() <= 1e-10
    assert info["warnings"] == []


def test_declick_clean_bpsep_near_identity():
    # a clean signal that is sparse in every block passes through unchanged
    c = np.zeros(1024)
    c[[3, 10, 40]] = [1.0, -0.5, 0.3]
    y = np.tile(sfft.idct(c, norm="ortho"), 3)
    out, _ = declick(y, "bpsep", eta=1e-3, plan=BlockPlan(1024, 0))
    assert out.samples.size == y.size
    assert mse_db(y, out.samples) < -80


def test_declick_dr_improves():
    y = synthetic_audio(8192, n_active=24, seed=1)
    noisy = corrupt_gaussian(y, -30.0, 2)
    z, S = corrupt_impulse(noisy, 0.1, 0.1, 3)
    out, _ = declick(z, "dr", click_support=S)
    assert mse_db(y, out.samples) <= mse_db(y, z) - 10


def test_declick_failed_block_falls_back(rng):
    x = rng.standard_normal(2000)
    S = SupportSet.from_indices(range(900), 2000)
    seen = []
    out, info = declick(x, "dr", click_support=S, on_warning=seen.append)
    assert len(info["warnings"]) == 1 and seen == info["warnings"]
    w = info["warnings"][0]
    assert w["block"] == 0 and w["fallback"] is True and w["error"]
    # the fallback keeps the corrupted samples where block 0 has unit gain
    assert np.allclose(out.samples[:960], x[:960])


def test_declick_threads_independent(rng):
    y = synthetic_audio(6000, n_active=24, seed=5)
    z, S = corrupt_impulse(y, 0.05, 0.1, 1)
    a, _ = declick(z, "bpres", eta=0.01, click_support=S, threads=1)
    b, _ = declick(z, "bpres", eta=0.01, click_support=S, threads=3)
    assert np.array_equal(a.samples, b.samples)


def test_declick_argument_errors():
    with pytest.raises(ValueError):
        declick(np.zeros(10), "nope")
    with pytest.raises(ValueError):
        declick(np.zeros(10), "bpres")
    with pytest.raises(ValueError):
        declick(np.zeros(10), "dr", click_support=SupportSet.empty(11))


def test_inpaint_empty_mask_near_identity():
    img = synthetic_image(16, 16, seed=2)
    out, _ = inpaint_image(img, SupportSet.empty(256), "bpres")
    assert np.abs(out.pixels - img).max() <= 1e-5


def test_inpaint_improves():
    img = synthetic_image(32, 32, seed=4)
    S = make_scratch_mask(32, 32, 0.15, 4)
    bad = scratch(img, S)
    out, _ = inpaint_image(bad, S, "bpres")
    assert mse_db(img, out.pixels) <= mse_db(img, bad) - 8
    assert out.pixels.min() >= 0 and out.pixels.max() <= 1


def test_inpaint_auto_mask_is_saturation():
    img = synthetic_image(16, 16, seed=6)
    S = make_scratch_mask(16, 16, 0.1, 6)
    bad = scratch(img, S)
    a, _ = inpaint_image(bad, "auto", "bpres")
    b, _ = inpaint_image(bad, S, "bpres")
    assert np.array_equal(a.pixels, b.pixels)


def test_inpaint_errors():
    with pytest.raises(ValueError):
        inpaint_image(np.zeros((4, 4)), None, "bpres")
    with pytest.raises(ValueError):
        inpaint_image(np.zeros((4, 4)), SupportSet.empty(15), "bpres")
    with pytest.raises(ValueError):
        inpaint_image(np.zeros((4, 4)), None, "dr")


def test_pcm16_rounding():
    s = np.array([0.5 / 32768, -0.5 / 32768, 1.0, -1.0, 1.5 / 32768])
    assert to_pcm16(s).tolist() == [1, -1, 32767, -32768, 2]


def test_wav_round_trip(tmp_path, rng):
    q = np.round(rng.uniform(-1, 1, 500) * 32767) / 32768
    write_wav(tmp_path / "a.wav", AudioSignal(q, 22050))
    back = read_wav(tmp_path / "a.wav")
    assert back.sample_rate == 22050
    assert np.array_equal(back.samples, q)


def test_wav_rejects_garbage(tmp_path):
    (tmp_path / "x.wav").write_bytes(b"not a wav file at all")
    with pytest.raises(MediaFormatError):
        read_wav(tmp_path / "x.wav")


def test_pgm_round_trip(tmp_path, rng):
    pix = rng.integers(0, 256, (5, 7)) / 255.0
    write_pgm(tmp_path / "a.pgm", GrayImage(pix))
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.startswith(b"P5\n7 5\n255\n")
    assert np.array_equal(read_pgm(tmp_path / "a.pgm").pixels, pix)


def test_pgm_errors(tmp_path):
    (tmp_path / "b.pgm").write_bytes(b"P2\n1 1\n255\n0")
    with pytest.raises(MediaFormatError):
        read_pgm(tmp_path / "b.pgm")
    (tmp_path / "c.pgm").write_bytes(b"P5\n4 4\n255\n\x00")
    with pytest.raises(MediaFormatError):
        read_pgm(tmp_path / "c.pgm")


def test_masks(tmp_path):
    S = SupportSet.from_indices([0, 5, 9], 12)
    write_indices(tmp_path / "m.txt", S)
    assert read_indices(tmp_path / "m.txt", 12) == S
    assert read_mask(tmp_path / "m.txt", 12) == S
    img = np.zeros((3, 4))
    img.ravel()[[0, 5, 9]] = 1.0
    write_pgm(tmp_path / "m.pgm", GrayImage(img))
    assert read_mask(tmp_path / "m.pgm", 12) == S
    with pytest.raises(MediaFormatError):
        read_mask(tmp_path / "m.pgm", 13)
    (tmp_path / "bad.txt").write_text("1 2 99\n")
    with pytest.raises(MediaFormatError):
        read_indices(tmp_path / "bad.txt", 12)
