import numpy as np
import pytest

import machine_jnd as mj


def test_normalize_range_and_layout():
    img = np.zeros((32, 32, 3), dtype=np.uint8)
    img[0, 0, 0] = 255
    img[2, 3, 1] = 64
    x = mj.normalize(img)
    assert x.shape == (3, 32, 32)
    assert x[0, 0, 0] == pytest.approx(1.0)
    assert x[1, 2, 3] == pytest.approx(-0.498, abs=1e-3)
    assert x[2, 5, 5] == pytest.approx(-1.0)


def test_psnr_uniform_offset():
    x = np.zeros((3, 32, 32), dtype=np.float32)
    assert mj.psnr(x, x + 16 / 127.5) == pytest.approx(24.05, abs=0.01)
    assert mj.psnr(x, x) == 100.0


def test_merge_cams_is_mean():
    rng = np.random.default_rng(0)
    maps = [rng.random((32, 32), dtype=np.float32) for _ in range(4)]
    np.testing.assert_allclose(mj.merge_cams(maps), np.mean(maps, axis=0), atol=1e-7)


def test_assign_label_ties_to_lowest():
    assert mj.assign_label(np.array([0.1, 0.4, 0.4, 0.1])) == 1
    assert mj.assign_label(np.eye(10)[7]) == 7


def test_losses_match_closed_form():
    cam = np.full((32, 32), 0.25, dtype=np.float32)
    e = np.full((3, 32, 32), 0.75, dtype=np.float32)
    assert mj.magnitude_loss(cam, e) == pytest.approx(0.0, abs=1e-9)
    e_half = np.full((3, 32, 32), 0.5, dtype=np.float32)
    expected = np.log((0.75**2 + 0.5**2) / (2 * 0.75 * 0.5))
    assert mj.magnitude_loss(cam, e_half) == pytest.approx(expected, rel=1e-6)
    assert mj.spatial_loss(cam, -e_half) == pytest.approx(0.5, rel=1e-6)
    assert mj.spatial_loss(cam, -e_half, signed_noise=True) == pytest.approx(-0.5, rel=1e-6)

    probs = np.full((4, 2, 10), 0.1)
    refs = np.zeros((2, 4), dtype=np.uint8)
    assert mj.cross_entropy(probs, refs) == pytest.approx(np.log(10))


def test_shape_errors_raise():
    with pytest.raises(ValueError):
        mj.normalize(np.zeros((16, 16, 3), dtype=np.uint8))


def test_dispatch_exit_codes(tmp_path):
    code, _, err = mj.dispatch(["no-such-stage"])
    assert code == 2
    assert "train-jnd" in err

    code, _, err = mj.dispatch(["report", "--run-dir", str(tmp_path / "run")])
    assert code == 3
    assert "prerequisite stage" in err


def test_load_split_from_synthetic_archive(tmp_path):
    mj.write_synthetic_archive(tmp_path, 1)
    images, labels, ids = mj.load_split(tmp_path, "test", 0.01, 0)
    assert images.shape == (100, 32, 32, 3)
    assert images.dtype == np.uint8
    assert np.bincount(labels, minlength=10).tolist() == [10] * 10
    assert list(ids) == sorted(ids)
    with pytest.raises(mj.Error):
        mj.load_split(tmp_path / "missing", "test")
