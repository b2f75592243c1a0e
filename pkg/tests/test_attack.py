import numpy as np
import pytest

from srattack.attack import AttackConfig, attack_batch, attack_face, write_attack_log
from srattack.engine import SrModel, write_weights
from srattack.image import BoundingBox, load_image, quantize, save_image
from srattack.manifest import ManifestEntry, attach_boxes, build_manifest, SplitSpec
from srattack.metrics import ssim

from conftest import make_png_tree, random_quantized_image
from test_engine import zero_model


def bicubic_cfg(tmp_path, **kw):
    return AttackConfig(k=2, backend="bicubic", out_dir=tmp_path / "out", **kw)


def affine_face_frame(rng, frame=64, face=BoundingBox(16, 16, 32, 32)):
    img = random_quantized_image(rng, frame, frame)
    yy, xx = np.mgrid[0 : face.h, 0 : face.w]
    img[face.y : face.y + face.h, face.x : face.x + face.w] = (
        (10 + 2 * xx + yy)[..., None].astype(np.float64)
    )
    return img


class TestAttackFace:
    def test_dims_preserved_and_outside_untouched(self, rng, tmp_path):
        frame = random_quantized_image(rng, 64, 64)
        box = BoundingBox(16, 16, 32, 32)
        out = attack_face(frame, box, bicubic_cfg(tmp_path))
        assert out.shape == frame.shape
        mask = np.ones(frame.shape[:2], bool)
        mask[16:48, 16:48] = False
        assert np.array_equal(out[mask], frame[mask])

    def test_constant_frame_survives(self, tmp_path):
        frame = np.full((32, 32, 3), 95.0)
        box = BoundingBox(0, 0, 32, 32)
        out = attack_face(frame, box, bicubic_cfg(tmp_path))
        assert np.array_equal(quantize(out), frame)

    def test_zero_weight_edsr_paints_mean(self, tmp_path, rng):
        mean = (114.0, 111.0, 103.0)
        model = zero_model(scale=2, mean=mean)
        frame = random_quantized_image(rng, 40, 40)
        box = BoundingBox(8, 8, 16, 16)
        cfg = AttackConfig(k=2, backend="edsr", weights=tmp_path / "w.srw",
                           out_dir=tmp_path / "out")
        out = attack_face(frame, box, cfg, model=model)
        face = out[8:24, 8:24]
        for c, m in enumerate(mean):
            assert np.all(face[..., c] == m)
        mask = np.ones(frame.shape[:2], bool)
        mask[8:24, 8:24] = False
        assert np.array_equal(out[mask], frame[mask])

    def test_non_divisible_faces_padded(self, rng, tmp_path):
        frame = random_quantized_image(rng, 50, 50)
        box = BoundingBox(3, 5, 33, 31)
        out = attack_face(frame, box, bicubic_cfg(tmp_path))
        assert out.shape == frame.shape

    def test_affine_face_nearly_unchanged(self, rng, tmp_path):
        frame = affine_face_frame(rng)
        out = attack_face(frame, BoundingBox(16, 16, 32, 32), bicubic_cfg(tmp_path))
        assert ssim(frame, out) >= 0.99
        face_err = np.abs(out[16:48, 16:48] - frame[16:48, 16:48])
        assert face_err[8:-8, 8:-8].max() < 1e-2  # interior: 4k-pixel margin

    def test_backend_model_agreement_enforced(self, rng, tmp_path):
        frame = random_quantized_image(rng, 16, 16)
        box = BoundingBox(0, 0, 8, 8)
        with pytest.raises(ValueError):
            attack_face(frame, box, bicubic_cfg(tmp_path), model=zero_model())
        cfg = AttackConfig(k=2, backend="edsr", weights=tmp_path / "w.srw",
                           out_dir=tmp_path / "out")
        with pytest.raises(ValueError):
            attack_face(frame, box, cfg, model=None)

    def test_scale_mismatch_rejected(self, rng, tmp_path):
        frame = random_quantized_image(rng, 16, 16)
        cfg = AttackConfig(k=2, backend="edsr", weights=tmp_path / "w.srw",
                           out_dir=tmp_path / "out")
        with pytest.raises(ValueError, match="x3"):
            attack_face(frame, BoundingBox(0, 0, 8, 8), cfg, model=zero_model(scale=3))

    def test_invalid_box_rejected(self, rng, tmp_path):
        frame = random_quantized_image(rng, 16, 16)
        with pytest.raises(ValueError):
            attack_face(frame, BoundingBox(10, 10, 16, 16), bicubic_cfg(tmp_path))


@pytest.fixture
def attack_fixture(tmp_path):
    root = tmp_path / "frames"
    vids = make_png_tree(root, ["original", "Face2Face"], 2, 3, size=20)
    split = SplitSpec(train=(vids[0],), test=(vids[1],))
    entries = build_manifest(root, split, "Face2Face", frames_per_video=3, seed=1)
    entries = attach_boxes(entries, {e.path: BoundingBox(2, 2, 12, 12) for e in entries})
    return root, entries


class TestAttackBatch:
    def test_one_file_per_entry_in_order(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        cfg = bicubic_cfg(tmp_path, source_root=root)
        records = attack_batch(entries, cfg)
        assert len(records) == len(entries)
        assert [r.source for r in records] == [e.path for e in entries]
        for r in records:
            assert r.status == "ok"
            assert (tmp_path / "out" / r.source).exists()

    def test_outputs_decode_and_match_direct_call(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        cfg = bicubic_cfg(tmp_path, source_root=root)
        records = attack_batch(entries[:1], cfg)
        frame = load_image(root / entries[0].path)
        want = attack_face(frame, entries[0].box, cfg)
        assert np.array_equal(load_image(cfg.out_dir / records[0].output), want)

    def test_missing_box_skipped_not_fatal(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        entries = [entries[0], ManifestEntry("orig.png", "pristine", "none", "test", "vX", 0)]
        save_image(np.full((16, 16, 3), 5.0), root / "orig.png")
        cfg = bicubic_cfg(tmp_path, source_root=root)
        records = attack_batch(entries, cfg)
        assert records[0].status == "ok"
        assert records[1].status.startswith("skipped")
        assert records[1].output == ""

    def test_overwrite_deny_collides_on_second_run(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        cfg = bicubic_cfg(tmp_path, source_root=root)
        attack_batch(entries, cfg)
        with pytest.raises(FileExistsError):
            attack_batch(entries, cfg)

    def test_overwrite_allow_is_idempotent(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        cfg = bicubic_cfg(tmp_path, source_root=root, overwrite="allow")
        first = attack_batch(entries, cfg)
        second = attack_batch(entries, cfg)
        for a, b in zip(first, second):
            assert a.output == b.output
            assert (cfg.out_dir / a.output).exists()

    def test_parallel_equals_serial(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        cfg1 = AttackConfig(k=2, backend="bicubic", out_dir=tmp_path / "o1", source_root=root)
        cfg8 = AttackConfig(k=2, backend="bicubic", out_dir=tmp_path / "o8", source_root=root)
        r1 = attack_batch(entries, cfg1, jobs=1)
        r8 = attack_batch(entries, cfg8, jobs=8)
        assert [r.source for r in r1] == [r.source for r in r8]
        for a, b in zip(r1, r8):
            assert (tmp_path / "o1" / a.source).read_bytes() == (tmp_path / "o8" / b.source).read_bytes()

    def test_similarity_logging(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        cfg = bicubic_cfg(tmp_path, source_root=root, log_similarity=True)
        records = attack_batch(entries[:2], cfg)
        for r in records:
            assert r.ssim is not None and -1.0 <= r.ssim <= 1.0
            assert r.psnr is not None and r.psnr > 0

    def test_edsr_batch_with_weight_file(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        weights = tmp_path / "zero.srw"
        write_weights(zero_model(scale=2), weights)
        cfg = AttackConfig(k=2, backend="edsr", weights=weights,
                           out_dir=tmp_path / "out", source_root=root)
        records = attack_batch(entries[:2], cfg)
        img = load_image(cfg.out_dir / records[0].output)
        assert np.all(img[2:14, 2:14, 0] == 114.0)

    def test_attack_log_columns(self, attack_fixture, tmp_path):
        root, entries = attack_fixture
        cfg = bicubic_cfg(tmp_path, source_root=root, log_similarity=True)
        records = attack_batch(entries[:2], cfg)
        log_path = tmp_path / "log.csv"
        write_attack_log(records, log_path)
        lines = log_path.read_text().splitlines()
        assert lines[0] == "source,output,box_x,box_y,box_w,box_h,backend,k,ssim,psnr,status"
        assert len(lines) == 3
        assert lines[1].endswith(",ok")


class TestAttackConfig:
    def test_edsr_requires_weights(self, tmp_path):
        with pytest.raises(ValueError, match="weight"):
            AttackConfig(k=2, backend="edsr", out_dir=tmp_path)

    def test_bad_backend(self, tmp_path):
        with pytest.raises(ValueError):
            AttackConfig(k=2, backend="lanczos", out_dir=tmp_path)

    def test_bad_scale(self, tmp_path):
        with pytest.raises(ValueError):
            AttackConfig(k=5, backend="bicubic", out_dir=tmp_path)

    def test_bad_overwrite(self, tmp_path):
        with pytest.raises(ValueError):
            AttackConfig(k=2, backend="bicubic", out_dir=tmp_path, overwrite="maybe")
