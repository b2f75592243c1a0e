import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable


def random_quantized_image(rng, h, w):
    """Integer-valued float image, like anything decoded from an 8-bit file."""
    return np.floor(rng.random((h, w, 3)) * 256.0)


def random_image(rng, h, w):
    return rng.random((h, w, 3)) * 255.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_listing_tree(root, class_dirs, n_videos, frames_per_video, video_prefix="v"):
    """Frame tree of empty placeholder files, enough for manifest building."""
    video_ids = [f"{video_prefix}{i:04d}" for i in range(n_videos)]
    for class_dir in class_dirs:
        for vid in video_ids:
            d = Path(root) / class_dir / vid
            d.mkdir(parents=True, exist_ok=True)
            for f in range(frames_per_video):
                (d / f"{f:03d}.png").touch()
    return video_ids


def make_png_tree(root, class_dirs, n_videos, frames_per_video, size=24, seed=0):
    """Frame tree of real tiny PNGs; returns the video id list."""
    from srattack.image import save_image

    r = np.random.default_rng(seed)
    video_ids = [f"v{i:04d}" for i in range(n_videos)]
    for class_dir in class_dirs:
        for vid in video_ids:
            d = Path(root) / class_dir / vid
            d.mkdir(parents=True, exist_ok=True)
            for f in range(frames_per_video):
                save_image(np.floor(r.random((size, size, 3)) * 256.0), d / f"{f:03d}.png")
    return video_ids
