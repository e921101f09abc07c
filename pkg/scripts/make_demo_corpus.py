#!/usr/bin/env python3
"""Synthesize a small demo corpus so the full pipeline can run without real
photographs: textured source images (with minable uniform blocks), background
images, and an asset index for 3D scene generation."""

import argparse
import json
from pathlib import Path

import numpy as np
from PIL import Image


def textured_image(seed: int, size: int = 480) -> np.ndarray:
    """A busy field with one stationary-noise block large enough to mine."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = 0.2 + 0.55 * (np.sin(xx * 7 + seed * 0.7) * 0.5 + 0.5) * (0.4 + 0.6 * yy)
    img = np.stack([base, 0.85 * base + 0.08, 1.0 - 0.7 * base], axis=-1)
    img += rng.uniform(-0.05, 0.05, img.shape)
    block = 320
    y0 = int(rng.integers(0, size - block + 1))
    x0 = int(rng.integers(0, size - block + 1))
    lo = rng.uniform(0.15, 0.45)
    img[y0:y0 + block, x0:x0 + block] = rng.uniform(lo, lo + 0.4, (block, block, 3))
    return (np.clip(img, 0, 1) * 255).astype(np.uint8)


def background_image(seed: int, size: int = 480) -> np.ndarray:
    rng = np.random.default_rng(seed + 9000)
    yy, xx = np.mgrid[0:size, 0:size] / size
    sky = np.stack([
        0.3 + 0.4 * yy,
        0.4 + 0.3 * yy,
        0.6 + 0.3 * (1 - yy),
    ], axis=-1)
    sky += rng.uniform(-0.03, 0.03, sky.shape)
    sky += 0.15 * np.sin(xx * 5 + seed)[..., None] * yy[..., None]
    return (np.clip(sky, 0, 1) * 255).astype(np.uint8)


def write_asset_index(root: Path) -> Path:
    """Placeholder mesh/HDRI entries plus the generated material pool path."""
    meshes = root / "meshes"
    hdris = root / "hdris"
    meshes.mkdir(parents=True, exist_ok=True)
    hdris.mkdir(parents=True, exist_ok=True)
    for name in ("cube", "sphere", "torus"):
        (meshes / f"{name}.obj").write_text(f"o {name}\n")
    for name in ("studio", "outdoor"):
        (hdris / f"{name}.hdr").write_bytes(b"\x00")
    index = {
        "meshes": [{"id": name, "path": str(meshes / f"{name}.obj"), "license": "demo"}
                   for name in ("cube", "sphere", "torus")],
        "hdris": [{"id": name, "path": str(hdris / f"{name}.hdr"), "license": "demo"}
                  for name in ("studio", "outdoor")],
        "materials": [{"id": f"mat{i}", "path": str(root / "materials" / f"mat{i}"),
                       "license": "demo"} for i in range(4)],
    }
    path = root / "assets.json"
    path.write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return path


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_corpus", help="output directory")
    parser.add_argument("--images", type=int, default=8)
    parser.add_argument("--backgrounds", type=int, default=4)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    root = Path(args.out)
    (root / "sources").mkdir(parents=True, exist_ok=True)
    (root / "backgrounds").mkdir(parents=True, exist_ok=True)
    for i in range(args.images):
        Image.fromarray(textured_image(args.seed + i)).save(
            root / "sources" / f"src{i:03d}.png", compress_level=1)
    for i in range(args.backgrounds):
        Image.fromarray(background_image(args.seed + i)).save(
            root / "backgrounds" / f"bg{i:03d}.png", compress_level=1)
    index = write_asset_index(root)
    print(f"demo corpus: {args.images} sources, {args.backgrounds} backgrounds -> {root}")
    print(f"asset index: {index}")


if __name__ == "__main__":
    main()
