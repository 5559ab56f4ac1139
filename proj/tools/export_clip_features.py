#!/usr/bin/env python3
"""Export CLIP features for the pretrained-base / pretrained-large backends.

The ia binary never runs CLIP itself; the pretrained backends read
precomputed features from a cache directory. This script fills that cache
for every sample in a dataset manifest:

  text_<fnv1a64 of prompt>.igts        1 x text_dim pooled text embedding
  img_<content hash>.igts              tokens x visual_dim patch features
  img_<content hash>_joint.igts        tokens x text_dim projected patch
                                       features (for similarity maps)

The content hash covers the image after resampling to the model resolution
with the same align-corners-false bilinear kernel the C++ side uses, so both
sides derive identical keys.

Requires torch + transformers (and downloaded CLIP weights):
  pip install torch transformers
  python tools/export_clip_features.py --manifest data/manifest.jsonl \
      --profile base --out $IA_CACHE_DIR

--self-test exercises the hashing/serialization paths without torch.
"""

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
MASK64 = (1 << 64) - 1

PROFILES = {
    "base": {"model": "openai/clip-vit-base-patch16", "text_dim": 512, "visual_dim": 768,
             "patch": 16, "image_size": 224},
    "large": {"model": "openai/clip-vit-large-patch14", "text_dim": 768, "visual_dim": 1024,
              "patch": 14, "image_size": 224},
}


def fnv1a64(data: bytes, h: int = FNV_OFFSET) -> int:
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


def write_igts(path: Path, name: str, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    assert arr.ndim == 2
    with open(path, "wb") as f:
        f.write(b"IGTS")
        f.write(struct.pack("<I", 1))
        nb = name.encode("utf-8")
        f.write(struct.pack("<I", len(nb)))
        f.write(nb)
        f.write(bytes([0]))  # dtype f32
        f.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        f.write(arr.tobytes())


def resize_bilinear_u8(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Match the C++ kernel: align-corners-false, edge clamp, round to u8."""
    in_h, in_w, channels = img.shape
    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    y0c = np.clip(y0, 0, in_h - 1)
    y1c = np.clip(y0 + 1, 0, in_h - 1)
    x0c = np.clip(x0, 0, in_w - 1)
    x1c = np.clip(x0 + 1, 0, in_w - 1)
    src = img.astype(np.float64)
    top = (1 - fx) * src[y0c][:, x0c] + fx * src[y0c][:, x1c]
    bot = (1 - fx) * src[y1c][:, x0c] + fx * src[y1c][:, x1c]
    out = (1 - fy) * top + fy * bot
    # floor(x + 0.5), matching C++ lround (numpy rounds half to even)
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def image_content_hash(img: np.ndarray) -> int:
    h, w, c = img.shape
    hh = fnv1a64(struct.pack("<i", w))
    hh = fnv1a64(struct.pack("<i", h), hh)
    hh = fnv1a64(struct.pack("<i", c), hh)
    return fnv1a64(img.tobytes(), hh)


def load_pnm(path: Path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] not in (b"P5", b"P6"):
        raise SystemExit(f"{path}: only binary PGM/PPM supported")
    channels = 3 if data[:2] == b"P6" else 1
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos] in b" \t\r\n":
            pos += 1
        if data[pos] == ord("#"):
            while data[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while data[pos] not in b" \t\r\n":
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise SystemExit(f"{path}: only 8-bit PNM supported")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=pos)
    return pixels.reshape(h, w, channels).copy()


def spaces(label: str) -> str:
    return label.replace("_", " ")


def prompts_for(obj: str, inter: str):
    return ["person", spaces(obj), f"a photo of a person {spaces(inter)} {spaces(obj)}"]


def self_test() -> int:
    assert fnv1a64(b"") == FNV_OFFSET
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    img = np.arange(8 * 6 * 3, dtype=np.uint8).reshape(8, 6, 3)
    same = resize_bilinear_u8(img, 8, 6)
    assert np.array_equal(img, same), "identity resize must be exact"
    out = Path("/tmp/ia_export_selftest.igts")
    write_igts(out, "t", np.ones((2, 3), dtype=np.float32))
    assert out.stat().st_size == 4 + 4 + 4 + 1 + 1 + 8 + 24
    print("self-test ok")
    return 0


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--manifest", help="dataset manifest (JSON lines)")
    ap.add_argument("--profile", choices=sorted(PROFILES), default="base")
    ap.add_argument("--out", help="cache directory to fill")
    ap.add_argument("--device", default="cpu")
    ap.add_argument("--self-test", action="store_true",
                    help="check hashing/serialization without torch")
    args = ap.parse_args()
    if args.self_test:
        return self_test()
    if not args.manifest or not args.out:
        ap.error("--manifest and --out are required")

    import torch
    from transformers import CLIPModel, CLIPTokenizer

    prof = PROFILES[args.profile]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = CLIPModel.from_pretrained(prof["model"]).to(args.device).eval()
    tokenizer = CLIPTokenizer.from_pretrained(prof["model"])
    mean = np.array([0.48145466, 0.4578275, 0.40821073])
    std = np.array([0.26862954, 0.26130258, 0.27577711])

    manifest = Path(args.manifest)
    records = [json.loads(line) for line in manifest.read_text().splitlines() if line.strip()]
    prompt_set, image_paths = set(), set()
    for rec in records:
        prompt_set.update(prompts_for(rec["object_label"], rec["interaction_label"]))
        image_paths.add(rec["image_path"])

    with torch.no_grad():
        for prompt in sorted(prompt_set):
            tokens = tokenizer([prompt], padding=True, return_tensors="pt").to(args.device)
            feats = model.get_text_features(**tokens)[0].cpu().numpy()[None, :]
            write_igts(out_dir / f"text_{fnv1a64(prompt.encode()):016x}.igts", prompt, feats)

        size = prof["image_size"]
        for rel in sorted(image_paths):
            path = Path(rel)
            if not path.is_absolute():
                path = manifest.parent / path
            img = load_pnm(path)
            if img.shape[2] == 1:
                img = np.repeat(img, 3, axis=2)
            resized = resize_bilinear_u8(img, size, size)
            key = f"{image_content_hash(resized):016x}"
            pixel = (resized.astype(np.float32) / 255.0 - mean) / std
            pixel_values = torch.tensor(pixel.transpose(2, 0, 1)[None].astype(np.float32),
                                        device=args.device)
            vision = model.vision_model(pixel_values=pixel_values)
            patches = vision.last_hidden_state[0, 1:, :]  # drop the class token
            write_igts(out_dir / f"img_{key}.igts", rel, patches.cpu().numpy())
            joint = model.visual_projection(
                model.vision_model.post_layernorm(vision.last_hidden_state))[0, 1:, :]
            write_igts(out_dir / f"img_{key}_joint.igts", rel, joint.cpu().numpy())
            print(f"cached {rel} -> img_{key}.igts")
    print(f"wrote {len(prompt_set)} text and {len(image_paths)} image entries to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
