#!/usr/bin/env python3
"""Train the bundled demo autoencoder and regenerate the packaged assets.

Development tooling, not part of the installed package. Produces
src/sfrelay/assets/model.sfrw plus four held-out sample images in
src/sfrelay/assets/mini/. Training data is procedurally generated (smooth
gradients, shapes, stripes) so the repository stays self-contained; run with
--data pointing at CIFAR-10 binary batches to train on real images instead.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from sfrelay import semantic as S  # noqa: E402
from sfrelay.media import dequantize_image, load_cifar_batch, quantize_image, save_png  # noqa: E402


def synth_image(rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:96, 0:96] / 95.0
    img = np.empty((3, 96, 96))
    for c in range(3):
        fx, fy = rng.uniform(0.3, 2.5, 2)
        ph = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.1, 0.3)
        img[c] = 0.5 + amp * np.sin(2 * np.pi * (fx * xx + fy * yy) + ph)
    for _ in range(int(rng.integers(2, 6))):
        color = rng.random(3)
        kind = int(rng.integers(0, 3))
        cx, cy = rng.uniform(0.1, 0.9, 2)
        if kind == 0:
            r = rng.uniform(0.05, 0.25)
            mask = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
        elif kind == 1:
            w, h = rng.uniform(0.05, 0.3, 2)
            mask = (np.abs(xx - cx) < w) & (np.abs(yy - cy) < h)
        else:
            f = rng.uniform(2, 8)
            ang = rng.uniform(0, np.pi)
            mask = np.sin(2 * np.pi * f * (xx * np.cos(ang) + yy * np.sin(ang))) > 0.3
            mask &= (np.abs(xx - cx) < 0.3) & (np.abs(yy - cy) < 0.3)
        img[:, mask] = 0.75 * color[:, None] + 0.25 * img[:, mask]
    return np.clip(img, 0.0, 1.0)


def make_dataset(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.stack([synth_image(rng) for _ in range(n)])


class AutoEncoder(nn.Module):
    def __init__(self):
        super().__init__()
        self.enc = nn.Sequential(
            nn.Conv2d(3, 16, 2, 1), nn.ReLU(),
            nn.Conv2d(16, 16, 3, 2), nn.ReLU(),
            nn.Conv2d(16, 16, 3, 2), nn.ReLU(),
        )
        self.dec = nn.Sequential(
            nn.ConvTranspose2d(16, 16, 3, 2), nn.ReLU(),
            nn.ConvTranspose2d(16, 16, 3, 2), nn.ReLU(),
            nn.ConvTranspose2d(16, 3, 2, 1), nn.Sigmoid(),
        )

    def forward(self, x):
        return self.dec(self.enc(x))


def export_model(net: AutoEncoder, train_imgs: np.ndarray, holdout: np.ndarray,
                 out_path: Path) -> S.SemanticModel:
    enc_specs, dec_specs = S.default_architecture()
    weights, biases = [], []
    for layer in [m for m in net.enc if isinstance(m, nn.Conv2d)]:
        weights.append(layer.weight.detach().numpy().astype(np.float32))
        biases.append(layer.bias.detach().numpy().astype(np.float32))
    for layer in [m for m in net.dec if isinstance(m, nn.ConvTranspose2d)]:
        # stored layout is (out, in, kh, kw); torch keeps (in, out, kh, kw)
        weights.append(layer.weight.detach().numpy().transpose(1, 0, 2, 3)
                       .astype(np.float32))
        biases.append(layer.bias.detach().numpy().astype(np.float32))

    with torch.no_grad():
        feats = net.enc(torch.from_numpy(train_imgs).float()).numpy()
    clip_min = float(np.quantile(feats, 0.001))
    clip_max = float(np.quantile(feats, 0.999))

    model = S.SemanticModel(enc_specs, dec_specs, weights, biases,
                            clip_min=clip_min, clip_max=clip_max, sigma_s=1.0)

    # sigma_s: RMS pixel error of the full quantized round trip on held-out
    # images, measured against the 8-bit reference the decoder is judged on
    errs = []
    for img in holdout:
        ref = dequantize_image(quantize_image(img))
        bits = S.features_to_bits(model, S.sem_encode(model, ref))
        rec = S.sem_decode(model, S.bits_to_features(model, bits))
        errs.append(np.mean((ref - rec) ** 2))
    model.sigma_s = float(np.sqrt(np.mean(errs)))

    out_path.parent.mkdir(parents=True, exist_ok=True)
    S.save_model(model, out_path)
    return S.load_model(out_path)


def verify_forward(net: AutoEncoder, model: S.SemanticModel, imgs: np.ndarray) -> float:
    worst = 0.0
    with torch.no_grad():
        for img in imgs:
            ours = S.sem_decode(model, S.sem_encode(model, img))
            ref = net(torch.from_numpy(img[None]).float()).numpy()[0]
            worst = max(worst, float(np.abs(ours - ref).max()))
    return worst


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--batch", type=int, default=32)
    ap.add_argument("--lr", type=float, default=1e-3)
    ap.add_argument("--train-images", type=int, default=1000)
    ap.add_argument("--holdout-images", type=int, default=100)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--data", type=Path, default=None,
                    help="optional dir of CIFAR-10 binary batches")
    ap.add_argument("--out", type=Path, default=REPO / "src/sfrelay/assets/model.sfrw")
    args = ap.parse_args()

    torch.manual_seed(args.seed)
    torch.set_num_threads(os.cpu_count() or 1)

    if args.data:
        recs = []
        for f in sorted(args.data.glob("data_batch*.bin")):
            recs.extend(img for _, img in load_cifar_batch(f))
        data = np.stack(recs[: args.train_images + args.holdout_images])
    else:
        data = make_dataset(args.train_images + args.holdout_images, args.seed)
    train, holdout = data[: args.train_images], data[args.train_images:]
    print(f"dataset: {train.shape[0]} train / {holdout.shape[0]} holdout")

    net = AutoEncoder()
    opt = torch.optim.Adam(net.parameters(), lr=args.lr)
    x_all = torch.from_numpy(train).float()
    rng = np.random.default_rng(args.seed)
    for epoch in range(args.epochs):
        order = rng.permutation(len(train))
        total = 0.0
        for i in range(0, len(order), args.batch):
            xb = x_all[order[i:i + args.batch]]
            opt.zero_grad()
            loss = nn.functional.mse_loss(net(xb), xb)
            loss.backward()
            opt.step()
            total += float(loss) * len(xb)
        print(f"epoch {epoch + 1:3d}  mse {total / len(train):.5f}")

    model = export_model(net, train, holdout, args.out)
    gap = verify_forward(net, model, holdout[:8])
    print(f"exported {args.out} ({args.out.stat().st_size} bytes)")
    print(f"clip [{model.clip_min:.4f}, {model.clip_max:.4f}]  sigma_s {model.sigma_s:.5f}")
    print(f"torch-vs-package forward gap: {gap:.2e}")
    if gap > 1e-5:
        raise SystemExit("forward disagreement above 1e-5, aborting")

    mini = REPO / "src/sfrelay/assets/mini"
    mini.mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(holdout[:4]):
        save_png(img, mini / f"img{i}.png")
    print(f"wrote 4 sample images to {mini}")


if __name__ == "__main__":
    main()
