#!/usr/bin/env python3
"""Write a small synthetic corpus (speech/, noise/, grids/) for trying the CLI."""
import argparse
import json
import wave
from pathlib import Path

import numpy as np


def write_wav(path, x, fs):
    pcm = np.clip(np.round(x * 32767), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(fs)
        w.writeframes(pcm.tobytes())


def voiced(seconds, fs, f0, rng):
    # Harmonic buzz with a gliding pitch under a 4 Hz syllable envelope.
    t = np.arange(int(seconds * fs)) / fs
    f = f0 * (1 + 0.1 * np.sin(2 * np.pi * 0.7 * t))
    phase = 2 * np.pi * np.cumsum(f) / fs
    x = sum(np.sin(h * phase) / h for h in range(1, 13) if h * f0 * 1.1 < 0.45 * fs)
    env = 0.5 * (1 - np.cos(2 * np.pi * 4 * t))
    return 0.25 * env * x + 0.01 * rng.standard_normal(t.size)


def grid(name, fs, brightness):
    entries = []
    for el in (-45, 0, 45):
        for az in range(-180, 180, 30):
            off = np.arccos(np.cos(np.radians(az)) * np.cos(np.radians(el)))
            a = float(np.clip(brightness * (1 - off / np.pi), 0.05, 0.95))
            ir = a ** np.arange(32)
            ir *= (0.3 + 0.7 * (1 - off / np.pi)) / ir.sum()
            entries.append({"azimuth_deg": az, "elevation_deg": el, "ir": ir.tolist()})
    return {"name": name, "fs": fs, "entries": entries}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root", type=Path)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    for sub in ("speech", "noise", "grids"):
        (args.root / sub).mkdir(parents=True, exist_ok=True)

    for i, f0 in enumerate((105, 140, 180, 220)):
        fs = 16000 if i % 2 else 48000
        write_wav(args.root / "speech" / f"talker{i}.wav", voiced(3.0, fs, f0, rng), fs)

    white = 0.1 * rng.standard_normal(5 * 48000)
    brown = np.cumsum(rng.standard_normal(5 * 48000))
    brown -= np.convolve(brown, np.ones(4801) / 4801, mode="same")
    brown *= 0.1 / np.std(brown)
    write_wav(args.root / "noise" / "white.wav", white, 48000)
    write_wav(args.root / "noise" / "rumble.wav", brown, 48000)

    for i, b in enumerate((0.2, 0.4, 0.6, 0.8)):
        (args.root / "grids" / f"speaker{i}.json").write_text(json.dumps(grid(f"speaker{i}", 48000, b)))


if __name__ == "__main__":
    main()
