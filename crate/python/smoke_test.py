#!/usr/bin/env python3
"""Smoke test for the ctprep_py extension module.

Build the module first:

    cargo build -p ctprep-python --release

then run this script from anywhere:

    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_ctprep_py():
    """Copy the built cdylib next to a temp dir under an importable name."""
    candidates = [
        REPO / "target" / "release" / "libctprep_py.so",
        REPO / "target" / "debug" / "libctprep_py.so",
        REPO / "target" / "release" / "libctprep_py.dylib",
        REPO / "target" / "debug" / "libctprep_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit(
            "libctprep_py not found; run `cargo build -p ctprep-python --release` first"
        )
    stage = Path(tempfile.mkdtemp(prefix="ctprep_py_"))
    shutil.copy2(built, stage / "ctprep_py.so")
    sys.path.insert(0, str(stage))
    import ctprep_py

    return ctprep_py


def tube_phantom(cp, n=24, radius=2):
    """NCCT = 40 HU ball in air; CTA adds +300 HU along an x-axis tube."""
    c = n / 2.0 - 0.5
    brain_r = n * 0.42
    ncct, cta, brain_bits, tube_bits = [], [], [], []
    x_lo, x_hi = int(n * 0.2), int(n * 0.8)
    for z in range(n):
        for y in range(n):
            for x in range(n):
                inside = (x - c) ** 2 + (y - c) ** 2 + (z - c) ** 2 <= brain_r**2
                on_tube = inside and x_lo <= x < x_hi and (y - c) ** 2 + (
                    z - c
                ) ** 2 <= radius**2
                brain_bits.append(inside)
                tube_bits.append(on_tube)
                base = 40.0 if inside else -1000.0
                ncct.append(base)
                cta.append(base + (300.0 if on_tube else 0.0))
    dims, spacing = (n, n, n), (1.0, 1.0, 1.0)
    ncct_vol = cp.Volume(dims, spacing, ncct, "ncct")
    cta_vol = cp.Volume(dims, spacing, cta, "cta")
    brain = cp.Mask.from_values(ncct_vol, brain_bits)
    tube = cp.Mask.from_values(ncct_vol, tube_bits)
    return ncct_vol, cta_vol, brain, tube


def main():
    cp = import_ctprep_py()
    ncct, cta, brain, tube = tube_phantom(cp)
    assert tube.count() >= 25, "phantom tube too small"

    # Vessel segmentation recovers exactly the tube.
    vessels = cp.segment_vessels(cta, ncct, brain)
    assert vessels.count() == tube.count()
    assert vessels.is_subset_of(brain)
    assert cp.dice(vessels, tube) == 1.0
    assert cp.count_components(vessels) == 1

    # Clinical windowing: the window midpoint maps to 0.5.
    mid = cp.Volume((1, 1, 1), (1.0, 1.0, 1.0), [45.0], "cta")
    ones = cp.Mask.from_values(mid, [True])
    assert cp.clinical_window(mid, ones).values() == [0.5]
    assert cp.default_windows()["cta"] == (0.0, 90.0)

    # Equalization maps a constant foreground to 1.0.
    flat = cp.Volume((2, 2, 2), (1.0, 1.0, 1.0), [0.4] * 8, "cta")
    full = cp.Mask.from_values(flat, [True] * 8)
    assert cp.equalize_foreground(flat, full).values() == [1.0] * 8

    # Baseline normalization centers its own foreground.
    stats = cp.compute_foreground_stats([cta], [brain])
    z = cp.baseline_normalize(cta, stats)
    assert abs(z.value_at(0, 0, 0)) >= 0.0  # finite everywhere
    assert stats.std > 0.0

    # Metrics on identical masks.
    report = cp.evaluate(vessels, tube)
    assert report["dice"] == 1.0
    assert report["avd_ml"] == 0.0
    assert report["f1_lesionwise"] == 1.0
    assert report["alcd"] == 0

    # Published range-kept row for CTA.
    assert cp.range_kept_percent(0.0, 90.0, -3.25, 342.48) == 26.0

    # NIfTI round-trip through a temp file, gzipped.
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "vessels.nii.gz"
        vessels.to_volume().write(path, "uint8")
        back = cp.Volume.read(path, "mask")
        assert back.dims == vessels.dims
        assert cp.nonzero_mask(back).count() == vessels.count()

        # QC render with overlay.
        ppm = Path(tmp) / "qc.ppm"
        index = cp.render_slice(
            cta, ppm, plane="axial", overlay=vessels, lo=0.0, hi=400.0
        )
        header = ppm.read_bytes()[:3]
        assert header == b"P6\n"
        assert 0 <= index < cta.dims[2]

    # Fallback skull strip finds the ball.
    mask = cp.fallback_skull_strip(ncct)
    assert mask.count() > 0
    assert not math.isnan(stats.mean)

    print("smoke test passed")


if __name__ == "__main__":
    main()
