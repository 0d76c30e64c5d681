#!/usr/bin/env python3
"""Smoke test for the stase_py extension module.

Builds nothing itself: run `cargo build -p stase-py` (or --release) first,
then `python3 python/smoke_test.py`. Uses only the standard library.
"""

import importlib.util
import json
import math
import random
import struct
import sys
import tempfile
import wave
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libstase_py.so", "stase_py.so", "libstase_py.dylib")
    ]
    for path in candidates:
        if path.exists():
            spec = importlib.util.spec_from_file_location("stase_py", str(path))
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("stase_py library not found; run `cargo build -p stase-py` first")


def write_noise_stem(path, seconds=1.0, rate=48000, seed=1234):
    rng = random.Random(seed)
    frames = bytearray()
    for _ in range(int(seconds * rate)):
        frames += struct.pack("<h", int(rng.uniform(-0.5, 0.5) * 32767))
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(rate)
        w.writeframes(bytes(frames))


def main():
    stase = load_module()
    templates = str(ROOT / "data" / "templates.json")
    hrir = str(ROOT / "data" / "hrir" / "manifest.json")
    rir = str(ROOT / "data" / "rir" / "manifest.json")

    # Scalar helpers.
    gl, gr = stase.pan_gains(0.0)
    assert gl == gr, "center pan must be symmetric"
    assert abs(gl * gl + gr * gr - 1.0) < 1e-12, "pan law conserves power"
    tau90 = stase.woodworth_tau_s(90.0)
    assert abs(tau90 - 655.815389488494e-6) < 1e-12, f"tau(90) = {tau90}"
    left, right = stase.itd_seconds(45.0)
    mleft, mright = stase.itd_seconds(-45.0)
    assert left > right, "a source on the right delays the left ear"
    assert (left, right) == (mright, mleft), "itd antisymmetry"

    # Prompt layer.
    cues = json.loads(stase.parse_cues("guitar at 45 degrees, 3 meters"))
    assert cues == [
        {"instrument": "guitar", "azimuth_deg": 45.0, "distance_m": 3.0}
    ], cues
    assert stase.classify("guitar at 45 degrees") == "description"
    assert stase.classify("warm sunset vibes") == "abstract"

    ranking = json.loads(stase.retrieve(templates, "smoky jazz club"))
    scores = [h["score"] for h in ranking["hits"]]
    assert scores == sorted(scores, reverse=True), "hits are ranked"
    assert not ranking["low_confidence"], "in-vocabulary query is confident"

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        stems = tmp / "stems"
        stems.mkdir()
        write_noise_stem(stems / "guitar.wav")

        plan_json, warnings = stase.build_plan(
            "guitar at 45 degrees", ["guitar"], templates
        )
        assert isinstance(warnings, list)
        plan = json.loads(plan_json)
        (source,) = plan["sources"]
        assert source["source_id"] == "guitar"
        assert source["azimuth_deg"] == 45.0

        mix = tmp / "mix.wav"
        trace = tmp / "mix.trace.json"
        peak = stase.render_to_file(
            plan_json,
            str(stems),
            str(mix),
            hrir_manifest=hrir,
            rir_manifest=rir,
            trace_path=str(trace),
        )
        assert 0.0 < peak <= 1.0, f"peak {peak}"
        assert json.loads(trace.read_text())["sources"], "trace lists sources"

        itd = stase.estimate_itd_wav(str(mix), weighting="phat")
        azimuth = stase.azimuth_from_itd(itd)
        assert abs(azimuth - 45.0) < 8.0, f"mix ITD reads {azimuth:.1f} deg"
        ild = stase.estimate_ild_wav(str(mix))
        assert ild > 3.0, f"right-side source should be right-heavy, got {ild:.2f} dB"

        report = json.loads(
            stase.analyze_render_files(
                plan_json, str(stems), hrir_manifest=hrir, rir_manifest=rir
            )
        )
        assert report["all_within_tolerance"], report
        measured = report["sources"][0]["measured_azimuth_deg"]
        assert abs(measured - 45.0) <= report["tolerance_deg"], measured

        try:
            stase.estimate_itd_wav(str(mix), weighting="sharpest")
        except ValueError as e:
            assert "plain" in str(e)
        else:
            raise AssertionError("bad weighting must raise ValueError")

    print("smoke test passed: plan, render, and cue verification all check out")


if __name__ == "__main__":
    main()
