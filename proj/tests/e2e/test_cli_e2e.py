"""End-to-end checks of the freqcons executable.

Frames are written with Pillow, weight and tensor files with struct, and every
JSON report is validated against the schemas in schemas/.
"""

import json
import os
import struct
import subprocess
from pathlib import Path

import numpy as np
import pytest
from jsonschema import Draft202012Validator
from PIL import Image
from referencing import Registry, Resource

BIN = Path(os.environ.get("FREQCONS_BIN", "build/tools/freqcons"))
SCHEMAS = Path(os.environ.get("FREQCONS_SCHEMAS", "schemas"))


def _registry():
    resources = []
    for path in SCHEMAS.glob("*.json"):
        doc = json.loads(path.read_text())
        resources.append((doc["$id"], Resource.from_contents(doc)))
    return Registry().with_resources(resources)


REGISTRY = _registry()


def validate(kind, report):
    schema = json.loads((SCHEMAS / f"{kind}.v1.json").read_text())
    Draft202012Validator.check_schema(schema)
    errors = list(Draft202012Validator(schema, registry=REGISTRY).iter_errors(report))
    assert not errors, [e.message for e in errors]


def run(*args):
    return subprocess.run([str(BIN), *map(str, args)], capture_output=True, text=True, timeout=120)


def write_frames(directory, frames, stem="frame_", start=1):
    directory.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        img = np.clip(np.rint(f * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(img).save(directory / f"{stem}{i + start:04d}.png")


def texture(seed, size=32):
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size] / size
    out = np.full((size, size, 3), 0.5)
    for _ in range(6):
        fu, fv = rng.integers(0, 4, 2)
        amp = rng.uniform(0.02, 0.07, 3)
        ph = rng.uniform(0, 2 * np.pi)
        out += amp * np.cos(2 * np.pi * (fu * y + fv * x) + ph)[..., None]
    return np.clip(out, 0.1, 0.9)


def translation(frames=5, noise=0.0, seed=5):
    base = texture(seed)
    rng = np.random.default_rng(seed + 1)
    out = []
    for t in range(frames):
        f = np.roll(base, t, axis=1)
        if noise:
            f = np.clip(f + rng.normal(0, noise, f.shape), 0, 1)
        out.append(f)
    return out


# --- tfc / wtfr / metrics ----------------------------------------------------


def test_tfc_report_and_heatmaps(tmp_path):
    write_frames(tmp_path / "clip", translation())
    r = run("tfc", "--ref", tmp_path / "clip", "--out", tmp_path / "out")
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "out" / "tfc.json").read_text())
    validate("tfc", report)
    assert report["video_id"] == "clip"
    assert report["transitions"] == 4
    for name in ("mean_tac.png", "mean_tpc.png"):
        with Image.open(tmp_path / "out" / name) as img:
            assert img.size == (32, 32) and img.mode == "L"
    dump = (tmp_path / "out" / "mean_tac.tfcg").read_bytes()
    assert dump[:4] == b"TFCG"
    rows, cols, layout = struct.unpack_from("<III", dump, 4)
    assert (rows, cols, layout) == (32, 32, 0)
    assert len(dump) == 16 + 8 * rows * cols


def test_wtfr_identical_and_mismatch(tmp_path):
    frames = translation()
    write_frames(tmp_path / "a", frames)
    write_frames(tmp_path / "b", frames)
    r = run("wtfr", "--ref", tmp_path / "a", "--syn", tmp_path / "b", "--out", tmp_path / "o", "--threads", "2")
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "o" / "wtfr.json").read_text())
    validate("wtfr", report)
    assert report["means"]["total"] == 0.0
    assert report["config"]["wtfr"] == {
        "alpha": 0.5, "beta": 1.0, "delta": 0.05, "phase_mode": "wrapped", "weighting": True}

    write_frames(tmp_path / "short", frames[:3])
    r = run("wtfr", "--ref", tmp_path / "a", "--syn", tmp_path / "short", "--out", tmp_path / "o")
    assert r.returncode == 2
    assert "5" in r.stderr and "3" in r.stderr


def test_wtfr_config_file(tmp_path):
    write_frames(tmp_path / "a", translation())
    write_frames(tmp_path / "b", translation(noise=0.05))
    cfg = tmp_path / "w.cfg"
    cfg.write_text("alpha = 1\nbeta = 0\nweighting = off\n")
    r = run("wtfr", "--ref", tmp_path / "a", "--syn", tmp_path / "b", "--config", cfg, "--out", tmp_path / "o")
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "o" / "wtfr.json").read_text())
    validate("wtfr", report)
    assert report["config"]["config_source"] == "file"
    for p in report["per_transition"]:
        assert p["total"] == pytest.approx(p["l_tac"], rel=1e-12)

    cfg.write_text("unknown = 3\n")
    assert run("wtfr", "--ref", tmp_path / "a", "--syn", tmp_path / "b", "--config", cfg,
               "--out", tmp_path / "o").returncode == 2


def write_flo(path, dx, dy):
    h, w = dx.shape
    data = np.stack([dx, dy], axis=-1).astype("<f4")
    path.write_bytes(struct.pack("<fII", 202021.25, w, h) + data.tobytes())


def test_metrics_auto_and_files(tmp_path):
    frames = translation()
    write_frames(tmp_path / "ref", frames)
    write_frames(tmp_path / "syn", frames)
    r = run("metrics", "--ref", tmp_path / "ref", "--syn", tmp_path / "syn", "--out", tmp_path / "auto")
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "auto" / "metrics.json").read_text())
    validate("metrics", report)
    assert report["flow_source"] == "phase-correlation"
    assert report["means"]["tcm"] == 1.0
    assert report["means"]["psnr"] == 99.0
    assert report["means"]["ssim"] == pytest.approx(1.0, abs=1e-12)

    flows = tmp_path / "flows"
    flows.mkdir()
    for t in range(2, 6):
        write_flo(flows / f"{t:05d}.flo", np.full((32, 32), -1.0), np.zeros((32, 32)))
    r = run("metrics", "--ref", tmp_path / "ref", "--syn", tmp_path / "syn", "--flow", flows, "--out",
            tmp_path / "files")
    assert r.returncode == 0, r.stderr
    report = json.loads((tmp_path / "files" / "metrics.json").read_text())
    validate("metrics", report)
    assert report["flow_source"] == "files"
    assert [p["t"] for p in report["per_transition"]] == [2, 3, 4, 5]

    write_flo(flows / "00003.flo", np.zeros((8, 8)), np.zeros((8, 8)))
    r = run("metrics", "--ref", tmp_path / "ref", "--syn", tmp_path / "syn", "--flow", flows, "--out", tmp_path / "x")
    assert r.returncode == 2
    assert "transition 3" in r.stderr


def test_usage_and_io_exit_codes(tmp_path):
    assert run().returncode == 2
    assert run("tfc", "--ref", tmp_path).returncode == 2
    assert run("tfc", "--ref", tmp_path / "missing", "--out", tmp_path / "o").returncode == 3
    assert run("metrics", "--ref", tmp_path, "--syn", tmp_path, "--out", tmp_path / "o").returncode == 2


# --- ffc ---------------------------------------------------------------------


def ffcw(tensors):
    out = b"FFCW" + struct.pack("<II", 1, len(tensors))
    for name in sorted(tensors):
        dims, values = tensors[name]
        values = np.asarray(values, dtype="<f4").ravel()
        assert values.size == int(np.prod(dims))
        out += struct.pack("<I", len(name)) + name.encode()
        out += struct.pack("<I", len(dims)) + struct.pack(f"<{len(dims)}I", *dims) + values.tobytes()
    return out


def ffct(x):
    x = np.asarray(x, dtype="<f4")
    return b"FFCT" + struct.pack("<I", x.ndim) + struct.pack(f"<{x.ndim}I", *x.shape) + x.tobytes()


def read_ffct(path):
    data = path.read_bytes()
    assert data[:4] == b"FFCT"
    (rank,) = struct.unpack_from("<I", data, 4)
    dims = struct.unpack_from(f"<{rank}I", data, 8)
    return np.frombuffer(data, dtype="<f4", offset=8 + 4 * rank).reshape(dims).astype(np.float64)


def conv(x, w, b):
    """Zero-padded 'same' cross-correlation, stride 1."""
    k = w.shape[-1]
    p = k // 2
    c, h, wd = x.shape
    xp = np.pad(x, ((0, 0), (p, p), (p, p)))
    y = np.zeros((w.shape[0], h, wd))
    for a in range(k):
        for bb in range(k):
            y += np.einsum("oi,ihw->ohw", w[:, :, a, bb], xp[:, a:a + h, bb:bb + wd])
    return y + b[:, None, None]


def spectral(xg, t, prefix):
    h = conv(xg, t[prefix + ".pre.weight"], t[prefix + ".pre.bias"])
    H, W = xg.shape[1:]
    f = np.fft.rfft2(h)
    stacked = np.empty((2 * h.shape[0],) + f.shape[1:])
    stacked[0::2] = f.real
    stacked[1::2] = f.imag
    g = conv(stacked, t[prefix + ".fu.weight"], t[prefix + ".fu.bias"])
    back = np.fft.irfft2(g[0::2] + 1j * g[1::2], s=(H, W))
    return conv(back, t[prefix + ".post.weight"], t[prefix + ".post.bias"])


@pytest.mark.parametrize("width", [6, 7])
def test_ffc_matches_numpy_oracle(tmp_path, width):
    rng = np.random.default_rng(width)
    cin, cout, hidden = 4, 4, 3
    lin, gin, lout, gout = 2, 2, 2, 2
    f32 = lambda *shape: rng.uniform(-1, 1, shape).astype(np.float32).astype(np.float64)
    t = {
        "block0.l2l.weight": f32(lout, lin, 3, 3), "block0.l2l.bias": f32(lout),
        "block0.g2l.weight": f32(lout, gin, 3, 3), "block0.g2l.bias": f32(lout),
        "block0.l2g.weight": f32(gout, lin, 3, 3), "block0.l2g.bias": f32(gout),
        "block0.g2g.pre.weight": f32(hidden, gin, 1, 1), "block0.g2g.pre.bias": f32(hidden),
        "block0.g2g.fu.weight": f32(2 * hidden, 2 * hidden, 1, 1), "block0.g2g.fu.bias": f32(2 * hidden),
        "block0.g2g.post.weight": f32(gout, hidden, 1, 1), "block0.g2g.post.bias": f32(gout),
    }
    tensors = {name: (list(v.shape), v) for name, v in t.items()}
    tensors["model.blocks"] = ([1], [1])
    tensors["block0.kind"] = ([1], [0])
    tensors["block0.global_ratio"] = ([1], [0.5])
    tensors["block0.flags"] = ([1], [0])
    tensors["block0.channels"] = ([2], [cin, cout])
    for prefix, n in (("block0.g2g.pre_norm", hidden), ("block0.g2g.fu_norm", 2 * hidden),
                      ("block0.norm_l", lout), ("block0.norm_g", gout)):
        tensors[prefix + ".scale"] = ([n], np.ones(n))
        tensors[prefix + ".shift"] = ([n], np.zeros(n))
    (tmp_path / "m.ffcw").write_bytes(ffcw(tensors))
    x = f32(cin, 5, width)
    (tmp_path / "x.ffct").write_bytes(ffct(x))

    r = run("ffc", "--weights", tmp_path / "m.ffcw", "--input", tmp_path / "x.ffct", "--out", tmp_path / "o")
    assert r.returncode == 0, r.stderr
    assert f"block 0 (same) -> 4x5x{width}" in r.stdout
    y = read_ffct(tmp_path / "o" / "output.ffct")

    xl, xg = x[:lin], x[lin:]
    yl = conv(xl, t["block0.l2l.weight"], t["block0.l2l.bias"]) + conv(xg, t["block0.g2l.weight"], t["block0.g2l.bias"])
    yg = conv(xl, t["block0.l2g.weight"], t["block0.l2g.bias"]) + spectral(xg, t, "block0.g2g")
    expect = np.concatenate([yl, yg])
    assert y.shape == expect.shape
    assert np.max(np.abs(y - expect)) <= 1e-5 * max(1.0, np.max(np.abs(expect)))

    report = json.loads((tmp_path / "o" / "ffc.json").read_text())
    validate("ffc", report)
    assert report["output_shape"] == f"4x5x{width}"


def test_ffc_format_errors(tmp_path):
    (tmp_path / "x.ffct").write_bytes(ffct(np.zeros((1, 2, 2))))
    (tmp_path / "bad.ffcw").write_bytes(b"FFCX" + struct.pack("<II", 1, 0))
    r = run("ffc", "--weights", tmp_path / "bad.ffcw", "--input", tmp_path / "x.ffct", "--out", tmp_path / "o")
    assert r.returncode == 3
    assert "offset 0" in r.stderr

    identity = np.zeros((1, 1, 3, 3))
    identity[0, 0, 1, 1] = 1.0
    (tmp_path / "m.ffcw").write_bytes(ffcw({
        "model.blocks": ([1], [1]), "block0.kind": ([1], [0]), "block0.global_ratio": ([1], [0]),
        "block0.flags": ([1], [0]), "block0.channels": ([2], [1, 1]),
        "block0.l2l.weight": ([1, 1, 3, 3], identity), "block0.l2l.bias": ([1], [0]),
        "block0.norm_l.scale": ([1], [1]), "block0.norm_l.shift": ([1], [0]),
    }))
    r = run("ffc", "--weights", tmp_path / "m.ffcw", "--input", tmp_path / "x.ffct", "--out", tmp_path / "ok")
    assert r.returncode == 0, r.stderr
    assert (tmp_path / "ok" / "output.ffct").read_bytes() == (tmp_path / "x.ffct").read_bytes()
    (tmp_path / "bad.ffct").write_bytes(b"FFCT" + struct.pack("<I", 9))
    r = run("ffc", "--weights", tmp_path / "m.ffcw", "--input", tmp_path / "bad.ffct", "--out", tmp_path / "o")
    assert r.returncode == 3
    assert "offset 4" in r.stderr


GOLDEN = Path(os.environ.get("FREQCONS_GOLDEN", "tests/golden"))


@pytest.mark.parametrize("path", sorted(GOLDEN.glob("*/**/*.json")),
                         ids=lambda p: str(p.relative_to(GOLDEN)))
def test_frozen_reports_validate(path):
    report = json.loads(path.read_text())
    validate(report["schema"].split(".")[1], report)
