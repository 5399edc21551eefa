import json

import numpy as np
import pytest

import sc3


def test_reference_config_round_trip():
    cfg = sc3.reference_config()
    assert cfg["tick"] == 0.25
    assert sc3.config_hash(cfg) == sc3.config_hash(json.loads(json.dumps(cfg)))


def test_unknown_key_is_rejected():
    cfg = sc3.reference_config()
    cfg["compute"]["bogus"] = 1
    with pytest.raises(ValueError):
        sc3.config_hash(cfg)


def test_modem_round_trips():
    rng = np.random.default_rng(1)
    x = (rng.choice([-1, 1], 64) + 1j * rng.choice([-1, 1], 64)) / np.sqrt(2)
    y = sc3.ofdm_modulate(list(x), 8)
    assert np.max(np.abs(np.array(sc3.ofdm_demodulate(y, 64, 8)) - x)) < 1e-10
    c1 = 3 / 128
    y = sc3.afdm_modulate(list(x), c1, 0.0, 8)
    assert np.max(np.abs(np.array(sc3.afdm_demodulate(y, 64, c1, 0.0, 8)) - x)) < 1e-10
    assert sc3.afdm_modulate(list(x), 0.0, 0.0, 8) == sc3.ofdm_modulate(list(x), 8)


def test_latency_anchors():
    lat = sc3.latency_modes()
    assert lat["local"] == pytest.approx(0.541)
    assert lat["pando"] == pytest.approx(0.077)


def test_scene_and_los():
    scene = sc3.generate_scene(7, 12)
    assert len(scene["buildings"]) == 12
    top = max(b["height"] for b in scene["buildings"]) + 1
    assert sc3.is_los((10, 10, top), (990, 990, top), scene)


def test_latency_run(tmp_path):
    report = sc3.run("latency", tmp_path)
    assert report["experiment"] == "latency"
    assert (tmp_path / "latency_sweep.csv").exists()
    assert (tmp_path / "manifest.json").exists()
    assert report["summary"]["reduction_percent"] > 85
