import os
import pathlib

import numpy as np
import pytest

import wmark

DATA = pathlib.Path(os.environ.get("WMARK_DATA_DIR", pathlib.Path(__file__).parents[2] / "data"))


def corpus_image(name="rocket.png"):
    return wmark.load_image(DATA / "corpus" / name)


def test_embed_detect_round_trip():
    img = corpus_image()
    marked, casts = wmark.embed(img, 50, 1234)
    assert marked.shape == img.shape and marked.dtype == np.uint8
    assert casts == len(wmark.encode_payload(1234)["cast_set"])
    assert wmark.psnr(img, marked) >= 40.0
    r = wmark.detect(marked, 50)
    assert r["watermarked"] and r["message"] == 1234
    clean = wmark.detect(img, 50)
    assert not clean["watermarked"] and clean["message"] is None
    assert not any(b["evaluated"] for b in clean["per_bit"][1:])


def test_rgb_arrays_and_io(tmp_path):
    img = corpus_image("flower.png")
    assert img.ndim == 3 and img.shape[2] == 3
    wmark.save_image(img, tmp_path / "c.png")
    assert np.array_equal(wmark.load_image(tmp_path / "c.png"), img)


def test_payload_and_keystream():
    aces = wmark.encode_payload(wmark.MAX_MESSAGE)
    assert aces["flag"] and aces["cast_set"] == [0, 1]
    assert wmark.decode_payload(aces["bits"]) == wmark.MAX_MESSAGE
    assert wmark.decode_payload([False] + [True] * 15) is None
    seeds = wmark.seed_vector(50)
    assert seeds[0] == 50 and len(set(seeds)) == 16
    g = wmark.gaussian_sequence(50, 100000)
    assert abs(g.mean()) < 0.013 and abs(g.var() - 1) < 0.026


def test_errors():
    img = corpus_image()
    with pytest.raises(wmark.WatermarkError, match="MessageOutOfRange"):
        wmark.embed(img, 50, 16384)
    with pytest.raises(wmark.WatermarkError, match="CapacityExceeded"):
        wmark.embed(img[:64, :64], 50, 1, seq_len=16000)
    with pytest.raises(wmark.WatermarkError, match="InvalidSpec"):
        wmark.attack(img, "rotate_crop:370")


def test_store_registration(tmp_path):
    img = corpus_image("chelsea.png")
    marked, _ = wmark.embed(img, 350, 4321)
    store = tmp_path / "lib"
    assert wmark.ingest(store, img) == 1
    q = wmark.query(store, marked)
    assert q["imageid"] == 1 and q["confident"]
    rotated = wmark.attack(marked, "rotate_crop:5")
    r = wmark.detect(rotated, 350, store=store)
    assert r["registered"] and r["watermarked"] and r["message"] == 4321
    assert wmark.canonical_attack("scale:0.5") == "scale:0.5,0.5"
