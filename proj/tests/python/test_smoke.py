import random

import pytest

import redring


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    out = tmp_path_factory.mktemp("desk") / "mlp"
    info = redring.gen_model("mlp", out, seed=2, epochs=2)
    assert info["group_numel"] == [32]
    return out


def test_fixed_point_roundtrip():
    assert redring.encode_fixed(1.5) == 3 << 15
    assert redring.encode_fixed(-0.0001) == -7
    assert redring.decode_fixed(redring.encode_fixed(-2.25)) == -2.25
    with pytest.raises(redring.ConfigError):
        redring.encode_fixed(1.0, ring_bits=8, frac_bits=16)


def test_packing_roundtrip():
    rng = random.Random(4)
    for width in (1, 7, 8, 33, 64):
        vals = [rng.getrandbits(width) for _ in range(19)]
        data = redring.pack_words(vals, width)
        assert len(data) == redring.packed_size_bytes(19, width) == 8 * ((19 * width + 63) // 64)
        assert redring.unpack_words(data, width, 19) == vals


def test_search_and_run(desk):
    eco = redring.search(desk, desk / "val", mode="eco", samples=128)
    assert eco["mode"] == "eco"
    assert all(g["m"] == 0 for g in eco["groups"])

    full = redring.run_local(desk, desk / "val", samples=96, batch=48)
    reduced = redring.run_local(desk, desk / "val", config={"groups": eco["groups"]}, samples=96, batch=48)
    assert full["samples"] == 96
    assert full["output_digest"] == reduced["output_digest"]
    cmp = redring.compare_reports(full, reduced)
    assert cmp["same_output"]
    assert cmp["relu_tags"]["Circuit"]["bytes_ratio"] > 1.0

    budget = redring.search(desk, desk / "val", mode="budget", budget="8/64", samples=128)
    assert budget["bits_fraction"] <= 0.125


def test_errors(desk, tmp_path):
    with pytest.raises(redring.FormatError):
        redring.run_local(tmp_path / "missing", desk / "val")
    with pytest.raises(redring.ConfigError):
        redring.search(desk, desk / "val", mode="budget", budget="2")
    with pytest.raises(redring.ConfigError):
        redring.run_local(desk, desk / "val", config={"groups": [{"k": 4, "m": 3}]})
    assert issubclass(redring.ConfigError, redring.RedringError)
