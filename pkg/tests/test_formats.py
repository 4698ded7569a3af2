import json

import numpy as np
import pytest

from tacitsim.bits import BitVector
from tacitsim.bnn import reference_infer
from tacitsim.errors import FormatError
from tacitsim.formats import load_inputs, load_network, save_inputs, save_network
from tacitsim.workload import single_layer_net, synthetic_cnn, synthetic_inputs, synthetic_mlp


@pytest.fixture(params=["mlp", "cnn", "single"])
def net(request):
    return {"mlp": lambda: synthetic_mlp(1),
            "cnn": lambda: synthetic_cnn(2),
            "single": lambda: single_layer_net(3)}[request.param]()


def _save(net, d):
    save_network(net, d / "n.json", d / "w.bin")
    return d / "n.json", d / "w.bin"


def test_round_trip_byte_identical(net, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    man, wts = _save(net, a)
    loaded = load_network(man, wts)
    man2, wts2 = _save(loaded, b)
    assert man.read_bytes() == man2.read_bytes()
    assert wts.read_bytes() == wts2.read_bytes()
    for x in synthetic_inputs(0, net, 3):
        s1, p1 = reference_infer(net, x)
        s2, p2 = reference_infer(loaded, x)
        assert p1 == p2 and np.array_equal(s1, s2)


def test_weight_bits_column_major(tmp_path):
    net = single_layer_net(0, m=4, n=2)
    man, wts = _save(net, tmp_path)
    ref = json.loads(man.read_text())["layers"][1]["weight_ref"]
    blob = wts.read_bytes()[ref["offset"]:ref["offset"] + ref["length"]]
    bits = [(blob[0] >> k) & 1 for k in range(8)]
    w = net.layers[1].weights
    assert bits == w.column(0).to_array().tolist() + w.column(1).to_array().tolist()


def test_two_layer_manifest_rejected(tmp_path):
    man, wts = _save(single_layer_net(0), tmp_path)
    d = json.loads(man.read_text())
    d["layers"] = d["layers"][1:]  # binary first layer
    man.write_text(json.dumps(d))
    with pytest.raises(FormatError, match="layer 0"):
        load_network(man, wts)


def test_binary_boundary_rejected(tmp_path):
    man, wts = _save(synthetic_mlp(0), tmp_path)
    d = json.loads(man.read_text())
    d["layers"][-1]["precision"] = "binary"
    man.write_text(json.dumps(d))
    with pytest.raises(FormatError, match="layer 2"):
        load_network(man, wts)


def test_truncated_weights_dangling(tmp_path):
    man, wts = _save(synthetic_mlp(0), tmp_path)
    blob = wts.read_bytes()
    last = json.loads(man.read_text())["layers"][2]["weight_ref"]
    wts.write_bytes(blob[:last["offset"] + 1])
    with pytest.raises(FormatError, match=r"layer 2: weight_ref .* dangles"):
        load_network(man, wts)


def test_shape_mismatch_names_layer(tmp_path):
    man, wts = _save(synthetic_mlp(0), tmp_path)
    d = json.loads(man.read_text())
    d["layers"][1]["dims"]["in"] += 1
    man.write_text(json.dumps(d))
    with pytest.raises(FormatError, match="layer 1"):
        load_network(man, wts)


def test_malformed_files(tmp_path):
    man, wts = _save(synthetic_mlp(0), tmp_path)
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(FormatError):
        load_network(bad, wts)
    with pytest.raises(FormatError):
        load_network(tmp_path / "missing.json", wts)
    (tmp_path / "short.bin").write_bytes(b"XX")
    with pytest.raises(FormatError):
        load_network(man, tmp_path / "short.bin")
    d = json.loads(man.read_text())
    d["format_version"] = 99
    man.write_text(json.dumps(d))
    with pytest.raises(FormatError, match="format_version"):
        load_network(man, wts)


def test_inputs_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    bits = [BitVector.from_array(rng.integers(0, 2, 13)) for _ in range(5)]
    save_inputs(bits, tmp_path / "b.bin")
    assert load_inputs(tmp_path / "b.bin") == bits
    ints = [rng.integers(-100, 100, 7) for _ in range(4)]
    save_inputs(ints, tmp_path / "i.bin")
    back = load_inputs(tmp_path / "i.bin")
    assert all(np.array_equal(a, b) for a, b in zip(ints, back))


def test_inputs_errors(tmp_path):
    with pytest.raises(FormatError):
        save_inputs([BitVector.ones(3), BitVector.ones(4)], tmp_path / "x.bin")
    save_inputs([BitVector.ones(9)] * 2, tmp_path / "x.bin")
    data = (tmp_path / "x.bin").read_bytes()
    (tmp_path / "x.bin").write_bytes(data[:-1])
    with pytest.raises(FormatError, match="header implies"):
        load_inputs(tmp_path / "x.bin")
    (tmp_path / "y.bin").write_bytes(b"garbage-garbage-garbage-")
    with pytest.raises(FormatError, match="magic"):
        load_inputs(tmp_path / "y.bin")
