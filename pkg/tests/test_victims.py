import json
import math
import time

import numpy as np
import pytest

from priorattack.core import Image
from priorattack.errors import (
    BudgetExhausted,
    ConfigError,
    GradientUnavailable,
    ProtocolError,
    ShapeError,
    TransportError,
)
from priorattack.victims import (
    Layer,
    LinearModel,
    MeteredOracle,
    MlpModel,
    MlpWeights,
    OracleSpec,
    QueryLedger,
    RemoteModel,
    SphereModel,
    load_mlp,
    mlp_predict,
    phi,
    read_image,
    remote_predict,
    save_mlp,
    start_stub_server,
    true_gradient,
    untargeted_view,
    write_image,
)
from priorattack.victims.mlp import mlp_logits


@pytest.fixture
def linear_spec():
    return OracleSpec(LinearModel([1.0, -1.0, 0.5], bias=-0.1), target_label=1, original_label=0)


def test_phi_targeted_verdicts(linear_spec):
    ledger = QueryLedger(10)
    assert phi(linear_spec, ledger, np.array([1.0, 0.0, 0.0])) == 1
    assert phi(linear_spec, ledger, np.array([0.0, 1.0, 0.0])) == -1
    assert ledger.used == 2


def test_phi_budget_exhausted_leaves_count(linear_spec):
    ledger = QueryLedger(2)
    x = np.zeros(3)
    phi(linear_spec, ledger, x)
    phi(linear_spec, ledger, x)
    with pytest.raises(BudgetExhausted):
        phi(linear_spec, ledger, x)
    assert ledger.used == 2


def test_oracle_spec_validation():
    model = LinearModel([1.0])
    with pytest.raises(ConfigError):
        OracleSpec(model, target_label=1, original_label=1)
    with pytest.raises(ConfigError):
        OracleSpec(model, untargeted=True)


def test_untargeted_wrapper():
    weights = MlpWeights(3, 3, [Layer(np.eye(3), np.zeros(3), "identity")])
    spec = OracleSpec(MlpModel(weights), target_label=2, original_label=0)
    view = untargeted_view(spec, 0)
    ledger = QueryLedger(10)
    assert phi(view, ledger, np.array([1.0, 0.0, 0.0])) == -1
    assert phi(view, ledger, np.array([0.0, 1.0, 0.0])) == 1
    assert phi(view, ledger, np.array([0.0, 0.0, 1.0])) == 1
    assert untargeted_view(view) == view
    assert untargeted_view(untargeted_view(spec, 0), 0) == view


def test_phi_is_deterministic(linear_spec):
    rng = np.random.default_rng(0)
    ledger = QueryLedger(1000)
    for x in rng.random((50, 3)):
        assert phi(linear_spec, ledger, x) == phi(linear_spec, ledger, x)


def test_linear_verdict_flips_at_the_hyperplane():
    model = LinearModel([2.0, 1.0], bias=-1.0)
    spec = OracleSpec(model, target_label=1, original_label=0)
    oracle = MeteredOracle(spec, QueryLedger(10))
    on = np.array([0.25, 0.5])
    assert model.score(on) == 0.0
    assert oracle(on) == -1
    assert oracle(on + [1e-9, 0.0]) == 1


def test_metered_oracle_counts_every_call(linear_spec):
    oracle = MeteredOracle(linear_spec, QueryLedger(100))
    for i in range(37):
        oracle(np.full(3, i / 37))
    assert oracle.ledger.used == 37
    oracle.peek(np.zeros(3))
    assert oracle.ledger.used == 37


# --- MLP -------------------------------------------------------------------


def scalar_forward(layers, x):
    """Independent forward pass, one multiply-add at a time."""
    h = list(x)
    for w, b, act in layers:
        out = []
        for r in range(len(w)):
            s = b[r]
            for c in range(len(w[r])):
                s += w[r][c] * h[c]
            out.append(max(s, 0.0) if act == "relu" else s)
        h = out
    best = 0
    for i, v in enumerate(h):
        if v > h[best]:
            best = i
    return best


def test_mlp_identity_one_hot():
    w = MlpWeights(4, 4, [Layer(np.eye(4), np.zeros(4), "identity")])
    assert mlp_predict(w, np.eye(4)[2]) == 2


def test_mlp_zero_weights_ties_to_class_zero():
    w = MlpWeights(5, 3, [Layer(np.zeros((3, 5)), np.zeros(3), "identity")])
    assert mlp_predict(w, np.ones(5)) == 0


def test_mlp_matches_scalar_forward_pass():
    w1 = [[1.0, -2.0, 0.5], [0.0, 1.0, -1.0], [-1.0, 0.5, 2.0], [0.3, 0.3, 0.3]]
    b1 = [0.1, -0.2, 0.0, -0.5]
    w2 = [[1.0, -1.0, 0.5, 2.0], [-0.5, 2.0, 1.0, -1.0]]
    b2 = [0.0, 0.2]
    raw = [(w1, b1, "relu"), (w2, b2, "identity")]
    weights = MlpWeights(3, 2, [Layer(np.array(w), b, a) for w, b, a in raw])
    inputs = [[0.9, 0.1, 0.2], [0.1, 0.8, 0.3], [0.0, 0.2, 0.9]]
    expected = [scalar_forward(raw, x) for x in inputs]
    assert expected == [0, 1, 1]  # frozen from the scalar pass
    assert [mlp_predict(weights, x) for x in inputs] == expected


def test_mlp_dimension_checks():
    with pytest.raises(ConfigError):
        MlpWeights(3, 2, [Layer(np.zeros((4, 3)), np.zeros(4)), Layer(np.zeros((2, 5)), np.zeros(2))])
    w = MlpWeights(3, 2, [Layer(np.zeros((2, 3)), np.zeros(2), "identity")])
    with pytest.raises(ShapeError):
        mlp_predict(w, np.zeros(4))
    with pytest.raises(ConfigError):
        Layer(np.array([[np.inf]]), [0.0])


def test_mlp_weights_file_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    weights = MlpWeights(
        6, 3,
        [Layer(rng.normal(size=(4, 6)), rng.normal(size=4), "relu"),
         Layer(rng.normal(size=(3, 4)), rng.normal(size=3), "identity")],
    )
    path = tmp_path / "mlp.json"
    save_mlp(weights, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"input_dim", "class_count", "layers"}
    assert set(doc["layers"][0]) == {"rows", "cols", "weights", "bias", "activation"}
    back = load_mlp(path)
    for a, b in zip(weights.layers, back.layers):
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)
    x = rng.random(6)
    assert np.array_equal(mlp_logits(weights, x), mlp_logits(back, x))


# --- analytic gradients ----------------------------------------------------


def test_true_gradient_linear_constant(linear_spec):
    g1 = true_gradient(linear_spec, np.zeros(3))
    g2 = true_gradient(linear_spec, np.ones(3))
    assert np.array_equal(g1, [1.0, -1.0, 0.5])
    assert np.array_equal(g1, g2)


def test_true_gradient_sphere_radial():
    center = np.full(4, 0.5)
    spec = OracleSpec(SphereModel(center, 0.2), target_label=1, original_label=0)
    x = center + 0.2 * np.eye(4)[0]
    g = true_gradient(spec, x)
    assert np.allclose(g / np.linalg.norm(g), np.eye(4)[0])
    inside = OracleSpec(SphereModel(center, 0.2), target_label=0, original_label=1)
    g = true_gradient(inside, x)
    assert np.allclose(g / np.linalg.norm(g), -np.eye(4)[0])


def test_true_gradient_unavailable_for_mlp():
    w = MlpWeights(2, 2, [Layer(np.eye(2), np.zeros(2), "identity")])
    spec = OracleSpec(MlpModel(w), target_label=1, original_label=0)
    with pytest.raises(GradientUnavailable):
        true_gradient(spec, np.zeros(2))


# --- remote ----------------------------------------------------------------


def test_remote_fixed_label():
    server, url = start_stub_server(label=7)
    try:
        assert remote_predict(url, np.zeros((2, 2, 1))) == 7
    finally:
        server.shutdown()


def test_remote_serves_model_labels():
    model = LinearModel(np.ones(4), bias=-2.0)
    server, url = start_stub_server(model=model)
    try:
        remote = RemoteModel(url, class_count=2)
        assert remote.predict(np.full((2, 2, 1), 0.9)) == 1
        assert remote.predict(np.full((2, 2, 1), 0.1)) == 0
    finally:
        server.shutdown()


@pytest.mark.parametrize("mode", ["malformed", "error"])
def test_remote_protocol_errors(mode):
    server, url = start_stub_server(mode=mode)
    try:
        with pytest.raises(ProtocolError):
            remote_predict(url, np.zeros((1, 1, 1)))
    finally:
        server.shutdown()


def test_remote_timeout_retries_then_transport_error():
    server, url = start_stub_server(mode="delay", delay=0.5)
    try:
        start = time.monotonic()
        with pytest.raises(TransportError):
            remote_predict(url, np.zeros((1, 1, 1)), timeout=0.1, max_retries=2)
        # three attempts of 0.1 s each
        assert time.monotonic() - start >= 0.3
    finally:
        server.shutdown()


def test_remote_unreachable():
    server, url = start_stub_server(label=1)
    server.shutdown()
    server.server_close()
    with pytest.raises(TransportError):
        remote_predict(url, np.zeros((1, 1, 1)), timeout=0.2, max_retries=1)


# --- image files -----------------------------------------------------------


@pytest.mark.parametrize("channels,suffix", [(1, ".pgm"), (3, ".ppm")])
def test_netpbm_round_trip(tmp_path, channels, suffix):
    rng = np.random.default_rng(channels)
    levels = rng.integers(0, 256, size=(5, 7, channels))
    img = Image.from_array(levels / 255.0)
    path = tmp_path / f"img{suffix}"
    write_image(img, path)
    back = read_image(path)
    assert back.shape == (5, 7, channels)
    assert np.array_equal(back.data, img.data)


def test_netpbm_header_with_comment(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 255]))
    img = read_image(path)
    assert img.shape == (1, 2, 1)
    assert img.data.tolist() == [0.0, 1.0]


def test_raw_format(tmp_path):
    rng = np.random.default_rng(5)
    img = Image.from_array(rng.random((3, 4, 3)))
    path = tmp_path / "img.imgf"
    write_image(img, path)
    buf = path.read_bytes()
    assert buf[:4] == b"IMGF"
    assert len(buf) == 16 + 8 * 36
    assert int.from_bytes(buf[4:8], "little") == 3
    back = read_image(path)
    assert np.array_equal(back.data, img.data)


def test_sphere_model_boundary():
    m = SphereModel(np.zeros(2), 1.0)
    assert m.predict([0.5, 0.5]) == m.inside_label
    assert m.predict([1.0, 0.0]) == m.outside_label
    assert m.predict([math.sqrt(0.5), 0.8]) == m.outside_label
