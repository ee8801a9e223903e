"""
Tests for the tensor engine: gradients, graph traversal, the optimizer and
tensor files.
"""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from emodiff.autodiff import ops
from emodiff.autodiff.nn import Parameter
from emodiff.autodiff.optim import adam_step
from emodiff.autodiff.serialization import (
    decode_tensor,
    encode_tensor,
    load_checkpoint,
    read_tensor,
    save_checkpoint,
    write_tensor,
)
from emodiff.autodiff.tensor import Tensor, get_precision, no_grad, precision
from emodiff.errors import ContractError, DataError, DimensionMismatchError, MissingArtifactError, NonFiniteError

GRADIENT_SEEDS = range(20)


def numeric_grad(fn, arrays, index, h=1e-6):
    """Central differences of ``fn(*arrays)`` with respect to ``arrays[index]``."""
    base = [np.array(a, dtype=np.float64) for a in arrays]
    grad = np.zeros_like(base[index])
    for pos in np.ndindex(grad.shape):
        plus = [a.copy() for a in base]
        minus = [a.copy() for a in base]
        plus[index][pos] += h
        minus[index][pos] -= h
        grad[pos] = (fn(*plus) - fn(*minus)) / (2 * h)
    return grad


def check_gradients(build, arrays, atol=1e-6):
    """Compare backward() against central differences for every input."""
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    build(*tensors).backward()

    def value(*raw):
        return build(*[Tensor(a) for a in raw]).item()

    for i, tensor in enumerate(tensors):
        expected = numeric_grad(value, arrays, i)
        np.testing.assert_allclose(tensor.grad, expected, atol=atol, rtol=1e-5)


def test_product_plus_input_gradients(f64):
    a = Tensor([1.0, 2.0], requires_grad=True)
    b = Tensor([3.0, 4.0], requires_grad=True)
    ((a * b) + a).sum().backward()
    np.testing.assert_allclose(a.grad, [4.0, 5.0])
    np.testing.assert_allclose(b.grad, [1.0, 2.0])


def test_shared_subexpression_accumulates(f64):
    x = Tensor([3.0], requires_grad=True)
    y = x * x
    (y + y).sum().backward()
    np.testing.assert_allclose(x.grad, [12.0])


def test_backward_visits_each_node_once(f64):
    x = Tensor(np.ones(3), requires_grad=True)
    y = ops.exp(x)
    z = (y * y + y).sum()
    visited = z.backward()
    assert visited == len(z.graph())
    assert len({id(n) for n in z.graph()}) == len(z.graph())


def test_backward_needs_scalar(f64):
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        (x * 2.0).backward()


def test_no_grad_records_nothing(f64):
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.requires_grad
    assert y.is_leaf
    assert (x * 3.0).requires_grad


def test_precision_context_restores():
    before = get_precision()
    with precision("f64"):
        assert Tensor([1.0]).data.dtype == np.float64
    assert get_precision() == before


@pytest.mark.parametrize("seed", GRADIENT_SEEDS)
def test_broadcast_gradients(f64, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((3, 4))
    b = rng.standard_normal((4,))
    check_gradients(lambda x, y: ((x * y) / (y * y + 1.0)).sum(), [a, b])


@pytest.mark.parametrize("seed", GRADIENT_SEEDS)
def test_activation_gradients(f64, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 5))
    check_gradients(lambda x: (ops.silu(x) + ops.tanh(x) * ops.sigmoid(x)).sum(), [a])
    check_gradients(lambda x: (ops.log_softmax(x, axis=1) * Tensor(np.arange(5.0))).sum(), [a])
    check_gradients(lambda x: (ops.softmax(x, axis=0) * Tensor(np.arange(10.0).reshape(2, 5))).sum(), [a])


@pytest.mark.parametrize("seed", GRADIENT_SEEDS)
def test_matmul_and_reductions(f64, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 3, 4))
    b = rng.standard_normal((4, 5))
    check_gradients(lambda x, y: ops.mean(ops.matmul(x, y) ** 2.0, axis=(0, 2)).sum(), [a, b])


@pytest.mark.parametrize("seed", GRADIENT_SEEDS)
def test_getitem_and_concat(f64, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 3))
    b = rng.standard_normal((2, 3))

    def build(x, y):
        joined = ops.concat([x, y], axis=0)
        return (joined[np.array([0, 0, 5])] * joined[1:3].sum()).sum()

    check_gradients(build, [a, b])


@pytest.mark.parametrize("seed", GRADIENT_SEEDS)
def test_conv1d_gradients(f64, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3, 7))
    kernels = rng.standard_normal((4, 3, 3))
    bias = rng.standard_normal(4)
    weights = Tensor(rng.standard_normal((2, 4, 7)))
    check_gradients(lambda a, k, c: (ops.conv1d(a, k, c, padding=1) * weights).sum(), [x, kernels, bias])


def test_conv1d_same_length_and_known_values(f64):
    x = Tensor(np.array([[1.0, 2.0, 3.0, 4.0]]))
    kernel = Tensor(np.array([[[1.0, 0.0, -1.0]]]))
    out = ops.conv1d(x, kernel, padding=1)
    assert out.shape == (1, 4)
    np.testing.assert_allclose(out.data, [[-2.0, -2.0, -2.0, 3.0]])


def test_conv1d_shape_errors(f64):
    with pytest.raises(DimensionMismatchError):
        ops.conv1d(Tensor(np.ones((2, 5))), Tensor(np.ones((1, 3, 3))))
    with pytest.raises(DimensionMismatchError):
        ops.conv1d(Tensor(np.ones((2, 5))), Tensor(np.ones((1, 2, 2))))


def naive_conv1d(x, kernels, bias, padding):
    c_out, c_in, width = kernels.shape
    padded = np.pad(x, ((0, 0), (padding, padding)))
    length = padded.shape[1] - width + 1
    out = np.zeros((c_out, length))
    for o in range(c_out):
        for t in range(length):
            total = bias[o]
            for c in range(c_in):
                for k in range(width):
                    total += kernels[o, c, k] * padded[c, t + k]
            out[o, t] = total
    return out


@pytest.mark.parametrize("seed", range(5))
def test_conv1d_matches_loop_oracle(f64, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((4, 16))
    kernels = rng.standard_normal((8, 4, 3))
    bias = rng.standard_normal(8)
    out = ops.conv1d(Tensor(x), Tensor(kernels), Tensor(bias), padding=1)
    assert out.shape == (8, 16)
    np.testing.assert_allclose(out.data, naive_conv1d(x, kernels, bias, 1), atol=1e-12)


def test_matmul_mismatch_names_axis(f64):
    with pytest.raises(DimensionMismatchError) as excinfo:
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))
    assert excinfo.value.axis == "inner"


@pytest.mark.parametrize("seed", GRADIENT_SEEDS)
def test_self_attention_gradients(f64, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3, 5))
    projections = [rng.standard_normal((3, 3)) * 0.5 for _ in range(4)]
    weights = Tensor(rng.standard_normal((2, 3, 5)))

    def build(a, q, k, v, o):
        return (ops.self_attention(a, q, k, v, o) * weights).sum()

    check_gradients(build, [x] + projections)


def test_self_attention_single_frame_is_linear_plus_input(f64, rng):
    x = rng.standard_normal((3, 1))
    q, k, v, o = (rng.standard_normal((3, 3)) for _ in range(4))
    out = ops.self_attention(Tensor(x), Tensor(q), Tensor(k), Tensor(v), Tensor(o))
    np.testing.assert_allclose(out.data, o @ v @ x + x, atol=1e-12)


def test_self_attention_zero_output_projection_is_identity(f64, rng):
    x = rng.standard_normal((2, 3, 5))
    q, k, v = (Tensor(rng.standard_normal((3, 3))) for _ in range(3))
    out = ops.self_attention(Tensor(x), q, k, v, Tensor(np.zeros((3, 3))))
    np.testing.assert_array_equal(out.data, x)


@pytest.mark.parametrize("seed", GRADIENT_SEEDS)
def test_lstm_cell_gradients(f64, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 3))
    h = rng.standard_normal((2, 4))
    c = rng.standard_normal((2, 4))
    w_x = rng.standard_normal((3, 16)) * 0.3
    w_h = rng.standard_normal((4, 16)) * 0.3
    bias = rng.standard_normal(16) * 0.1

    def build(a, hp, cp, wx, wh, b):
        h_next, c_next = ops.lstm_cell(a, hp, cp, ops.LSTMWeights(wx, wh, b))
        return (h_next * 2.0 + c_next).sum()

    check_gradients(build, [x, h, c, w_x, w_h, bias])


def test_lstm_cell_with_zero_weights(f64, rng):
    c_prev = rng.standard_normal((2, 4))
    h_prev = rng.standard_normal((2, 4))
    zeros = ops.LSTMWeights(Tensor(np.zeros((3, 16))), Tensor(np.zeros((4, 16))), Tensor(np.zeros(16)))
    h, c = ops.lstm_cell(rng.standard_normal((2, 3)), h_prev, c_prev, zeros)
    np.testing.assert_allclose(c.data, 0.5 * c_prev, atol=1e-12)
    np.testing.assert_allclose(h.data, 0.5 * np.tanh(0.5 * c_prev), atol=1e-12)


def test_lstm_cell_without_candidate_or_memory_outputs_zero(f64, rng):
    w_x = rng.standard_normal((3, 16))
    w_h = rng.standard_normal((4, 16))
    bias = rng.standard_normal(16)
    # Candidate block is columns 8:12.
    w_x[:, 8:12] = 0.0
    w_h[:, 8:12] = 0.0
    bias[8:12] = 0.0
    weights = ops.LSTMWeights(Tensor(w_x), Tensor(w_h), Tensor(bias))
    h, c = ops.lstm_cell(rng.standard_normal((2, 3)), rng.standard_normal((2, 4)), np.zeros((2, 4)), weights)
    np.testing.assert_array_equal(c.data, 0.0)
    np.testing.assert_array_equal(h.data, 0.0)


def test_dropout_identity_in_eval(f64):
    x = Tensor(np.ones(10))
    assert ops.dropout(x, 0.5, None, training=False) is x
    with pytest.raises(ValueError):
        ops.dropout(x, 0.5, None, training=True)


def test_adam_single_step(f64):
    p = Parameter(np.array([1.0]), name="p")
    p.grad = np.array([1.0])
    adam_step([p], lr=0.1)
    # eps sits next to the uncorrected sqrt(v) = sqrt(0.001).
    assert abs(p.data[0] - 0.9000000316) < 1e-10
    assert p.step == 1


def test_adam_zero_gradient_leaves_parameter(f64):
    p = Parameter(np.array([1.0, -2.0]), name="p")
    p.grad = np.zeros(2)
    adam_step([p], lr=0.1)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    adam_step([p], lr=0.1)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert p.step == 2


def test_adam_rejects_non_finite_gradient(f64):
    good = Parameter(np.array([1.0]), name="good")
    bad = Parameter(np.array([1.0, 2.0]), name="bad")
    good.grad = np.array([0.5])
    bad.grad = np.array([np.nan, 1.0])
    with pytest.raises(NonFiniteError) as excinfo:
        adam_step([good, bad], lr=0.1)
    assert excinfo.value.name == "bad"
    np.testing.assert_array_equal(good.data, [1.0])
    assert good.step == 0


def test_edtf_header_layout():
    blob = encode_tensor(np.zeros((2, 3), dtype=np.float32))
    assert blob[:4] == b"EDTF"
    assert int.from_bytes(blob[4:8], "little") == 1
    assert blob[8] == 0
    assert int.from_bytes(blob[9:13], "little") == 2
    assert len(blob) == 13 + 16 + 6 * 4


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.integers(min_value=1, max_value=4), min_size=0, max_size=3),
    st.sampled_from([np.float32, np.float64]),
)
def test_edtf_preserves_shape_dtype_and_values(shape, dtype):
    array = np.arange(int(np.prod(shape)) if shape else 1, dtype=dtype).reshape(shape)
    decoded = decode_tensor(encode_tensor(array))
    assert decoded.shape == tuple(shape)
    assert decoded.dtype == np.dtype(dtype)
    np.testing.assert_array_equal(decoded, array)


def test_edtf_rejects_corrupt_blobs():
    blob = encode_tensor(np.ones(4))
    with pytest.raises(DataError):
        decode_tensor(b"XXXX" + blob[4:])
    with pytest.raises(DataError):
        decode_tensor(blob[:-3])
    with pytest.raises(DataError):
        decode_tensor(blob[:5])


def test_tensor_files_and_checkpoints(tmp_path):
    write_tensor(tmp_path / "a.edtf", np.eye(3))
    np.testing.assert_array_equal(read_tensor(tmp_path / "a.edtf"), np.eye(3))
    save_checkpoint(tmp_path / "ckpt", {"w": np.ones(2), "b": np.zeros(1)}, {"kind": "test"})
    tensors, manifest = load_checkpoint(tmp_path / "ckpt")
    assert manifest["kind"] == "test"
    assert manifest["tensors"] == ["b", "w"]
    np.testing.assert_array_equal(tensors["w"], np.ones(2))


def test_missing_checkpoint_names_path(tmp_path):
    with pytest.raises(MissingArtifactError) as excinfo:
        load_checkpoint(tmp_path / "nowhere")
    assert "nowhere" in str(excinfo.value)
    assert excinfo.value.exit_code == 2
