"""Network initialization, forward/backward, Adam, checkpointing."""

import numpy as np
import pytest

from geopinn import model
from geopinn.model import AdamState, ConvNet, ModelError, adam_step, init_weights


class TestInit:
    def test_single_channel_bound(self):
        net = ConvNet(("T",), 1, (4, 4, 4), "tanh")
        init_weights(net, 0)
        first = net.subnets[0].layers[0].weights
        bound = 1.0 / 5.0  # sqrt(1/(25*1))
        assert np.all(np.abs(first) <= bound)
        assert np.abs(first).max() > 0.8 * bound  # actually fills the range

    def test_four_channel_bound_and_mean(self):
        net = ConvNet(("T",), 4, (64, 64, 64), "tanh")
        init_weights(net, 1)
        first = net.subnets[0].layers[0].weights
        bound = 0.1  # sqrt(1/(25*4))
        assert np.all(np.abs(first) <= bound)
        assert abs(first.mean()) < bound / 10  # law of large numbers
        for layer in net.subnets[0].layers:
            c_in = layer.weights.shape[1]
            assert np.all(np.abs(layer.weights) <= np.sqrt(1.0 / (25 * c_in)))
            assert np.all(layer.bias == 0.0)

    def test_seed_determinism(self):
        a = init_weights(ConvNet(("u", "v"), 2, (8, 8, 8), "relu"), 7)
        b = init_weights(ConvNet(("u", "v"), 2, (8, 8, 8), "relu"), 7)
        for (_, pa), (_, pb) in zip(a.parameters(), b.parameters()):
            assert np.array_equal(pa, pb)


class TestForward:
    def test_zero_net_gives_zero(self):
        net = ConvNet(("T",), 3, (6, 6, 6), "relu")
        x = np.random.default_rng(0).standard_normal((2, 3, 12, 10))
        assert np.all(net.forward(x, retain=False) == 0.0)

    def test_identity_kernel(self):
        net = ConvNet(("T",), 1, (1, 1, 1), "identity")
        for layer in net.subnets[0].layers:
            layer.weights[0, 0, 2, 2] = 1.0
        x = np.random.default_rng(1).standard_normal((1, 1, 8, 8))
        assert np.allclose(net.forward(x, retain=False), x)

    @pytest.mark.parametrize("shape", [(16, 16), (31, 47), (64, 64)])
    def test_shape_preserved(self, shape):
        net = init_weights(ConvNet(("u", "v", "p"), 2, (5, 5, 5), "tanh"), 2)
        x = np.random.default_rng(2).standard_normal((2, 2, *shape))
        out = net.forward(x, retain=False)
        assert out.shape == (2, 3, *shape)

    def test_bad_input_shape(self):
        net = ConvNet(("T",), 2, (4, 4, 4), "tanh")
        with pytest.raises(ModelError):
            net.forward(np.zeros((1, 3, 8, 8)))


class TestBackward:
    def _fd_check(self, activation, seed=0, trials=20, tol=1e-5):
        rng = np.random.default_rng(seed)
        net = init_weights(ConvNet(("u", "v"), 2, (4, 4, 4), activation), seed + 10)
        x = rng.standard_normal((2, 2, 9, 7))

        def loss():
            out = net.forward(x, retain=False)
            return 0.5 * float(np.sum(out**2))

        out = net.forward(x)
        grads = net.backward(out.copy())
        params = dict(net.parameters())
        names = sorted(params)
        worst = 0.0
        for _ in range(trials):
            name = names[rng.integers(len(names))]
            arr = params[name]
            idx = tuple(rng.integers(s) for s in arr.shape)
            h = 1e-4
            old = arr[idx]
            arr[idx] = old + h
            lp = loss()
            arr[idx] = old - h
            lm = loss()
            arr[idx] = old
            fd = (lp - lm) / (2 * h)
            worst = max(worst, abs(fd - grads[name][idx]) / max(abs(fd), 1e-10))
        assert worst <= tol

    @pytest.mark.parametrize("activation", ["tanh", "swish", "relu"])
    def test_finite_difference_agreement(self, activation):
        self._fd_check(activation)

    def test_zero_upstream_gives_zero_grads(self):
        net = init_weights(ConvNet(("T",), 1, (4, 4, 4), "tanh"), 3)
        out = net.forward(np.ones((1, 1, 8, 8)))
        grads = net.backward(np.zeros_like(out))
        assert all(np.all(g == 0.0) for g in grads.values())

    def test_gradient_scales_linearly(self):
        net = init_weights(ConvNet(("T",), 1, (4, 4, 4), "tanh"), 4)
        x = np.random.default_rng(5).standard_normal((1, 1, 8, 8))
        out = net.forward(x)
        g1 = net.backward(out.copy())
        net.forward(x)
        g3 = net.backward(3.0 * out)
        for name in g1:
            assert np.allclose(3.0 * g1[name], g3[name], rtol=1e-12, atol=1e-14)

    def test_missing_activations_rejected(self):
        net = init_weights(ConvNet(("T",), 1, (4, 4, 4), "tanh"), 5)
        x = np.ones((1, 1, 8, 8))
        out = net.forward(x)
        net.backward(out)
        with pytest.raises(ModelError):
            net.backward(out)  # cache consumed
        net.forward(x, retain=False)
        with pytest.raises(ModelError):
            net.backward(out)


class TestAdam:
    def test_zero_gradient_keeps_parameters(self):
        p = np.array([1.0, -2.0])
        state = AdamState(lr=0.01)
        adam_step(state, [("p", p)], {"p": np.zeros(2)})
        assert np.array_equal(p, [1.0, -2.0])

    def test_constant_gradient_step_magnitude(self):
        p = np.array([0.0])
        state = AdamState(lr=0.01)
        prev = p.copy()
        steps = []
        for _ in range(100):
            adam_step(state, [("p", p)], {"p": np.array([2.5])})
            steps.append(float(prev - p))
            prev = p.copy()
        assert all(s > 0 for s in steps)  # monotone, opposite sign(g)
        assert abs(steps[-1] - 0.01) < 1e-3  # step magnitude approaches lr

    def test_quadratic_bowl_decreases(self):
        rng = np.random.default_rng(6)
        p = rng.standard_normal(50)
        target = rng.standard_normal(50)
        state = AdamState(lr=0.001)
        losses = []
        for _ in range(1000):
            g = p - target
            losses.append(0.5 * float(np.dot(g, g)))
            adam_step(state, [("p", p)], {"p": g})
        # monotone decrease after warm-up
        tail = losses[100:]
        assert all(b <= a for a, b in zip(tail, tail[1:]))
        assert losses[-1] < losses[0] * 0.5

    def test_nonfinite_gradient_names_parameter(self):
        p = np.array([1.0])
        with pytest.raises(ModelError, match="w/layer0/bias"):
            adam_step(AdamState(), [("w/layer0/bias", p)], {"w/layer0/bias": np.array([np.nan])})


class TestCheckpoint:
    def test_exact_roundtrip(self, tmp_path):
        net = init_weights(ConvNet(("u", "v"), 3, (6, 6, 6), "swish"), 8)
        state = AdamState(lr=0.005)
        x = np.random.default_rng(9).standard_normal((1, 3, 9, 9))
        out = net.forward(x)
        grads = net.backward(out)
        adam_step(state, net.parameters(), grads)
        path = tmp_path / "ckpt.bin"
        model.save_checkpoint(path, net, state, 17)
        net2, state2, it = model.load_checkpoint(path)
        assert it == 17
        assert net2.activation == "swish" and net2.hidden == (6, 6, 6)
        for (na, pa), (nb, pb) in zip(net.parameters(), net2.parameters()):
            assert na == nb and np.array_equal(pa, pb)
        for name in state.m:
            assert np.array_equal(state.m[name], state2.m[name])
            assert np.array_equal(state.v[name], state2.v[name])
        assert state2.step == state.step

    def test_byte_identical_across_saves(self, tmp_path):
        net = init_weights(ConvNet(("T",), 1, (4, 4, 4), "tanh"), 10)
        state = AdamState()
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        model.save_checkpoint(p1, net, state, 3)
        model.save_checkpoint(p2, net, state, 3)
        assert p1.read_bytes() == p2.read_bytes()
