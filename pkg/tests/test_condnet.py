import copy
import math

import numpy as np
import pytest

from cosmo.condnet import (
    ConditionedNet,
    NetConfig,
    TimeNormalizer,
    TrainConfig,
    Vocabulary,
    encode_sequences,
    grid_search,
    load_checkpoint,
    save_checkpoint,
    train,
)
from cosmo.condnet.model import EOS, PAD, init_params, iter_params, zero_like_params
from cosmo.condnet.training import (
    batch_loss_and_grads,
    collate,
    grid_configs,
    fit_normalizers,
)
from cosmo.declare import augment, instantiate_universe
from cosmo.errors import CheckpointError, FingerprintMismatchError
from cosmo.eventlog import derive_times
from conftest import make_log


def make_net(embed_dim=4, hidden_dim=8, m=3, n_layers=1, vocab_acts=("A", "B", "C"),
             seed=0, time_dim=2, head_hidden=6):
    cfg = NetConfig(embed_dim=embed_dim, time_dim=time_dim, hidden_dim=hidden_dim,
                    n_layers=n_layers, head_hidden=head_hidden)
    vocab = Vocabulary(vocab_acts)
    tn = TimeNormalizer(1.0, 0.0, 1.0)
    return ConditionedNet(cfg, vocab, m, "test-universe", tn, tn, seed=seed)


def random_batch(net, rng, batch_size=2, seq_len=5):
    V = len(net.vocabulary)
    tokens = rng.integers(3, V, size=(batch_size, seq_len))
    times = rng.normal(size=(batch_size, seq_len))
    cond = rng.integers(0, 2, size=(batch_size, net.m)).astype(float)
    mask = np.ones((batch_size, seq_len))
    targets_act = rng.integers(2, V, size=(batch_size, seq_len))
    targets_time = rng.normal(size=(batch_size, seq_len))
    return {"tokens": tokens, "times": times, "cond": cond, "mask": mask,
            "targets_act": targets_act, "targets_time": targets_time}


def numeric_gradients(net, batch, config, step=1e-5):
    """Central finite differences over every parameter entry: the oracle."""
    grads = zero_like_params(net.params)

    def total_loss():
        cache = net.forward(batch["tokens"], batch["times"], batch["cond"],
                            batch["mask"])
        return net.loss(cache, batch["targets_act"], batch["targets_time"],
                        config.lam_time, config.reduction)["loss"]

    for (path, p), (_, g) in zip(iter_params(net.params), iter_params(grads)):
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + step
            up = total_loss()
            flat_p[i] = orig - step
            down = total_loss()
            flat_p[i] = orig
            flat_g[i] = (up - down) / (2 * step)
    return grads


def max_relative_error(analytic, numeric):
    worst = 0.0
    worst_path = None
    for (path, ga), (_, gn) in zip(iter_params(analytic), iter_params(numeric)):
        denom = np.maximum(np.maximum(np.abs(ga), np.abs(gn)), 1e-3)
        err = float((np.abs(ga - gn) / denom).max())
        if err > worst:
            worst, worst_path = err, path
    return worst, worst_path


class TestGradients:
    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("dims", [(4, 8, 3, 5), (8, 16, 6, 9)])
    def test_bptt_matches_finite_differences(self, dims, seed):
        d_emb, d_h, m, seq_len = dims
        net = make_net(embed_dim=d_emb, hidden_dim=d_h, m=m, seed=seed)
        rng = np.random.default_rng(seed + 100)
        batch = random_batch(net, rng, batch_size=2, seq_len=seq_len)
        config = TrainConfig(lam_time=0.7)
        _, analytic, _ = batch_loss_and_grads(net, batch, config)
        numeric = numeric_gradients(net, batch, config)
        err, path = max_relative_error(analytic, numeric)
        assert err < 1e-4, f"worst parameter group {path}: {err}"

    def test_multilayer_gradients(self):
        net = make_net(embed_dim=4, hidden_dim=6, m=2, n_layers=2, seed=7)
        rng = np.random.default_rng(7)
        batch = random_batch(net, rng, batch_size=2, seq_len=4)
        config = TrainConfig()
        _, analytic, _ = batch_loss_and_grads(net, batch, config)
        numeric = numeric_gradients(net, batch, config)
        err, path = max_relative_error(analytic, numeric)
        assert err < 1e-4, f"worst parameter group {path}: {err}"

    def test_sum_vs_mean_reduction_on_duplicated_sequence(self):
        net = make_net(seed=3)
        rng = np.random.default_rng(3)
        single = random_batch(net, rng, batch_size=1, seq_len=4)
        double = {k: np.concatenate([v, v]) for k, v in single.items()}
        for reduction, factor in (("sum", 2.0), ("mean", 1.0)):
            cfg = TrainConfig(reduction=reduction)
            _, g1, _ = batch_loss_and_grads(net, single, cfg)
            _, g2, _ = batch_loss_and_grads(net, double, cfg)
            for (_, a), (_, b) in zip(iter_params(g1), iter_params(g2)):
                np.testing.assert_allclose(b, factor * a, rtol=1e-10, atol=1e-12)

    def test_zero_gradient_at_saturated_optimum(self):
        # logits forced to a near-one-hot on the target: learning signal ~ 0
        net = make_net(m=2)
        for _, p in iter_params(net.params):
            p[...] = 0.0
        net.params["head_act_b"][3] = 50.0  # saturate on activity token 3
        batch = {
            "tokens": np.array([[3, 3, 3]]),
            "times": np.zeros((1, 3)),
            "cond": np.zeros((1, 2)),
            "mask": np.ones((1, 3)),
            "targets_act": np.array([[3, 3, 3]]),
            "targets_time": np.zeros((1, 3)),
        }
        cfg = TrainConfig(lam_time=0.0)
        _, grads, _ = batch_loss_and_grads(net, batch, cfg)
        norm = math.sqrt(sum(float((g ** 2).sum()) for _, g in iter_params(grads)))
        assert norm < 1e-6


class TestForward:
    def test_zero_parameter_residual_identity(self):
        net = make_net()
        for _, p in iter_params(net.params):
            p[...] = 0.0
        rng = np.random.default_rng(0)
        batch = random_batch(net, rng, batch_size=2, seq_len=4)
        cache = net.forward(batch["tokens"], batch["times"], batch["cond"])
        # with zero parameters each layer output equals its input bit-exactly
        for lc in cache["layers"]:
            np.testing.assert_array_equal(lc["s"] + lc["inp"], lc["inp"])
        np.testing.assert_array_equal(cache["final"], cache["x"])
        np.testing.assert_array_equal(cache["logits"],
                                      np.broadcast_to(net.params["head_act_b"],
                                                      cache["logits"].shape))

    def test_zero_q_ignores_condition(self):
        net = make_net(m=3)
        for layer in net.params["layers"]:
            layer["Q"][...] = 0.0
        rng = np.random.default_rng(1)
        batch = random_batch(net, rng)
        c1 = net.forward(batch["tokens"], batch["times"],
                         np.zeros_like(batch["cond"]))
        c2 = net.forward(batch["tokens"], batch["times"],
                         np.ones_like(batch["cond"]))
        np.testing.assert_array_equal(c1["logits"], c2["logits"])

    def test_conditioning_changes_logits(self):
        net = make_net(m=3, seed=5)
        rng = np.random.default_rng(5)
        batch = random_batch(net, rng)
        c1 = net.forward(batch["tokens"], batch["times"],
                         np.zeros_like(batch["cond"]))
        c2 = net.forward(batch["tokens"], batch["times"],
                         np.ones_like(batch["cond"]))
        assert not np.allclose(c1["logits"], c2["logits"])

    def test_deterministic_across_runs(self):
        n1, n2 = make_net(seed=9), make_net(seed=9)
        rng = np.random.default_rng(2)
        batch = random_batch(n1, rng)
        out1 = n1.forward(batch["tokens"], batch["times"], batch["cond"])
        out2 = n2.forward(batch["tokens"], batch["times"], batch["cond"])
        np.testing.assert_array_equal(out1["logits"], out2["logits"])

    def test_padding_changes_nothing(self):
        net = make_net(seed=4)
        rng = np.random.default_rng(4)
        batch = random_batch(net, rng, batch_size=2, seq_len=4)
        padded = {
            "tokens": np.pad(batch["tokens"], ((0, 0), (0, 3)),
                             constant_values=PAD),
            "times": np.pad(batch["times"], ((0, 0), (0, 3))),
            "cond": batch["cond"],
            "mask": np.pad(batch["mask"], ((0, 0), (0, 3))),
            "targets_act": np.pad(batch["targets_act"], ((0, 0), (0, 3)),
                                  constant_values=PAD),
            "targets_time": np.pad(batch["targets_time"], ((0, 0), (0, 3))),
        }
        cfg = TrainConfig()
        m1, g1, _ = batch_loss_and_grads(net, batch, cfg)
        m2, g2, _ = batch_loss_and_grads(net, padded, cfg)
        assert m1["loss"] == pytest.approx(m2["loss"], abs=1e-12)
        for (_, a), (_, b) in zip(iter_params(g1), iter_params(g2)):
            np.testing.assert_allclose(a, b, atol=1e-12)


class TestLoss:
    def test_uniform_logits_ce(self):
        # |V| = 4: vocab with one real activity plus the 3 reserved tokens
        net = make_net(vocab_acts=("A",), m=1)
        for _, p in iter_params(net.params):
            p[...] = 0.0  # logits all equal -> uniform over 4
        batch = {
            "tokens": np.array([[3, 3]]),
            "times": np.zeros((1, 2)),
            "cond": np.zeros((1, 1)),
            "mask": np.ones((1, 2)),
            "targets_act": np.array([[3, 2]]),
            "targets_time": np.zeros((1, 2)),
        }
        cache = net.forward(batch["tokens"], batch["times"], batch["cond"])
        out = net.loss(cache, batch["targets_act"], batch["targets_time"],
                       lam_time=0.0)
        assert out["ce"] == pytest.approx(math.log(4), abs=1e-12)

    def test_perfect_time_prediction_zero_mse(self):
        net = make_net()
        for _, p in iter_params(net.params):
            p[...] = 0.0
        batch = random_batch(net, np.random.default_rng(0))
        batch["targets_time"][...] = 0.0  # prediction is exactly the zero bias
        cache = net.forward(batch["tokens"], batch["times"], batch["cond"])
        out = net.loss(cache, batch["targets_act"], batch["targets_time"])
        assert out["mse"] == 0.0

    def test_lambda_zero_is_ce_only(self):
        net = make_net(seed=2)
        batch = random_batch(net, np.random.default_rng(2))
        cache = net.forward(batch["tokens"], batch["times"], batch["cond"])
        out = net.loss(cache, batch["targets_act"], batch["targets_time"],
                       lam_time=0.0)
        assert out["loss"] == out["ce"]


def single_trace_aug():
    log = derive_times(make_log([("c1", ["A", "B", "C"])]))
    uni = instantiate_universe(log, groups=["E"], min_support=0.0)
    return augment(log, uni)


def net_for(aug, seed=0, **kwargs):
    exec_n, rem_n = fit_normalizers(aug)
    cfg = NetConfig(embed_dim=kwargs.pop("embed_dim", 8),
                    hidden_dim=kwargs.pop("hidden_dim", 16),
                    time_dim=4, head_hidden=8, **kwargs)
    return ConditionedNet(cfg, Vocabulary(aug.log.activity_set), len(aug.universe),
                          aug.universe.fingerprint, exec_n, rem_n, seed=seed)


class TestTrain:
    def test_memorizes_single_trace(self):
        aug = single_trace_aug()
        net = net_for(aug, hidden_dim=32)
        cfg = TrainConfig(learning_rate=1e-2, batch_size=1, epochs=300, seed=0)
        history = train(net, aug, cfg)
        assert history[-1]["train_ce"] < 0.01

    def test_loss_never_increases_early(self):
        aug = single_trace_aug()
        net = net_for(aug, seed=1)
        cfg = TrainConfig(learning_rate=5e-3, batch_size=1, epochs=5, seed=1)
        history = train(net, aug, cfg)
        losses = [h["train_ce"] + h["train_mse"] for h in history]
        for prev, cur in zip(losses, losses[1:]):
            assert cur <= prev + 1e-6

    def test_zero_lr_leaves_parameters_unchanged(self):
        aug = single_trace_aug()
        net = net_for(aug)
        before = copy.deepcopy(net.clone_params())
        train(net, aug, TrainConfig(learning_rate=0.0, epochs=3, batch_size=1))
        for (_, a), (_, b) in zip(iter_params(before), iter_params(net.params)):
            np.testing.assert_array_equal(a, b)

    def test_same_seed_same_first_epoch(self):
        aug = single_trace_aug()
        h1 = train(net_for(aug, seed=3), aug,
                   TrainConfig(epochs=1, batch_size=1, seed=3))
        h2 = train(net_for(aug, seed=3), aug,
                   TrainConfig(epochs=1, batch_size=1, seed=3))
        assert h1[0]["train_ce"] == h2[0]["train_ce"]


class TestGridSearch:
    def test_single_config(self):
        aug = single_trace_aug()
        best, board = grid_search(aug, aug, space={"learning_rate": [1e-3]},
                                  epochs=1)
        assert len(board) == 1
        assert best["learning_rate"] == 1e-3

    def test_zero_lr_loses(self):
        aug = single_trace_aug()
        best, board = grid_search(
            aug, aug, space={"learning_rate": [0.0, 5e-3]}, epochs=30,
        )
        assert best["learning_rate"] == 5e-3
        assert len(board) == 2

    def test_full_grid_has_1440_configs(self):
        assert len(grid_configs()) == 4 * 4 * 5 * 6 * 3


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        aug = single_trace_aug()
        net = net_for(aug, seed=2)
        path = tmp_path / "model.ck"
        save_checkpoint(net, path)
        back = load_checkpoint(path)
        batch = collate(encode_sequences(aug, net))
        out1 = net.forward(batch["tokens"], batch["times"], batch["cond"])
        out2 = back.forward(batch["tokens"], batch["times"], batch["cond"])
        np.testing.assert_array_equal(out1["logits"], out2["logits"])

    def test_truncated_file_fails_checksum(self, tmp_path):
        aug = single_trace_aug()
        path = tmp_path / "model.ck"
        save_checkpoint(net_for(aug), path)
        data = path.read_text()
        path.write_text(data[: len(data) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_universe_fingerprint_mismatch(self, tmp_path):
        aug = single_trace_aug()
        path = tmp_path / "model.ck"
        save_checkpoint(net_for(aug), path)
        with pytest.raises(FingerprintMismatchError):
            load_checkpoint(path, expected_universe_fingerprint="other")


def test_unknown_activity_maps_to_pad_with_counter():
    net = make_net(vocab_acts=("A", "B"))
    assert net.unknown_activity_count == 0
    assert net.encode_activity("ZZZ") == PAD
    assert net.unknown_activity_count == 1
