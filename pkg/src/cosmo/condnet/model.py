"""Conditioned recurrent network with exact backpropagation through time.

The recurrence per layer is

    h_t = tanh(U x_t + W h_{t-1} + Q c + b_h)
    y_t = tanh(V h_t + b_y) + x_t

where c is the binary constraint vector routed to every layer at every step.
The residual forces each layer's output width to equal its input width.
Inputs are [activity embedding || time projection]; a small MLP head maps the
final layer's output to next-activity logits and a remaining-time scalar.

Everything is plain float64 numpy; gradients are derived by hand and verified
against finite differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import CosmoError, DataError

PAD, BOS, EOS = 0, 1, 2
RESERVED = ("<pad>", "<bos>", "<eos>")


class Vocabulary:
    """Activity <-> index map with reserved PAD/BOS/EOS slots."""

    def __init__(self, activities: Sequence[str]):
        acts = sorted(set(activities))
        for r in RESERVED:
            if r in acts:
                raise DataError(f"activity label collides with reserved token {r!r}")
        self._tokens = list(RESERVED) + acts
        self._index = {t: i for i, t in enumerate(self._tokens)}

    def __len__(self):
        return len(self._tokens)

    @property
    def activities(self) -> list[str]:
        return self._tokens[len(RESERVED):]

    def index(self, activity: str) -> Optional[int]:
        return self._index.get(activity)

    def token(self, idx: int) -> str:
        return self._tokens[idx]

    def to_json(self) -> list[str]:
        return self.activities

    @classmethod
    def from_json(cls, data: list[str]) -> "Vocabulary":
        return cls(data)


@dataclass(frozen=True)
class TimeNormalizer:
    """Maps seconds through ln(1 + x/scale), then standardizes."""

    scale: float = 1.0
    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, values: Sequence[float], scale: float = 1.0) -> "TimeNormalizer":
        z = np.log1p(np.asarray(values, dtype=float) / scale)
        std = float(z.std())
        return cls(scale, float(z.mean()), std if std > 0 else 1.0)

    def normalize(self, x):
        return (np.log1p(np.asarray(x, dtype=float) / self.scale) - self.mean) / self.std

    def denormalize(self, z):
        return np.expm1(np.asarray(z, dtype=float) * self.std + self.mean) * self.scale

    def to_json(self) -> dict:
        return {"scale": self.scale, "mean": self.mean, "std": self.std}

    @classmethod
    def from_json(cls, d: dict) -> "TimeNormalizer":
        return cls(d["scale"], d["mean"], d["std"])


@dataclass(frozen=True)
class NetConfig:
    embed_dim: int = 32
    time_dim: int = 4
    hidden_dim: int = 128
    n_layers: int = 1
    head_hidden: int = 64

    @property
    def input_dim(self) -> int:
        return self.embed_dim + self.time_dim

    def to_json(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "time_dim": self.time_dim,
            "hidden_dim": self.hidden_dim,
            "n_layers": self.n_layers,
            "head_hidden": self.head_hidden,
        }

    @classmethod
    def from_json(cls, d: dict) -> "NetConfig":
        return cls(**d)


def _uniform(rng, shape, fan_in):
    r = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-r, r, size=shape)


def init_params(config: NetConfig, vocab_size: int, m: int, seed: int) -> dict:
    """Seeded parameter initialization; all arrays float64."""
    rng = np.random.default_rng(seed)
    d, dh = config.input_dim, config.hidden_dim
    params = {
        "embed": _uniform(rng, (vocab_size, config.embed_dim), config.embed_dim),
        "time_w": _uniform(rng, (config.time_dim,), 1),
        "time_b": np.zeros(config.time_dim),
        "layers": [],
        "head_w1": _uniform(rng, (config.head_hidden, d), d),
        "head_b1": np.zeros(config.head_hidden),
        "head_act_w": _uniform(rng, (vocab_size, config.head_hidden), config.head_hidden),
        "head_act_b": np.zeros(vocab_size),
        "head_time_w": _uniform(rng, (config.head_hidden,), config.head_hidden),
        "head_time_b": np.zeros(1),
    }
    for _ in range(config.n_layers):
        params["layers"].append({
            "U": _uniform(rng, (dh, d), d),
            "W": _uniform(rng, (dh, dh), dh),
            "Q": _uniform(rng, (dh, m), m),
            "V": _uniform(rng, (d, dh), dh),
            "b_h": np.zeros(dh),
            "b_y": np.zeros(d),
        })
    return params


def iter_params(params: dict):
    """Yield (path, array) pairs in a fixed order."""
    for key in ("embed", "time_w", "time_b"):
        yield key, params[key]
    for i, layer in enumerate(params["layers"]):
        for key in ("U", "W", "Q", "V", "b_h", "b_y"):
            yield f"layers.{i}.{key}", layer[key]
    for key in ("head_w1", "head_b1", "head_act_w", "head_act_b",
                "head_time_w", "head_time_b"):
        yield key, params[key]


def zero_like_params(params: dict) -> dict:
    out = {k: np.zeros_like(v) for k, v in params.items() if k != "layers"}
    out["layers"] = [{k: np.zeros_like(v) for k, v in layer.items()}
                     for layer in params["layers"]]
    return out


class ConditionedNet:
    """The trainable model: parameters plus vocabulary, normalizers, and the
    fingerprint of the constraint universe it was conditioned on."""

    def __init__(
        self,
        config: NetConfig,
        vocabulary: Vocabulary,
        m: int,
        universe_fingerprint: str,
        exec_normalizer: TimeNormalizer,
        remaining_normalizer: TimeNormalizer,
        seed: int = 0,
        params: Optional[dict] = None,
    ):
        self.config = config
        self.vocabulary = vocabulary
        self.m = m
        self.universe_fingerprint = universe_fingerprint
        self.exec_normalizer = exec_normalizer
        self.remaining_normalizer = remaining_normalizer
        self.seed = seed
        self.params = params if params is not None else init_params(
            config, len(vocabulary), m, seed
        )
        self.unknown_activity_count = 0

    def encode_activity(self, activity: str) -> int:
        """Map an activity label to its token; unknown labels fall back to PAD
        with a counted warning, never silently."""
        idx = self.vocabulary.index(activity)
        if idx is None:
            self.unknown_activity_count += 1
            return PAD
        return idx

    def encode_step(self, activity: str, execution_time: float) -> np.ndarray:
        """Input vector for one event: [embedding || time projection]."""
        tok = self.encode_activity(activity)
        t = float(self.exec_normalizer.normalize(execution_time))
        p = self.params
        return np.concatenate([p["embed"][tok], t * p["time_w"] + p["time_b"]])

    def forward(
        self,
        tokens: np.ndarray,   # (B, T) int
        times: np.ndarray,    # (B, T) normalized execution times
        cond: np.ndarray,     # (B, m) 0/1 condition vectors
        mask: Optional[np.ndarray] = None,  # (B, T) 1 = real step
    ) -> dict:
        """Run the full stack; returns a cache with logits, time predictions,
        and intermediate activations needed by backward()."""
        p = self.params
        B, T = tokens.shape
        if mask is None:
            mask = np.ones((B, T))
        emb = p["embed"][tokens]                                   # (B,T,de)
        tp = times[..., None] * p["time_w"] + p["time_b"]          # (B,T,dt)
        x = np.concatenate([emb, tp], axis=-1)                     # (B,T,d)
        layer_caches = []
        inp = x
        for li, layer in enumerate(p["layers"]):
            dh = layer["W"].shape[0]
            h = np.zeros((B, dh))
            qc = cond @ layer["Q"].T + layer["b_h"]                # (B,dh)
            hs = np.empty((B, T, dh))
            ss = np.empty_like(inp)
            for t in range(T):
                h = np.tanh(inp[:, t] @ layer["U"].T + h @ layer["W"].T + qc)
                if not np.all(np.isfinite(h)):
                    raise CosmoError(f"non-finite activation in layer {li}, step {t}")
                hs[:, t] = h
                ss[:, t] = np.tanh(h @ layer["V"].T + layer["b_y"])
            out = ss + inp
            layer_caches.append({"inp": inp, "h": hs, "s": ss})
            inp = out
        hid = np.tanh(inp @ p["head_w1"].T + p["head_b1"])         # (B,T,dhead)
        logits = hid @ p["head_act_w"].T + p["head_act_b"]         # (B,T,V)
        time_pred = hid @ p["head_time_w"] + p["head_time_b"][0]   # (B,T)
        return {
            "tokens": tokens, "times": times, "cond": cond, "mask": mask,
            "x": x, "layers": layer_caches, "final": inp, "hid": hid,
            "logits": logits, "time_pred": time_pred,
        }

    def loss(
        self,
        cache: dict,
        target_tokens: np.ndarray,  # (B, T)
        target_times: np.ndarray,   # (B, T) normalized remaining times
        lam_time: float = 1.0,
        reduction: str = "mean",
    ) -> dict:
        """Cross-entropy on next activity plus lam_time * MSE on remaining
        time, reduced over unmasked steps."""
        mask = cache["mask"]
        n = mask.sum()
        if n == 0:
            raise DataError("all steps masked")
        logits = cache["logits"]
        zmax = logits.max(axis=-1, keepdims=True)
        logz = zmax[..., 0] + np.log(np.exp(logits - zmax).sum(axis=-1))
        picked = np.take_along_axis(logits, target_tokens[..., None], axis=-1)[..., 0]
        ce_steps = (logz - picked) * mask
        mse_steps = (cache["time_pred"] - target_times) ** 2 * mask
        denom = n if reduction == "mean" else 1.0
        ce = float(ce_steps.sum() / denom)
        mse = float(mse_steps.sum() / denom)
        return {"loss": ce + lam_time * mse, "ce": ce, "mse": mse,
                "n_steps": int(n), "denom": denom}

    def backward(
        self,
        cache: dict,
        target_tokens: np.ndarray,
        target_times: np.ndarray,
        lam_time: float = 1.0,
        reduction: str = "mean",
    ) -> dict:
        """Exact gradients of loss() w.r.t. every parameter."""
        p = self.params
        mask = cache["mask"]
        denom = mask.sum() if reduction == "mean" else 1.0
        B, T = cache["tokens"].shape
        grads = zero_like_params(p)

        # head
        logits = cache["logits"]
        zmax = logits.max(axis=-1, keepdims=True)
        ez = np.exp(logits - zmax)
        softmax = ez / ez.sum(axis=-1, keepdims=True)
        dlogits = softmax.copy()
        np.put_along_axis(
            dlogits, target_tokens[..., None],
            np.take_along_axis(dlogits, target_tokens[..., None], axis=-1) - 1.0,
            axis=-1,
        )
        dlogits *= mask[..., None] / denom
        dtime = 2.0 * lam_time * (cache["time_pred"] - target_times) * mask / denom
        hid = cache["hid"]
        flat = lambda a: a.reshape(-1, a.shape[-1])
        grads["head_act_w"] = flat(dlogits).T @ flat(hid)
        grads["head_act_b"] = dlogits.sum(axis=(0, 1))
        grads["head_time_w"] = (dtime[..., None] * hid).sum(axis=(0, 1))
        grads["head_time_b"] = np.array([dtime.sum()])
        dhid = dlogits @ p["head_act_w"] + dtime[..., None] * p["head_time_w"]
        dpre_hid = dhid * (1.0 - hid ** 2)
        grads["head_w1"] = flat(dpre_hid).T @ flat(cache["final"])
        grads["head_b1"] = dpre_hid.sum(axis=(0, 1))
        dy = dpre_hid @ p["head_w1"]  # (B,T,d) gradient w.r.t. top layer output

        # layers, top down; BPTT in reverse time within each
        for li in range(len(p["layers"]) - 1, -1, -1):
            layer = p["layers"][li]
            lc = cache["layers"][li]
            inp, hs, ss = lc["inp"], lc["h"], lc["s"]
            g = grads["layers"][li]
            dx = dy.copy()  # residual path
            da = dy * (1.0 - ss ** 2)  # through tanh(Vh + b_y)
            g["V"] += flat(da).T @ flat(hs)
            g["b_y"] += da.sum(axis=(0, 1))
            dh_out = da @ layer["V"]  # (B,T,dh)
            dh_next = np.zeros((B, layer["W"].shape[0]))
            cond = cache["cond"]
            for t in range(T - 1, -1, -1):
                dh = dh_out[:, t] + dh_next
                dpre = dh * (1.0 - hs[:, t] ** 2)
                g["U"] += dpre.T @ inp[:, t]
                h_prev = hs[:, t - 1] if t > 0 else np.zeros_like(dh_next)
                g["W"] += dpre.T @ h_prev
                g["Q"] += dpre.T @ cond
                g["b_h"] += dpre.sum(axis=0)
                dx[:, t] += dpre @ layer["U"]
                dh_next = dpre @ layer["W"]
            dy = dx

        # input encodings
        de = self.config.embed_dim
        demb, dtp = dy[..., :de], dy[..., de:]
        np.add.at(grads["embed"], cache["tokens"], demb)
        grads["time_w"] = (dtp * cache["times"][..., None]).sum(axis=(0, 1))
        grads["time_b"] = dtp.sum(axis=(0, 1))
        return grads

    def clone_params(self) -> dict:
        out = {k: v.copy() for k, v in self.params.items() if k != "layers"}
        out["layers"] = [{k: v.copy() for k, v in layer.items()}
                         for layer in self.params["layers"]]
        return out
