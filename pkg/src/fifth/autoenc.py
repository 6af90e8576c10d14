"""Feedforward autoencoder with sparsity-driven effective dimensionality.

Layers run [F, H, K, H, F] with tanh hidden units and linear code and
output. The objective is reconstruction plus an L1 penalty on code
activations plus L2 weight decay; code units whose mean |activation| stays
under the prune threshold are treated as switched off, so the width of the
representation is discovered rather than configured.
"""

import json
import struct

import numpy as np

from .errors import TrainingDivergence


class Code:
    """A point in representation space plus which units are live."""

    __slots__ = ("vector", "active")

    def __init__(self, vector, active):
        self.vector = np.asarray(vector, dtype=float)
        self.active = np.asarray(active, dtype=bool)
        if self.vector.shape != self.active.shape:
            raise ValueError("code vector and active mask differ in length")

    def __len__(self):
        return self.vector.shape[0]

    def __repr__(self):
        on = int(self.active.sum())
        return f"Code(k={len(self)}, active={on})"


# weight matrices in forward order; biases interleave after each
_LAYERS = ("w_enc_in", "b_enc_in", "w_enc_out", "b_enc_out",
           "w_dec_in", "b_dec_in", "w_dec_out", "b_dec_out")

_HYPER = ("n_features", "n_hidden", "n_code", "prune_threshold",
          "sparsity_weight", "decay_weight", "learning_rate", "batch_size")


class Autoencoder:
    def __init__(self, n_features=16, n_hidden=24, n_code=8,
                 prune_threshold=0.05, sparsity_weight=0.05,
                 decay_weight=1e-4, learning_rate=0.01, batch_size=32):
        if min(n_features, n_hidden, n_code) < 1:
            raise ValueError("layer sizes must be positive")
        self.n_features = n_features
        self.n_hidden = n_hidden
        self.n_code = n_code
        self.prune_threshold = prune_threshold
        self.sparsity_weight = sparsity_weight
        self.decay_weight = decay_weight
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        f, h, k = n_features, n_hidden, n_code
        self.w_enc_in = np.zeros((h, f))
        self.b_enc_in = np.zeros(h)
        self.w_enc_out = np.zeros((k, h))
        self.b_enc_out = np.zeros(k)
        self.w_dec_in = np.zeros((h, k))
        self.b_dec_in = np.zeros(h)
        self.w_dec_out = np.zeros((f, h))
        self.b_dec_out = np.zeros(f)
        self.feat_mean = np.zeros(f)
        self.feat_std = np.ones(f)
        self.unit_activity_ = np.zeros(k)

    # -- estimator surface ---------------------------------------------------

    def get_params(self, deep=True):
        return {name: getattr(self, name) for name in _HYPER}

    def set_params(self, **params):
        for name, value in params.items():
            if name not in _HYPER:
                raise ValueError(f"unknown parameter {name!r}")
            setattr(self, name, value)
        return self

    def fit(self, dataset, epochs=200, seed=0):
        """Standardize from the data, initialize, train, record activity."""
        x = self._as_batch(dataset)
        self.feat_mean = x.mean(axis=0)
        std = x.std(axis=0)
        std[std < 1e-12] = 1.0
        self.feat_std = std
        self.init_weights(seed)
        self.history_ = self.train(dataset, epochs, seed)
        self.unit_activity_ = np.abs(self._codes(x)).mean(axis=0)
        return self

    def transform(self, dataset):
        return self._codes(self._as_batch(dataset))

    def inverse_transform(self, codes):
        codes = np.atleast_2d(np.asarray(codes, dtype=float))
        if codes.shape[1] != self.n_code:
            raise ValueError(
                f"expected codes of length {self.n_code}, got {codes.shape[1]}")
        h = np.tanh(codes @ self.w_dec_in.T + self.b_dec_in)
        out = h @ self.w_dec_out.T + self.b_dec_out
        return out * self.feat_std + self.feat_mean

    # -- core --------------------------------------------------------------

    def _as_batch(self, dataset):
        x = np.atleast_2d(np.asarray(dataset, dtype=float))
        if x.shape[1] != self.n_features:
            raise ValueError(
                f"expected {self.n_features} features, got {x.shape[1]}")
        return x

    def _standardize(self, x):
        return (x - self.feat_mean) / self.feat_std

    def _forward(self, xs):
        h1 = np.tanh(xs @ self.w_enc_in.T + self.b_enc_in)
        code = h1 @ self.w_enc_out.T + self.b_enc_out
        h2 = np.tanh(code @ self.w_dec_in.T + self.b_dec_in)
        out = h2 @ self.w_dec_out.T + self.b_dec_out
        return h1, code, h2, out

    def _codes(self, x):
        h1 = np.tanh(self._standardize(x) @ self.w_enc_in.T + self.b_enc_in)
        return h1 @ self.w_enc_out.T + self.b_enc_out

    def encode(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise ValueError(
                f"expected a vector of {self.n_features} features")
        vec = self._codes(x[None, :])[0]
        return Code(vec, self.unit_activity_ > self.prune_threshold)

    def decode(self, code):
        vec = code.vector if isinstance(code, Code) else code
        return self.inverse_transform(np.asarray(vec, dtype=float)[None, :])[0]

    def init_weights(self, seed=0):
        rng = np.random.default_rng(seed)
        for name in _LAYERS:
            arr = getattr(self, name)
            if arr.ndim == 2:
                fan_out, fan_in = arr.shape
                lim = np.sqrt(6.0 / (fan_in + fan_out))
                setattr(self, name, rng.uniform(-lim, lim, arr.shape))
            else:
                setattr(self, name, np.zeros_like(arr))
        return self

    # -- objective -----------------------------------------------------------

    def loss(self, dataset):
        x = self._as_batch(dataset)
        if x.shape[0] == 0:
            raise ValueError("loss needs a non-empty batch")
        xs = self._standardize(x)
        _, code, _, out = self._forward(xs)
        rec = float(np.mean((out - xs) ** 2))
        sparsity = float(np.mean(np.sum(np.abs(code), axis=1)))
        decay = float(sum(np.sum(getattr(self, n) ** 2)
                          for n in _LAYERS if getattr(self, n).ndim == 2))
        total = rec + self.sparsity_weight * sparsity + self.decay_weight * decay
        return {"reconstruction": rec, "sparsity": sparsity,
                "decay": decay, "total": total}

    def _gradients(self, xs):
        n = xs.shape[0]
        h1, code, h2, out = self._forward(xs)
        d_out = 2.0 * (out - xs) / out.size
        g = {}
        g["w_dec_out"] = d_out.T @ h2
        g["b_dec_out"] = d_out.sum(axis=0)
        d_h2 = d_out @ self.w_dec_out
        d_pre2 = d_h2 * (1.0 - h2 ** 2)
        g["w_dec_in"] = d_pre2.T @ code
        g["b_dec_in"] = d_pre2.sum(axis=0)
        d_code = d_pre2 @ self.w_dec_in
        d_code = d_code + self.sparsity_weight * np.sign(code) / n
        g["w_enc_out"] = d_code.T @ h1
        g["b_enc_out"] = d_code.sum(axis=0)
        d_h1 = d_code @ self.w_enc_out
        d_pre1 = d_h1 * (1.0 - h1 ** 2)
        g["w_enc_in"] = d_pre1.T @ xs
        g["b_enc_in"] = d_pre1.sum(axis=0)
        for name in _LAYERS:
            if getattr(self, name).ndim == 2:
                g[name] = g[name] + 2.0 * self.decay_weight * getattr(self, name)
        return g

    def train(self, dataset, epochs, seed=0):
        """Minibatch SGD. Returns the full-dataset total loss per epoch."""
        x = self._as_batch(dataset)
        if x.shape[0] == 0:
            raise ValueError("train needs a non-empty dataset")
        rng = np.random.default_rng(seed)
        trace = []
        # a diverging run overflows before the loss check catches it; the
        # check is the intended detector, so keep numpy quiet here
        with np.errstate(over="ignore", invalid="ignore"):
            for epoch in range(epochs):
                order = rng.permutation(x.shape[0])
                for start in range(0, x.shape[0], self.batch_size):
                    xs = self._standardize(
                        x[order[start:start + self.batch_size]])
                    grads = self._gradients(xs)
                    for name, grad in grads.items():
                        setattr(self, name,
                                getattr(self, name) - self.learning_rate * grad)
                total = self.loss(x)["total"]
                trace.append(total)
                if not np.isfinite(total):
                    raise TrainingDivergence(
                        f"non-finite loss at epoch {epoch}",
                        report={"epoch": epoch, "trace": trace})
        return trace

    def effective_dim(self, dataset):
        """Code units doing measurable work on this data."""
        activity = np.abs(self.transform(dataset)).mean(axis=0)
        return int(np.sum(activity > self.prune_threshold))

    def gradient_check(self, x=None, seed=0, eps=1e-5):
        """Max relative error of backprop against central differences."""
        if x is None:
            x = np.random.default_rng(seed).normal(size=self.n_features)
        xs = self._standardize(self._as_batch(x))
        analytic = self._gradients(xs)

        def total(batch):
            _, code, _, out = self._forward(batch)
            rec = np.mean((out - batch) ** 2)
            sp = np.mean(np.sum(np.abs(code), axis=1))
            dec = sum(np.sum(getattr(self, n) ** 2)
                      for n in _LAYERS if getattr(self, n).ndim == 2)
            return rec + self.sparsity_weight * sp + self.decay_weight * dec

        worst = 0.0
        for name in _LAYERS:
            arr = getattr(self, name)
            flat = arr.reshape(-1)
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + eps
                up = total(xs)
                flat[i] = keep - eps
                down = total(xs)
                flat[i] = keep
                numeric = (up - down) / (2.0 * eps)
                a = analytic[name].reshape(-1)[i]
                scale = max(abs(a) + abs(numeric), 1e-8)
                worst = max(worst, abs(a - numeric) / scale)
        return worst

    # -- persistence -----------------------------------------------------------

    def save(self, path):
        header = {
            "layers": [self.n_features, self.n_hidden, self.n_code,
                       self.n_hidden, self.n_features],
            "hyperparams": {k: getattr(self, k) for k in _HYPER},
            "standardization": {"mean": self.feat_mean.tolist(),
                                "std": self.feat_std.tolist()},
            "unit_activity": self.unit_activity_.tolist(),
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True,
                                separators=(",", ":")).encode())
            fh.write(b"\n")
            for name in _LAYERS:
                arr = np.ascontiguousarray(getattr(self, name), dtype="<f8")
                fh.write(struct.pack("<Q", arr.size))
                fh.write(arr.tobytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            ae = cls(**header["hyperparams"])
            ae.feat_mean = np.array(header["standardization"]["mean"])
            ae.feat_std = np.array(header["standardization"]["std"])
            ae.unit_activity_ = np.array(header["unit_activity"])
            for name in _LAYERS:
                (count,) = struct.unpack("<Q", fh.read(8))
                shape = getattr(ae, name).shape
                data = np.frombuffer(fh.read(8 * count), dtype="<f8")
                if data.size != count or int(np.prod(shape)) != count:
                    raise ValueError(f"checkpoint array {name} has wrong size")
                setattr(ae, name, data.reshape(shape).copy())
        return ae
