"""Dense numerical core: MLP and LSTM with hand-written gradients, plus Adam.

Everything runs in float64 numpy.  Parameters live in one flat vector per
network (:class:`ParamSet`) so optimizer state, gradient checks, and
checkpointing all operate on plain arrays.  Backward passes return exact
reverse-mode gradients in the same flat layout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError


@dataclass
class ParamSet:
    """Flat parameter vector with a shape manifest and Adam moment state."""

    manifest: tuple[tuple[str, tuple[int, ...]], ...]
    values: np.ndarray
    m: np.ndarray = field(default=None)  # type: ignore[assignment]
    v: np.ndarray = field(default=None)  # type: ignore[assignment]
    step: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = sum(int(np.prod(shape)) for _, shape in self.manifest)
        if self.values.size != expected:
            raise ValueError(
                f"ParamSet: manifest wants {expected} values, got {self.values.size}"
            )
        if self.m is None:
            self.m = np.zeros_like(self.values)
        if self.v is None:
            self.v = np.zeros_like(self.values)
        self._offsets = {}
        pos = 0
        for name, shape in self.manifest:
            size = int(np.prod(shape))
            self._offsets[name] = (pos, pos + size, shape)
            pos += size

    def view(self, name: str) -> np.ndarray:
        """Zero-copy view of one named block, reshaped per the manifest."""
        a, b, shape = self._offsets[name]
        return self.values[a:b].reshape(shape)

    def grad_view(self, flat: np.ndarray, name: str) -> np.ndarray:
        a, b, shape = self._offsets[name]
        return flat[a:b].reshape(shape)

    def copy(self) -> "ParamSet":
        return ParamSet(
            manifest=self.manifest,
            values=self.values.copy(),
            m=self.m.copy(),
            v=self.v.copy(),
            step=self.step,
        )


# ---------------------------------------------------------------------------
# feed-forward network: tanh hidden layers, linear head


def init_mlp(sizes, rng: np.random.Generator, head_scale: float = 1.0) -> ParamSet:
    """Gaussian fan-in init; ``head_scale`` shrinks the output layer."""
    sizes = tuple(int(s) for s in sizes)
    manifest = []
    chunks = []
    n_layers = len(sizes) - 1
    for k in range(n_layers):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        w = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))
        if k == n_layers - 1:
            w *= head_scale
        manifest.append((f"W{k}", (fan_in, fan_out)))
        manifest.append((f"b{k}", (fan_out,)))
        chunks.append(w.ravel())
        chunks.append(np.zeros(fan_out))
    return ParamSet(manifest=tuple(manifest), values=np.concatenate(chunks))


def mlp_sizes(ps: ParamSet) -> tuple[int, ...]:
    sizes = [ps.manifest[0][1][0]]
    for name, shape in ps.manifest:
        if name.startswith("W"):
            sizes.append(shape[1])
    return tuple(sizes)


def mlp_forward(ps: ParamSet, x: np.ndarray):
    """Returns (output, cache). Accepts a single vector or a (batch, in) matrix."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    sizes = mlp_sizes(ps)
    if h.shape[1] != sizes[0]:
        raise ValueError(f"mlp_forward: input width {h.shape[1]} != {sizes[0]}")
    n_layers = len(sizes) - 1
    activations = [h]
    for k in range(n_layers):
        z = h @ ps.view(f"W{k}") + ps.view(f"b{k}")
        h = np.tanh(z) if k < n_layers - 1 else z
        activations.append(h)
    out = h[0] if single else h
    return out, (activations, single)


def mlp_backward(ps: ParamSet, cache, dout: np.ndarray) -> np.ndarray:
    """Gradient of sum(dout * output) w.r.t. the flat parameter vector."""
    activations, single = cache
    dout = np.asarray(dout, dtype=np.float64)
    if single:
        dout = dout[None, :]
    grad = np.zeros_like(ps.values)
    n_layers = len(activations) - 1
    dh = dout
    for k in range(n_layers - 1, -1, -1):
        a_in = activations[k]
        if k < n_layers - 1:
            dz = dh * (1.0 - activations[k + 1] ** 2)
        else:
            dz = dh
        ps.grad_view(grad, f"W{k}")[:] = a_in.T @ dz
        ps.grad_view(grad, f"b{k}")[:] = dz.sum(axis=0)
        if k > 0:
            dh = dz @ ps.view(f"W{k}").T
    return grad


# ---------------------------------------------------------------------------
# single-layer LSTM with a linear head, gradients by BPTT


def init_lstm(in_dim: int, hidden: int, out_dim: int, rng: np.random.Generator) -> ParamSet:
    manifest = (
        ("Wx", (4 * hidden, in_dim)),
        ("Wh", (4 * hidden, hidden)),
        ("b", (4 * hidden,)),
        ("Wy", (out_dim, hidden)),
        ("by", (out_dim,)),
    )
    b = np.zeros(4 * hidden)
    b[hidden : 2 * hidden] = 1.0  # forget-gate bias keeps early memory open
    values = np.concatenate(
        [
            rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=4 * hidden * in_dim),
            rng.normal(0.0, 1.0 / np.sqrt(hidden), size=4 * hidden * hidden),
            b,
            rng.normal(0.0, 1.0 / np.sqrt(hidden), size=out_dim * hidden),
            np.zeros(out_dim),
        ]
    )
    return ParamSet(manifest=manifest, values=values)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(ps: ParamSet, xs: np.ndarray):
    """Run the cell over a (T, in) sequence; returns ((T, out) outputs, cache)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    if xs.shape[0] == 0:
        raise ValueError("lstm_forward: empty sequence")
    hidden = ps.view("Wh").shape[1]
    Wx, Wh, b = ps.view("Wx"), ps.view("Wh"), ps.view("b")
    Wy, by = ps.view("Wy"), ps.view("by")
    T = xs.shape[0]
    h = np.zeros(hidden)
    c = np.zeros(hidden)
    ys = np.empty((T, Wy.shape[0]))
    steps = []
    H = hidden
    for t in range(T):
        z = Wx @ xs[t] + Wh @ h + b
        i = _sigmoid(z[:H])
        f = _sigmoid(z[H : 2 * H])
        g = np.tanh(z[2 * H : 3 * H])
        o = _sigmoid(z[3 * H :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        ys[t] = Wy @ h_new + by
        steps.append((xs[t], h, c, i, f, g, o, c_new, tc, h_new))
        h, c = h_new, c_new
    return ys, (steps, xs.shape)


def lstm_backward(ps: ParamSet, cache, dys: np.ndarray) -> np.ndarray:
    """BPTT gradient of sum(dys * outputs) w.r.t. the flat parameter vector."""
    steps, _ = cache
    dys = np.asarray(dys, dtype=np.float64)
    if dys.ndim == 1:
        dys = dys[:, None]
    Wx, Wh = ps.view("Wx"), ps.view("Wh")
    Wy = ps.view("Wy")
    H = Wh.shape[1]
    grad = np.zeros_like(ps.values)
    dWx = ps.grad_view(grad, "Wx")
    dWh = ps.grad_view(grad, "Wh")
    db = ps.grad_view(grad, "b")
    dWy = ps.grad_view(grad, "Wy")
    dby = ps.grad_view(grad, "by")
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    for t in range(len(steps) - 1, -1, -1):
        x_t, h_prev, c_prev, i, f, g, o, c_new, tc, h_new = steps[t]
        dy = dys[t]
        dWy += np.outer(dy, h_new)
        dby += dy
        dh = Wy.T @ dy + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc**2) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g**2),
                do * o * (1.0 - o),
            ]
        )
        dWx += np.outer(dz, x_t)
        dWh += np.outer(dz, h_prev)
        db += dz
        dh_next = Wh.T @ dz
    return grad


# ---------------------------------------------------------------------------
# optimizer


ADAM_LR = 0.00025
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_update(
    ps: ParamSet,
    grad: np.ndarray,
    lr: float = ADAM_LR,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> ParamSet:
    """Bias-corrected Adam step, applied in place."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != ps.values.shape:
        raise ValueError("adam_update: gradient shape mismatch")
    if not np.all(np.isfinite(grad)):
        raise TrainingError("adam_update: non-finite gradient")
    ps.step += 1
    ps.m *= beta1
    ps.m += (1.0 - beta1) * grad
    ps.v *= beta2
    ps.v += (1.0 - beta2) * grad * grad
    m_hat = ps.m / (1.0 - beta1**ps.step)
    v_hat = ps.v / (1.0 - beta2**ps.step)
    ps.values -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return ps


# ---------------------------------------------------------------------------
# categorical distribution over discrete actions


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def categorical_sample(logits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling; returns an int for 1D logits, an array for 2D."""
    probs = softmax(logits)
    if probs.ndim == 1:
        u = rng.random()
        return int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, len(probs) - 1))
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    idx = (cum < u[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def categorical_log_prob(logits: np.ndarray, actions) -> np.ndarray:
    logp = log_softmax(logits)
    if logp.ndim == 1:
        return logp[int(actions)]
    return logp[np.arange(logp.shape[0]), np.asarray(actions, dtype=np.int64)]


def categorical_entropy(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax(logits)
    p = np.exp(logp)
    terms = np.where(p > 0.0, p * logp, 0.0)
    return -terms.sum(axis=-1)


@dataclass(frozen=True)
class CategoricalDist:
    """Distribution over action indices, parameterized by raw logits."""

    logits: np.ndarray

    def sample(self, rng: np.random.Generator) -> int:
        return categorical_sample(self.logits, rng)

    def log_prob(self, action: int) -> float:
        return float(categorical_log_prob(self.logits, action))

    def entropy(self) -> float:
        return float(categorical_entropy(self.logits))


# ---------------------------------------------------------------------------
# checkpoints: raw float64 vector + plain-text manifest


def save_params(ps: ParamSet, path) -> None:
    path = str(path)
    with open(path, "wb") as fh:
        fh.write(ps.values.astype("<f8").tobytes())
    with open(path + ".manifest", "w") as fh:
        fh.write(f"step {ps.step}\n")
        for name, shape in ps.manifest:
            fh.write(name + " " + " ".join(str(d) for d in shape) + "\n")


def load_params(path) -> ParamSet:
    path = str(path)
    manifest = []
    step = 0
    with open(path + ".manifest") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "step":
                step = int(parts[1])
            else:
                manifest.append((parts[0], tuple(int(d) for d in parts[1:])))
    with open(path, "rb") as fh:
        values = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    ps = ParamSet(manifest=tuple(manifest), values=values)
    ps.step = step
    return ps
