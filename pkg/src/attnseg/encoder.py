"""Attention-tape LSTM encoder with per-tag output scores.

Instead of a single recurrent cell state, each direction keeps a hidden
tape H = (h_1 .. h_t) and a memory tape C = (c_1 .. c_t), one entry per
token seen so far.  At step t an attention layer scores every previous
tape entry against the current input,

    a_i = v . tanh(Wh h_i + Wx x_t + Wp p_{t-1})        (p = last summary)
    s   = softmax(a)

the weights form adaptive summaries h~ = sum s_i h_i, c~ = sum s_i c_i,
and the usual gate block runs on [h~, x_t]:

    (i, f, o) = sigmoid, chat = tanh  of  W [h~, x_t] + b
    c_t = f * c~ + i * chat
    h_t = o * tanh(c_t)

With exactly one tape entry this collapses to a standard LSTM update.
Both directions are stacked bidirectionally; extra layers consume the
concatenated (forward, backward) hidden vectors of the layer below, and
the top layer projects to per-tag emission scores

    y_t = Wf hf_t + Wb hb_t + b_y.

Tapes reset to empty for every sentence.  The backward pass is written
by hand (gradients flow through the attention weights, the summaries and
the tapes) and is verified against central finite differences.
"""

from dataclasses import dataclass, field

import numpy as np

from .numerics import ShapeError, sigmoid, softmax


@dataclass
class EncoderConfig:
    input_dim: int
    hidden_dim: int
    attn_dim: int
    num_tags: int = 4
    extra_layers: int = 0
    memory_span: int = None

    def __post_init__(self):
        if self.extra_layers not in (0, 1, 2):
            raise ValueError(f"extra_layers must be 0, 1 or 2, got {self.extra_layers}")
        if self.memory_span is not None and self.memory_span < 1:
            raise ValueError(f"memory_span must be >= 1, got {self.memory_span}")

    @property
    def num_layers(self):
        return 1 + self.extra_layers

    def layer_input_dim(self, layer):
        return self.input_dim if layer == 0 else 2 * self.hidden_dim


@dataclass
class AttentionParams:
    """Weights of the attention layer: tape term, input term, previous-
    summary term, and the scoring vector."""

    wh: np.ndarray
    wx: np.ndarray
    wp: np.ndarray
    v: np.ndarray


@dataclass
class CellParams:
    """Gate block producing (i, f, o, chat) from [summary, input]."""

    w: np.ndarray
    b: np.ndarray


@dataclass
class LstmnState:
    """Per-sentence recurrent state: the two tapes plus the summary
    vector the last step produced (attention scores of the next step
    look at it)."""

    hidden_tape: list
    memory_tape: list
    summary: np.ndarray

    def __post_init__(self):
        if len(self.hidden_tape) != len(self.memory_tape):
            raise ValueError(
                f"tape lengths differ: {len(self.hidden_tape)} hidden "
                f"vs {len(self.memory_tape)} memory"
            )

    def __len__(self):
        return len(self.hidden_tape)


def initial_state(hidden_dim):
    """Empty tapes; the initial summary is the zero vector."""
    return LstmnState([], [], np.zeros(hidden_dim))


def _glorot(rng, rows, cols):
    r = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-r, r, size=(rows, cols))


def init_params(config, rng):
    """Fresh encoder parameters, uniform in +-sqrt(6/(fan_in+fan_out)).

    Forget-gate biases start at 1.0, all other biases at 0.  Keys follow
    the ``enc{layer}.{fwd|bwd}.`` naming used across training and
    serialization.
    """
    h, a, k = config.hidden_dim, config.attn_dim, config.num_tags
    params = {}
    for layer in range(config.num_layers):
        d = config.layer_input_dim(layer)
        for direction in ("fwd", "bwd"):
            prefix = f"enc{layer}.{direction}."
            params[prefix + "attn.wh"] = _glorot(rng, a, h)
            params[prefix + "attn.wx"] = _glorot(rng, a, d)
            params[prefix + "attn.wp"] = _glorot(rng, a, h)
            params[prefix + "attn.v"] = _glorot(rng, a, 1)[:, 0]
            params[prefix + "cell.w"] = _glorot(rng, 4 * h, h + d)
            bias = np.zeros(4 * h)
            bias[h:2 * h] = 1.0
            params[prefix + "cell.b"] = bias
    params["out.wf"] = _glorot(rng, k, h)
    params["out.wb"] = _glorot(rng, k, h)
    params["out.b"] = np.zeros(k)
    return params


def direction_view(params, layer, direction):
    """(AttentionParams, CellParams) views into the parameter dict."""
    prefix = f"enc{layer}.{direction}."
    attn = AttentionParams(
        wh=params[prefix + "attn.wh"],
        wx=params[prefix + "attn.wx"],
        wp=params[prefix + "attn.wp"],
        v=params[prefix + "attn.v"],
    )
    cell = CellParams(w=params[prefix + "cell.w"], b=params[prefix + "cell.b"])
    return attn, cell


def dropout_mask(shape, p, rng):
    """Inverted-dropout mask: 0 with probability p, else 1/(1-p).

    Scaling at train time keeps the expectation at 1, so evaluation
    applies no mask at all.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if p == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def attention_weights(x_t, state, attn):
    """Softmax attention weights over the current tape (empty at t=1)."""
    if x_t.shape[0] != attn.wx.shape[1]:
        raise ShapeError(
            f"input of length {x_t.shape[0]} vs attention expecting "
            f"{attn.wx.shape[1]}"
        )
    scores, _ = _attention_scores(
        x_t, state.hidden_tape, state.summary, attn
    )
    return softmax(scores)


def _attention_scores(x_t, tape, prev_summary, attn):
    count = len(tape)
    scores = np.empty(count)
    pre_tanh = []
    for i in range(count):
        u = np.tanh(attn.wh @ tape[i] + attn.wx @ x_t + attn.wp @ prev_summary)
        pre_tanh.append(u)
        scores[i] = attn.v @ u
    return scores, pre_tanh


def summarize(state, weights):
    """Weighted sums of the two tapes; empty weights give zero vectors."""
    if len(weights) != len(state):
        raise ShapeError(
            f"{len(weights)} weights for a tape of length {len(state)}"
        )
    h = state.summary.shape[0]
    h_sum = np.zeros(h)
    c_sum = np.zeros(h)
    for i in range(len(weights)):
        h_sum += weights[i] * state.hidden_tape[i]
        c_sum += weights[i] * state.memory_tape[i]
    return h_sum, c_sum


@dataclass
class _StepCache:
    x: np.ndarray
    window_start: int
    weights: np.ndarray
    pre_tanh: list
    prev_summary: np.ndarray
    h_summary: np.ndarray
    c_summary: np.ndarray
    gate_i: np.ndarray
    gate_f: np.ndarray
    gate_o: np.ndarray
    candidate: np.ndarray
    tanh_c: np.ndarray


def _step_core(x_t, tape_h, tape_c, window_start, prev_summary, attn, cell):
    hidden = prev_summary.shape[0]
    window_h = tape_h[window_start:]
    window_c = tape_c[window_start:]
    scores, pre_tanh = _attention_scores(x_t, window_h, prev_summary, attn)
    weights = softmax(scores)
    h_summary = np.zeros(hidden)
    c_summary = np.zeros(hidden)
    for i in range(len(weights)):
        h_summary += weights[i] * window_h[i]
        c_summary += weights[i] * window_c[i]
    z = cell.w @ np.concatenate((h_summary, x_t)) + cell.b
    gate_i = sigmoid(z[:hidden])
    gate_f = sigmoid(z[hidden:2 * hidden])
    gate_o = sigmoid(z[2 * hidden:3 * hidden])
    candidate = np.tanh(z[3 * hidden:])
    c_t = gate_f * c_summary + gate_i * candidate
    tanh_c = np.tanh(c_t)
    h_t = gate_o * tanh_c
    cache = _StepCache(
        x=x_t, window_start=window_start, weights=weights, pre_tanh=pre_tanh,
        prev_summary=prev_summary, h_summary=h_summary, c_summary=c_summary,
        gate_i=gate_i, gate_f=gate_f, gate_o=gate_o, candidate=candidate,
        tanh_c=tanh_c,
    )
    return h_t, c_t, cache


def lstmn_step(x_t, state, attn, cell, memory_span=None):
    """One recurrent step; returns (h_t, c_t, new state).

    The new state has both tapes grown by one entry (truncated to the
    last `memory_span` entries when a span cap is configured) and carries
    the fresh summary vector.
    """
    hidden = cell.b.shape[0] // 4
    if cell.w.shape != (4 * hidden, hidden + x_t.shape[0]):
        raise ShapeError(
            f"cell weights {cell.w.shape} do not match hidden {hidden} "
            f"and input {x_t.shape[0]}"
        )
    h_t, c_t, cache = _step_core(
        x_t, state.hidden_tape, state.memory_tape, 0, state.summary, attn, cell
    )
    new_h = list(state.hidden_tape) + [h_t]
    new_c = list(state.memory_tape) + [c_t]
    if memory_span is not None:
        new_h = new_h[-memory_span:]
        new_c = new_c[-memory_span:]
    return h_t, c_t, LstmnState(new_h, new_c, cache.h_summary)


@dataclass
class _DirectionCache:
    inputs: np.ndarray
    tape_h: list
    tape_c: list
    steps: list


def _direction_forward(inputs, attn, cell, memory_span):
    n = len(inputs)
    hidden = cell.b.shape[0] // 4
    tape_h, tape_c = [], []
    prev_summary = np.zeros(hidden)
    steps = []
    for t in range(n):
        window_start = 0 if memory_span is None else max(0, t - memory_span)
        h_t, c_t, cache = _step_core(
            inputs[t], tape_h, tape_c, window_start, prev_summary, attn, cell
        )
        steps.append(cache)
        tape_h.append(h_t)
        tape_c.append(c_t)
        prev_summary = cache.h_summary
    return _DirectionCache(inputs=inputs, tape_h=tape_h, tape_c=tape_c, steps=steps)


def _direction_backward(cache, attn, cell, d_hidden_out):
    n = len(cache.steps)
    hidden = cell.b.shape[0] // 4
    d_in = cache.inputs[0].shape[0]
    d_tape_h = [g.copy() for g in d_hidden_out]
    d_tape_c = [np.zeros(hidden) for _ in range(n)]
    d_summary = [np.zeros(hidden) for _ in range(n)]
    g_wh = np.zeros_like(attn.wh)
    g_wx = np.zeros_like(attn.wx)
    g_wp = np.zeros_like(attn.wp)
    g_v = np.zeros_like(attn.v)
    g_w = np.zeros_like(cell.w)
    g_b = np.zeros_like(cell.b)
    d_inputs = np.zeros((n, d_in))
    for t in range(n - 1, -1, -1):
        st = cache.steps[t]
        dh = d_tape_h[t]
        dc = d_tape_c[t]
        # h = o * tanh(c)
        d_o = dh * st.tanh_c
        dc = dc + dh * st.gate_o * (1.0 - st.tanh_c ** 2)
        # c = f * c_summary + i * candidate
        d_f = dc * st.c_summary
        d_c_summary = dc * st.gate_f
        d_i = dc * st.candidate
        d_candidate = dc * st.gate_i
        dz = np.concatenate((
            d_i * st.gate_i * (1.0 - st.gate_i),
            d_f * st.gate_f * (1.0 - st.gate_f),
            d_o * st.gate_o * (1.0 - st.gate_o),
            d_candidate * (1.0 - st.candidate ** 2),
        ))
        g_w += np.outer(dz, np.concatenate((st.h_summary, st.x)))
        g_b += dz
        d_cat = cell.w.T @ dz
        d_h_summary = d_cat[:hidden] + d_summary[t]
        dx = d_cat[hidden:].copy()
        weights = st.weights
        count = weights.shape[0]
        if count:
            # summaries -> tape entries and attention weights
            d_weights = np.empty(count)
            for i in range(count):
                gi = st.window_start + i
                d_weights[i] = d_h_summary @ cache.tape_h[gi] \
                    + d_c_summary @ cache.tape_c[gi]
                d_tape_h[gi] += weights[i] * d_h_summary
                d_tape_c[gi] += weights[i] * d_c_summary
            d_scores = weights * (d_weights - weights @ d_weights)
            d_pre_sum = np.zeros_like(attn.v)
            for i in range(count):
                gi = st.window_start + i
                g_v += d_scores[i] * st.pre_tanh[i]
                d_pre = (d_scores[i] * attn.v) * (1.0 - st.pre_tanh[i] ** 2)
                g_wh += np.outer(d_pre, cache.tape_h[gi])
                d_tape_h[gi] += attn.wh.T @ d_pre
                d_pre_sum += d_pre
            g_wx += np.outer(d_pre_sum, st.x)
            dx += attn.wx.T @ d_pre_sum
            g_wp += np.outer(d_pre_sum, st.prev_summary)
            if t > 0:
                d_summary[t - 1] += attn.wp.T @ d_pre_sum
        # empty window: both summaries are constant zero vectors
        d_inputs[t] = dx
    grads = {
        "attn.wh": g_wh, "attn.wx": g_wx, "attn.wp": g_wp, "attn.v": g_v,
        "cell.w": g_w, "cell.b": g_b,
    }
    return grads, d_inputs


@dataclass
class ForwardCache:
    """Everything backward() needs from one sentence's forward pass."""

    inputs: np.ndarray
    input_mask: np.ndarray
    layer_caches: list = field(default_factory=list)
    out_mask_f: np.ndarray = None
    out_mask_b: np.ndarray = None
    top_h_f: np.ndarray = None
    top_h_b: np.ndarray = None


def forward(params, config, inputs, dropout=0.0, rng=None):
    """Emission scores (n, num_tags) for one sentence, plus the cache.

    Tapes start empty: per-sentence state isolation is structural.  With
    dropout > 0, inverted-dropout masks apply to the featurized inputs
    and to the (forward, backward) hidden vectors feeding the output
    projection; evaluation passes use dropout=0.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise ValueError(f"need a non-empty (n, input_dim) array, got {inputs.shape}")
    if inputs.shape[1] != config.input_dim:
        raise ShapeError(
            f"input dim {inputs.shape[1]} != configured {config.input_dim}"
        )
    if dropout and rng is None:
        raise ValueError("dropout needs an rng")
    n = inputs.shape[0]
    h = config.hidden_dim

    input_mask = dropout_mask(inputs.shape, dropout, rng) if dropout else None
    current = inputs * input_mask if dropout else inputs

    cache = ForwardCache(inputs=inputs, input_mask=input_mask)
    for layer in range(config.num_layers):
        attn_f, cell_f = direction_view(params, layer, "fwd")
        attn_b, cell_b = direction_view(params, layer, "bwd")
        rows = [current[t] for t in range(n)]
        cache_f = _direction_forward(rows, attn_f, cell_f, config.memory_span)
        cache_b = _direction_forward(rows[::-1], attn_b, cell_b, config.memory_span)
        cache.layer_caches.append((cache_f, cache_b))
        h_f = cache_f.tape_h
        h_b = cache_b.tape_h[::-1]
        if layer + 1 < config.num_layers:
            current = np.stack(
                [np.concatenate((h_f[t], h_b[t])) for t in range(n)]
            )

    if dropout:
        cache.out_mask_f = dropout_mask((n, h), dropout, rng)
        cache.out_mask_b = dropout_mask((n, h), dropout, rng)
        h_f = [h_f[t] * cache.out_mask_f[t] for t in range(n)]
        h_b = [h_b[t] * cache.out_mask_b[t] for t in range(n)]
    cache.top_h_f = h_f
    cache.top_h_b = h_b

    wf, wb, b = params["out.wf"], params["out.wb"], params["out.b"]
    emissions = np.empty((n, config.num_tags))
    for t in range(n):
        emissions[t] = wf @ h_f[t] + wb @ h_b[t] + b
    return emissions, cache


def backward(params, config, cache, d_emissions):
    """Gradients of a scalar loss through the cached forward pass.

    Returns (grads, d_inputs): grads maps every encoder parameter name to
    its gradient; d_inputs is the gradient with respect to the original
    featurized inputs (for the embedding tables).
    """
    if cache is None or not cache.layer_caches:
        raise ValueError("backward called without a cached forward pass")
    d_emissions = np.asarray(d_emissions, dtype=np.float64)
    n = d_emissions.shape[0]
    h = config.hidden_dim
    wf, wb = params["out.wf"], params["out.wb"]

    grads = {
        "out.wf": np.zeros_like(wf),
        "out.wb": np.zeros_like(wb),
        "out.b": np.zeros_like(params["out.b"]),
    }
    d_h_f = []
    d_h_b = []
    for t in range(n):
        dy = d_emissions[t]
        grads["out.wf"] += np.outer(dy, cache.top_h_f[t])
        grads["out.wb"] += np.outer(dy, cache.top_h_b[t])
        grads["out.b"] += dy
        df = wf.T @ dy
        db = wb.T @ dy
        if cache.out_mask_f is not None:
            df = df * cache.out_mask_f[t]
            db = db * cache.out_mask_b[t]
        d_h_f.append(df)
        d_h_b.append(db)

    for layer in range(config.num_layers - 1, -1, -1):
        attn_f, cell_f = direction_view(params, layer, "fwd")
        attn_b, cell_b = direction_view(params, layer, "bwd")
        cache_f, cache_b = cache.layer_caches[layer]
        grads_f, d_in_f = _direction_backward(cache_f, attn_f, cell_f, d_h_f)
        grads_b, d_in_b_rev = _direction_backward(
            cache_b, attn_b, cell_b, d_h_b[::-1]
        )
        for name, g in grads_f.items():
            grads[f"enc{layer}.fwd.{name}"] = g
        for name, g in grads_b.items():
            grads[f"enc{layer}.bwd.{name}"] = g
        d_layer_in = d_in_f + d_in_b_rev[::-1]
        if layer > 0:
            d_h_f = [d_layer_in[t, :h] for t in range(n)]
            d_h_b = [d_layer_in[t, h:] for t in range(n)]

    d_inputs = d_layer_in
    if cache.input_mask is not None:
        d_inputs = d_inputs * cache.input_mask
    return grads, d_inputs
