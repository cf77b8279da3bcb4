"""GRU cell and stacked bidirectional sequence encoders.

Gate equations (candidate with the reset gate applied inside the hidden
pre-activation):

    r  = sigmoid(x W_ir^T + b_ir + h W_hr^T + b_hr)
    z  = sigmoid(x W_iz^T + b_iz + h W_hz^T + b_hz)
    n  = tanh(x W_in^T + b_in + r * (h W_hn^T + b_hn))
    h' = (1 - z) * n + z * h

The cell is a single fused tape node with an analytic backward; its
correctness is pinned by the finite-difference oracle in ``gradcheck``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .tensor import EmptySequence, ShapeMismatch, Tensor, concat, mask_lerp, rows

GATE_NAMES = ("w_ir", "w_iz", "w_in", "w_hr", "w_hz", "w_hn",
              "b_ir", "b_iz", "b_in", "b_hr", "b_hz", "b_hn")


@dataclass
class GruLayerParams:
    """Weights and biases of one GRU direction of one layer."""

    w_ir: Tensor
    w_iz: Tensor
    w_in: Tensor
    w_hr: Tensor
    w_hz: Tensor
    w_hn: Tensor
    b_ir: Tensor
    b_iz: Tensor
    b_in: Tensor
    b_hr: Tensor
    b_hz: Tensor
    b_hn: Tensor

    @property
    def input_size(self) -> int:
        return self.w_ir.data.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.w_ir.data.shape[0]

    def tensors(self) -> list[Tensor]:
        return [getattr(self, f.name) for f in fields(self)]

    def named(self, prefix: str) -> list[tuple[str, Tensor]]:
        return [(f"{prefix}.{f.name}", getattr(self, f.name)) for f in fields(self)]


def init_gru_params(rng: np.random.Generator, input_size: int, hidden_size: int,
                    dtype=np.float32) -> GruLayerParams:
    """Weights uniform in (-1/sqrt(H), 1/sqrt(H)); biases zero."""
    bound = 1.0 / np.sqrt(hidden_size)

    def w(rows_, cols):
        return Tensor(rng.uniform(-bound, bound, size=(rows_, cols)).astype(dtype),
                      requires_grad=True)

    def b():
        return Tensor(np.zeros(hidden_size, dtype=dtype), requires_grad=True)

    return GruLayerParams(
        w_ir=w(hidden_size, input_size), w_iz=w(hidden_size, input_size),
        w_in=w(hidden_size, input_size), w_hr=w(hidden_size, hidden_size),
        w_hz=w(hidden_size, hidden_size), w_hn=w(hidden_size, hidden_size),
        b_ir=b(), b_iz=b(), b_in=b(), b_hr=b(), b_hz=b(), b_hn=b(),
    )


def gru_cell_batch(x: Tensor, h: Tensor, p: GruLayerParams) -> Tensor:
    """One GRU step over a batch: x (B, I), h (B, H) -> (B, H)."""
    if x.data.ndim != 2 or h.data.ndim != 2:
        raise ShapeMismatch("gru_cell expects 2-D inputs")
    if x.data.shape[1] != p.input_size or h.data.shape[1] != p.hidden_size:
        raise ShapeMismatch(
            f"gru_cell: x {x.data.shape}, h {h.data.shape}, "
            f"params ({p.hidden_size}, {p.input_size})"
        )
    if x.data.shape[0] != h.data.shape[0]:
        raise ShapeMismatch("gru_cell: batch dimensions differ")

    xd, hd = x.data, h.data
    r = 1.0 / (1.0 + np.exp(-(xd @ p.w_ir.data.T + p.b_ir.data + hd @ p.w_hr.data.T + p.b_hr.data)))
    z = 1.0 / (1.0 + np.exp(-(xd @ p.w_iz.data.T + p.b_iz.data + hd @ p.w_hz.data.T + p.b_hz.data)))
    u = hd @ p.w_hn.data.T + p.b_hn.data
    n = np.tanh(xd @ p.w_in.data.T + p.b_in.data + r * u)
    out_data = (1.0 - z) * n + z * hd

    def bw(out):
        g = out.grad
        dn = g * (1.0 - z)
        dz = g * (hd - n)
        dan = dn * (1.0 - n * n)
        dr = dan * u
        du = dan * r
        dar = dr * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        if p.w_in.requires_grad:
            p.w_in._accumulate(dan.T @ xd)
            p.w_ir._accumulate(dar.T @ xd)
            p.w_iz._accumulate(daz.T @ xd)
            p.w_hn._accumulate(du.T @ hd)
            p.w_hr._accumulate(dar.T @ hd)
            p.w_hz._accumulate(daz.T @ hd)
            p.b_in._accumulate(dan.sum(axis=0))
            p.b_ir._accumulate(dar.sum(axis=0))
            p.b_iz._accumulate(daz.sum(axis=0))
            p.b_hn._accumulate(du.sum(axis=0))
            p.b_hr._accumulate(dar.sum(axis=0))
            p.b_hz._accumulate(daz.sum(axis=0))
        if x.requires_grad:
            x._accumulate(dan @ p.w_in.data + dar @ p.w_ir.data + daz @ p.w_iz.data)
        if h.requires_grad:
            h._accumulate(g * z + du @ p.w_hn.data + dar @ p.w_hr.data + daz @ p.w_hz.data)

    return Tensor(out_data, _parents=(x, h, *p.tensors()), _backward=bw)


def gru_cell(x, h, p: GruLayerParams) -> np.ndarray:
    """Single-vector GRU step: x (I,), h (H,) -> h' (H,)."""
    xt = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
    ht = h if isinstance(h, Tensor) else Tensor(np.asarray(h))
    out = gru_cell_batch(
        Tensor(xt.data.reshape(1, -1)), Tensor(ht.data.reshape(1, -1)), p
    )
    return out.data.reshape(-1)


def bigru_forward(
    xs: list[Tensor],
    layers: list[tuple[GruLayerParams, GruLayerParams]],
    masks: list[np.ndarray] | None = None,
) -> tuple[list[Tensor], Tensor, Tensor]:
    """Run a stacked bidirectional GRU over a step-major sequence.

    ``xs`` holds one (B, D) tensor per position. ``masks``, when given, holds
    one (B, 1) float array per position; masked steps hold the previous state
    and emit zeros, so padded positions never leak into finals or upper
    layers. Returns per-position outputs (each (B, 2H)), the final forward
    state (state at each row's last real step) and the final backward state
    (state at step 0).
    """
    if not xs:
        raise EmptySequence("bigru_encode requires at least one step")
    if not layers:
        raise EmptySequence("bigru_encode requires at least one layer")
    T = len(xs)
    B = xs[0].data.shape[0]
    dtype = xs[0].data.dtype
    inputs = xs
    h_f = h_b = None
    for fwd, bwd in layers:
        H = fwd.hidden_size
        zeros = Tensor(np.zeros((B, H), dtype=dtype))
        h_f = zeros
        fwd_states: list[Tensor] = []
        for t in range(T):
            cand = gru_cell_batch(inputs[t], h_f, fwd)
            if masks is not None:
                h_f = mask_lerp(cand, h_f, masks[t])
                fwd_states.append(mask_lerp(h_f, zeros, masks[t]))
            else:
                h_f = cand
                fwd_states.append(h_f)
        h_b = zeros
        bwd_states: list[Tensor | None] = [None] * T
        for t in range(T - 1, -1, -1):
            cand = gru_cell_batch(inputs[t], h_b, bwd)
            if masks is not None:
                h_b = mask_lerp(cand, h_b, masks[t])
                bwd_states[t] = mask_lerp(h_b, zeros, masks[t])
            else:
                h_b = cand
                bwd_states[t] = h_b
        inputs = [concat([fwd_states[t], bwd_states[t]], axis=1) for t in range(T)]
    return inputs, h_f, h_b


def bigru_encode(seq, layers) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Encode one unpadded sequence of vectors.

    Returns (per-position outputs (T, 2H), final forward state (H,),
    final backward state (H,)).
    """
    arr = np.asarray(seq.data if isinstance(seq, Tensor) else seq)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise EmptySequence(f"expected a (T, D) sequence, got shape {arr.shape}")
    xs = [Tensor(arr[t : t + 1]) for t in range(arr.shape[0])]
    outs, h_f, h_b = bigru_forward(xs, layers)
    stacked = np.concatenate([o.data for o in outs], axis=0)
    return stacked, h_f.data.reshape(-1), h_b.data.reshape(-1)


def sequence_tensors(e: Tensor) -> list[Tensor]:
    """Split an (m, D) tensor into m differentiable (1, D) steps."""
    return [rows(e, i, i + 1) for i in range(e.data.shape[0])]
