"""The path-matching CTR network.

Pipeline per example: embed every event of the t historical paths and the
current path; enhance each path with two-level activation (per-event
weighting against the path's anchor click, then softmax scoring over the
path and top-k1 selection); gate each historical path against the current
path and keep the top-k2 matches; gate the matched paths' anchor clicks
against the candidate; feed the concatenated blocks through the head MLP.
A contrastive branch aligns two masked views of each historical path.

Ablation switches: use_enhance (two-level activation off -> first k1 raw
event embeddings), use_match (matching off -> zero blocks, head arity
unchanged), use_contrast (auxiliary loss off).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import RunConfig
from .nd import nn
from .nd import tensor as T
from .nd.tensor import Tensor
from .paths import (
    PAD_EVENT,
    N_TIME_BUCKETS,
    BehaviorPath,
    BehaviorType,
    build_path_sequence,
    current_path,
)

# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass
class EmbeddingTables:
    """One table per feature; row 0 is the Pad row and stays zero."""

    item: Tensor
    category: Tensor
    btype: Tensor
    time: Tensor
    position: Tensor
    user: Tensor


@dataclass
class ModelParams:
    cfg: RunConfig
    tables: EmbeddingTables
    act: nn.Mlp  # per-event activation against the path anchor
    score: nn.Mlp  # per-path softmax scores over the l slots
    gate: nn.Mlp  # current-vs-historical path gate
    cgate: nn.Mlp  # candidate-vs-matched-click gate
    head: nn.Mlp


def head_input_dim(cfg: RunConfig) -> int:
    d, k1, k2 = cfg.embed_dim, cfg.k1, cfg.k2
    pe = (cfg.hist_paths if cfg.pool_paths == "concat" else 1) * k1 * d
    return pe + k2 * k1 * d + k2 * d + d + d


def init_params(cfg: RunConfig, seed: Optional[int] = None) -> ModelParams:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    d = cfg.embed_dim

    def table(rows: int) -> Tensor:
        t = nn.gaussian_init((rows, d), rng, cfg.init_std)
        t.data[0] = 0.0
        return t

    tables = EmbeddingTables(
        item=table(cfg.item_cap + 1),
        category=table(cfg.n_categories + 1),
        btype=table(len(BehaviorType)),
        time=table(N_TIME_BUCKETS + 1),
        position=table(cfg.pos_cap),
        user=table(cfg.user_cap + 1),
    )

    def mlp(sizes, last_act):
        acts = ["relu"] * (len(sizes) - 2) + [last_act]
        return nn.Mlp(sizes, acts, rng, cfg.init_std)

    act = mlp([4 * d, *cfg.act_hidden, 1], "linear")
    # Identity start: per-event weights begin near 1 so path embeddings keep
    # the raw embedding scale and downstream gates see usable magnitudes.
    act.biases[-1].data[:] = 1.0
    score = mlp([cfg.path_len * d, *cfg.score_hidden, cfg.path_len], "linear")
    # Flat start: exactly tied scores select the same (first k1) slots for
    # every path, so two paths with the same event template produce
    # slot-aligned embeddings and the gates' dot-product prior can rank them.
    for w in score.weights:
        w.data[:] = 0.0
    gate = mlp([3 * cfg.k1 * d, *cfg.gate_hidden, 1], "linear")
    _similarity_prior(gate, cfg.k1 * d)
    cgate = mlp([3 * d, *cfg.click_hidden, 1], "linear")
    _similarity_prior(cgate, d)
    head = mlp([head_input_dim(cfg), *cfg.head_hidden, 1], "sigmoid")
    return ModelParams(cfg=cfg, tables=tables, act=act, score=score, gate=gate, cgate=cgate, head=head)


def _similarity_prior(mlp: nn.Mlp, width: int) -> None:
    """Start a pair gate as a dot-product detector.

    Gate inputs are concat(a, b, a*b); two hidden units pass +/- the sum of
    the product block through their ReLUs, so the initial gate value is
    dot(a, b) plus damped Gaussian noise from the remaining units.  Without
    this prior the top-k path selection starts as label-independent noise
    and, because selection is not differentiated through, the gates never
    receive a gradient that teaches them similarity.  Applied to
    single-hidden-layer gates; deeper gate stacks keep their plain random
    start.
    """
    if len(mlp.weights) != 2 or mlp.sizes[1] < 2:
        return
    w0, w1 = mlp.weights[0].data, mlp.weights[1].data
    w0 *= 0.3
    w1 *= 0.3
    w0[2 * width :, 0] = 1.0
    w0[2 * width :, 1] = -1.0
    w1[0, 0] = 1.0
    w1[1, 0] = -1.0


def named_params(params: ModelParams) -> dict[str, Tensor]:
    out = {
        "emb.item": params.tables.item,
        "emb.category": params.tables.category,
        "emb.btype": params.tables.btype,
        "emb.time": params.tables.time,
        "emb.position": params.tables.position,
        "emb.user": params.tables.user,
    }
    for prefix, mlp in (
        ("act", params.act),
        ("score", params.score),
        ("gate", params.gate),
        ("cgate", params.cgate),
        ("head", params.head),
    ):
        out.update(mlp.named_params(prefix))
    return out


def zero_pad_grads(params: ModelParams) -> None:
    """Discard gradient on every Pad row so row 0 never moves."""
    for table in vars(params.tables).values():
        if table.grad is not None:
            table.grad[0] = 0.0


def restore_params(params: ModelParams, arrays: dict[str, np.ndarray]) -> None:
    for name, tensor in named_params(params).items():
        if name not in arrays:
            raise KeyError(f"checkpoint is missing parameter {name}")
        if arrays[name].shape != tensor.data.shape:
            raise ValueError(
                f"checkpoint shape mismatch for {name}: "
                f"{arrays[name].shape} vs {tensor.data.shape}"
            )
        tensor.data[...] = arrays[name]


# ---------------------------------------------------------------------------
# feature encoding
# ---------------------------------------------------------------------------


def fold_id(raw: int, cap: int) -> int:
    """Map a positive id into [1, cap]; 0 stays the Pad row."""
    if raw == 0:
        return 0
    if raw < 0:
        raise ValueError(f"negative id {raw}")
    return (raw - 1) % cap + 1


def event_feature_rows(event, cfg: RunConfig) -> tuple[int, int, int, int, int]:
    """Embedding rows (item, category, type, time, position) for one event."""
    if event.is_pad:
        return (0, 0, 0, 0, 0)
    return (
        fold_id(event.item_id, cfg.item_cap),
        fold_id(event.category_id, cfg.n_categories),
        int(event.behavior_type),
        min(event.time_bucket, N_TIME_BUCKETS - 1) + 1,
        min(event.position, cfg.pos_cap - 1),
    )


@dataclass
class Batch:
    """Integer-encoded examples ready for the batched forward pass.

    feats holds the five embedding rows for every event slot; path index
    hist_paths (the last one) is the current path.  anchors holds the five
    rows of each historical path's anchor click (zeros for dummies).
    """

    feats: np.ndarray  # (B, t+1, l, 5) int64
    anchors: np.ndarray  # (B, t, 5) int64
    cand: np.ndarray  # (B, 2) int64: candidate item row, category row
    user: np.ndarray  # (B,) int64
    valid: np.ndarray  # (B,) int64
    label: np.ndarray  # (B,) float64

    def __len__(self) -> int:
        return self.feats.shape[0]

    def slice(self, idx) -> "Batch":
        return Batch(
            feats=self.feats[idx],
            anchors=self.anchors[idx],
            cand=self.cand[idx],
            user=self.user[idx],
            valid=self.valid[idx],
            label=self.label[idx],
        )


def encode_example(ex, cfg: RunConfig):
    """Encode one training example into the Batch array slices."""
    l, t = cfg.path_len, cfg.hist_paths
    pseq = build_path_sequence(ex.seq, l, t)
    cur = current_path(ex.seq, l)
    feats = np.zeros((t + 1, l, 5), dtype=np.int64)
    anchors = np.zeros((t, 5), dtype=np.int64)
    for j, path in enumerate(pseq.paths):
        for s, ev in enumerate(path.events):
            feats[j, s] = event_feature_rows(ev, cfg)
        anchor = path.anchor_click if path.anchor_click is not None else PAD_EVENT
        anchors[j] = event_feature_rows(anchor, cfg)
    for s, ev in enumerate(cur.events):
        feats[t, s] = event_feature_rows(ev, cfg)
    cand = np.array(
        [fold_id(ex.cand_item, cfg.item_cap), fold_id(ex.cand_cat, cfg.n_categories)],
        dtype=np.int64,
    )
    return feats, anchors, cand, fold_id(ex.user, cfg.user_cap), pseq.valid_count, float(ex.label)


def encode_dataset(examples, cfg: RunConfig) -> Batch:
    n = len(examples)
    l, t = cfg.path_len, cfg.hist_paths
    feats = np.zeros((n, t + 1, l, 5), dtype=np.int64)
    anchors = np.zeros((n, t, 5), dtype=np.int64)
    cand = np.zeros((n, 2), dtype=np.int64)
    user = np.zeros(n, dtype=np.int64)
    valid = np.zeros(n, dtype=np.int64)
    label = np.zeros(n, dtype=np.float64)
    for i, ex in enumerate(examples):
        feats[i], anchors[i], cand[i], user[i], valid[i], label[i] = encode_example(ex, cfg)
    return Batch(feats=feats, anchors=anchors, cand=cand, user=user, valid=valid, label=label)


# ---------------------------------------------------------------------------
# single-path operations (also serve as oracle components for the batch path)
# ---------------------------------------------------------------------------


def embed_event(event, params: ModelParams) -> np.ndarray:
    """Sum of the five feature-table rows for one event."""
    rows = event_feature_rows(event, params.cfg)
    tabs = params.tables
    return (
        tabs.item.data[rows[0]]
        + tabs.category.data[rows[1]]
        + tabs.btype.data[rows[2]]
        + tabs.time.data[rows[3]]
        + tabs.position.data[rows[4]]
    ).copy()


def enhance_path(
    events: Tensor,
    anchor: Tensor,
    params: ModelParams,
) -> tuple[Tensor, Optional[Tensor]]:
    """Two-level activation of one path: (l, d) events + (d,) anchor -> (k1*d,).

    First level weights each event by an MLP on concat(e, anchor, e*anchor,
    e-anchor); second level softmax-scores the l slots, keeps the top k1,
    scales the selected weighted events by their scores, and concatenates
    them in original sequence order.  With use_enhance off, the result is
    the concat of the first k1 raw event embeddings.
    """
    cfg = params.cfg
    l, d, k1 = cfg.path_len, cfg.embed_dim, cfg.k1
    if events.data.shape != (l, d):
        raise ValueError(f"expected ({l}, {d}) events, got {events.data.shape}")
    if not cfg.use_enhance:
        first = T.gather_rows(events, np.arange(k1))
        return T.reshape(first, (k1 * d,)), None
    anch = T.repeat_rows(T.reshape(anchor, (1, d)), l)
    act_in = T.concat_cols([events, anch, T.mul(events, anch), T.sub(events, anch)])
    w = T.reshape(params.act.forward(act_in), (l,))
    weighted = T.scale_rows(events, w)
    p_te = T.reshape(weighted, (1, l * d))
    scores = T.softmax_rows(params.score.forward(p_te))
    sel = T.topk_select(scores.data[0], k1)
    chosen = T.gather_rows(weighted, sel)
    picked = T.take_elems(scores, np.zeros(k1, dtype=np.int64), sel)
    enhanced = T.reshape(T.scale_rows(chosen, picked), (k1 * d,))
    return enhanced, T.reshape(scores, (l,))


def path_match_gate(p_cur: Tensor, p_hist: Tensor, params: ModelParams) -> Tensor:
    """Scalar gate from concat(p_cur, p_hist, p_cur*p_hist)."""
    width = p_cur.data.shape[0]
    a = T.reshape(p_cur, (1, width))
    b = T.reshape(p_hist, (1, width))
    out = params.gate.forward(T.concat_cols([a, b, T.mul(a, b)]))
    return T.reshape(out, ())


def _match_order(gates: np.ndarray, valid_count: int, k2: int) -> np.ndarray:
    """Selected indices, descending gate, ties broken by the later path."""
    t = gates.shape[0]
    masked = gates.astype(np.float64).copy()
    masked[valid_count:] = -np.inf
    rev = masked[::-1]
    order = t - 1 - np.argsort(-rev, kind="stable")
    return order[: min(valid_count, k2)]


def select_paths(
    gates: Tensor,
    path_embeds: Tensor,
    click_embeds: Tensor,
    k2: int,
    valid_count: int,
) -> tuple[Tensor, Tensor, np.ndarray]:
    """Keep the k2 best-gated real paths, scaled by their gates.

    Returns the concat of gate-scaled path blocks (k2*D,), the matching
    anchor-click embeddings (k2, d), and the chosen indices (-1 marks an
    empty slot filled with zeros).
    """
    t, width = path_embeds.data.shape
    if not 1 <= k2 <= t:
        raise ValueError(f"k2={k2} out of range for t={t}")
    chosen = _match_order(gates.data, valid_count, k2)
    sel = np.full(k2, -1, dtype=np.int64)
    sel[: len(chosen)] = chosen
    scaled = T.scale_rows(path_embeds, gates)
    if len(chosen):
        slots = np.arange(len(chosen), dtype=np.int64)
        blocks = T.scatter_rows(T.gather_rows(scaled, chosen), slots, k2)
        clicks = T.scatter_rows(T.gather_rows(click_embeds, chosen), slots, k2)
    else:
        blocks = T.constant(np.zeros((k2, width)))
        clicks = T.constant(np.zeros((k2, click_embeds.data.shape[1])))
    return T.reshape(blocks, (k2 * width,)), clicks, sel


def candidate_activation(
    e_ct: Tensor, clicks: Tensor, params: ModelParams
) -> tuple[Tensor, Tensor]:
    """Gate each matched click against the candidate: -> (k2*d,), gates (k2,)."""
    k2, d = clicks.data.shape
    rep = T.repeat_rows(T.reshape(e_ct, (1, d)), k2)
    gin = T.concat_cols([rep, clicks, T.mul(rep, clicks)])
    g_c = T.reshape(params.cgate.forward(gin), (k2,))
    e_c = T.reshape(T.scale_rows(clicks, g_c), (k2 * d,))
    return e_c, g_c


# ---------------------------------------------------------------------------
# masked views and the contrastive loss
# ---------------------------------------------------------------------------


def _mask_count(l: int, mask_ratio: float) -> int:
    if mask_ratio <= 0 or l <= 1:
        return 0
    # Cap below l so a fully-masked view is impossible.
    return min(math.ceil(mask_ratio * l), l - 1)


def _draw_mask(is_pad: np.ndarray, mask_ratio: float, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask over the l slots; at least one real event survives."""
    l = is_pad.shape[0]
    n_mask = _mask_count(l, mask_ratio)
    mask = np.zeros(l, dtype=bool)
    if n_mask == 0:
        return mask
    has_real = bool((~is_pad).any())
    while True:
        mask[:] = False
        mask[rng.choice(l, size=n_mask, replace=False)] = True
        if not has_real or bool((~is_pad & ~mask).any()):
            return mask


def masked_views(
    path: BehaviorPath, mask_ratio: float, rng: np.random.Generator
) -> tuple[BehaviorPath, BehaviorPath]:
    """Two independently masked copies of a path; masked slots become Pad."""
    if not 0 <= mask_ratio < 1:
        raise ValueError("mask_ratio must lie in [0, 1)")
    is_pad = np.array([e.is_pad for e in path.events])

    def view() -> BehaviorPath:
        mask = _draw_mask(is_pad, mask_ratio, rng)
        events = tuple(
            PAD_EVENT if mask[i] else e for i, e in enumerate(path.events)
        )
        return BehaviorPath(
            events=events, anchor_click=path.anchor_click, anchor_position=path.anchor_position
        )

    return view(), view()


def infonce_loss(z_a: Tensor, z_b: Tensor, tau: float) -> Tensor:
    """In-batch contrastive loss over cosine similarities at temperature tau."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    n = z_a.data.shape[0]
    if n < 2 or z_b.data.shape[0] != n:
        raise ValueError("need matched view batches with n >= 2")
    sim = T.matmul_nt(T.l2_normalize_rows(z_a), T.l2_normalize_rows(z_b))
    return T.softmax_xent_rows(T.mul_scalar(sim, 1.0 / tau), np.arange(n))


def total_loss(
    preds: Tensor,
    labels: np.ndarray,
    contrast: Optional[Tensor],
    lam: float,
) -> Tensor:
    """Mean BCE plus lam times the contrastive term when present."""
    main = T.bce_mean(preds, labels)
    if contrast is not None and lam > 0:
        return T.add(main, T.mul_scalar(contrast, lam))
    return main


# ---------------------------------------------------------------------------
# batched forward
# ---------------------------------------------------------------------------


def _embed_rows(params: ModelParams, rows: np.ndarray) -> Tensor:
    """Sum the five table lookups for (n, 5) feature rows -> (n, d)."""
    tabs = params.tables
    return T.add_n(
        [
            T.gather_rows(tabs.item, rows[:, 0]),
            T.gather_rows(tabs.category, rows[:, 1]),
            T.gather_rows(tabs.btype, rows[:, 2]),
            T.gather_rows(tabs.time, rows[:, 3]),
            T.gather_rows(tabs.position, rows[:, 4]),
        ]
    )


def _enhance_rows(
    params: ModelParams, events: Tensor, anchors: Tensor
) -> tuple[Tensor, Optional[Tensor], Optional[np.ndarray]]:
    """Vectorized enhance_path over R paths: (R*l, d) events, (R, d) anchors."""
    cfg = params.cfg
    l, d, k1 = cfg.path_len, cfg.embed_dim, cfg.k1
    n_rows = anchors.data.shape[0]
    if not cfg.use_enhance:
        first = (np.arange(n_rows)[:, None] * l + np.arange(k1)[None, :]).ravel()
        return T.reshape(T.gather_rows(events, first), (n_rows, k1 * d)), None, None
    anch = T.repeat_rows(anchors, l)
    act_in = T.concat_cols([events, anch, T.mul(events, anch), T.sub(events, anch)])
    w = T.reshape(params.act.forward(act_in), (n_rows * l,))
    weighted = T.scale_rows(events, w)
    p_te = T.reshape(weighted, (n_rows, l * d))
    scores = T.softmax_rows(params.score.forward(p_te))
    sel = T.topk_rows(scores.data, k1)
    flat = (np.arange(n_rows)[:, None] * l + sel).ravel()
    chosen = T.gather_rows(weighted, flat)
    picked = T.take_elems(scores, np.repeat(np.arange(n_rows), k1), sel.ravel())
    enhanced = T.reshape(T.scale_rows(chosen, picked), (n_rows, k1 * d))
    return enhanced, scores, sel


def _match_selection(
    gates: np.ndarray, valid: np.ndarray, k2: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise top-k2 over (B, t) gates, dummies excluded.

    Returns sel (B, k2) with -1 for empty slots, plus flat source indices
    into the (B*t) path rows and flat destination indices into the (B*k2)
    selected-slot rows.
    """
    n, t = gates.shape
    masked = gates.copy()
    masked[np.arange(t)[None, :] >= valid[:, None]] = -np.inf
    rev = masked[:, ::-1]
    order = t - 1 - np.argsort(-rev, axis=1, kind="stable")[:, :k2]
    slot_ok = np.arange(k2)[None, :] < np.minimum(valid, k2)[:, None]
    sel = np.where(slot_ok, order, -1)
    rows = np.repeat(np.arange(n), k2).reshape(n, k2)
    src = (rows * t + order)[slot_ok]
    dst = (rows * k2 + np.arange(k2)[None, :])[slot_ok]
    return sel, src.astype(np.int64), dst.astype(np.int64)


@dataclass
class BatchForward:
    """Tensors of one batched forward pass (aux fields None when skipped)."""

    prob: Tensor  # (B,)
    path_embeds: Tensor  # (B*t, k1*d) enhanced historical paths
    cur_embed: Tensor  # (B, k1*d)
    matched_paths: Tensor  # (B, k2*k1*d)
    matched_clicks: Tensor  # (B, k2*d)
    path_gates: Optional[Tensor]  # (B*t,)
    click_gates: Optional[Tensor]  # (B*k2,)
    scores: Optional[Tensor]  # (B*(t+1), l)
    sel_match: Optional[np.ndarray]  # (B, k2)


def forward_batch(params: ModelParams, batch: Batch) -> BatchForward:
    cfg = params.cfg
    n = len(batch)
    l, t, d, k1, k2 = cfg.path_len, cfg.hist_paths, cfg.embed_dim, cfg.k1, cfg.k2

    events = _embed_rows(params, batch.feats.reshape(n * (t + 1) * l, 5))
    anchors_hist = _embed_rows(params, batch.anchors.reshape(n * t, 5))
    e_ct = T.add(
        T.gather_rows(params.tables.item, batch.cand[:, 0]),
        T.gather_rows(params.tables.category, batch.cand[:, 1]),
    )

    rows = n * (t + 1)
    idx_hist = (np.arange(n)[:, None] * (t + 1) + np.arange(t)[None, :]).ravel()
    idx_cur = np.arange(n) * (t + 1) + t
    # The current path's anchor is the candidate embedding.
    anchors_all = T.add(
        T.scatter_rows(anchors_hist, idx_hist, rows),
        T.scatter_rows(e_ct, idx_cur, rows),
    )

    enhanced, scores, _ = _enhance_rows(params, events, anchors_all)
    path_embeds = T.gather_rows(enhanced, idx_hist)  # (B*t, k1*d)
    cur_embed = T.gather_rows(enhanced, idx_cur)  # (B, k1*d)

    if cfg.use_match:
        cur_rep = T.repeat_rows(cur_embed, t)
        gate_in = T.concat_cols([cur_rep, path_embeds, T.mul(cur_rep, path_embeds)])
        path_gates = T.reshape(params.gate.forward(gate_in), (n * t,))
        sel, src, dst = _match_selection(path_gates.data.reshape(n, t), batch.valid, k2)
        scaled = T.scale_rows(path_embeds, path_gates)
        if len(src):
            blocks = T.scatter_rows(T.gather_rows(scaled, src), dst, n * k2)
            clicks = T.scatter_rows(T.gather_rows(anchors_hist, src), dst, n * k2)
        else:
            blocks = T.constant(np.zeros((n * k2, k1 * d)))
            clicks = T.constant(np.zeros((n * k2, d)))
        ct_rep = T.repeat_rows(e_ct, k2)
        cgate_in = T.concat_cols([ct_rep, clicks, T.mul(ct_rep, clicks)])
        click_gates = T.reshape(params.cgate.forward(cgate_in), (n * k2,))
        matched_paths = T.reshape(blocks, (n, k2 * k1 * d))
        matched_clicks = T.reshape(T.scale_rows(clicks, click_gates), (n, k2 * d))
    else:
        path_gates = None
        click_gates = None
        sel = None
        matched_paths = T.constant(np.zeros((n, k2 * k1 * d)))
        matched_clicks = T.constant(np.zeros((n, k2 * d)))

    if cfg.pool_paths == "concat":
        pe_head = T.reshape(path_embeds, (n, t * k1 * d))
    else:
        pe_head = T.block_sum_rows(path_embeds, t)
    e_u = T.gather_rows(params.tables.user, batch.user)
    head_in = T.concat_cols([pe_head, matched_paths, matched_clicks, e_u, e_ct])
    prob = T.reshape(params.head.forward(head_in), (n,))

    return BatchForward(
        prob=prob,
        path_embeds=path_embeds,
        cur_embed=cur_embed,
        matched_paths=matched_paths,
        matched_clicks=matched_clicks,
        path_gates=path_gates,
        click_gates=click_gates,
        scores=scores,
        sel_match=sel,
    )


# ---------------------------------------------------------------------------
# contrastive plan (randomness frozen outside the loss for checkability)
# ---------------------------------------------------------------------------


@dataclass
class ContrastPlan:
    pool: np.ndarray  # (n_c, 2) example/path indices
    mask_a: np.ndarray  # (n_c, l) bool
    mask_b: np.ndarray  # (n_c, l) bool


def draw_contrast_plan(
    batch: Batch, cfg: RunConfig, rng: np.random.Generator
) -> Optional[ContrastPlan]:
    """Sample real non-empty paths and their two view masks for one step."""
    t = cfg.hist_paths
    usable = (np.arange(t)[None, :] < batch.valid[:, None]) & (
        batch.feats[:, :t, :, 0] != 0
    ).any(axis=2)
    pool = np.argwhere(usable)
    if len(pool) < 2:
        return None
    if len(pool) > cfg.contrast_cap:
        keep = rng.choice(len(pool), size=cfg.contrast_cap, replace=False)
        pool = pool[np.sort(keep)]
    is_pad = batch.feats[pool[:, 0], pool[:, 1], :, 0] == 0
    mask_a = np.stack([_draw_mask(row, cfg.mask_ratio, rng) for row in is_pad])
    mask_b = np.stack([_draw_mask(row, cfg.mask_ratio, rng) for row in is_pad])
    return ContrastPlan(pool=pool, mask_a=mask_a, mask_b=mask_b)


def contrast_loss(params: ModelParams, batch: Batch, plan: ContrastPlan) -> Tensor:
    """InfoNCE between the enhanced embeddings of the two masked views."""
    cfg = params.cfg
    n_c, l = plan.mask_a.shape
    feats = batch.feats[plan.pool[:, 0], plan.pool[:, 1]]  # (n_c, l, 5)
    anchors = _embed_rows(params, batch.anchors[plan.pool[:, 0], plan.pool[:, 1]])

    def view(mask: np.ndarray) -> Tensor:
        masked = feats.copy()
        masked[mask] = 0
        events = _embed_rows(params, masked.reshape(n_c * l, 5))
        return _enhance_rows(params, events, anchors)[0]

    return infonce_loss(view(plan.mask_a), view(plan.mask_b), cfg.temperature)


def training_loss(
    params: ModelParams, batch: Batch, plan: Optional[ContrastPlan]
) -> tuple[Tensor, dict[str, float]]:
    cfg = params.cfg
    out = forward_batch(params, batch)
    contrast = None
    if cfg.use_contrast and plan is not None:
        contrast = contrast_loss(params, batch, plan)
    loss = total_loss(out.prob, batch.label, contrast, cfg.contrast_weight)
    parts = {
        "loss": float(loss.data),
        "bce": float(T.bce_mean(out.prob, batch.label).data),
        "contrast": float(contrast.data) if contrast is not None else 0.0,
    }
    return loss, parts


# ---------------------------------------------------------------------------
# single-example prediction with trace
# ---------------------------------------------------------------------------


@dataclass
class ForwardTrace:
    """Numpy snapshots of one example's forward pass."""

    prob: float
    path_embeds: np.ndarray  # (t, k1*d)
    cur_embed: np.ndarray  # (k1*d,)
    matched_paths: np.ndarray  # (k2*k1*d,)
    matched_clicks: np.ndarray  # (k2*d,)
    path_gates: Optional[np.ndarray]  # (t,)
    click_gates: Optional[np.ndarray]  # (k2,)
    scores: Optional[np.ndarray]  # (t+1, l)
    sel_match: Optional[np.ndarray]  # (k2,)


def predict_ctr(example, params: ModelParams) -> tuple[float, ForwardTrace]:
    cfg = params.cfg
    batch = encode_dataset([example], cfg)
    out = forward_batch(params, batch)
    trace = ForwardTrace(
        prob=float(out.prob.data[0]),
        path_embeds=out.path_embeds.data.copy(),
        cur_embed=out.cur_embed.data[0].copy(),
        matched_paths=out.matched_paths.data[0].copy(),
        matched_clicks=out.matched_clicks.data[0].copy(),
        path_gates=None if out.path_gates is None else out.path_gates.data.copy(),
        click_gates=None if out.click_gates is None else out.click_gates.data.copy(),
        scores=None if out.scores is None else out.scores.data.copy(),
        sel_match=None if out.sel_match is None else out.sel_match[0].copy(),
    )
    return trace.prob, trace


def predict_probs(params: ModelParams, batch: Batch, chunk: int = 512) -> np.ndarray:
    """Forward-only probabilities over a dataset, evaluated in chunks."""
    outs = []
    for start in range(0, len(batch), chunk):
        sub = batch.slice(slice(start, start + chunk))
        outs.append(forward_batch(params, sub).prob.data)
    return np.concatenate(outs) if outs else np.zeros(0)
