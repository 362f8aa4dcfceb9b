"""Exact Shapley attribution of the model's raw margin to channels.

Players are channels: all feature columns of a channel enter and leave
coalitions together. The value of a coalition S is the interventional
masked margin f(S): frame values on the columns of players in S, background
row values elsewhere, averaged over a seeded non-seizure background set.

Per frame, all 2^n coalition values are filled into one subset table keyed
by bitmask and shared across players. Two table builders exist on purpose:
a literal per-subset loop around masked_margin (instrumentable, works with
any margin-bearing stub), and MaskedMarginEngine, which factorizes tree
leaves over their path players and fills the same table in a handful of
vectorized passes. They must agree to 1e-12; tests enforce that.

Beyond the exact cap there are two fallbacks: tree_shap_frame (per-feature
conjunction-game attributions, grouped per player; an approximation whose
deviation against the exact engine is reported whenever the exact engine is
available) and sampled_shap_frame (seeded permutation sampling).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dataset import NONSEIZURE, FrameDataset
from .errors import (
    DimensionMismatch,
    DomainError,
    EmptyDataset,
    EmptySequence,
    TooManyPlayers,
)
from .gbdt import GbdtModel, Tree
from .montage import ChannelLabel

log = logging.getLogger(__name__)

# Seed-stream tags (dataset.py uses 1 and 2).
_BACKGROUND_STREAM = 3
_PERMUTATION_STREAM = 4

DEFAULT_MAX_PLAYERS = 15


def coalition_weight(s_size: int, n: int) -> float:
    """Shapley weight |S|! (n - |S| - 1)! / n! via exact rationals."""
    if n < 1 or s_size < 0 or s_size >= n:
        raise DomainError(f"coalition size must satisfy 0 <= |S| <= n-1, got |S|={s_size}, n={n}")
    return float(Fraction(
        math.factorial(s_size) * math.factorial(n - s_size - 1), math.factorial(n)
    ))


@dataclass(frozen=True)
class CoalitionPlayers:
    """The player set N: channels with their owned feature-column groups."""

    players: tuple[ChannelLabel, ...]
    columns: tuple[tuple[int, ...], ...]
    n_features: int

    def __post_init__(self):
        if not self.players:
            raise EmptyDataset("coalition needs at least one player")
        if len(self.players) != len(self.columns):
            raise DimensionMismatch("one column group per player required")
        seen: set[int] = set()
        for player, cols in zip(self.players, self.columns):
            if not cols:
                raise DimensionMismatch(f"player {player} owns no columns")
            if seen & set(cols):
                raise DimensionMismatch(f"player {player} shares columns with another player")
            if any(c < 0 or c >= self.n_features for c in cols):
                raise DimensionMismatch(f"player {player} has out-of-range columns")
            seen |= set(cols)

    @property
    def n(self) -> int:
        return len(self.players)

    @classmethod
    def from_dataset(cls, ds: FrameDataset, players=None) -> "CoalitionPlayers":
        chosen = tuple(players) if players is not None else ds.channels
        return cls(
            players=chosen,
            columns=tuple(tuple(ds.channel_columns[p]) for p in chosen),
            n_features=ds.X.shape[1],
        )

    def player_of_column(self) -> np.ndarray:
        """Column -> player index, -1 for unowned columns."""
        owner = np.full(self.n_features, -1, dtype=np.int32)
        for i, cols in enumerate(self.columns):
            owner[list(cols)] = i
        return owner


@dataclass(frozen=True)
class BackgroundSet:
    """Reference frames standing in for "channel absent" (non-seizure rows)."""

    rows: np.ndarray

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def draw(cls, ds: FrameDataset, size: int, seed: int) -> "BackgroundSet":
        """Sample up to `size` non-seizure rows without replacement, seeded."""
        candidates = np.flatnonzero(ds.y == NONSEIZURE)
        if len(candidates) == 0:
            raise EmptyDataset("no non-seizure frames available for the background set")
        take = min(size, len(candidates))
        if take < size:
            log.warning("background clamped to %d rows (%d requested)", take, size)
        rng = np.random.default_rng([seed, _BACKGROUND_STREAM])
        chosen = np.sort(rng.choice(candidates, size=take, replace=False))
        return cls(rows=ds.X[chosen].copy())


@dataclass
class EvalCounter:
    """Counts raw-margin row evaluations made by the literal table builder."""

    count: int = 0


@dataclass(eq=False, frozen=True)
class ShapFrameVector:
    t: int
    phi: np.ndarray
    f_full: float
    f_empty: float


@dataclass(eq=False, frozen=True)
class ChannelImportance:
    players: tuple[ChannelLabel, ...]
    phi: np.ndarray
    n_frames: int


def masked_margin(model, frame_x: np.ndarray, mask: int, players: CoalitionPlayers,
                  background: BackgroundSet, counter: EvalCounter | None = None) -> float:
    """f(S): mean raw margin with S's columns from the frame, the rest from background."""
    frame_x = np.asarray(frame_x, dtype=np.float64)
    if len(frame_x) != players.n_features:
        raise DimensionMismatch(
            f"frame has {len(frame_x)} features, players expect {players.n_features}"
        )
    Z = background.rows.copy()
    for i, cols in enumerate(players.columns):
        if (mask >> i) & 1:
            Z[:, list(cols)] = frame_x[list(cols)]
    margins = model.raw_margin_batch(Z)
    if counter is not None:
        counter.count += len(Z)
    return float(margins.mean())


def subset_table(value_fn, n: int) -> np.ndarray:
    """All 2^n coalition values, one literal value_fn(bitmask) call each."""
    if n < 1:
        raise DomainError(f"need at least one player, got n={n}")
    table = np.empty(2 ** n, dtype=np.float64)
    for mask in range(2 ** n):
        table[mask] = value_fn(mask)
    return table


def shapley_from_table(table: np.ndarray, n: int) -> np.ndarray:
    """phi_c = sum over S not containing c of W(|S|, n) (table[S + c] - table[S])."""
    table = np.asarray(table, dtype=np.float64)
    if table.shape != (2 ** n,):
        raise DimensionMismatch(f"table must have 2^{n} entries, got {table.shape}")
    masks = np.arange(2 ** n, dtype=np.uint32)
    pop = np.bitwise_count(masks)
    weights = np.array([coalition_weight(s, n) for s in range(n)])
    phi = np.empty(n, dtype=np.float64)
    for c in range(n):
        without = masks[(masks >> np.uint32(c)) & np.uint32(1) == 0]
        gains = table[without | np.uint32(1 << c)] - table[without]
        phi[c] = float((weights[pop[without]] * gains).sum())
    return phi


# -- factorized table builder -------------------------------------------------

def _leaf_paths(tree: Tree):
    """(constraints, leaf value) per leaf; a constraint is (feature, threshold, is_left)."""
    out = []
    stack: list[tuple[int, tuple]] = [(0, ())]
    while stack:
        node, cons = stack.pop()
        if tree.is_leaf(node):
            out.append((cons, float(tree.value[node])))
            continue
        f, thr = int(tree.feature[node]), float(tree.threshold[node])
        stack.append((int(tree.right[node]), cons + ((f, thr, False),)))
        stack.append((int(tree.left[node]), cons + ((f, thr, True),)))
    return out


@dataclass
class _LeafGroup:
    """All leaves whose paths touch exactly d distinct players."""

    d: int
    values: np.ndarray        # (n_leaves,)
    absent_rev: np.ndarray    # (n_leaves, 2^d): background-averaged absent products
    index: np.ndarray         # (n_leaves, 2^n) int16: coalition -> local combo index
    con_feature: np.ndarray   # flattened present-side constraints
    con_threshold: np.ndarray
    con_is_left: np.ndarray
    con_target: np.ndarray    # constraint -> leaf_row * d + slot position


class MaskedMarginEngine:
    """Fills the same subset table as the literal loop, without per-mask calls.

    Per leaf, the reached-indicator factorizes over the distinct players on
    its path: present players contribute frame-side path checks, absent
    players background-side ones. Background-only products are averaged once
    at construction; per frame only the present-side checks and a doubling
    pass over each leaf's <= 2^d combinations remain, scattered into the
    table through precomputed coalition-compression indices.
    """

    _CHUNK = 256  # leaf rows per gather, bounds the (chunk, 2^n) intermediate

    def __init__(self, model: GbdtModel, players: CoalitionPlayers,
                 background: BackgroundSet):
        if players.n_features != model.n_features:
            raise DimensionMismatch(
                f"players expect {players.n_features} features, model has {model.n_features}"
            )
        if background.rows.shape[1] != model.n_features:
            raise DimensionMismatch("background width does not match the model")
        self.n = players.n
        self.base_score = model.base_score
        self.n_features = model.n_features
        owner = players.player_of_column()
        bg = background.rows
        masks = np.arange(2 ** self.n, dtype=np.uint32)
        index_cache: dict[tuple[int, ...], np.ndarray] = {}
        staged: dict[int, list] = {}
        for tree in model.trees:
            for cons, value in _leaf_paths(tree):
                per_slot: dict[int, list] = {}
                base_ok = np.ones(bg.shape[0], dtype=bool)
                for f, thr, is_left in cons:
                    p = int(owner[f])
                    if p < 0:
                        # unowned columns always take background values
                        base_ok &= (bg[:, f] < thr) == is_left
                    else:
                        per_slot.setdefault(p, []).append((f, thr, is_left))
                slots = tuple(sorted(per_slot))
                d = len(slots)
                absent = base_ok.astype(np.float64)[None, :]
                for slot in slots:
                    ok = np.ones(bg.shape[0], dtype=bool)
                    for f, thr, is_left in per_slot[slot]:
                        ok &= (bg[:, f] < thr) == is_left
                    absent = np.concatenate([absent, absent * ok], axis=0)
                absent_rev = absent.mean(axis=1)[::-1]
                if slots not in index_cache:
                    shifts = np.asarray(slots, dtype=np.uint32)
                    bits = (masks[:, None] >> shifts[None, :]) & np.uint32(1)
                    index_cache[slots] = (bits << np.arange(d, dtype=np.uint32)) \
                        .sum(axis=1).astype(np.int16)
                present = [
                    (f, thr, is_left, pos)
                    for pos, slot in enumerate(slots)
                    for f, thr, is_left in per_slot[slot]
                ]
                staged.setdefault(d, []).append(
                    (value, absent_rev, index_cache[slots], present)
                )
        self._groups: list[_LeafGroup] = []
        for d, entries in sorted(staged.items()):
            cons = [
                (f, thr, is_left, row * d + pos)
                for row, (_, _, _, present) in enumerate(entries)
                for f, thr, is_left, pos in present
            ]
            self._groups.append(_LeafGroup(
                d=d,
                values=np.array([e[0] for e in entries]),
                absent_rev=np.stack([e[1] for e in entries]),
                index=np.stack([e[2] for e in entries]),
                con_feature=np.array([c[0] for c in cons], dtype=np.int64),
                con_threshold=np.array([c[1] for c in cons]),
                con_is_left=np.array([c[2] for c in cons], dtype=bool),
                con_target=np.array([c[3] for c in cons], dtype=np.int64),
            ))

    def table(self, frame_x: np.ndarray) -> np.ndarray:
        """Subset-value table for one frame, f(S) at index bitmask(S)."""
        frame_x = np.asarray(frame_x, dtype=np.float64)
        if len(frame_x) != self.n_features:
            raise DimensionMismatch(
                f"frame has {len(frame_x)} features, model expects {self.n_features}"
            )
        table = np.full(2 ** self.n, self.base_score, dtype=np.float64)
        for grp in self._groups:
            n_leaves = len(grp.values)
            present = np.ones(n_leaves * grp.d, dtype=np.float64)
            if len(grp.con_feature):
                ok = (frame_x[grp.con_feature] < grp.con_threshold) == grp.con_is_left
                present[grp.con_target[~ok]] = 0.0
            present = present.reshape(n_leaves, grp.d)
            combos = np.ones((n_leaves, 1), dtype=np.float64)
            for i in range(grp.d):
                combos = np.concatenate([combos, combos * present[:, i:i + 1]], axis=1)
            coeffs = grp.values[:, None] * combos * grp.absent_rev
            if grp.d == 0:
                table += coeffs[:, 0].sum()
                continue
            for lo in range(0, n_leaves, self._CHUNK):
                chunk = slice(lo, lo + self._CHUNK)
                table += np.take_along_axis(
                    coeffs[chunk], grp.index[chunk].astype(np.int64), axis=1
                ).sum(axis=0)
        return table


# -- frame-level attribution ---------------------------------------------------

def exact_shap_frame(model, frame_x: np.ndarray, players: CoalitionPlayers,
                     background: BackgroundSet, *, t: int = 0,
                     max_players: int = DEFAULT_MAX_PLAYERS,
                     counter: EvalCounter | None = None,
                     engine: MaskedMarginEngine | None = None) -> ShapFrameVector:
    """Exact Shapley values of one frame over all 2^n coalitions.

    The table comes from the factorized engine for tree models, or from the
    literal masked_margin loop when a counter is supplied (instrumented
    contract) or the model is not a GbdtModel. Both routes fill the
    identical table up to float rounding.
    """
    if players.n > max_players:
        raise TooManyPlayers(
            f"{players.n} players exceed the exact cap of {max_players}; use "
            f"tree_shap_frame or sampled_shap_frame"
        )
    if engine is not None and counter is None:
        table = engine.table(frame_x)
    elif counter is None and isinstance(model, GbdtModel):
        table = MaskedMarginEngine(model, players, background).table(frame_x)
    else:
        table = subset_table(
            lambda mask: masked_margin(model, frame_x, mask, players, background, counter),
            players.n,
        )
    phi = shapley_from_table(table, players.n)
    return ShapFrameVector(t=t, phi=phi, f_full=float(table[-1]), f_empty=float(table[0]))


def tree_shap_frame(model: GbdtModel, frame_x: np.ndarray, players: CoalitionPlayers,
                    background: BackgroundSet, *, t: int = 0) -> ShapFrameVector:
    """Fast approximate attribution with no cap on the player count.

    Each leaf is a conjunction game over the features on its path: against
    one background row a path feature is required-present (frame side passes,
    background side fails), required-absent (the reverse), inert (both pass),
    or dead (neither passes). Closed-form conjunction Shapley values are
    attributed per feature, averaged over the background, then summed within
    each player's columns. This is per-feature, not per-player, attribution:
    when one player's columns meet another's along a shared path it deviates
    from exact_shap_frame, so compare via fast_path_deviation when n allows.
    """
    frame_x = np.asarray(frame_x, dtype=np.float64)
    if len(frame_x) != model.n_features or players.n_features != model.n_features:
        raise DimensionMismatch("frame, players, and model widths must agree")
    bg = background.rows
    B = bg.shape[0]
    owner = players.player_of_column()
    all_paths = [path for tree in model.trees for path in _leaf_paths(tree)]
    max_path = max((len(cons) for cons, _ in all_paths), default=1)
    fact = np.array([math.factorial(k) for k in range(max_path + 2)], dtype=np.float64)
    phi_cols = np.zeros(model.n_features, dtype=np.float64)
    for cons, value in all_paths:
        if not cons:
            continue
        per_feature: dict[int, list] = {}
        for f, thr, is_left in cons:
            per_feature.setdefault(f, []).append((thr, is_left))
        feats = np.array(sorted(per_feature), dtype=np.int64)
        ok_x = np.ones(len(feats), dtype=bool)
        ok_b = np.ones((len(feats), B), dtype=bool)
        for row, f in enumerate(feats):
            for thr, is_left in per_feature[f]:
                ok_x[row] &= (frame_x[f] < thr) == is_left
                ok_b[row] &= (bg[:, f] < thr) == is_left
        owned = owner[feats] >= 0
        alive = ok_b[~owned].all(axis=0)
        g_ok_x = ok_x[owned]
        g_ok_b = ok_b[owned]
        g_feats = feats[owned]
        if len(g_feats) == 0:
            continue
        req_present = g_ok_x[:, None] & ~g_ok_b
        req_absent = ~g_ok_x[:, None] & g_ok_b
        dead = ~g_ok_x[:, None] & ~g_ok_b
        alive = alive & ~dead.any(axis=0)
        r = req_present.sum(axis=0)
        q = req_absent.sum(axis=0)
        denom = fact[r + q]
        coef_present = value * fact[np.maximum(r - 1, 0)] * fact[q] / denom
        coef_absent = -value * fact[r] * fact[np.maximum(q - 1, 0)] / denom
        contrib = req_present * coef_present + req_absent * coef_absent
        phi_cols[g_feats] += (contrib * alive).sum(axis=1)
    phi_cols /= B
    phi = np.array([phi_cols[list(cols)].sum() for cols in players.columns])
    f_full = float(model.raw_margin_batch(frame_x[None, :])[0])
    f_empty = float(model.raw_margin_batch(bg).mean())
    return ShapFrameVector(t=t, phi=phi, f_full=f_full, f_empty=f_empty)


def fast_path_deviation(model: GbdtModel, frame_x: np.ndarray, players: CoalitionPlayers,
                        background: BackgroundSet,
                        max_players: int = DEFAULT_MAX_PLAYERS) -> float:
    """Max absolute per-player gap between tree_shap_frame and the exact engine."""
    exact = exact_shap_frame(model, frame_x, players, background, max_players=max_players)
    fast = tree_shap_frame(model, frame_x, players, background)
    return float(np.abs(exact.phi - fast.phi).max())


def sampled_shap_frame(model, frame_x: np.ndarray, players: CoalitionPlayers,
                       background: BackgroundSet, n_permutations: int, seed: int,
                       *, t: int = 0) -> ShapFrameVector:
    """Unbiased Monte-Carlo estimate by averaging marginal gains over permutations."""
    if n_permutations < 1:
        raise DomainError(f"need at least one permutation, got {n_permutations}")
    rng = np.random.default_rng([seed, _PERMUTATION_STREAM])
    n = players.n
    phi = np.zeros(n, dtype=np.float64)
    f_empty = masked_margin(model, frame_x, 0, players, background)
    f_full = masked_margin(model, frame_x, (1 << n) - 1, players, background)
    for _ in range(n_permutations):
        order = rng.permutation(n)
        mask = 0
        prev = f_empty
        for c in order:
            mask |= 1 << int(c)
            cur = f_full if mask == (1 << n) - 1 else \
                masked_margin(model, frame_x, mask, players, background)
            phi[c] += cur - prev
            prev = cur
    phi /= n_permutations
    return ShapFrameVector(t=t, phi=phi, f_full=f_full, f_empty=f_empty)


# -- sequences over PPS frames --------------------------------------------------

def shap_sequence(model, X: np.ndarray, frame_indices, players: CoalitionPlayers,
                  background: BackgroundSet, *, max_players: int = DEFAULT_MAX_PLAYERS,
                  method: str = "auto") -> list[ShapFrameVector]:
    """Per-frame attribution over rows of X (method: auto | exact | tree).

    auto picks exact enumeration when the player count fits under the cap
    and the tree fast path otherwise. When the fast path runs despite the
    exact engine being available, the first frame's deviation is logged.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    frame_indices = list(frame_indices)
    if X.shape[0] == 0:
        raise EmptySequence("no frames to attribute")
    if len(frame_indices) != X.shape[0]:
        raise DimensionMismatch(f"{len(frame_indices)} indices for {X.shape[0]} frames")
    if method not in ("auto", "exact", "tree"):
        raise DomainError(f"unknown attribution method {method!r}")
    use_exact = players.n <= max_players if method == "auto" else method == "exact"
    out = []
    if use_exact:
        engine = MaskedMarginEngine(model, players, background) \
            if isinstance(model, GbdtModel) else None
        for row, t in enumerate(frame_indices):
            out.append(exact_shap_frame(
                model, X[row], players, background,
                t=int(t), max_players=max_players, engine=engine,
            ))
    else:
        if players.n <= max_players and isinstance(model, GbdtModel):
            gap = fast_path_deviation(model, X[0], players, background, max_players)
            log.info("tree fast path deviates from exact by %.3e on frame %s",
                     gap, frame_indices[0])
        for row, t in enumerate(frame_indices):
            out.append(tree_shap_frame(model, X[row], players, background, t=int(t)))
    return out


def mean_importance(seq: list[ShapFrameVector], players: CoalitionPlayers) -> ChannelImportance:
    """Per-player arithmetic mean of phi over the sequence."""
    if not seq:
        raise EmptySequence("cannot average an empty attribution sequence")
    phi = np.mean([v.phi for v in seq], axis=0)
    return ChannelImportance(players=players.players, phi=phi, n_frames=len(seq))
