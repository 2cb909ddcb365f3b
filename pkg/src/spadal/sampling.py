"""Selection strategies over the unlabeled pool.

DUIS: k-means candidate pool on penultimate features of observed images,
then rank candidates by uncertainty-inconsistency score
UIS = Div_var - Margin, where Margin is the top-two gap of the group-mean
prediction and Div_var the mean KL divergence of member predictions from
that mean. Baselines: entropy, margin, coreset (k-center greedy), BADGE
(k-means++ seeding over gradient embeddings), random.

All selectors are deterministic given their seed; every tie breaks toward
the lowest group id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import classifier
from .classifier import Model
from .dataset import SampleGroup

STRATEGIES = ("duis", "entropy", "margin", "coreset", "badge", "random")

PROB_FLOOR = 1e-12


@dataclass
class SelectionRequest:
    model: Model | None
    unlabeled: dict[str, SampleGroup]
    n_batch: int
    n_cand: int = 0
    strategy: str = "duis"
    seed: int = 0
    labeled: dict[str, SampleGroup] = field(default_factory=dict)

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not 0 < self.n_batch <= len(self.unlabeled):
            raise ValueError("need 0 < n_batch <= |unlabeled|")
        if self.strategy == "duis" and not self.n_batch <= self.n_cand <= len(self.unlabeled):
            raise ValueError("need n_batch <= n_cand <= |unlabeled| for duis")


@dataclass(frozen=True)
class ScoredGroup:
    id: str
    margin: float
    div_var: float

    @property
    def uis(self) -> float:
        return self.div_var - self.margin


def margin_score(p_bar: np.ndarray) -> float:
    """Gap between the two highest probabilities of the mean prediction."""
    p = np.asarray(p_bar, dtype=np.float64)
    if p.size < 2:
        raise ValueError("margin needs at least two classes")
    top2 = np.partition(p, -2)[-2:]
    return float(top2[1] - top2[0])


def entropy_score(p: np.ndarray) -> float:
    p = np.maximum(np.asarray(p, dtype=np.float64), PROB_FLOOR)
    return float(-np.sum(p * np.log(p)))


def divergence_score(predictions, p_bar: np.ndarray) -> float:
    """Mean KL divergence of member predictions from the group mean.

    Uses the convention 0*log(0/q) = 0; probabilities are floored at 1e-12
    before logs for numerical safety.
    """
    preds = np.asarray(predictions, dtype=np.float64)
    p_bar = np.asarray(p_bar, dtype=np.float64)
    q = np.maximum(p_bar, PROB_FLOOR)
    total = 0.0
    for p in preds:
        mask = p > 0
        pm = np.maximum(p[mask], PROB_FLOOR)
        total += float(np.sum(p[mask] * (np.log(pm) - np.log(q[mask]))))
    return total / len(preds)


def uis_score(div_var: float, margin: float) -> float:
    return div_var - margin


def top_ids(scores: dict[str, float], n: int, descending: bool = True) -> list[str]:
    """Rank ids by score with the lowest-id tie-break."""
    sign = -1.0 if descending else 1.0
    order = sorted(scores, key=lambda i: (sign * scores[i], i))
    return order[:n]


def duis_top(scored: list[ScoredGroup], n_batch: int) -> list[str]:
    """Top-UIS ids; ties break by higher div_var, then lowest id."""
    ranked = sorted(scored, key=lambda s: (-s.uis, -s.div_var, s.id))
    return [s.id for s in ranked[:n_batch]]


def score_group(model: Model, group: SampleGroup) -> ScoredGroup:
    preds = classifier.predict_proba_batch(model, group.images)
    p_bar = preds.mean(axis=0)
    return ScoredGroup(id=group.id, margin=margin_score(p_bar),
                       div_var=divergence_score(preds, p_bar))


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Standard k-means++ D^2 seeding; returns point indices of the centers."""
    n = len(points)
    centers = [int(rng.integers(n))]
    d2 = np.sum((points - points[centers[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            remaining = [i for i in range(n) if i not in centers]
            centers.append(remaining[0])
            d2 = np.minimum(d2, np.sum((points - points[centers[-1]]) ** 2, axis=1))
            continue
        idx = int(rng.choice(n, p=d2 / total))
        centers.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return np.array(centers)


def candidate_pool(feature_map: dict[str, np.ndarray], n_cand: int, seed: int) -> list[str]:
    """k-means (k = n_cand) over features; one representative per cluster.

    Lloyd iterations run until the max centroid shift is below 1e-6 or 100
    iterations. Each cluster contributes the id nearest its centroid (ties
    toward the lowest id); dead clusters are backfilled with the globally
    nearest unchosen id.
    """
    ids = sorted(feature_map)
    if n_cand > len(ids):
        raise ValueError("n_cand exceeds pool size")
    pts = np.stack([feature_map[i] for i in ids]).astype(np.float64)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))

    centers = pts[_kmeans_pp_init(pts, n_cand, rng)].copy()
    for _ in range(100):
        d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
        assign = d.argmin(axis=1)
        new_centers = centers.copy()
        for c in range(n_cand):
            members = pts[assign == c]
            if len(members):
                new_centers[c] = members.mean(axis=0)
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < 1e-6:
            break

    d = np.linalg.norm(pts[:, None, :] - centers[None, :, :], axis=2)
    assign = d.argmin(axis=1)
    chosen: list[str] = []
    chosen_idx: set[int] = set()
    dead: list[int] = []
    for c in range(n_cand):
        members = np.nonzero(assign == c)[0]
        if not len(members):
            dead.append(c)
            continue
        # nearest to centroid; equal distances resolve to the lowest id since
        # ids are scanned in sorted order
        best = min(members, key=lambda i: (d[i, c], ids[i]))
        chosen.append(ids[best])
        chosen_idx.add(int(best))
    for c in dead:
        pool = [i for i in range(len(ids)) if i not in chosen_idx]
        best = min(pool, key=lambda i: (d[i, c], ids[i]))
        chosen.append(ids[best])
        chosen_idx.add(int(best))
    return sorted(chosen)


def observed_features(model: Model, groups: dict[str, SampleGroup]) -> dict[str, np.ndarray]:
    ids = sorted(groups)
    feats = classifier.features_batch(model, [groups[i].observed for i in ids])
    return dict(zip(ids, feats))


def select_duis(req: SelectionRequest) -> list[str]:
    """Candidate pool by feature clustering, then top-UIS batch."""
    feats = observed_features(req.model, req.unlabeled)
    cand_ids = candidate_pool(feats, req.n_cand, req.seed)
    scored = [score_group(req.model, req.unlabeled[i]) for i in cand_ids]
    return duis_top(scored, req.n_batch)


def select_entropy(req: SelectionRequest) -> list[str]:
    ids = sorted(req.unlabeled)
    probs = classifier.predict_proba_batch(req.model, [req.unlabeled[i].observed for i in ids])
    scores = {i: entropy_score(p) for i, p in zip(ids, probs)}
    return top_ids(scores, req.n_batch, descending=True)


def select_margin(req: SelectionRequest) -> list[str]:
    ids = sorted(req.unlabeled)
    probs = classifier.predict_proba_batch(req.model, [req.unlabeled[i].observed for i in ids])
    scores = {i: margin_score(p) for i, p in zip(ids, probs)}
    return top_ids(scores, req.n_batch, descending=False)


def k_center_greedy(unlabeled_feats: dict[str, np.ndarray],
                    labeled_feats: list[np.ndarray], n_batch: int) -> list[str]:
    """Pick ids maximizing the min distance to labeled + already-picked."""
    ids = sorted(unlabeled_feats)
    pts = np.stack([unlabeled_feats[i] for i in ids])
    if labeled_feats:
        ref = np.stack(labeled_feats)
        min_d = np.min(np.linalg.norm(pts[:, None, :] - ref[None, :, :], axis=2), axis=1)
    else:
        min_d = np.full(len(ids), np.inf)
    picked: list[str] = []
    picked_mask = np.zeros(len(ids), dtype=bool)
    for _ in range(n_batch):
        best = min((i for i in range(len(ids)) if not picked_mask[i]),
                   key=lambda i: (-min_d[i], ids[i]))
        picked.append(ids[best])
        picked_mask[best] = True
        d_new = np.linalg.norm(pts - pts[best], axis=1)
        min_d = np.minimum(min_d, d_new)
    return picked


def select_coreset(req: SelectionRequest) -> list[str]:
    unl = observed_features(req.model, req.unlabeled)
    lab = list(observed_features(req.model, req.labeled).values()) if req.labeled else []
    return k_center_greedy(unl, lab, req.n_batch)


def badge_seed_ids(embeddings: dict[str, np.ndarray], k: int, seed: int) -> list[str]:
    """k-means++ seeding over gradient embeddings.

    First center is determinized to the max-norm embedding (ties toward the
    lowest id); later centers follow seeded D^2 sampling among unchosen ids.
    """
    ids = sorted(embeddings)
    pts = np.stack([embeddings[i] for i in ids]).astype(np.float64)
    norms = np.linalg.norm(pts, axis=1)
    first = min(range(len(ids)), key=lambda i: (-norms[i], ids[i]))
    centers = [first]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(13,)))
    d2 = np.sum((pts - pts[first]) ** 2, axis=1)
    while len(centers) < k:
        avail = np.ones(len(ids), dtype=bool)
        avail[centers] = False
        w = np.where(avail, d2, 0.0)
        total = w.sum()
        if total <= 0:
            nxt = min(np.nonzero(avail)[0], key=lambda i: ids[i])
        else:
            nxt = int(rng.choice(len(ids), p=w / total))
        centers.append(int(nxt))
        d2 = np.minimum(d2, np.sum((pts - pts[nxt]) ** 2, axis=1))
    return [ids[i] for i in centers]


def select_badge(req: SelectionRequest) -> list[str]:
    emb = {gid: classifier.grad_embedding(req.model, g.observed)
           for gid, g in req.unlabeled.items()}
    return badge_seed_ids(emb, req.n_batch, req.seed)


def select_random(req: SelectionRequest) -> list[str]:
    ids = sorted(req.unlabeled)
    rng = np.random.default_rng(np.random.SeedSequence(req.seed, spawn_key=(17,)))
    pick = rng.choice(len(ids), size=req.n_batch, replace=False)
    return [ids[i] for i in pick]


_SELECTORS = {
    "duis": select_duis,
    "entropy": select_entropy,
    "margin": select_margin,
    "coreset": select_coreset,
    "badge": select_badge,
    "random": select_random,
}


def select(req: SelectionRequest) -> list[str]:
    chosen = _SELECTORS[req.strategy](req)
    assert len(chosen) == req.n_batch and len(set(chosen)) == req.n_batch
    assert all(c in req.unlabeled for c in chosen)
    return chosen


def scores_to_csv(scored: list[ScoredGroup]) -> str:
    lines = ["id,margin,div_var,uis"]
    for s in scored:
        lines.append(f"{s.id},{s.margin:.12g},{s.div_var:.12g},{s.uis:.12g}")
    return "\n".join(lines) + "\n"
