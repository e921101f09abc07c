"""Point-based benchmark annotations and zero-shot segmentation scoring.

Annotations are sparse labeled points grouped by material, with declared
partial-similarity relations between groups. Predictions are scored by the
triplet metric (fraction of anchor/pair orderings that agree with the ground
truth; only orderings matter) and by the optimal-threshold mean IOU against
binary masks.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from matscene import imgio
from matscene.errors import ParameterError
from matscene.seeding import derive_seed, rng_for

SIM_IDENTICAL = 2
SIM_PARTIAL = 1
SIM_DISSIMILAR = 0


@dataclass
class AnnotatedPoint:
    x: int
    y: int
    group: str


@dataclass
class PointAnnotation:
    """Benchmark points for one image plus group-level similarity relations."""

    image_id: str
    width: int
    height: int
    points: list[AnnotatedPoint]
    groups: list[str]
    similar_pairs: set[frozenset] = field(default_factory=set)

    def validate(self) -> None:
        known = set(self.groups)
        for i, p in enumerate(self.points):
            if p.group not in known:
                raise ParameterError(f"{self.image_id}: point {i} has unknown group {p.group!r}")
            if not (0 <= p.x < self.width and 0 <= p.y < self.height):
                raise ParameterError(
                    f"{self.image_id}: point {i} at ({p.x}, {p.y}) outside {self.width}x{self.height}"
                )
        for pair in self.similar_pairs:
            if len(pair) != 2:
                raise ParameterError(f"{self.image_id}: similar pair {set(pair)} is not two distinct groups")
            if not pair <= known:
                raise ParameterError(f"{self.image_id}: similar pair {set(pair)} references unknown groups")


def gt_similarity(ann: PointAnnotation, p: int, q: int) -> int:
    """Ordinal ground-truth similarity between two annotated points:
    2 identical group, 1 declared partially similar groups, 0 otherwise."""
    n = len(ann.points)
    if not (0 <= p < n and 0 <= q < n):
        raise ParameterError(f"point index out of range: {p}, {q} (have {n})")
    ga, gb = ann.points[p].group, ann.points[q].group
    if ga == gb:
        return SIM_IDENTICAL
    if frozenset((ga, gb)) in ann.similar_pairs:
        return SIM_PARTIAL
    return SIM_DISSIMILAR


def gt_level_matrix(ann: PointAnnotation) -> np.ndarray:
    groups = [p.group for p in ann.points]
    n = len(groups)
    levels = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if groups[i] == groups[j]:
                levels[i, j] = SIM_IDENTICAL
            elif frozenset((groups[i], groups[j])) in ann.similar_pairs:
                levels[i, j] = SIM_PARTIAL
    return levels


@dataclass
class SimilarityPrediction:
    """Predicted similarities between annotated points.

    Either a full (n, n) matrix, or one similarity plane per annotated point
    (the plane value at another point's pixel is the pair similarity). Missing
    pairs are NaN.
    """

    matrix: np.ndarray | None = None
    planes: list[np.ndarray] | None = None

    def pair_matrix(self, ann: PointAnnotation) -> np.ndarray:
        n = len(ann.points)
        if self.matrix is not None:
            if self.matrix.shape != (n, n):
                raise ParameterError(
                    f"prediction matrix is {self.matrix.shape}, annotation has {n} points"
                )
            return np.asarray(self.matrix, dtype=np.float64)
        if self.planes is None or len(self.planes) != n:
            raise ParameterError("prediction must supply a matrix or one plane per point")
        out = np.empty((n, n), dtype=np.float64)
        for i, plane in enumerate(self.planes):
            for j, p in enumerate(ann.points):
                out[i, j] = plane[p.y, p.x]
        return out


@dataclass
class TripletScore:
    per_group: dict[str, float]
    overall: float
    soft_only: float
    n_triplets: int
    n_soft_triplets: int

    def to_json_dict(self) -> dict:
        return {
            "per_group": {g: round(v, 6) for g, v in sorted(self.per_group.items())},
            "overall": round(self.overall, 6),
            "soft_only": round(self.soft_only, 6),
            "n_triplets": self.n_triplets,
            "n_soft_triplets": self.n_soft_triplets,
        }


def triplet_score(
    ann: PointAnnotation,
    pred: SimilarityPrediction | np.ndarray,
    soft_mode: str = "any_point",
) -> TripletScore:
    """Order-agreement score over all (anchor, pair) triplets.

    Triplets whose two candidates are equally similar to the anchor in the
    ground truth are ignored; predicted ties earn half credit. Scores are
    averaged per anchor group first, then across groups. soft_only restricts
    to triplets touching a partial-similarity relation: by default any point
    in a partially-similar group qualifies, "anchor_relation" requires the
    anchor's relation to a candidate to be the partial one.
    """
    if soft_mode not in ("any_point", "anchor_relation"):
        raise ParameterError(f"unknown soft_mode {soft_mode!r}")
    if isinstance(pred, np.ndarray):
        pred = SimilarityPrediction(matrix=pred)
    matrix = pred.pair_matrix(ann)
    n = len(ann.points)
    if n < 3:
        return TripletScore(per_group={}, overall=float("nan"), soft_only=float("nan"),
                            n_triplets=0, n_soft_triplets=0)

    missing = np.argwhere(np.isnan(matrix) & ~np.eye(n, dtype=bool))
    if missing.size:
        i, j = missing[0]
        raise ParameterError(f"missing prediction for point pair ({i}, {j})")

    levels = gt_level_matrix(ann)
    groups = [p.group for p in ann.points]
    soft_groups = {g for pair in ann.similar_pairs for g in pair}
    point_soft = np.array([g in soft_groups for g in groups])

    credit: dict[str, float] = {g: 0.0 for g in ann.groups}
    count: dict[str, int] = {g: 0 for g in ann.groups}
    soft_credit: dict[str, float] = {g: 0.0 for g in ann.groups}
    soft_count: dict[str, int] = {g: 0 for g in ann.groups}

    iu, iv = np.triu_indices(n, k=1)
    for a in range(n):
        keep = (iu != a) & (iv != a)
        u, v = iu[keep], iv[keep]
        gt_diff = levels[a, u] - levels[a, v]
        informative = gt_diff != 0
        u, v, gt_diff = u[informative], v[informative], gt_diff[informative]
        if u.size == 0:
            continue
        pr_diff = matrix[a, u] - matrix[a, v]
        score = np.where(pr_diff == 0, 0.5, (np.sign(pr_diff) == np.sign(gt_diff)).astype(np.float64))

        g = groups[a]
        credit[g] += float(score.sum())
        count[g] += int(score.size)

        if soft_mode == "any_point":
            soft = point_soft[a] | point_soft[u] | point_soft[v]
        else:
            soft = (levels[a, u] == SIM_PARTIAL) | (levels[a, v] == SIM_PARTIAL)
        if soft.any():
            soft_credit[g] += float(score[soft].sum())
            soft_count[g] += int(soft.sum())

    per_group = {g: credit[g] / count[g] for g in ann.groups if count[g] > 0}
    soft_per_group = {g: soft_credit[g] / soft_count[g] for g in ann.groups if soft_count[g] > 0}
    overall = float(np.mean(list(per_group.values()))) if per_group else float("nan")
    soft_only = float(np.mean(list(soft_per_group.values()))) if soft_per_group else float("nan")
    return TripletScore(
        per_group=per_group,
        overall=overall,
        soft_only=soft_only,
        n_triplets=sum(count.values()),
        n_soft_triplets=sum(soft_count.values()),
    )


@dataclass
class IouResult:
    best_iou: float
    best_threshold: float


def optimal_threshold_iou(sim_map: np.ndarray, gt_mask: np.ndarray) -> IouResult:
    """Maximum IOU of (sim_map >= t) against the mask over all thresholds t.

    Candidate thresholds are the observed values plus +inf for the empty
    prediction; empty-vs-empty counts as IOU 1, empty-vs-nonempty as 0. Ties
    resolve to the lowest threshold.
    """
    sim_map = np.asarray(sim_map, dtype=np.float64)
    gt_mask = np.asarray(gt_mask).astype(bool)
    if sim_map.shape != gt_mask.shape:
        raise ParameterError(f"shape mismatch: sim {sim_map.shape} vs mask {gt_mask.shape}")

    flat = sim_map.ravel()
    hits = gt_mask.ravel()
    total_gt = int(hits.sum())

    best_iou = 1.0 if total_gt == 0 else 0.0  # empty prediction at threshold +inf
    best_threshold = float("inf")

    order = np.argsort(-flat, kind="stable")
    svals = flat[order]
    cum_hits = np.cumsum(hits[order])
    # last index of each equal-value block: predictions include whole blocks
    block_end = np.nonzero(np.append(svals[:-1] != svals[1:], True))[0]
    inter = cum_hits[block_end].astype(np.float64)
    pred_n = (block_end + 1).astype(np.float64)
    union = pred_n + total_gt - inter
    iou = np.where(union > 0, inter / union, 1.0)

    for idx in range(iou.size):  # descending thresholds; >= keeps the lowest on ties
        if iou[idx] >= best_iou:
            best_iou = float(iou[idx])
            best_threshold = float(svals[block_end[idx]])
    return IouResult(best_iou=best_iou, best_threshold=best_threshold)


@dataclass
class GtMaskSet:
    """Binary ground-truth masks per material segment of one image."""

    image_id: str
    masks: dict[str, np.ndarray]


@dataclass
class BenchmarkIouResult:
    mean_iou: float
    per_segment: dict[str, float]
    n_evaluations: int
    skipped: list[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "mean_iou": round(self.mean_iou, 6),
            "per_segment": {k: round(v, 6) for k, v in sorted(self.per_segment.items())},
            "n_evaluations": self.n_evaluations,
            "skipped": list(self.skipped),
        }


def sample_query_points(
    mask_set: GtMaskSet, points_per_segment: int, seed: int
) -> tuple[dict[str, list[tuple[int, int]]], list[str]]:
    """Seeded uniform query points, (x, y), inside each segment mask.

    The draw depends only on (seed, image id, segment name), so an external
    predictor given these points will be queried at exactly the same places.
    Returns the points per segment and the names of empty segments.
    """
    points: dict[str, list[tuple[int, int]]] = {}
    empty: list[str] = []
    for name in sorted(mask_set.masks):
        mask = np.asarray(mask_set.masks[name]).astype(bool)
        coords = np.argwhere(mask)
        if coords.size == 0:
            empty.append(name)
            continue
        rng = rng_for(derive_seed(seed, f"{mask_set.image_id}/{name}"))
        picks = coords[rng.integers(0, len(coords), size=points_per_segment)]
        points[name] = [(int(x), int(y)) for y, x in picks]
    return points, empty


def benchmark_iou(
    samples: list[tuple[object, GtMaskSet]],
    points_per_segment: int,
    seed: int,
) -> BenchmarkIouResult:
    """Mean optimal-threshold IOU over seeded query points in every segment.

    Query points are drawn uniformly inside each ground-truth segment; the
    dense predictor (a callable (x, y) -> plane, or a mapping keyed by (x, y))
    maps a query point to a similarity plane. Empty segments are skipped with
    a warning.
    """
    scores: list[float] = []
    per_segment: dict[str, list[float]] = {}
    skipped: list[str] = []
    for predictor, mask_set in samples:
        points, empty = sample_query_points(mask_set, points_per_segment, seed)
        for name in empty:
            key = f"{mask_set.image_id}/{name}"
            warnings.warn(f"empty segment skipped: {key}")
            skipped.append(key)
        for name, queries in points.items():
            key = f"{mask_set.image_id}/{name}"
            mask = np.asarray(mask_set.masks[name]).astype(bool)
            seg_scores = []
            for x, y in queries:
                plane = _query_plane(predictor, x, y)
                if plane.shape != mask.shape:
                    raise ParameterError(
                        f"{key}: plane shape {plane.shape} != mask shape {mask.shape}"
                    )
                seg_scores.append(optimal_threshold_iou(plane, mask).best_iou)
            per_segment[key] = seg_scores
            scores.extend(seg_scores)
    return BenchmarkIouResult(
        mean_iou=float(np.mean(scores)) if scores else float("nan"),
        per_segment={k: float(np.mean(v)) for k, v in per_segment.items()},
        n_evaluations=len(scores),
        skipped=skipped,
    )


def _query_plane(predictor, x: int, y: int) -> np.ndarray:
    if callable(predictor):
        return np.asarray(predictor(x, y), dtype=np.float64)
    try:
        return np.asarray(predictor[(x, y)], dtype=np.float64)
    except KeyError:
        raise ParameterError(f"no dense prediction supplied for query point ({x}, {y})") from None


# --- file formats -----------------------------------------------------------

def annotation_to_dict(ann: PointAnnotation) -> dict:
    return {
        "schema_version": 1,
        "image_id": ann.image_id,
        "width": ann.width,
        "height": ann.height,
        "points": [{"x": p.x, "y": p.y, "group": p.group} for p in ann.points],
        "groups": list(ann.groups),
        "similar_pairs": sorted(sorted(pair) for pair in ann.similar_pairs),
    }


def annotation_from_dict(data: dict, source: str = "<memory>") -> PointAnnotation:
    try:
        ann = PointAnnotation(
            image_id=data["image_id"],
            width=int(data["width"]),
            height=int(data["height"]),
            points=[AnnotatedPoint(x=int(p["x"]), y=int(p["y"]), group=str(p["group"]))
                    for p in data["points"]],
            groups=[str(g) for g in data["groups"]],
            similar_pairs={frozenset((str(a), str(b))) for a, b in data["similar_pairs"]},
        )
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"{source}: malformed annotation, missing {exc}") from exc
    ann.validate()
    return ann


def load_annotation(path: str | Path) -> PointAnnotation:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return annotation_from_dict(data, source=str(path))


def save_annotation(ann: PointAnnotation, path: str | Path) -> None:
    imgio.atomic_write_json(path, annotation_to_dict(ann))


def load_sparse_csv(path: str | Path, n_points: int) -> SimilarityPrediction:
    """CSV columns point_i, point_j, similarity; unseen pairs stay NaN,
    the diagonal defaults to the maximum seen similarity."""
    matrix = np.full((n_points, n_points), np.nan)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParameterError(f"{path}: empty prediction CSV")
        rows = [header] if _looks_like_data(header) else []
        rows.extend(reader)
    for lineno, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            i, j, value = int(row[0]), int(row[1]), float(row[2])
        except (ValueError, IndexError) as exc:
            raise ParameterError(f"{path}: bad row {lineno}: {row}") from exc
        if not (0 <= i < n_points and 0 <= j < n_points):
            raise ParameterError(f"{path}: row {lineno} indexes outside 0..{n_points - 1}")
        matrix[i, j] = value
        matrix[j, i] = value
    if np.isnan(matrix.diagonal()).all():
        finite = matrix[~np.isnan(matrix)]
        fill = float(finite.max()) if finite.size else 1.0
        np.fill_diagonal(matrix, fill)
    return SimilarityPrediction(matrix=matrix)


def _looks_like_data(row: list[str]) -> bool:
    try:
        int(row[0])
        return True
    except (ValueError, IndexError):
        return False


def save_sparse_csv(matrix: np.ndarray, path: str | Path) -> None:
    lines = ["point_i,point_j,similarity"]
    n = matrix.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            lines.append(f"{i},{j},{float(matrix[i, j])!r}")
    imgio.atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def load_dense_prediction(index_path: str | Path) -> dict[tuple[int, int], np.ndarray]:
    """JSON index {planes: [{point: [x, y], file: ...}]}; planes are .npy
    float arrays or 16-bit grayscale PNGs next to the index."""
    index_path = Path(index_path)
    data = imgio.read_json(index_path)
    planes: dict[tuple[int, int], np.ndarray] = {}
    for entry in data["planes"]:
        x, y = int(entry["point"][0]), int(entry["point"][1])
        file = index_path.parent / entry["file"]
        if file.suffix == ".npy":
            planes[(x, y)] = np.load(file)
        else:
            planes[(x, y)] = imgio.load_png16_gray(file)
    return planes
