import numpy as np
import pytest

from embank import EmbeddingTensor


@pytest.fixture
def small_tensor():
    rng = np.random.default_rng(42)
    data = rng.standard_normal((3, 2, 4)).astype(np.float32)
    return EmbeddingTensor(clip_id="clip_a", layer=1, data=data)


def knn_oracle(rows: np.ndarray, query: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Exhaustive reference: every distance, full sort, ties by lower index."""
    dists = [np.sum((rows[i] - query) ** 2) for i in range(rows.shape[0])]
    order = sorted(range(len(dists)), key=lambda i: (dists[i], i))
    return [(i, float(dists[i])) for i in order[:k]]


def auc_oracle(scores, labels) -> float:
    """Pairwise counting: wins + half-credit ties over all pos/neg pairs."""
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def pauc_oracle(scores, labels, p: float) -> float:
    """Standardized partial AUC from an explicitly enumerated ROC polyline."""
    pairs = sorted(zip(scores, labels), key=lambda t: -t[0])
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    vertices = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(pairs):
        j = i
        while j < len(pairs) and pairs[j][0] == pairs[i][0]:
            tp += pairs[j][1]
            fp += 1 - pairs[j][1]
            j += 1
        vertices.append((fp / n_neg, tp / n_pos))
        i = j
    area = 0.0
    for (x0, y0), (x1, y1) in zip(vertices, vertices[1:]):
        if x0 >= p:
            break
        if x1 > p:
            y1 = y0 + (y1 - y0) * (p - x0) / (x1 - x0)
            x1 = p
        area += 0.5 * (y0 + y1) * (x1 - x0)
    min_area = 0.5 * p * p
    max_area = p
    return 0.5 * (1.0 + (area - min_area) / (max_area - min_area))
