"""Sentence-vector export with an exact 2-D PCA projection per component.

Principal axes are the eigenvectors of the population covariance (divided by N), sorted by descending
eigenvalue. Each axis is oriented so that its largest-magnitude loading is positive (first such
coordinate on ties), which makes the projection independent of the dataset order.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from tqdm import tqdm

from codemix.common.datasets.factory import TweetDataset
from codemix.common.models.modeling_ensemble import CodeMixEnsemble
from codemix.common.utils.io_utils import atomic_write


@dataclass(frozen=True)
class PcaProjection:
    mean: np.ndarray  # (d,)
    components: np.ndarray  # (k, d), rows are principal axes
    eigenvalues: np.ndarray  # (d,), descending
    projections: np.ndarray  # (N, k)

    @property
    def explained_variance(self) -> np.ndarray:
        return self.eigenvalues[: self.components.shape[0]]


def pca(vectors, n_components: int = 2) -> PcaProjection:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError(f"PCA needs a non-empty (N, d) array. Got shape {x.shape}.")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]

    k = min(n_components, x.shape[1])
    components = eigenvectors[:, :k].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    projections = centered @ components.T
    if k < n_components:
        projections = np.hstack([projections, np.zeros((x.shape[0], n_components - k))])
    if not np.any(eigenvalues > 0):
        logging.warning("Sentence vectors have zero variance; all projected points coincide.")
    return PcaProjection(mean, components, eigenvalues, projections)


def collect_sentence_vectors(model: CodeMixEnsemble, dataset: TweetDataset) -> dict[str, np.ndarray]:
    """CNN pooled vectors and attention vectors h (both taken before the fully connected layers)."""
    cnn, attention = [], []
    for item in tqdm(dataset, desc="Sentence vectors", leave=False, disable=len(dataset) < 1000):
        out = model.predict(item.sequence.ids, item.sequence.n)
        cnn.append(out.cnn.pooled)
        attention.append(out.attention.h)
    return {"cnn": np.stack(cnn), "attention": np.stack(attention)}


def export_vectors(model: CodeMixEnsemble, dataset: TweetDataset, path: str | Path) -> dict[str, PcaProjection]:
    """Write `uid,label,component,dim0..dimN,pc1,pc2` rows (cnn row then attention row per tweet).

    The header is as wide as the larger sentence vector; the shorter one leaves its surplus cells empty.
    """
    if len(dataset) == 0:
        raise ValueError("Cannot export the sentence vectors of an empty dataset.")
    vectors = collect_sentence_vectors(model, dataset)
    projections = {name: pca(v) for name, v in vectors.items()}
    width = max(v.shape[1] for v in vectors.values())

    with atomic_write(path) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["uid", "label", "component", *[f"dim{i}" for i in range(width)], "pc1", "pc2"])
        for i, item in enumerate(dataset):
            label = "" if item.label is None else item.label.label
            for name in ("cnn", "attention"):
                vector = [repr(float(v)) for v in vectors[name][i]]
                vector += [""] * (width - len(vector))
                pcs = [repr(float(v)) for v in projections[name].projections[i]]
                writer.writerow([item.uid, label, name, *vector, *pcs])
    for name, projection in projections.items():
        ev = projection.explained_variance
        logging.info(f"{name}: explained variance pc1={ev[0]:.4g}" + (f" pc2={ev[1]:.4g}" if len(ev) > 1 else ""))
    return projections
