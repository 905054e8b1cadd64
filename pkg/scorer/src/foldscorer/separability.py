"""Class-separability report: mean intra/inter-class cosine similarity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DegenerateDataset


@dataclass(frozen=True)
class SeparabilityReport:
    mu_intra: float
    mu_inter: float
    epoch: int | None = None

    @property
    def delta(self) -> float:
        return self.mu_intra - self.mu_inter


def separability(
    embeddings: np.ndarray, labels, epoch: int | None = None
) -> SeparabilityReport:
    """Full pairwise cosine matrix, partitioned by label; self-pairs excluded."""
    z = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels)
    if z.ndim != 2 or z.shape[0] != y.shape[0]:
        raise ValueError("embeddings and labels shapes disagree")
    if len(np.unique(y)) < 2:
        raise DegenerateDataset("need at least 2 classes")
    norms = np.linalg.norm(z, axis=1, keepdims=True)
    z = z / np.clip(norms, 1e-12, None)
    cos = z @ z.T
    same = y[:, None] == y[None, :]
    off_diag = ~np.eye(len(y), dtype=bool)
    intra_mask = same & off_diag
    inter_mask = ~same
    if not intra_mask.any():
        raise DegenerateDataset("no class has two samples")
    mu_intra = float(cos[intra_mask].mean())
    mu_inter = float(cos[inter_mask].mean())
    return SeparabilityReport(mu_intra=mu_intra, mu_inter=mu_inter, epoch=epoch)
