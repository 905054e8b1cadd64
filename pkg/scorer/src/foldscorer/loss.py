"""Supervised contrastive loss over L2-normalized embeddings.

For a batch of N embeddings z with labels y and temperature tau:

    L = -(1/N) * sum over anchors i with at least one positive of
        (1/|P(i)|) * sum_{p in P(i)} log( exp(z_i.z_p / tau)
                                          / sum_{k != i} exp(z_i.z_k / tau) )

P(i) is the set of same-label samples excluding i itself. Anchors without a
positive are skipped by the sum but still counted in N.
"""

from __future__ import annotations

import torch

DEFAULT_TAU = 0.07


class NoPositivePairs(Exception):
    """Every anchor in the batch is the sole sample of its class."""


def supcon_loss(
    embeddings: torch.Tensor, labels: torch.Tensor, tau: float = DEFAULT_TAU
) -> torch.Tensor:
    if embeddings.ndim != 2:
        raise ValueError("embeddings must be a (N, D) matrix")
    if tau <= 0:
        raise ValueError("temperature must be positive")
    n = embeddings.shape[0]
    labels = labels.reshape(-1)
    if labels.shape[0] != n:
        raise ValueError("labels length must match the batch")

    sim = embeddings @ embeddings.T / tau
    eye = torch.eye(n, dtype=torch.bool, device=embeddings.device)
    positives = labels.unsqueeze(0) == labels.unsqueeze(1)
    positives = positives & ~eye

    pos_counts = positives.sum(dim=1)
    anchors = pos_counts > 0
    if not bool(anchors.any()):
        raise NoPositivePairs("no anchor has an in-batch positive")

    # log softmax over k != i, numerically stabilized.
    sim_masked = sim.masked_fill(eye, float("-inf"))
    log_denom = torch.logsumexp(sim_masked, dim=1, keepdim=True)
    log_prob = sim - log_denom

    per_anchor = torch.where(
        anchors,
        -(log_prob * positives).sum(dim=1) / pos_counts.clamp(min=1),
        torch.zeros_like(pos_counts, dtype=log_prob.dtype),
    )
    return per_anchor.sum() / n
