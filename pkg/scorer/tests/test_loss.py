import math

import pytest
import torch

from foldscorer.loss import NoPositivePairs, supcon_loss


def naive_supcon(z, y, tau):
    """Double-loop evaluation of the loss equation (float arithmetic only)."""
    n = len(z)

    def dot(a, b):
        return sum(x * w for x, w in zip(a, b))

    total = 0.0
    any_anchor = False
    for i in range(n):
        positives = [p for p in range(n) if p != i and y[p] == y[i]]
        if not positives:
            continue
        any_anchor = True
        denom = sum(math.exp(dot(z[i], z[k]) / tau) for k in range(n) if k != i)
        inner = sum(
            math.log(math.exp(dot(z[i], z[p]) / tau) / denom) for p in positives
        )
        total += inner / len(positives)
    if not any_anchor:
        raise NoPositivePairs("no anchors")
    return -total / n


def rand_batch(rng, n):
    z = rng.normal(size=(n, 8))
    z = z / (z ** 2).sum(axis=1, keepdims=True) ** 0.5
    y = rng.integers(0, 3, size=n)
    return z, y


class TestSupConLoss:
    def test_two_class_identical_within(self):
        e1 = [1.0] + [0.0] * 7
        e2 = [0.0, 1.0] + [0.0] * 6
        z = [e1, e1, e2, e2]
        y = [0, 0, 1, 1]
        expected = naive_supcon(z, y, 0.07)
        got = supcon_loss(torch.tensor(z, dtype=torch.float64), torch.tensor(y), 0.07)
        assert float(got) == pytest.approx(expected, abs=1e-9)

    def test_matches_naive_on_random_batches(self):
        import numpy as np

        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(4, 17))
            z, y = rand_batch(rng, n)
            if all((y == label).sum() < 2 for label in set(y.tolist())):
                continue
            expected = naive_supcon(z.tolist(), y.tolist(), 0.07)
            got = supcon_loss(
                torch.tensor(z, dtype=torch.float64), torch.tensor(y), 0.07
            )
            assert float(got) == pytest.approx(expected, abs=1e-5)

    def test_singleton_anchor_excluded_but_counted_in_n(self):
        e1 = [1.0] + [0.0] * 7
        e2 = [0.0, 1.0] + [0.0] * 6
        e3 = [0.0, 0.0, 1.0] + [0.0] * 5
        z = [e1, e1, e2]
        y = [0, 0, 1]
        # Anchor 2 contributes nothing, yet N stays 3.
        expected = naive_supcon(z, y, 0.07)
        got = float(supcon_loss(torch.tensor(z, dtype=torch.float64), torch.tensor(y), 0.07))
        assert got == pytest.approx(expected, abs=1e-9)
        z4 = [e1, e1, e2, e3]
        y4 = [0, 0, 1, 2]
        got4 = float(supcon_loss(torch.tensor(z4, dtype=torch.float64), torch.tensor(y4), 0.07))
        assert got4 == pytest.approx(naive_supcon(z4, y4, 0.07), abs=1e-9)

    def test_no_positive_pairs(self):
        z = torch.eye(3, 8, dtype=torch.float64)
        with pytest.raises(NoPositivePairs):
            supcon_loss(z, torch.tensor([0, 1, 2]), 0.07)

    def test_duplicated_batch_matches_naive(self):
        import numpy as np

        rng = np.random.default_rng(11)
        z, y = rand_batch(rng, 6)
        z2 = np.concatenate([z, z])
        y2 = np.concatenate([y, y])
        expected = naive_supcon(z2.tolist(), y2.tolist(), 0.07)
        got = supcon_loss(torch.tensor(z2, dtype=torch.float64), torch.tensor(y2), 0.07)
        assert float(got) == pytest.approx(expected, abs=1e-5)

    def test_permutation_invariance(self):
        import numpy as np

        rng = np.random.default_rng(23)
        z, y = rand_batch(rng, 10)
        if all((y == label).sum() < 2 for label in set(y.tolist())):
            y[1] = y[0]
        base = float(supcon_loss(torch.tensor(z), torch.tensor(y), 0.07))
        for seed in range(5):
            perm = np.random.default_rng(seed).permutation(len(y))
            shuffled = float(
                supcon_loss(torch.tensor(z[perm]), torch.tensor(y[perm]), 0.07)
            )
            assert shuffled == pytest.approx(base, abs=1e-6)

    def test_bad_arguments(self):
        z = torch.eye(4, 8)
        with pytest.raises(ValueError):
            supcon_loss(z, torch.tensor([0, 0, 1, 1]), tau=0.0)
        with pytest.raises(ValueError):
            supcon_loss(z, torch.tensor([0, 0, 1]))
        with pytest.raises(ValueError):
            supcon_loss(z.flatten(), torch.tensor([0]))
