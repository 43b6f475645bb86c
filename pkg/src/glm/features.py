"""
Feature Maps

Quadratic interaction features over (context, action) pairs:

    [visible context bits, visible action bits,
     row-major products x_i * a_j over visible bits,
     (oracle only) products a_i * a_j for i < j over action bits,
     bias]

The learner map is (x, a, x * a^T, 1). The oracle map used by synthetic
environments adds the action-action products, which makes it strictly richer
than anything a learner can fit.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Tuple

import numpy as np

from src.env.space import ACTION_BITS, CONTEXT_BITS, Action, Context, bit_table


@dataclass(frozen=True)
class FeatureMap:
    """
    Selects which context and action bits a model sees.

    Attributes:
        mask (Tuple[bool, ...]): n_context_bits + n_action_bits visibility flags,
            context bits first
        n_context_bits (int): Number of context bits in the space
        action_pairs (bool): Append a_i * a_j products (oracle map only)
    """

    mask: Tuple[bool, ...]
    n_context_bits: int = CONTEXT_BITS
    action_pairs: bool = False

    def __post_init__(self):
        if self.n_context_bits < 1 or len(self.mask) <= self.n_context_bits:
            raise ValueError(
                f"Mask of length {len(self.mask)} cannot cover {self.n_context_bits} "
                "context bits and at least one action bit"
            )
        object.__setattr__(self, "mask", tuple(bool(m) for m in self.mask))

    @classmethod
    def full(cls, n_context_bits: int = CONTEXT_BITS, n_action_bits: int = ACTION_BITS) -> "FeatureMap":
        """Map with every bit visible."""
        return cls((True,) * (n_context_bits + n_action_bits), n_context_bits)

    @classmethod
    def oracle(cls, n_context_bits: int = CONTEXT_BITS, n_action_bits: int = ACTION_BITS) -> "FeatureMap":
        """The richer map that defines synthetic reward oracles."""
        return cls((True,) * (n_context_bits + n_action_bits), n_context_bits, action_pairs=True)

    @classmethod
    def hiding_context_bits(
        cls,
        hidden: Iterable[int],
        n_context_bits: int = CONTEXT_BITS,
        n_action_bits: int = ACTION_BITS,
    ) -> "FeatureMap":
        """Full map except for the listed context bits."""
        hidden = set(hidden)
        mask = [i not in hidden for i in range(n_context_bits)] + [True] * n_action_bits
        return cls(tuple(mask), n_context_bits)

    @property
    def n_action_bits(self) -> int:
        return len(self.mask) - self.n_context_bits

    @property
    def n_contexts(self) -> int:
        return 2 ** self.n_context_bits

    @property
    def n_actions(self) -> int:
        return 2 ** self.n_action_bits

    @property
    def visible_context(self) -> Tuple[int, ...]:
        return tuple(i for i in range(self.n_context_bits) if self.mask[i])

    @property
    def visible_action(self) -> Tuple[int, ...]:
        return tuple(j for j in range(self.n_action_bits) if self.mask[self.n_context_bits + j])

    @property
    def n_action_pairs(self) -> int:
        k = self.n_action_bits
        return k * (k - 1) // 2 if self.action_pairs else 0

    @property
    def dimension(self) -> int:
        nx, na = len(self.visible_context), len(self.visible_action)
        return nx + na + nx * na + self.n_action_pairs + 1

    @property
    def bias_index(self) -> int:
        return self.dimension - 1

    def transform(self, x_bits: np.ndarray, a_bits: np.ndarray) -> np.ndarray:
        """
        Featurize aligned rows of context and action bits.

        Args:
            x_bits (np.ndarray): (m, n_context_bits) array of 0/1
            a_bits (np.ndarray): (m, n_action_bits) array of 0/1

        Returns:
            np.ndarray: (m, dimension) design matrix
        """
        x_bits = np.asarray(x_bits, dtype=np.float64)
        a_bits = np.asarray(a_bits, dtype=np.float64)
        xv = x_bits[:, list(self.visible_context)]
        av = a_bits[:, list(self.visible_action)]
        m = x_bits.shape[0]
        blocks = [xv, av, np.einsum("mi,mj->mij", xv, av).reshape(m, -1)]
        if self.action_pairs:
            i, j = np.triu_indices(self.n_action_bits, k=1)
            blocks.append(a_bits[:, i] * a_bits[:, j])
        blocks.append(np.ones((m, 1)))
        return np.hstack(blocks)

    def to_json(self) -> list:
        return list(self.mask)


@lru_cache(maxsize=64)
def pair_matrix(fm: FeatureMap) -> np.ndarray:
    """
    Design matrix over every (context, action) pair.

    Row x * n_actions + a holds featurize(fm, x, a). Read-only and cached per
    feature map.
    """
    xt, at = bit_table(fm.n_context_bits), bit_table(fm.n_action_bits)
    x_rows = np.repeat(xt, fm.n_actions, axis=0)
    a_rows = np.tile(at, (fm.n_contexts, 1))
    design = fm.transform(x_rows, a_rows)
    design.setflags(write=False)
    return design


def featurize(fm: FeatureMap, x: Context, a: Action) -> np.ndarray:
    """
    Feature vector of one (context, action) pair.

    Args:
        fm (FeatureMap): Feature map
        x (Context): Context
        a (Action): Action

    Returns:
        np.ndarray: Vector of length fm.dimension, bias last
    """
    return fm.transform(np.array([x.bits]), np.array([a.bits]))[0]
