"""Integer lattice Z^3_0, sign partition, orthonormal frames and noise weights.

Every nonzero wavevector k carries a deterministic orthonormal frame
(a1, a2) spanning the plane orthogonal to k.  For k in the plus class the
triple {a1, a2, k/|k|} is right-handed; frames are even under k -> -k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PLUS = "plus"
MINUS = "minus"


def sign_class(k) -> str:
    """Partition class of a nonzero lattice vector.

    'plus' iff the first nonzero coordinate of k is positive, so that
    exactly one of k, -k is in the plus class.
    """
    k = np.asarray(k, dtype=np.int64)
    for c in k:
        if c > 0:
            return PLUS
        if c < 0:
            return MINUS
    raise ValueError("sign_class undefined for the zero vector")


def _sign_factors(kvecs: np.ndarray) -> np.ndarray:
    """+1 for plus-class rows, -1 for minus-class rows of an (n, 3) array."""
    s = np.sign(kvecs[:, 0])
    s = np.where(s == 0, np.sign(kvecs[:, 1]), s)
    s = np.where(s == 0, np.sign(kvecs[:, 2]), s)
    if np.any(s == 0):
        raise ValueError("zero vector has no sign class")
    return s.astype(np.float64)


def frames(kvecs: np.ndarray) -> np.ndarray:
    """Orthonormal frames for an (n, 3) integer array of nonzero vectors.

    Returns an (n, 2, 3) float array (a1, a2) per row.  Construction for a
    plus-class k: h is the first standard basis vector not parallel to k,
    a1 = (k x h)/|k x h|, a2 = (k/|k|) x a1, which makes {a1, a2, k/|k|}
    right-handed.  Minus-class rows reuse the frame of -k.
    """
    kvecs = np.asarray(kvecs, dtype=np.int64)
    kp = kvecs * _sign_factors(kvecs)[:, None]  # plus-class representative

    h = np.zeros_like(kp)
    along_e1 = (kp[:, 1] == 0) & (kp[:, 2] == 0)
    h[:, 0] = ~along_e1
    h[:, 1] = along_e1

    a1 = np.cross(kp, h)
    a1 /= np.linalg.norm(a1, axis=1)[:, None]
    khat = kp / np.linalg.norm(kp, axis=1)[:, None]
    a2 = np.cross(khat, a1)
    return np.stack([a1, a2], axis=1)


def frame(k):
    """Frame (a1, a2) of a single nonzero lattice vector."""
    f = frames(np.asarray(k, dtype=np.int64)[None, :])[0]
    return f[0], f[1]


def lattice_shell(r_min_sq: int, r_max_sq: int) -> np.ndarray:
    """All k in Z^3_0 with r_min_sq <= |k|^2 <= r_max_sq, lexicographic order."""
    if r_max_sq < 1:
        return np.zeros((0, 3), dtype=np.int64)
    r = int(np.floor(np.sqrt(r_max_sq)))
    ax = np.arange(-r, r + 1, dtype=np.int64)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    nsq = (g * g).sum(axis=1)
    g = g[(nsq >= max(1, r_min_sq)) & (nsq <= r_max_sq)]
    order = np.lexsort((g[:, 2], g[:, 1], g[:, 0]))
    return g[order]


def lattice_ball(r_max: float) -> np.ndarray:
    """All k in Z^3_0 with 1 <= |k| <= r_max."""
    return lattice_shell(1, int(np.floor(r_max * r_max + 1e-9)))


@dataclass(frozen=True)
class ThetaWeights:
    """Finite-support radially symmetric nonnegative noise weights.

    vectors holds the support (n, 3); weights the matching theta_k.  The
    support is closed under k -> -k and under coordinate permutations and
    sign flips, and weights depend on |k| only (bit-identical on orbits,
    since they are computed from the integer |k|^2).
    """

    vectors: np.ndarray
    weights: np.ndarray
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.vectors.shape[0] != self.weights.shape[0]:
            raise ValueError("support/weight length mismatch")
        if np.any(self.weights < 0):
            raise ValueError("negative weight")
        object.__setattr__(
            self, "_index",
            {tuple(v): i for i, v in enumerate(self.vectors.tolist())})

    def __len__(self):
        return self.vectors.shape[0]

    def weight_of(self, k) -> float:
        i = self._index.get(tuple(int(c) for c in k))
        return float(self.weights[i]) if i is not None else 0.0

    @property
    def norm_sq(self) -> np.ndarray:
        return (self.vectors * self.vectors).sum(axis=1)

    @property
    def l2(self) -> float:
        return float(np.sqrt(np.sum(self.weights ** 2)))

    @property
    def linf(self) -> float:
        return float(np.max(self.weights)) if len(self) else 0.0

    @property
    def h1(self) -> float:
        return float(np.sqrt(np.sum(self.weights ** 2 * self.norm_sq)))

    @property
    def max_radius(self) -> float:
        return float(np.sqrt(np.max(self.norm_sq))) if len(self) else 0.0

    def is_radially_symmetric(self) -> bool:
        w = {}
        for nsq, wt in zip(self.norm_sq.tolist(), self.weights.tolist()):
            if w.setdefault(nsq, wt) != wt:
                return False
        return True


def _radial_weights(vectors: np.ndarray, gamma: float) -> np.ndarray:
    nsq = (vectors * vectors).sum(axis=1).astype(np.float64)
    if gamma == 0:
        return np.ones(len(vectors))
    return nsq ** (-gamma / 2.0)


def theta_shell(N: int, gamma: float) -> ThetaWeights:
    """Shell weights theta_k = |k|^-gamma on N <= |k| <= 2N."""
    if N < 1:
        raise ValueError(f"shell parameter N must be >= 1, got {N}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    vecs = lattice_shell(N * N, 4 * N * N)
    return ThetaWeights(vecs, _radial_weights(vecs, gamma))


def theta_ball(N: int, gamma: float) -> ThetaWeights:
    """Ball weights theta_k = |k|^-gamma on 1 <= |k| <= N; needs gamma in [0, 3/2]."""
    if N < 1:
        raise ValueError(f"ball parameter N must be >= 1, got {N}")
    if not 0 <= gamma <= 1.5:
        raise ValueError(f"gamma must lie in [0, 3/2], got {gamma}")
    vecs = lattice_shell(1, N * N)
    return ThetaWeights(vecs, _radial_weights(vecs, gamma))


def theta_norms(theta: ThetaWeights):
    """(l2, linf, h1) norms of a weight sequence."""
    return theta.l2, theta.linf, theta.h1
