"""Bandit environments: synthetic varying-arm instances, a fixed three-arm
instance where optimistic algorithms provably over-explore, and an offline
replay environment built from a ratings file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, IngestionError, UsageError


@dataclass(frozen=True)
class ArmSet:
    """The decision set of one round: per-arm context vectors with stable ids."""

    round: int
    features: np.ndarray          # (K, d)
    arm_ids: np.ndarray           # (K,) distinct ints
    user: int | None = None       # replay environments tag the visiting user

    def __len__(self) -> int:
        return len(self.arm_ids)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass
class RoundRecord:
    """One step of interaction, for tracing."""

    t: int
    arm_id: int
    reward: float
    expected_reward: float
    regret: float
    best_arm_id: int
    stats: list | None = None


class SyntheticEnv:
    """Time-varying arm set with one optimal, K-2 near-optimal and one bad arm.

    The hidden parameter equals the optimal context,
    [1/sqrt(d-1), ..., 1/sqrt(d-1), 0]. Each near-optimal arm redraws
    z ~ Uniform[0, 0.1] every round and scales the all-directions vector by
    (1 - 1/(7+z)), leaving a per-round gap of 1/(7+z). The last arm is the
    unit vector on the coordinate the parameter ignores (gap 1).
    """

    kind = "synthetic"
    metric = "regret"

    def __init__(self, K: int = 10, d: int = 2, noise_R: float = 0.1):
        if d < 2:
            raise ConfigurationError(f"d must be >= 2, got {d}")
        if K < 3:
            raise ConfigurationError(f"K must be >= 3, got {K}")
        self.K = K
        self.dim = d
        self.noise_R = float(noise_R)
        self.theta_star = np.zeros(d)
        self.theta_star[:-1] = 1.0 / np.sqrt(d - 1)
        self.bound_L = np.sqrt(2.0)
        self._ids = np.arange(K)

    def arm_set(self, t: int, rng: np.random.Generator) -> ArmSet:
        d, K = self.dim, self.K
        X = np.empty((K, d))
        X[0] = self.theta_star
        z = rng.uniform(0.0, 0.1, size=K - 2)
        scale = 1.0 - 1.0 / (7.0 + z)
        X[1:-1, :-1] = (scale / np.sqrt(d - 1))[:, None]
        X[1:-1, -1] = scale
        X[-1] = 0.0
        X[-1, -1] = 1.0
        return ArmSet(round=t, features=X, arm_ids=self._ids)

    def expected_rewards(self, arm_set: ArmSet) -> np.ndarray:
        return arm_set.features @ self.theta_star

    def reward(self, arm_set: ArmSet, position: int, rng: np.random.Generator) -> float:
        mean = float(arm_set.features[position] @ self.theta_star)
        if self.noise_R == 0.0:
            return mean
        return mean + self.noise_R * rng.standard_normal()


class EndOfOptimismEnv:
    """Fixed three-arm instance: [1, 0], [0, 1] and [1-eps, 2*eps].

    The hidden parameter is [1, 0], so the expected rewards are
    (1, 0, 1-eps) and the gaps (0, 1, eps). The apparently useless second
    arm is the informative one, which defeats purely optimistic play.
    """

    kind = "eoo"
    metric = "regret"

    def __init__(self, epsilon: float = 0.01, noise_R: float = 0.1):
        if not 0.0 < epsilon < 0.5:
            raise ConfigurationError(f"epsilon must be in (0, 0.5), got {epsilon}")
        self.epsilon = float(epsilon)
        self.dim = 2
        self.K = 3
        self.noise_R = float(noise_R)
        self.theta_star = np.array([1.0, 0.0])
        self.bound_L = np.sqrt(2.0)
        feats = np.array([[1.0, 0.0], [0.0, 1.0], [1.0 - epsilon, 2.0 * epsilon]])
        self._arm_set = ArmSet(round=0, features=feats, arm_ids=np.arange(3))
        self._expected = feats @ self.theta_star

    def arm_set(self, t: int, rng: np.random.Generator) -> ArmSet:
        return self._arm_set

    def expected_rewards(self, arm_set: ArmSet) -> np.ndarray:
        return self._expected

    def reward(self, arm_set: ArmSet, position: int, rng: np.random.Generator) -> float:
        mean = self._expected[position]
        if self.noise_R == 0.0:
            return float(mean)
        return float(mean + self.noise_R * rng.standard_normal())


# ---------------------------------------------------------------------------
# Ratings-file replay
# ---------------------------------------------------------------------------

CONTEXT_NORM_BOUND = np.sqrt(20.0)


def _parse_ratings(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read (user, movie, rating) triples from a ratings file.

    Accepts two layouts, auto-detected from the first line:
      * ``UserID::MovieID::Rating::Timestamp`` lines, and
      * CSV with the header ``userId,movieId,rating,timestamp``.
    """
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IngestionError(f"cannot read ratings file {path}: {e}") from e
    lines = raw.splitlines()
    if not lines:
        raise IngestionError(f"ratings file {path} is empty", line_number=1)

    start = 0
    if "::" in lines[0]:
        sep = "::"
    elif lines[0].strip().lower().replace(" ", "") == "userid,movieid,rating,timestamp":
        sep = ","
        start = 1
    else:
        raise IngestionError(
            f"unrecognized ratings layout in {path!s}: {lines[0][:60]!r}", line_number=1
        )

    users, movies, ratings = [], [], []
    for ln, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.split(sep)
        if len(parts) != 4:
            raise IngestionError(
                f"line {ln}: expected 4 fields separated by {sep!r}, got {len(parts)}",
                line_number=ln,
            )
        try:
            users.append(int(parts[0]))
            movies.append(int(parts[1]))
            ratings.append(float(parts[2]))
        except ValueError as e:
            raise IngestionError(f"line {ln}: {e}", line_number=ln) from e
    return np.asarray(users), np.asarray(movies), np.asarray(ratings)


def _als_factorize(
    clicks: np.ndarray, rank: int, rng: np.random.Generator, reg: float = 0.1, iters: int = 20
) -> tuple[np.ndarray, np.ndarray]:
    """Alternating least squares on the dense binary click matrix."""
    n_users, n_items = clicks.shape
    U = 0.1 * rng.standard_normal((n_users, rank))
    M = 0.1 * rng.standard_normal((n_items, rank))
    eye = reg * np.eye(rank)
    for _ in range(iters):
        U = clicks @ M @ np.linalg.inv(M.T @ M + eye)
        M = clicks.T @ U @ np.linalg.inv(U.T @ U + eye)
    return U, M


def _cache_key(file_hash: str, rank: int, K: int, min_ratings: int, seed: int) -> str:
    h = hashlib.sha256(
        f"{file_hash}:{rank}:{K}:{min_ratings}:{seed}".encode()
    ).hexdigest()
    return h[:16]


class MovieLensReplayEnv:
    """Offline replay over a ratings table.

    The K most-rated movies are kept. A click means the user rated the
    recommended movie at least 3; missing ratings count as no click. User and
    movie factors come from a rank-r ALS factorization of the binary click
    matrix, and the context of (user, movie) is the flattened outer product
    of its factors, globally scaled so every norm stays within sqrt(20).
    Each round a user is drawn uniformly (with replacement) among those with
    at least ``min_ratings`` interactions with the kept movies.
    """

    kind = "movielens"
    metric = "ctr"

    def __init__(
        self,
        user_factors: np.ndarray,
        movie_factors: np.ndarray,
        clicks: np.ndarray,
        movie_ids: np.ndarray,
        user_ids: np.ndarray,
        scale: float,
    ):
        self.user_factors = user_factors
        self.movie_factors = movie_factors
        self.clicks = clicks                    # (n_users, K) 0/1
        self.movie_ids = movie_ids
        self.user_ids = user_ids
        self.scale = scale
        self.K = movie_factors.shape[0]
        self.rank = movie_factors.shape[1]
        self.dim = self.rank * self.rank
        self.bound_L = CONTEXT_NORM_BOUND
        self._ids = np.arange(self.K)

    def arm_set(self, t: int, rng: np.random.Generator) -> ArmSet:
        u = int(rng.integers(len(self.user_ids)))
        X = self.scale * np.einsum("i,kj->kij", self.user_factors[u], self.movie_factors)
        return ArmSet(round=t, features=X.reshape(self.K, self.dim), arm_ids=self._ids, user=u)

    def expected_rewards(self, arm_set: ArmSet) -> np.ndarray:
        return self.clicks[arm_set.user].astype(np.float64)

    def reward(self, arm_set: ArmSet, position: int, rng: np.random.Generator) -> float:
        return float(self.clicks[arm_set.user, position])

    def overall_click_rate(self) -> float:
        """Exact expected CTR of a uniformly random recommender."""
        return float(self.clicks.mean())


def movielens_load(
    ratings_path: str | Path,
    rank: int = 5,
    K: int = 20,
    min_ratings: int = 1,
    seed: int = 0,
    use_cache: bool = True,
) -> MovieLensReplayEnv:
    """Build a replay environment from a ratings file.

    Factor matrices are cached in a sidecar ``.npz`` next to the ratings
    file, keyed by (file hash, rank, K, min_ratings, seed); a cache hit
    round-trips the arrays bit-exactly.
    """
    path = Path(ratings_path)
    users, movies, ratings = _parse_ratings(path)

    # keep the K most-rated movies (count ties broken by movie id)
    ids, counts = np.unique(movies, return_counts=True)
    if K > len(ids):
        raise ConfigurationError(f"K={K} exceeds the {len(ids)} distinct movies on file")
    order = np.lexsort((ids, -counts))
    kept_movies = np.sort(ids[order[:K]])
    movie_pos = {m: j for j, m in enumerate(kept_movies)}

    in_kept = np.isin(movies, kept_movies)
    users_k, movies_k, ratings_k = users[in_kept], movies[in_kept], ratings[in_kept]

    uid, inter_counts = np.unique(users_k, return_counts=True)
    kept_users = np.sort(uid[inter_counts >= min_ratings])
    if len(kept_users) == 0:
        raise ConfigurationError(f"no user has >= {min_ratings} interactions with the kept movies")
    user_pos = {u: i for i, u in enumerate(kept_users)}

    clicks = np.zeros((len(kept_users), K), dtype=np.int8)
    for u, m, r in zip(users_k, movies_k, ratings_k):
        if u in user_pos and r >= 3.0:
            clicks[user_pos[u], movie_pos[m]] = 1

    cache = None
    if use_cache:
        file_hash = hashlib.sha256(path.read_bytes()).hexdigest()
        key = _cache_key(file_hash, rank, K, min_ratings, seed)
        cache = path.with_name(path.name + f".factors-{key}.npz")
    if cache is not None and cache.exists():
        data = np.load(cache)
        U, M, scale = data["user_factors"], data["movie_factors"], float(data["scale"])
    else:
        rng = np.random.default_rng(seed)
        U, M = _als_factorize(clicks.astype(np.float64), rank, rng)
        max_norm = float(np.linalg.norm(U, axis=1).max() * np.linalg.norm(M, axis=1).max())
        scale = CONTEXT_NORM_BOUND / max_norm if max_norm > 0 else 1.0
        if cache is not None:
            np.savez(cache, user_factors=U, movie_factors=M, scale=scale)

    return MovieLensReplayEnv(
        user_factors=U,
        movie_factors=M,
        clicks=clicks,
        movie_ids=kept_movies,
        user_ids=kept_users,
        scale=scale,
    )


def best_arm_position(expected: np.ndarray) -> int:
    return int(np.argmax(expected))


def validate_arm_set(arm_set: ArmSet, bound_L: float, tol: float = 1e-9) -> None:
    """Assert the norm bound and id uniqueness contracts of an arm set."""
    norms = np.linalg.norm(arm_set.features, axis=1)
    if np.any(norms > bound_L + tol):
        raise UsageError(f"arm norm {norms.max():.6f} exceeds bound {bound_L:.6f}")
    if len(np.unique(arm_set.arm_ids)) != len(arm_set.arm_ids):
        raise UsageError("arm ids are not distinct")
