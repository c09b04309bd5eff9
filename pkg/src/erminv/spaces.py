"""Ellipsoidal coefficient classes, certified delta-nets, and packing sets.

The delta-net is a constructive replacement for the volume-argument net: a
cubic lattice of step h = delta / (2 sqrt(m)) in the m coordinates of the
truncated ellipsoid E_M.  Each lattice cube that meets E_M contributes its
minimal-weighted-norm point, so every net point lies inside the ellipsoid
and every theta in E_M is within the cube diameter delta/2 of a net point;
together with the truncation tail bound (<= delta^2/2) this certifies
covering radius delta over the whole class.

The construction inflates log-cardinality by at most a log(1/delta) factor
over the sharp volume bound, so exponent checks regress slopes, not
constants.  Nets too large to materialize (the cardinality is exponential
in delta^(-1/s)) are returned in summary form with certified lower/upper
bounds on log-cardinality and a lattice point sampler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NetTooLargeError, NumericalError
from .indexing import CoefficientVector, IndexSet, MultiIndex

__all__ = [
    "Ellipsoid",
    "DeltaNet",
    "PackingSet",
    "truncation_level",
    "build_delta_net",
    "build_packing_set",
    "certify_covering",
    "net_cardinality_exponent",
    "fit_loglog_slope",
]

NET_POINT_CAP = 2**24


class Ellipsoid:
    """Coefficient body sum(a_j^2 theta_j^2) <= L^2 with a_j ~ |j|^s.

    The weight law is a_j = weight_scale * |j|^s for |j| >= 1 and a_0 for
    the constant index (the polynomial envelope C1 |j|^s <= a_j <= C2 |j|^s
    pins nothing at |j| = 0, so that weight is a free positive parameter).
    Explicit per-index overrides are allowed as long as they respect the
    envelope.
    """

    def __init__(self, space, s, L, C1=1.0, C2=1.0, a0=1.0, weight_scale=None, overrides=None):
        if s <= 0 or L <= 0:
            raise ConfigError("need s > 0 and L > 0")
        if not 0 < C1 <= C2:
            raise ConfigError("need 0 < C1 <= C2")
        self.space = space
        self.s = float(s)
        self.L = float(L)
        self.C1 = float(C1)
        self.C2 = float(C2)
        if a0 <= 0:
            raise ConfigError("a0 must be positive")
        self.a0 = float(a0)
        self.weight_scale = float(weight_scale) if weight_scale is not None else math.sqrt(C1 * C2)
        if not C1 <= self.weight_scale <= C2:
            raise ConfigError("weight_scale violates the envelope [C1, C2]")
        self.overrides = dict(overrides or {})
        for idx, a in self.overrides.items():
            t = idx.total
            if a <= 0:
                raise ConfigError(f"override weight at {idx} must be positive")
            if t >= 1 and not (self.C1 * t**self.s <= a <= self.C2 * t**self.s):
                raise ConfigError(f"override weight at {idx} violates the envelope")

    def weight(self, idx: MultiIndex) -> float:
        if idx in self.overrides:
            return self.overrides[idx]
        t = idx.total
        return self.a0 if t == 0 else self.weight_scale * t**self.s

    def weights_array(self, indices) -> np.ndarray:
        return np.array([self.weight(idx) for idx in indices])

    def index_set_up_to(self, m: int) -> IndexSet:
        return IndexSet(self.space.indices_up_to(m))

    def weighted_norm_sq(self, cv: CoefficientVector) -> float:
        return sum(self.weight(idx) ** 2 * v * v for idx, v in cv.entries.items())

    def contains(self, cv: CoefficientVector, tol: float = 1e-12) -> bool:
        return self.weighted_norm_sq(cv) <= self.L**2 + tol

    def b2_bound(self) -> float:
        """sup of the L2 norm over the class: L / min_j a_j."""
        a_min = min(self.a0, self.weight_scale) if _has_constant(self.space) else self.weight_scale
        if self.overrides:
            a_min = min(a_min, min(self.overrides.values()))
        return self.L / a_min

    def truncation_level(self, delta: float) -> int:
        return truncation_level(self, delta)

    def sample_uniform(self, indices, n: int, rng) -> np.ndarray:
        """Uniform draws from the solid truncated ellipsoid, shape (n, m).

        Gaussian direction mapped through the axes L/a_j plus the U^(1/m)
        radius law; exactly uniform on the solid body.
        """
        a = self.weights_array(indices)
        m = len(a)
        g = rng.standard_normal((n, m))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        radii = rng.random(n) ** (1.0 / m)
        return (self.L * radii[:, None]) * (g / a) / norms


def _has_constant(space) -> bool:
    return any(idx.total == 0 for idx in space.indices_up_to(0))


def truncation_level(e: Ellipsoid, delta: float) -> int:
    """Truncation M = floor((C1^-1 sqrt(2) L / delta)^(1/s)).

    Guarantees the tail bound sum_{|j|>M} theta_j^2 <= delta^2 / 2 for every
    theta in the ellipsoid.  Deltas beyond sqrt(2) L / C1 make M = 0 (the
    net degenerates past a single point) and are rejected; the caller must
    handle that regime itself.
    """
    if delta <= 0:
        raise ConfigError(f"need delta > 0 (got {delta})")
    M = int(math.floor((math.sqrt(2.0) * e.L / (e.C1 * delta)) ** (1.0 / e.s)))
    if M < 1:
        raise ConfigError(
            f"delta={delta:g} exceeds sqrt(2) L / C1 = {math.sqrt(2.0) * e.L / e.C1:g}; "
            "the net degenerates (M = 0)"
        )
    return M


@dataclass
class DeltaNet:
    """A certified covering set of the ellipsoid at radius delta.

    ``points`` is an (N, m) array over ``support`` when materialized, else
    None; ``log_count_lo``/``log_count_hi`` are certified natural-log bounds
    on the lattice cardinality (equal to log(count) when exact).
    """

    ellipsoid: Ellipsoid
    delta: float
    M: int
    support: IndexSet
    step: float
    points: np.ndarray | None
    count: int | None
    log_count_lo: float
    log_count_hi: float
    construction: str = "lattice"

    @property
    def materialized(self) -> bool:
        return self.points is not None

    def __len__(self):
        if self.count is None:
            raise ConfigError("net was built in summary mode; only bounds are available")
        return self.count

    def log_count_mid(self) -> float:
        if self.count is not None:
            return math.log(self.count)
        return 0.5 * (self.log_count_lo + self.log_count_hi)

    def cardinality_constant(self) -> float:
        """The builder's lattice constant C in log#Net <= C delta^(-1/s) log(1/delta).

        Computed from the certified upper bound, so the inequality holds for
        the exact count by construction; the constant stays bounded as delta
        shrinks (the log factor is this construction's overhead against the
        sharp volume bound).
        """
        e = self.ellipsoid
        scale = self.delta ** (-1.0 / e.s) * max(math.log(1.0 / self.delta), 1.0)
        return self.log_count_hi / scale

    def point_vectors(self) -> list:
        if not self.materialized:
            raise ConfigError("net was built in summary mode; points are not materialized")
        tag = self.ellipsoid.space.tag
        return [
            CoefficientVector.from_array(row, self.support, tag) for row in self.points
        ]

    def round_to_lattice(self, theta: np.ndarray) -> np.ndarray:
        """Map arbitrary coefficient rows to their cube's net representative."""
        theta = np.atleast_2d(theta)
        k = np.rint(theta / self.step)
        return np.sign(k) * np.maximum(np.abs(k) * self.step - self.step / 2.0, 0.0)

    def sample_points(self, n: int, rng) -> np.ndarray:
        """Draw net points by rounding uniform ellipsoid samples (summary mode)."""
        theta = self.ellipsoid.sample_uniform(self.support, n, rng)
        return self.round_to_lattice(theta)


def _log_volume_ball(m: int) -> float:
    return 0.5 * m * math.log(math.pi) - math.lgamma(0.5 * m + 1.0)


def _net_count_bounds(a: np.ndarray, L: float, h: float):
    """Certified (lo, hi) natural-log bounds on the number of lattice cubes
    meeting the ellipsoid sum a_i^2 x_i^2 <= L^2 for a cubic lattice of step h.

    Lower: volume(E)/h^m (each point of E lies in a counted cube).
    Upper: min of the inflated-ellipsoid volume bound and the per-axis
    product of lattice ranges.
    """
    m = len(a)
    log_vol = _log_volume_ball(m) + m * math.log(L) - float(np.sum(np.log(a)))
    lo = max(0.0, log_vol - m * math.log(h))
    inflate = m * math.log1p(float(np.max(a)) * h * math.sqrt(m) / L)
    hi_vol = log_vol - m * math.log(h) + inflate
    kmax = np.floor(L / (a * h) + 0.5)
    hi_prod = float(np.sum(np.log(2.0 * kmax + 1.0)))
    return lo, max(lo, min(hi_vol, hi_prod))


def _enumerate_lattice(a: np.ndarray, L: float, h: float, cap: int) -> np.ndarray:
    """All representative points of lattice cubes meeting the ellipsoid.

    Coordinates are visited most-constrained first so the cheap axes fan out
    at the bottom, where whole runs are emitted vectorized.  Raises when the
    enumeration passes ``cap`` points.
    """
    m = len(a)
    order = np.argsort(-a, kind="stable")
    a_sorted = a[order]
    blocks = []
    total = 0
    prefix = np.zeros(m)
    L2 = L * L

    def emit(depth: int, budget_sq: float):
        nonlocal total
        ai = a_sorted[depth]
        bound = math.sqrt(max(budget_sq, 0.0)) / ai
        kmax = int(math.floor(bound / h + 0.5 + 1e-12))
        if depth == m - 1:
            ks = np.arange(-kmax, kmax + 1)
            xs = np.sign(ks) * np.maximum(np.abs(ks) * h - h / 2.0, 0.0)
            xs = xs[(ai * np.abs(xs)) ** 2 <= budget_sq + 1e-12 * L2]
            n_new = xs.size
            total += n_new
            if total > cap:
                raise NetTooLargeError(
                    f"delta-net exceeds the {cap}-point cap during enumeration"
                )
            block = np.tile(prefix, (n_new, 1))
            block[:, m - 1] = xs
            blocks.append(block)
            return
        for k in range(-kmax, kmax + 1):
            x = math.copysign(max(abs(k) * h - h / 2.0, 0.0), k) if k else 0.0
            used = (ai * x) ** 2
            if used > budget_sq + 1e-12 * L2:
                continue
            prefix[depth] = x
            emit(depth + 1, budget_sq - used)
        prefix[depth] = 0.0

    emit(0, L2)
    pts_sorted = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, m))
    pts = np.empty_like(pts_sorted)
    pts[:, order] = pts_sorted
    return pts


def build_delta_net(
    e: Ellipsoid,
    delta: float,
    cap: int = NET_POINT_CAP,
    materialize: bool = True,
    certify: bool = False,
    certify_samples: int = 1000,
    rng=None,
) -> DeltaNet:
    """Construct the lattice delta-net of the ellipsoid.

    With ``materialize=False`` only the certified cardinality bounds are
    computed (used for entropy diagnostics at deltas where the net has
    astronomically many points).  ``certify=True`` runs the sampled covering
    certification and raises on any failure.
    """
    M = truncation_level(e, delta)
    support = e.index_set_up_to(M)
    m = len(support)
    if m == 0:
        raise ConfigError("empty truncation; increase delta headroom")
    a = e.weights_array(support)
    h = delta / (2.0 * math.sqrt(m))
    lo, hi = _net_count_bounds(a, e.L, h)

    points = None
    count = None
    if materialize:
        log_cap = math.log(cap)
        if lo > log_cap:
            suggestion = _suggest_delta(e, delta, cap)
            raise NetTooLargeError(
                f"delta-net at delta={delta:g} needs more than {cap} points "
                f"(certified log-count >= {lo:.1f}); increase delta to about "
                f"{suggestion:g} or lower M",
                suggested_delta=suggestion,
            )
        try:
            points = _enumerate_lattice(a, e.L, h, cap)
        except NetTooLargeError as err:
            suggestion = _suggest_delta(e, delta, cap)
            raise NetTooLargeError(
                f"delta-net at delta={delta:g} exceeds the {cap}-point cap; "
                f"increase delta to about {suggestion:g} or lower M",
                suggested_delta=suggestion,
            ) from err
        count = points.shape[0]
        lo = hi = math.log(count) if count else 0.0

    net = DeltaNet(e, float(delta), M, support, h, points, count, lo, hi)
    if certify:
        if not materialize:
            raise ConfigError("covering certification requires a materialized net")
        rng = np.random.default_rng(0) if rng is None else rng
        worst = certify_covering(net, certify_samples, rng)
        if worst > delta:
            raise NumericalError(
                f"covering certification failed: sampled distance {worst:g} > delta={delta:g}"
            )
    return net


def _suggest_delta(e: Ellipsoid, delta: float, cap: int) -> float:
    d = delta
    for _ in range(200):
        d *= 1.25
        if d >= e.L:
            return math.nextafter(e.L, 0.0)
        M = truncation_level(e, d)
        support = e.index_set_up_to(M)
        a = e.weights_array(support)
        h = d / (2.0 * math.sqrt(len(support)))
        _, hi = _net_count_bounds(a, e.L, h)
        if hi <= math.log(cap):
            return d
    return d


def certify_covering(net: DeltaNet, n_samples: int, rng, tail_extra: int | None = None) -> float:
    """Max distance from sampled class members to the net; must be <= delta.

    Samples live on an extended truncation so the tail term is exercised;
    the sampled distance is the exact l2 distance (truncated part against
    the materialized points, tail added via Parseval).
    """
    e = net.ellipsoid
    extra = tail_extra if tail_extra is not None else max(3, net.M // 2)
    ext = e.index_set_up_to(net.M + extra)
    samples = e.sample_uniform(ext, n_samples, rng)
    head_cols = np.array([ext.pos[idx] for idx in net.support.indices])
    tail_mask = np.ones(len(ext), dtype=bool)
    tail_mask[head_cols] = False
    head = samples[:, head_cols]
    tail_sq = np.sum(samples[:, tail_mask] ** 2, axis=1)
    worst = 0.0
    pts = net.points
    chunk = max(1, int(2e7) // max(1, pts.shape[0]))
    pts_sq = np.sum(pts**2, axis=1)
    for start in range(0, n_samples, chunk):
        block = head[start : start + chunk]
        d2 = pts_sq[None, :] - 2.0 * block @ pts.T + np.sum(block**2, axis=1)[:, None]
        best = np.maximum(d2.min(axis=1), 0.0) + tail_sq[start : start + chunk]
        worst = max(worst, float(np.sqrt(best.max())))
    return worst


# ---------------------------------------------------------------------------
# Packing sets (Varshamov-Gilbert construction on a frequency shell)
# ---------------------------------------------------------------------------


@dataclass
class PackingSet:
    """A separated point set certifying covering-number lower bounds.

    Points are base + epsilon * omega with omega binary words on the shell
    coordinates at pairwise Hamming distance >= ceil(m/4); pairwise l2
    distances then lie in [C0 * delta, C_upper * delta].
    """

    ellipsoid: Ellipsoid
    delta: float
    M: int
    M_star: int
    shell: IndexSet
    base: CoefficientVector
    epsilon: float
    omega: np.ndarray
    support: IndexSet
    points: np.ndarray
    C0: float
    C_upper: float

    def __len__(self):
        return self.points.shape[0]

    def point_vectors(self) -> list:
        tag = self.ellipsoid.space.tag
        return [CoefficientVector.from_array(row, self.support, tag) for row in self.points]

    def pairwise_distance_bounds(self):
        """Exact (min, max) pairwise l2 distance via Hamming counts."""
        w = self.omega.astype(np.float64)
        s = w.sum(axis=1)
        gram = w @ w.T
        ham = s[:, None] + s[None, :] - 2.0 * gram
        iu = np.triu_indices(len(self), k=1)
        dists = self.epsilon * np.sqrt(ham[iu])
        return float(dists.min()), float(dists.max())


def _greedy_binary_code(m: int, dmin: int, target: int, seed: int) -> np.ndarray:
    """Binary words with pairwise Hamming distance >= dmin, greedy selection.

    Exhaustive over all words when 2^m is small, otherwise a seeded random
    stream; always starts from the zero word.
    """
    kept = [np.zeros(m, dtype=bool)]
    kept_arr = np.zeros((1, m), dtype=bool)

    def try_add(word) -> bool:
        nonlocal kept_arr
        if ((kept_arr != word).sum(axis=1) >= dmin).all():
            kept.append(word)
            kept_arr = np.vstack([kept_arr, word])
            return True
        return False

    if 2**m <= 4096:
        for code in range(1, 2**m):
            if len(kept) >= target:
                break
            word = np.array([(code >> i) & 1 for i in range(m)], dtype=bool)
            try_add(word)
    else:
        rng = np.random.default_rng([seed, m, dmin])
        budget = 200 * target + 5000
        for _ in range(budget):
            if len(kept) >= target:
                break
            try_add(rng.random(m) < 0.5)
    return np.array(kept, dtype=bool)


def build_packing_set(
    e: Ellipsoid,
    delta: float,
    base: CoefficientVector | None = None,
    cap: int = 2**12,
    seed: int = 0,
) -> PackingSet:
    """Varshamov-Gilbert packing on the shell {max(M/2,1), ..., M}.

    The perturbation step epsilon is the larger feasible scale under both
    requirements: pairwise l2 distances within [C0 delta, delta] and the
    perturbed points staying inside the ellipsoid (triangle inequality in
    the weighted norm against the base point's radius).
    """
    M = truncation_level(e, delta)  # rejects the degenerate M = 0 regime
    M_star = M // 2
    low = max(M_star, 1)
    shell_indices = [idx for idx in e.space.indices_up_to(M) if low <= idx.total <= M]
    if len(shell_indices) < 2:
        max_delta = math.sqrt(2.0) * e.L / (e.C1 * 2.0**e.s)
        raise ConfigError(
            f"shell {{{low},...,{M}}} too small for a packing; "
            f"need delta <= {max_delta:g} so that M >= 2"
        )
    shell = IndexSet(shell_indices)
    m = len(shell)

    base = base if base is not None else CoefficientVector({}, e.space.tag)
    L_star_sq = e.weighted_norm_sq(base)
    if L_star_sq >= e.L**2:
        raise ConfigError("base point must lie strictly inside the ellipsoid")
    room = e.L - math.sqrt(L_star_sq)

    a_shell = e.weights_array(shell)
    epsilon = min(delta / math.sqrt(m), room / math.sqrt(float(np.sum(a_shell**2))))
    dmin = max(1, math.ceil(m / 4.0))
    # aim comfortably past the Varshamov-Gilbert count 2^(m/8); the cap keeps
    # the set exhaustively testable, so for large shells the certified count
    # is min(2^(m/8), cap)
    vg_count = max(2, math.ceil(2.0 ** (m / 8.0)))
    goal = min(cap, 2**m, max(64, 4 * vg_count))
    omega = _greedy_binary_code(m, dmin, goal, seed)
    required = min(vg_count, goal)
    if omega.shape[0] < required:
        raise NumericalError(
            f"greedy code yielded {omega.shape[0]} words, below the "
            f"Varshamov-Gilbert count {required}"
        )

    support_indices = sorted(
        set(shell.indices) | set(base.entries), key=lambda i: i.sort_key()
    )
    support = IndexSet(support_indices)
    pts = np.tile(base.to_array(support), (omega.shape[0], 1))
    shell_pos = np.array([support.pos[idx] for idx in shell.indices])
    pts[:, shell_pos] += epsilon * omega

    return PackingSet(
        ellipsoid=e,
        delta=float(delta),
        M=M,
        M_star=M_star,
        shell=shell,
        base=base,
        epsilon=epsilon,
        omega=omega,
        support=support,
        points=pts,
        C0=epsilon * math.sqrt(dmin) / delta,
        C_upper=epsilon * math.sqrt(m) / delta,
    )


# ---------------------------------------------------------------------------
# Entropy accounting
# ---------------------------------------------------------------------------


def fit_loglog_slope(x: np.ndarray, y: np.ndarray, weights: np.ndarray | None = None):
    """Weighted least-squares slope of y against x; returns (slope, se, intercept)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size or x.size < 2 or np.unique(x).size < 2:
        raise ConfigError("degenerate regression: need >= 2 distinct finite points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ConfigError("regression inputs must be finite")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    wsum = w.sum()
    xbar = (w * x).sum() / wsum
    ybar = (w * y).sum() / wsum
    sxx = (w * (x - xbar) ** 2).sum()
    sxy = (w * (x - xbar) * (y - ybar)).sum()
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    resid = y - intercept - slope * x
    dof = max(1, x.size - 2)
    se = math.sqrt(max(0.0, (w * resid**2).sum() / dof / sxx))
    return slope, se, intercept


def net_cardinality_exponent(e: Ellipsoid, deltas):
    """Fitted slope of log log#Net against log(1/delta).

    Uses the midpoint of the certified log-cardinality interval for every
    delta (uniformly, so the regression never mixes exact and bounded
    counts).  The target is d/s up to the lattice construction's log factor.
    """
    deltas = sorted(set(float(d) for d in deltas), reverse=True)
    if len(deltas) < 4:
        raise ConfigError("need at least 4 distinct deltas")
    # "one decade" admits the canonical 0.4 .. 0.05 grid (factor 8)
    if math.log10(max(deltas) / min(deltas)) < 0.9:
        raise ConfigError("deltas must span at least one decade")
    logs = []
    for d in deltas:
        net = build_delta_net(e, d, materialize=False)
        logs.append(net.log_count_mid())
    x = np.log(1.0 / np.array(deltas))
    y = np.log(np.array(logs))
    slope, se, _ = fit_loglog_slope(x, y)
    return slope, se, list(zip(deltas, logs))
