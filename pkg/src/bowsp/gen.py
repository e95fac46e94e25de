"""Instance generation: seeded random benchmarks, the worst-case family,
and the purchase-order example workflow."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core import (
    DEFAULT_M,
    ConsultantUser,
    ExplicitUser,
    LinearUser,
    Schema,
    StaffUser,
    WSPError,
    at_least,
    at_most,
    binding_of_duty,
    mask_of,
    load_instance,
    separation_of_duty,
)

# stream ids: one independent generator per kind of entity
_STAFF, _CONSULTANTS, _SOD, _AT_MOST, _AT_LEAST = range(5)
_MAX_SCOPE_TRIES = 10_000


@dataclass(frozen=True)
class GenParams:
    """Generator parameters.

    ``d`` is the Poisson mean of the authorized-set size (a density of 10 %
    on ``k`` steps is ``d = 0.1 * k``), ``e`` the fraction of step pairs
    carrying a separation-of-duty constraint.  The optional fields scale the
    instance down for exhaustive testing; ``None`` keeps the benchmark sizes
    (``10k`` staff, 10 consultants, ``k`` counting constraints of each type
    over 5-step scopes).
    """

    k: int
    d: float
    e: float
    seed: int = 0
    staff: int | None = None
    consultants: int = 10
    counting: int | None = None
    scope_size: int = 5
    M: int = DEFAULT_M
    BA: int = 1000
    BC: int = 1000

    def __post_init__(self):
        if self.k < 2:
            raise WSPError("bad-params", "k must be at least 2")
        if not self.d > 0:
            raise WSPError("bad-params", "d must be positive")
        if not 0 <= self.e <= 1:
            raise WSPError("bad-params", "e must lie in [0, 1]")
        if not 0 <= self.seed < 2**64:
            raise WSPError("bad-params", "seed must be a 64-bit unsigned integer")
        if self.scope_size < 1:
            raise WSPError("bad-params", "scope_size must be positive")


def _stream(seed: int, which: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, which])))


def poisson(rng: np.random.Generator, lam: float) -> int:
    """Poisson variate by inversion (product of uniforms)."""
    limit = math.exp(-lam)
    count = 0
    prod = rng.random()
    while prod > limit:
        count += 1
        prod *= rng.random()
    return count


def _sample_steps(rng: np.random.Generator, pool: list[int], size: int) -> int:
    picked = rng.choice(len(pool), size=size, replace=False) if size else []
    return mask_of(pool[i] for i in picked)


def _distinct_scopes(rng, k: int, size: int, count: int, what: str) -> list[list[int]]:
    if count == 0:
        return []
    if size > k or math.comb(k, size) < count:
        raise WSPError("scope-exhaustion", f"cannot draw {count} distinct {size}-step {what} scopes from {k} steps")
    seen: set[tuple[int, ...]] = set()
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > _MAX_SCOPE_TRIES:
            raise WSPError("scope-exhaustion", f"{what}: no fresh scope after {tries} draws")
        scope = tuple(sorted(int(s) for s in rng.choice(k, size=size, replace=False)))
        if scope in seen:
            continue
        seen.add(scope)
        out.append(list(scope))
    return out


def generate(params: GenParams) -> Schema:
    k, M = params.k, params.M
    steps = list(range(k))
    users = []

    rng = _stream(params.seed, _STAFF)
    for _ in range(10 * k if params.staff is None else params.staff):
        a_size = min(poisson(rng, params.d), k - 2)
        A = _sample_steps(rng, steps, a_size)
        B = _sample_steps(rng, [s for s in steps if not A >> s & 1], 2)
        sigma = int(rng.integers(5, 16))
        users.append(StaffUser(A, B, sigma))

    rng = _stream(params.seed, _CONSULTANTS)
    for _ in range(params.consultants):
        b_size = min(poisson(rng, params.d), k)
        B = _sample_steps(rng, steps, b_size)
        sigma = int(rng.integers(10, 31))
        users.append(ConsultantUser(B, sigma))

    constraints = []
    rng = _stream(params.seed, _SOD)
    pairs = list(itertools.combinations(steps, 2))
    n_sod = math.floor(params.e * len(pairs) + 0.5)
    for i in sorted(rng.choice(len(pairs), size=n_sod, replace=False).tolist()):
        constraints.append(separation_of_duty(*pairs[i], penalty=M))

    counting = k if params.counting is None else params.counting
    size = params.scope_size
    rng = _stream(params.seed, _AT_MOST)
    for scope in _distinct_scopes(rng, k, size, counting, "at-most"):
        pen = {4: int(rng.integers(3, 6)), 5: int(rng.integers(10, 16))}
        constraints.append(at_most(scope, min(3, size), {m: pen[m] for m in range(4, size + 1)}))
    rng = _stream(params.seed, _AT_LEAST)
    for scope in _distinct_scopes(rng, k, size, counting, "at-least"):
        r = min(3, size)
        pen = {1: M, 2: int(rng.integers(1, 4))}
        constraints.append(at_least(scope, r, {m: pen[m] for m in range(1, r)}))

    return Schema(k=k, users=tuple(users), constraints=tuple(constraints), M=M,
                  BA=params.BA, BC=params.BC)


def small_params(k: int, seed: int, n: int = 8, d: float | None = None, e: float = 0.3,
                 M: int = DEFAULT_M) -> GenParams:
    """Scaled-down generator settings with ``n`` users, for exhaustive checks.

    A small ``M`` (say 30) makes authorization and SoD violations comparable
    to the stand-in penalties, which gives fronts with several points.
    """
    consultants = max(1, n // 5)
    return GenParams(
        k=k, d=d if d is not None else max(1.0, 0.4 * k), e=e, seed=seed,
        staff=n - consultants, consultants=consultants,
        counting=min(2, math.comb(k, min(4, k))) if k >= 3 else 0,
        scope_size=min(4, k), M=M,
    )


# ---------------------------------------------------------------------------
# Worst-case family: every pattern is its own Pareto point

INFINITE_WEIGHT = 2**40


def worst_case_family(k: int, infinite: int = INFINITE_WEIGHT) -> Schema:
    """Schema whose Pareto front has one point per set partition of the steps."""
    if not 1 <= k <= 10:
        raise WSPError("k-too-large", "worst-case family supports 1 <= k <= 10")
    pairs = list(itertools.combinations(range(k), 2))
    constraints = [separation_of_duty(s, t, penalty=2**i) for i, (s, t) in enumerate(pairs, start=1)]
    total = sum(2**i for i in range(1, len(pairs) + 1))
    if infinite <= total:
        raise WSPError("bad-params", "the stand-in for infinity must exceed every finite weight")
    users = []
    for T in range(1, 1 << k):
        cut = sum(2**i for i, (s, t) in enumerate(pairs, start=1) if (T >> s & 1) != (T >> t & 1))
        # cut weights are sums of 2^i with i >= 1, so halving stays integral
        users.append(ExplicitUser(((T, cut // 2),), infinite))
    names = tuple("u{" + ",".join(f"s{s + 1}" for s in range(k) if T >> s & 1) + "}" for T in range(1, 1 << k))
    return Schema(k=k, users=tuple(users), constraints=tuple(constraints), M=infinite,
                  BA=total, BC=total, user_names=names)


# ---------------------------------------------------------------------------
# Purchase-order example

PURCHASE_ORDER_AUTH = {
    # user: authorized steps (1-based)
    1: (1, 3, 4), 2: (1, 3, 4),
    3: (1, 3), 4: (1, 3), 5: (1, 3),
    6: (2, 3, 5),
    7: (3, 4, 5),
    8: (5, 6),
}
PURCHASE_ORDER_ORDER = ((1, 2), (2, 3), (2, 4), (3, 5), (4, 6), (5, 6))


def purchase_order_fixture(M: int = DEFAULT_M) -> Schema:
    """Six-step purchase-order workflow with eight users.

    Authorized pairs cost 0 and everything else ``M``; the constraints are
    SoD(s1, s2), BoD(s1, s3) and SoD(s3, s5), each with penalty ``M``.
    """
    users = tuple(
        LinearUser(tuple(0 if s in steps else M for s in range(1, 7)))
        for _, steps in sorted(PURCHASE_ORDER_AUTH.items())
    )
    constraints = (
        separation_of_duty(0, 1, M),
        binding_of_duty(0, 2, M),
        separation_of_duty(2, 4, M),
    )
    order = frozenset((i - 1, j - 1) for i, j in PURCHASE_ORDER_ORDER)
    return Schema(k=6, users=users, constraints=constraints, order=order, M=M, BA=1000, BC=1000)


def load_fixture() -> Schema:
    """The checked-in purchase-order instance document."""
    data = resources.files("bowsp").joinpath("data/purchase_order.json").read_bytes()
    return load_instance(data)
