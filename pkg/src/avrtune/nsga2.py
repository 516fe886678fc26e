"""
NSGA-II with pluggable (chaotic) random sources, maximizing both objectives.

Objectives are ``(J1, J2) = (gain crossover [rad/s], phase margin [deg])``
of the effective AVR open loop. Individuals whose loop lacks a crossover or
positive gain/phase margins get ``(-penalty, -penalty)`` and sink to the
worst fronts.

All draws from the source happen in the sequential variation phase, in a
fixed member order, so the result does not depend on ``workers``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .chaos import ChaoticSource, gaussian_from, make_source
from .errors import AvrTuneError, ConfigError
from .fractional import GAIN_BOUNDS, ORDER_BOUNDS, FopidParams
from .margins import CROSSING_RULES, find_margins
from .plant import AvrParams, exact_loop

logger = logging.getLogger(__name__)

PENALTY = 1e6
CONTROLLERS = ("fopid", "pid")
SOURCES = ("henon", "logistic", "uniform")


def default_bounds(controller: str) -> list[tuple[float, float]]:
    gains = [GAIN_BOUNDS] * 3
    return gains if controller == "pid" else gains + [ORDER_BOUNDS] * 2


@dataclass
class Nsga2Config:
    controller: str = "fopid"
    pop_size: int = 200
    generations: int = 150
    elite_count: int = 30
    crossover_fraction: float = 0.2
    mutation_sigma: float = 0.05
    pareto_fraction: float = 0.35
    source: str = "henon"
    seed: int = 0
    bounds: list | None = None
    penalty: float = PENALTY
    normalized_crowding: bool = False
    crossing: str = "highest"
    workers: int = 1

    def __post_init__(self):
        if self.bounds is None:
            self.bounds = default_bounds(self.controller)
        self.bounds = [tuple(float(v) for v in b) for b in self.bounds]

    def validate(self) -> Nsga2Config:
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"controller must be one of {CONTROLLERS}")
        if self.source not in SOURCES:
            raise ConfigError(f"source must be one of {SOURCES}")
        if self.pop_size < 2:
            raise ConfigError("pop_size must be at least 2")
        if self.generations < 0:
            raise ConfigError("generations must be non-negative")
        if not 0 <= self.elite_count < self.pop_size:
            raise ConfigError("need 0 <= elite_count < pop_size")
        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise ConfigError("crossover_fraction must lie in [0, 1]")
        if not 0.0 < self.pareto_fraction <= 1.0:
            raise ConfigError("pareto_fraction must lie in (0, 1]")
        if self.mutation_sigma < 0:
            raise ConfigError("mutation_sigma must be non-negative")
        n = 3 if self.controller == "pid" else 5
        if len(self.bounds) != n:
            raise ConfigError(f"{self.controller} genome needs {n} bounds, got {len(self.bounds)}")
        if any(not lo < hi for lo, hi in self.bounds):
            raise ConfigError("each bound must satisfy lo < hi")
        if self.crossing not in CROSSING_RULES:
            raise ConfigError(f"crossing must be one of {CROSSING_RULES}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounds"] = [list(b) for b in self.bounds]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Nsga2Config:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown optimizer keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Individual:
    genome: tuple[float, ...]
    objectives: tuple[float, float] = (-PENALTY, -PENALTY)
    feasible: bool = False
    rank: int = 0
    crowding: float = 0.0
    index: int = 0

    @property
    def params(self) -> FopidParams:
        return FopidParams.from_genome(self.genome)


@dataclass
class RunResult:
    front: list[Individual]
    population: list[Individual]
    history: list[dict] = field(default_factory=list)


def evaluate(
    genome: Sequence[float],
    plant: AvrParams = AvrParams(),
    penalty: float = PENALTY,
    crossing: str = "highest",
):
    """Objectives ``(wgc, pm)`` and feasibility of one genome.

    Feasible means a gain crossover exists with positive phase margin and
    positive (or infinite) gain margin; otherwise both objectives are
    ``-penalty``.
    """
    params = FopidParams.from_genome(genome)
    try:
        m = find_margins(exact_loop(params, plant), crossing=crossing)
    except (AvrTuneError, FloatingPointError, ValueError, ZeroDivisionError):
        return (-penalty, -penalty), False
    if m.pm > 0 and m.gm_db > 0 and math.isfinite(m.pm):
        return (m.wgc, m.pm), True
    return (-penalty, -penalty), False


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """Pareto dominance under maximization."""
    if len(a) != len(b):
        raise ValueError("objective vectors differ in length")
    return all(x >= y for x, y in zip(a, b)) and any(x > y for x, y in zip(a, b))


def _objective_matrix(pop) -> np.ndarray:
    if len(pop) and isinstance(pop[0], Individual):
        return np.array([ind.objectives for ind in pop], dtype=float)
    return np.atleast_2d(np.asarray(pop, dtype=float))


def non_dominated_sort(pop) -> np.ndarray:
    """Ranks (1 = best) by repeatedly peeling the non-dominated layer.

    Accepts Individuals (ranks are also written back) or an ``(n, m)``
    objective array.
    """
    F = _objective_matrix(pop)
    n = len(pop)
    ranks = np.zeros(n, dtype=int)
    if n:
        ge = np.all(F[:, None, :] >= F[None, :, :], axis=2)
        gt = np.any(F[:, None, :] > F[None, :, :], axis=2)
        dom = ge & gt  # dom[i, j]: i dominates j
        remaining = np.ones(n, dtype=bool)
        r = 0
        while remaining.any():
            r += 1
            dominated = dom[remaining][:, remaining].any(axis=0)
            layer = np.flatnonzero(remaining)[~dominated]
            ranks[layer] = r
            remaining[layer] = False
    if n and isinstance(pop[0], Individual):
        for ind, r in zip(pop, ranks):
            ind.rank = int(r)
    return ranks


def crowding_distance(front, normalized: bool = False) -> np.ndarray:
    """Crowding distance within one front.

    Boundary members in each objective get ``inf``; interior members sum the
    raw gap between their sorted neighbours. ``normalized=True`` divides
    each objective's gaps by that objective's range instead.
    """
    F = _objective_matrix(front)
    n = len(front)
    d = np.zeros(n)
    if n <= 2:
        d[:] = math.inf
    else:
        for k in range(F.shape[1]):
            order = np.argsort(F[:, k], kind="stable")
            fk = F[order, k]
            span = fk[-1] - fk[0]
            gaps = fk[2:] - fk[:-2]
            if normalized:
                gaps = gaps / span if span > 0 else np.zeros_like(gaps)
            d[order[1:-1]] += gaps
            d[order[0]] = d[order[-1]] = math.inf
    if n and isinstance(front[0], Individual):
        for ind, v in zip(front, d):
            ind.crowding = float(v)
    return d


def crowded_compare(a: Individual, b: Individual) -> Individual:
    """Winner under (lower rank, then larger crowding, then lower index)."""
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    if a.crowding != b.crowding:
        return a if a.crowding > b.crowding else b
    return a if a.index <= b.index else b


def _crowded_key(ind: Individual):
    return (ind.rank, -ind.crowding, ind.index)


def _clamp(genes, bounds) -> tuple[float, ...]:
    return tuple(min(hi, max(lo, float(g))) for g, (lo, hi) in zip(genes, bounds))


def intermediate_crossover(p1, p2, source: ChaoticSource, bounds=None):
    """Children at a random weighted average of the parents, gene by gene."""
    c1, c2 = [], []
    for a, b in zip(p1, p2):
        u = source.next_uniform()
        c1.append(a + u * (b - a))
        c2.append(b + u * (a - b))
    if bounds is None:
        return tuple(c1), tuple(c2)
    return _clamp(c1, bounds), _clamp(c2, bounds)


def gaussian_mutation(genome, source: ChaoticSource, sigma_frac: float, bounds):
    """Add a Gaussian deviate to one randomly chosen gene, then clamp."""
    n = len(genome)
    i = min(int(source.next_uniform() * n), n - 1)
    lo, hi = bounds[i]
    genes = list(genome)
    genes[i] += gaussian_from(source, 0.0, sigma_frac * (hi - lo))
    return _clamp(genes, bounds)


def _tournament(pop: list[Individual], source: ChaoticSource) -> Individual:
    n = len(pop)
    a = pop[min(int(source.next_uniform() * n), n - 1)]
    b = pop[min(int(source.next_uniform() * n), n - 1)]
    return crowded_compare(a, b)


def _rank_population(pop: list[Individual], normalized: bool) -> None:
    for i, ind in enumerate(pop):
        ind.index = i
    ranks = non_dominated_sort(pop)
    for r in np.unique(ranks):
        crowding_distance([pop[i] for i in np.flatnonzero(ranks == r)], normalized)


class _Evaluator:
    """Memoizing, optionally process-parallel objective evaluation."""

    def __init__(self, plant: AvrParams, penalty: float, workers: int, crossing: str = "highest"):
        self.plant = plant
        self.crossing = crossing
        self.penalty = penalty
        self.workers = workers
        self.cache: dict[tuple, tuple] = {}

    def __call__(self, pop: list[Individual]) -> None:
        todo = sorted({ind.genome for ind in pop} - self.cache.keys())
        if todo:
            if self.workers > 1 and len(todo) > 1:
                with ProcessPoolExecutor(self.workers) as ex:
                    results = list(
                        ex.map(evaluate, todo, [self.plant] * len(todo), [self.penalty] * len(todo),
                               [self.crossing] * len(todo),
                               chunksize=max(1, len(todo) // (4 * self.workers)))
                    )
            else:
                results = [evaluate(g, self.plant, self.penalty, self.crossing) for g in todo]
            self.cache.update(zip(todo, results))
        for ind in pop:
            ind.objectives, ind.feasible = self.cache[ind.genome]


def _best_feasible(pop: list[Individual]) -> dict:
    feas = [ind for ind in pop if ind.rank == 1 and ind.feasible]
    if not feas:
        return {"best_wgc": None, "best_pm": None, "n_rank1_feasible": 0}
    return {
        "best_wgc": max(ind.objectives[0] for ind in feas),
        "best_pm": max(ind.objectives[1] for ind in feas),
        "n_rank1_feasible": len(feas),
    }


def _next_generation(pop: list[Individual], cfg: Nsga2Config, source: ChaoticSource) -> list[Individual]:
    ordered = sorted(pop, key=_crowded_key)
    elites = [Individual(ind.genome) for ind in ordered[: cfg.elite_count]]
    n_children = cfg.pop_size - cfg.elite_count
    n_cross = int(round(cfg.crossover_fraction * n_children))
    children: list[tuple[float, ...]] = []
    while len(children) < n_cross:
        p1 = _tournament(pop, source)
        p2 = _tournament(pop, source)
        c1, c2 = intermediate_crossover(p1.genome, p2.genome, source, cfg.bounds)
        children.append(c1)
        if len(children) < n_cross:
            children.append(c2)
    while len(children) < n_children:
        parent = _tournament(pop, source)
        children.append(gaussian_mutation(parent.genome, source, cfg.mutation_sigma, cfg.bounds))
    return elites + [Individual(g) for g in children]


def initial_population(cfg: Nsga2Config, source: ChaoticSource) -> list[Individual]:
    pop = []
    for _ in range(cfg.pop_size):
        genes = tuple(lo + source.next_uniform() * (hi - lo) for lo, hi in cfg.bounds)
        pop.append(Individual(genes))
    return pop


def run(
    config: Nsga2Config,
    plant: AvrParams = AvrParams(),
    source: ChaoticSource | None = None,
) -> RunResult:
    """Run the optimizer and return the truncated rank-1 front.

    The front keeps at most ``ceil(pareto_fraction * pop_size)`` distinct
    genomes, preferring larger crowding distance (ties by population index).
    """
    cfg = config.validate()
    source = source if source is not None else make_source(cfg.source, cfg.seed)
    evaluator = _Evaluator(plant, cfg.penalty, cfg.workers, cfg.crossing)

    pop = initial_population(cfg, source)
    history = []
    for gen in range(cfg.generations + 1):
        evaluator(pop)
        _rank_population(pop, cfg.normalized_crowding)
        stats = {"generation": gen, **_best_feasible(pop)}
        history.append(stats)
        logger.debug("generation %d: %s", gen, stats)
        if gen == cfg.generations:
            break
        pop = _next_generation(pop, cfg, source)

    rank1, seen = [], set()
    for ind in sorted((ind for ind in pop if ind.rank == 1), key=_crowded_key):
        if ind.genome not in seen:
            seen.add(ind.genome)
            rank1.append(ind)
    keep = math.ceil(cfg.pareto_fraction * cfg.pop_size)
    front = sorted(rank1[:keep], key=lambda ind: (ind.objectives[0], -ind.objectives[1]))
    return RunResult(front=front, population=pop, history=history)
