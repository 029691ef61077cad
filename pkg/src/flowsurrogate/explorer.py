"""Genetic-algorithm search over the normalized parameter box.

Fitness is a weighted sum of three scores against the user's scored
preferences: similarity of predicted latents, parameter-space diversity, and
predictive uncertainty. Candidate evaluation uses the latent fast path
(no decoding) with a per-candidate seed derived from the run seed and the
candidate id, so replaying a seeded run reproduces the full lineage exactly
and evaluations could run in parallel without changing results.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .clustering import kmeans, pca_top2
from .data import ParamSpace
from .errors import ConfigError, ContractError, DomainError, UsageError
from .flow import FlowModel, extract_zc, unconditional_inverse
from .surrogate import denormalize, normalize, predict_latent_stats

SIMILARITY_EPS = 1e-6
SIMILARITY_CAP = 1e6


@dataclass
class PreferenceEntry:
    params: np.ndarray             # normalized
    score: float                   # user preference in [-1, 1]
    latent_mean: np.ndarray
    raw_params: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.params = np.asarray(self.params, dtype=np.float64).ravel()
        self.latent_mean = np.asarray(self.latent_mean, dtype=np.float64).ravel()
        if not -1.0 <= self.score <= 1.0:
            raise DomainError(f"preference score {self.score} outside [-1, 1]")


@dataclass
class FitnessWeights:
    w1: float
    w2: float
    w3: float

    def __post_init__(self) -> None:
        for name, w in (("w1", self.w1), ("w2", self.w2), ("w3", self.w3)):
            if not -1.0 <= w <= 1.0:
                raise DomainError(f"{name} = {w} outside [-1, 1]")

    def combine(self, sim: float, div: float, unc: float) -> float:
        return self.w1 * sim + self.w2 * div + self.w3 * unc


@dataclass
class Candidate:
    id: int
    params: np.ndarray             # normalized
    parent_ids: list[int] = dc_field(default_factory=list)
    elite: bool = False
    latent_mean: np.ndarray | None = None
    latent_var: np.ndarray | None = None
    sim: float | None = None
    div: float | None = None
    unc: float | None = None
    fitness: float | None = None

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None


@dataclass
class GAConfig:
    population: int = 40
    generations: int = 30
    mutation_rate: float = 0.2
    mutation_sigma: float = 0.1
    k_nearest: int = 5
    elite_count: int = 1
    uq_samples: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ConfigError("population must be >= 2")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigError("mutation_rate must lie in [0, 1]")
        if self.mutation_sigma <= 0:
            raise ConfigError("mutation_sigma must be positive")
        if self.k_nearest < 1:
            raise ConfigError("k_nearest must be >= 1")
        if not 0 <= self.elite_count < self.population:
            raise ConfigError("elite_count must be in [0, population)")
        if self.uq_samples < 1:
            raise ConfigError("uq_samples must be >= 1")


@dataclass
class GenerationRecord:
    index: int
    candidates: list[Candidate]
    weights: FitnessWeights
    mean_fitness: float
    max_fitness: float


def similarity_score(cand_latent: np.ndarray, prefs: list[PreferenceEntry]) -> float:
    """Preference-weighted inverse cosine distance to the scored latents.

    distance = (1 - cosine) + eps, so a term is at most 1e6 * |score|; the
    explicit cap keeps that true against roundoff.
    """
    if not prefs:
        raise UsageError("similarity needs at least one preference")
    cand_latent = np.asarray(cand_latent, dtype=np.float64).ravel()
    norm_c = float(np.linalg.norm(cand_latent))
    if norm_c == 0.0:
        raise DomainError("candidate latent has zero norm")
    total = 0.0
    for pref in prefs:
        norm_p = float(np.linalg.norm(pref.latent_mean))
        if norm_p == 0.0:
            raise DomainError("preference latent has zero norm")
        cos = float(np.dot(cand_latent, pref.latent_mean) / (norm_c * norm_p))
        cos = min(1.0, max(-1.0, cos))
        dist = (1.0 - cos) + SIMILARITY_EPS
        term = pref.score / dist
        cap = SIMILARITY_CAP * abs(pref.score)
        total += min(cap, max(-cap, term))
    return total


def diversity_score(params: np.ndarray, prefs: list[PreferenceEntry], k: int) -> float:
    """Summed L1 distance to the min(k, |prefs|) nearest preference vectors."""
    if not prefs:
        raise UsageError("diversity needs at least one preference")
    params = np.asarray(params, dtype=np.float64).ravel()
    dists = sorted(float(np.abs(params - p.params).sum()) for p in prefs)
    return float(sum(dists[: min(k, len(dists))]))


def uncertainty_score(var_latent: np.ndarray) -> float:
    var_latent = np.asarray(var_latent, dtype=np.float64).ravel()
    if np.any(var_latent < 0):
        raise ContractError("variance vector has negative entries")
    return float(var_latent.mean())


def candidate_seed(base_seed: int, candidate_id: int) -> list[int]:
    """Deterministic per-candidate seed material for the latent sampler."""
    return [base_seed, candidate_id]


class FlowFitnessEvaluator:
    """Fills a candidate's latent stats and fitness from the frozen flow."""

    def __init__(self, flow: FlowModel, prefs: list[PreferenceEntry],
                 weights: FitnessWeights, config: GAConfig):
        if not prefs:
            raise UsageError("optimization needs at least one preference")
        self.flow = flow
        self.prefs = prefs
        self.weights = weights
        self.config = config

    def __call__(self, cand: Candidate) -> None:
        mean, var = predict_latent_stats(
            self.flow, cand.params, self.config.uq_samples,
            seed=candidate_seed(self.config.seed, cand.id))
        cand.latent_mean = mean
        cand.latent_var = var
        cand.sim = similarity_score(mean, self.prefs)
        cand.div = diversity_score(cand.params, self.prefs, self.config.k_nearest)
        cand.unc = uncertainty_score(var)
        cand.fitness = self.weights.combine(cand.sim, cand.div, cand.unc)


def fitness(cand: Candidate, prefs: list[PreferenceEntry], weights: FitnessWeights,
            flow: FlowModel, config: GAConfig | None = None) -> Candidate:
    """Evaluate one candidate in place and return it."""
    FlowFitnessEvaluator(flow, prefs, weights, config or GAConfig())(cand)
    return cand


def select(population: list[Candidate], rng: np.random.Generator,
           count: int) -> list[tuple[Candidate, Candidate]]:
    """Rank-based roulette: probability proportional to fitness rank
    (worst 1 ... best p). Equal-fitness candidates share the mean of the
    ranks they occupy, so ties select uniformly; ordering inside a tie group
    is by id and only affects which object a drawn slot maps to."""
    for cand in population:
        if not cand.evaluated:
            raise UsageError(f"candidate {cand.id} has no fitness")
    by_rank = sorted(population, key=lambda c: (c.fitness, c.id))
    p = len(by_rank)
    weights = np.empty(p)
    i = 0
    while i < p:
        j = i
        while j < p and by_rank[j].fitness == by_rank[i].fitness:
            j += 1
        weights[i:j] = (i + 1 + j) / 2.0  # mean of positions i+1 .. j
        i = j
    cum = np.cumsum(weights / weights.sum())
    pairs = []
    for _ in range(count):
        a = by_rank[int(np.searchsorted(cum, rng.random(), side="right"))]
        b = by_rank[int(np.searchsorted(cum, rng.random(), side="right"))]
        pairs.append((a, b))
    return pairs


def crossover(parent_a: np.ndarray, parent_b: np.ndarray,
              rng: np.random.Generator) -> np.ndarray:
    """Single-point crossover; with one-dimensional parents there is no cut,
    so the offspring is a uniform pick of one parent."""
    a = np.asarray(parent_a, dtype=np.float64).ravel()
    b = np.asarray(parent_b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise UsageError("parents must have equal dims")
    n = a.size
    if n < 2:
        return (a if rng.random() < 0.5 else b).copy()
    cut = int(rng.integers(1, n))
    return np.concatenate([a[:cut], b[cut:]])


def mutate(params: np.ndarray, rate: float, sigma: float,
           rng: np.random.Generator) -> np.ndarray:
    """Per-coordinate Gaussian mutation, clamped to the unit box."""
    params = np.asarray(params, dtype=np.float64).ravel()
    mask = rng.random(params.size) < rate
    noise = rng.normal(0.0, sigma, params.size)
    return np.clip(params + mask * noise, 0.0, 1.0)


def make_preference(flow: FlowModel, space: ParamSpace, raw_params, score: float,
                    seed: int, uq_samples: int = 8) -> PreferenceEntry:
    """Build a preference entry with its cached latent mean.

    The latent is sampled with the given seed, so any two callers using the
    same seed and sample count (the service and the headless CLI) produce
    identical entries.
    """
    raw = np.asarray(raw_params, dtype=np.float64).ravel()
    params = normalize(space, raw)
    mean, _ = predict_latent_stats(flow, params, uq_samples, seed=seed)
    return PreferenceEntry(params=params, score=float(score),
                           latent_mean=mean, raw_params=raw)


def optimize(config: GAConfig, prefs: list[PreferenceEntry],
             weights: FitnessWeights, flow: FlowModel | None,
             evaluator=None, n_params: int | None = None,
             on_generation=None) -> list[GenerationRecord]:
    """Run the evolutionary loop and record the full lineage.

    Generation 0 is uniform over the box. Each later generation carries the
    top ``elite_count`` candidates over unchanged (same fitness, self-parent
    link) and fills the rest with mutate(crossover(select(...))) offspring.
    ``on_generation`` is invoked with each finished GenerationRecord, which
    is how the service publishes progress snapshots.
    """
    if evaluator is None:
        if flow is None:
            raise UsageError("optimize needs a flow model or an explicit evaluator")
        evaluator = FlowFitnessEvaluator(flow, prefs, weights, config)
    if n_params is None:
        if flow is not None:
            n_params = flow.cond_dim
        elif prefs:
            n_params = prefs[0].params.size
        else:
            raise UsageError("cannot infer parameter dimensionality")

    rng = np.random.default_rng(config.seed)
    next_id = 0

    def new_candidate(params, parent_ids=(), elite=False) -> Candidate:
        nonlocal next_id
        cand = Candidate(id=next_id, params=np.asarray(params, dtype=np.float64),
                         parent_ids=list(parent_ids), elite=elite)
        next_id += 1
        return cand

    def evaluate(cand: Candidate) -> None:
        evaluator(cand)
        if cand.fitness is None or not np.isfinite(cand.fitness):
            raise ContractError(f"non-finite fitness for candidate {cand.id}")

    population = [new_candidate(row) for row in rng.random((config.population, n_params))]
    for cand in population:
        evaluate(cand)
    records = [_record(0, population, weights)]
    if on_generation is not None:
        on_generation(records[0])

    for gen in range(1, config.generations + 1):
        ranked = sorted(population, key=lambda c: (-c.fitness, c.id))
        elites = []
        for old in ranked[: config.elite_count]:
            copy = new_candidate(old.params.copy(), parent_ids=[old.id], elite=True)
            copy.latent_mean = old.latent_mean
            copy.latent_var = old.latent_var
            copy.sim, copy.div, copy.unc = old.sim, old.div, old.unc
            copy.fitness = old.fitness
            elites.append(copy)
        pairs = select(population, rng, config.population - config.elite_count)
        offspring = []
        for a, b in pairs:
            child_params = mutate(crossover(a.params, b.params, rng),
                                  config.mutation_rate, config.mutation_sigma, rng)
            parent_ids = [a.id] if a.id == b.id else [a.id, b.id]
            child = new_candidate(child_params, parent_ids=parent_ids)
            evaluate(child)
            offspring.append(child)
        population = elites + offspring
        records.append(_record(gen, population, weights))
        if on_generation is not None:
            on_generation(records[-1])
    return records


def _record(index: int, population: list[Candidate],
            weights: FitnessWeights) -> GenerationRecord:
    fits = [c.fitness for c in population]
    return GenerationRecord(
        index=index,
        candidates=list(population),
        weights=weights,
        mean_fitness=float(np.mean(fits)),
        max_fitness=float(np.max(fits)),
    )


def cluster_and_recommend(final_gen: GenerationRecord, k: int, flow: FlowModel,
                          seed: int = 0):
    """K-means over the final generation's latent means; each center is
    reverse-predicted to a normalized parameter vector.

    Returns (recommendations, labels); recommendations are dicts with the
    predicted parameters, cluster size and member candidate ids.
    """
    candidates = final_gen.candidates
    if k < 1 or k > len(candidates):
        raise UsageError(f"k = {k} must be in [1, {len(candidates)}]")
    latents = np.array([c.latent_mean for c in candidates])
    result = kmeans(latents, k, seed=seed)
    recommendations = []
    for j in range(k):
        member_ids = [candidates[i].id for i in range(len(candidates))
                      if result.labels[i] == j]
        m = unconditional_inverse(flow, result.centers[j])
        params = np.clip(extract_zc(flow, m), 0.0, 1.0)
        recommendations.append({
            "params_normalized": params,
            "cluster_size": len(member_ids),
            "member_ids": member_ids,
        })
    return recommendations, result.labels


def project2d(latents: np.ndarray) -> np.ndarray:
    """2-D PCA coordinates for the projection view."""
    projected, _, _ = pca_top2(latents)
    return projected


def lineage_to_doc(records: list[GenerationRecord], space: ParamSpace | None = None) -> dict:
    """Machine-readable lineage export consumed by the service and the UI."""
    generations = []
    for rec in records:
        cands = []
        for c in rec.candidates:
            entry = {
                "id": c.id,
                "params": [float(v) for v in c.params],
                "sim": c.sim,
                "div": c.div,
                "unc": c.unc,
                "fitness": c.fitness,
                "parent_ids": list(c.parent_ids),
                "elite": bool(c.elite),
            }
            if space is not None:
                entry["raw_params"] = [float(v) for v in denormalize(space, c.params)]
            cands.append(entry)
        generations.append({
            "index": rec.index,
            "weights": [rec.weights.w1, rec.weights.w2, rec.weights.w3],
            "mean_fitness": rec.mean_fitness,
            "max_fitness": rec.max_fitness,
            "candidates": cands,
        })
    return {"generations": generations}
