"""Atom-search optimization over box-bounded spaces.

A population of atoms carries positions, velocities and fitness-derived
masses. Each iteration, every atom feels a Lennard-Jones-style
interaction force from the current K best atoms (K shrinks from N to 2
over the run) plus a constraint force pulling toward the best-known
position. Both force scales decay exponentially, so the swarm explores
early and settles late. Minimization convention throughout.

Per-atom, per-iteration random substreams make results independent of
evaluation order and bit-reproducible from the config seed.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .alexclf import Hyperparameters
from .seeding import substream

log = logging.getLogger(__name__)


@dataclass
class SearchSpace:
    """Box bounds plus per-dimension decoding kinds.

    Kinds: "continuous" (used as-is), "integer" (rounded), "categorical"
    (rounded position indexes into `choices[dim]`). Positions themselves
    are always continuous; kinds only affect decode().
    """

    lower: np.ndarray
    upper: np.ndarray
    kinds: list[str] | None = None
    choices: dict[int, list] | None = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower/upper must be 1-D and the same length")
        if not np.all(self.lower < self.upper):
            raise ValueError("need lower < upper in every dimension")
        if self.kinds is not None and len(self.kinds) != self.dims:
            raise ValueError("one kind per dimension")

    @property
    def dims(self) -> int:
        return self.lower.shape[0]

    def decode(self, position: np.ndarray) -> list:
        values = []
        for i, v in enumerate(np.asarray(position, dtype=np.float64)):
            kind = self.kinds[i] if self.kinds else "continuous"
            if kind == "continuous":
                values.append(float(v))
            elif kind == "integer":
                values.append(int(np.clip(round(v), self.lower[i], self.upper[i])))
            elif kind == "categorical":
                idx = int(np.clip(round(v), self.lower[i], self.upper[i]))
                values.append(self.choices[i][idx])
            else:
                raise ValueError(f"unknown dimension kind {kind!r}")
        return values


@dataclass
class AsoConfig:
    population: int = 20
    iterations: int = 50
    depth_weight: float = 50.0        # interaction force scale
    multiplier_weight: float = 0.2    # constraint force scale
    h_min_base: float = 1.1           # scaled-distance lower clamp before drift
    h_max: float = 1.24               # scaled-distance upper clamp
    force_law: str = "lj"             # "lj" (inverse powers) or "literal" (positive powers)
    seed: int = 0

    def validate(self):
        if self.population < 2:
            raise ValueError("population must be >= 2")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.depth_weight <= 0 or self.multiplier_weight <= 0:
            raise ValueError("force weights must be positive")
        if not self.h_min_base < self.h_max:
            raise ValueError("need h_min_base < h_max")
        if self.force_law not in ("lj", "literal"):
            raise ValueError("force_law must be 'lj' or 'literal'")


@dataclass
class AsoResult:
    position: np.ndarray
    fitness: float
    trace: list[tuple[int, float, float, int]]   # (iteration, best, mean, K)
    evaluations: int = 0


# ---- the individual update rules -----------------------------------------

def compute_masses(fitnesses) -> np.ndarray:
    """Exponentially scaled, normalized masses; the best atom is heaviest.

    All-equal fitness degenerates to uniform masses.
    """
    fit = np.asarray(fitnesses, dtype=np.float64)
    if fit.size == 0:
        raise ValueError("no atoms")
    if np.isnan(fit).any():
        raise ValueError("NaN fitness reached mass computation")
    best, worst = fit.min(), fit.max()
    if worst == best:
        scaled = np.ones_like(fit)
    else:
        scaled = np.exp(-(fit - best) / (worst - best))
    return scaled / scaled.sum()


def depth_function(nt: int, cfg: AsoConfig) -> float:
    """Interaction strength: cubic ramp-down times exp(-20 nt/mT)."""
    mt = cfg.iterations
    return cfg.depth_weight * (1.0 - (nt - 1) / mt) ** 3 * math.exp(-20.0 * nt / mt)


def drift_factor(nt: int, cfg: AsoConfig) -> float:
    """Quarter-sine rise from 0 to 0.1 across the run."""
    return 0.1 * math.sin(0.5 * math.pi * nt / cfg.iterations)


def lagrange_multiplier(nt: int, cfg: AsoConfig) -> float:
    """Constraint force scale: exp(-20 nt/mT) times the multiplier weight."""
    return cfg.multiplier_weight * math.exp(-20.0 * nt / cfg.iterations)


def length_scale(x_i: np.ndarray, kbest_positions: np.ndarray) -> float:
    """Distance from x_i to the centroid of the current K-best atoms."""
    centroid = np.asarray(kbest_positions, dtype=np.float64).mean(axis=0)
    return float(np.linalg.norm(np.asarray(x_i, dtype=np.float64) - centroid))


def h_scaled_distance(x_i, x_j, sigma: float, nt: int, cfg: AsoConfig) -> float:
    """Pair distance over the length scale, clamped into [h_min, h_max]."""
    h_min = cfg.h_min_base + drift_factor(nt, cfg)
    if sigma <= 0.0:
        return h_min
    ratio = float(np.linalg.norm(np.asarray(x_i) - np.asarray(x_j))) / sigma
    return float(np.clip(ratio, h_min, cfg.h_max))


def _force_bracket(h: np.ndarray, cfg: AsoConfig) -> np.ndarray:
    if cfg.force_law == "lj":
        return 2.0 * h ** -13.0 - h ** -7.0
    return 2.0 * h ** 13.0 - h ** 7.0


def interaction_force(x_i: np.ndarray, kbest_positions: np.ndarray, sigma: float,
                      nt: int, cfg: AsoConfig, rng: np.random.Generator) -> np.ndarray:
    """Total force on x_i from the K-best atoms.

    Each pair contributes -eta * (2 h^-13 - h^-7) along the unit vector
    from x_i toward the neighbor, weighted by one uniform draw per pair:
    a positive bracket pushes away (repulsion), a negative one pulls in.
    Zero-distance pairs (including the atom itself) contribute nothing
    but still consume their draw, keeping streams aligned.
    """
    x_i = np.asarray(x_i, dtype=np.float64)
    kbest = np.atleast_2d(np.asarray(kbest_positions, dtype=np.float64))
    eta = depth_function(nt, cfg)
    h_min = cfg.h_min_base + drift_factor(nt, cfg)
    rand_pair = rng.random(kbest.shape[0])

    diffs = kbest - x_i
    dist = np.linalg.norm(diffs, axis=1)
    live = dist > 0.0
    if not live.any():
        return np.zeros_like(x_i)
    if sigma <= 0.0:
        h = np.full(kbest.shape[0], h_min)
    else:
        h = np.clip(dist / sigma, h_min, cfg.h_max)
    magnitude = -eta * _force_bracket(h, cfg)
    unit = np.zeros_like(diffs)
    unit[live] = diffs[live] / dist[live, None]
    return ((rand_pair * magnitude)[:, None] * unit).sum(axis=0)


def constraint_force(x_i: np.ndarray, best_position: np.ndarray, nt: int,
                     cfg: AsoConfig) -> np.ndarray:
    """Pull toward the best-so-far position, decaying over the run."""
    lam = lagrange_multiplier(nt, cfg)
    return lam * (np.asarray(best_position, dtype=np.float64)
                  - np.asarray(x_i, dtype=np.float64))


def k_best_count(nt: int, n: int, mt: int) -> int:
    """Neighborhood size: N at the start, exactly 2 at the last iteration."""
    k = math.floor(n - (n - 2) * math.sqrt(nt / mt))
    return int(np.clip(k, 2, n))


# ---- the driver ------------------------------------------------------------

def _evaluate(objective, position, space: SearchSpace, cfg: AsoConfig,
              nt: int, i: int) -> tuple[float, np.ndarray]:
    """One objective call; a NaN result resamples the atom uniformly once."""
    value = float(objective(position))
    if not math.isnan(value):
        return value, position
    rng_resample = substream(cfg.seed, "resample", nt, i)
    resampled = rng_resample.uniform(space.lower, space.upper)
    value = float(objective(resampled))
    if math.isnan(value):
        raise RuntimeError("objective returned NaN for the resampled atom as well; "
                           "cannot continue")
    log.warning("objective returned NaN; atom resampled")
    return value, resampled


def step(positions: np.ndarray, velocities: np.ndarray, fitnesses: np.ndarray,
         best_position: np.ndarray, nt: int, cfg: AsoConfig,
         space: SearchSpace) -> tuple[np.ndarray, np.ndarray]:
    """Advance every atom one iteration (fitnesses are the current ones).

    Acceleration is (interaction + constraint) / mass; velocity gets a
    per-dimension uniform damping draw; positions clamp to the bounds
    with the velocity zeroed on any clamped dimension.
    """
    n = positions.shape[0]
    masses = compute_masses(fitnesses)
    k = k_best_count(nt, n, cfg.iterations)
    kbest_idx = np.argsort(fitnesses, kind="stable")[:k]
    kbest = positions[kbest_idx]
    new_positions = positions.copy()
    new_velocities = velocities.copy()
    for i in range(n):
        rng_i = substream(cfg.seed, "step", nt, i)
        sigma = length_scale(positions[i], kbest)
        f_i = interaction_force(positions[i], kbest, sigma, nt, cfg, rng_i)
        g_i = constraint_force(positions[i], best_position, nt, cfg)
        accel = (f_i + g_i) / masses[i]
        damp = rng_i.random(positions.shape[1])
        v = damp * velocities[i] + accel
        x = positions[i] + v
        clamped = np.clip(x, space.lower, space.upper)
        v[clamped != x] = 0.0
        new_positions[i] = clamped
        new_velocities[i] = v
    return new_positions, new_velocities


def optimize(objective, space: SearchSpace, cfg: AsoConfig) -> AsoResult:
    """Minimize `objective` over the box; deterministic given cfg.seed."""
    cfg.validate()
    n, mt, d = cfg.population, cfg.iterations, space.dims
    rng0 = substream(cfg.seed, "init")
    positions = rng0.uniform(space.lower, space.upper, (n, d))
    span = space.upper - space.lower
    velocities = rng0.uniform(-span / 10.0, span / 10.0, (n, d))

    fitnesses = np.empty(n)
    evaluations = 0
    for i in range(n):
        fitnesses[i], positions[i] = _evaluate(objective, positions[i], space, cfg, 0, i)
        evaluations += 1

    best_i = int(np.argmin(fitnesses))
    best_position = positions[best_i].copy()
    best_fitness = float(fitnesses[best_i])

    trace: list[tuple[int, float, float, int]] = []
    for nt in range(1, mt + 1):
        k = k_best_count(nt, n, mt)
        positions, velocities = step(positions, velocities, fitnesses,
                                     best_position, nt, cfg, space)
        for i in range(n):
            fitnesses[i], positions[i] = _evaluate(objective, positions[i], space, cfg, nt, i)
            evaluations += 1
            if fitnesses[i] < best_fitness:
                best_fitness = float(fitnesses[i])
                best_position = positions[i].copy()
        trace.append((nt, best_fitness, float(fitnesses.mean()), k))
    return AsoResult(position=best_position, fitness=best_fitness,
                     trace=trace, evaluations=evaluations)


def random_search(objective, space: SearchSpace, evaluations: int,
                  seed: int = 0) -> tuple[np.ndarray, float]:
    """Uniform-sampling baseline at a matched evaluation budget."""
    rng = substream(seed, "random-search")
    best_x, best_f = None, math.inf
    for _ in range(evaluations):
        x = rng.uniform(space.lower, space.upper)
        f = float(objective(x))
        if f < best_f:
            best_f, best_x = f, x
    return best_x, best_f


# ---- classifier hyperparameter tuning ---------------------------------------

BATCH_CHOICES = [16, 32, 64, 128]


def hyperparameter_space() -> SearchSpace:
    """5-D space: momentum, log10 lr, log10 weight decay, batch index, epochs."""
    return SearchSpace(
        lower=np.array([0.5, -4.0, -4.0, 0.0, 20.0]),
        upper=np.array([0.99, -1.0, -1.5, 3.0, 100.0]),
        kinds=["continuous", "continuous", "continuous", "categorical", "integer"],
        choices={3: BATCH_CHOICES},
    )


def decode_hyperparameters(position: np.ndarray) -> Hyperparameters:
    momentum, log_lr, log_wd, batch, epochs = hyperparameter_space().decode(position)
    return Hyperparameters(momentum=momentum, weight_decay=10.0 ** log_wd,
                           epochs=epochs, learning_rate=10.0 ** log_lr,
                           batch_size=batch)


@dataclass
class TuneResult:
    hyperparameters: Hyperparameters
    validation_error: float
    trace: list = field(default_factory=list)
    evaluations: int = 0


def tune_hyperparameters(trainable, cfg: AsoConfig) -> TuneResult:
    """Search the hyperparameter box for the lowest validation error.

    `trainable` maps a Hyperparameters value to a validation error
    (lower is better), typically by a short budgeted training run on an
    inner train/validation split.
    """
    space = hyperparameter_space()

    def objective(position):
        return float(trainable(decode_hyperparameters(position)))

    result = optimize(objective, space, cfg)
    hp = decode_hyperparameters(result.position)
    hp.validate()
    return TuneResult(hyperparameters=hp, validation_error=result.fitness,
                      trace=result.trace, evaluations=result.evaluations)
