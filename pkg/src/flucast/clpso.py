"""Binary comprehensive-learning particle swarm optimizer.

Each velocity dimension learns from a per-dimension exemplar particle's
personal best rather than from a single global best; exemplars are rebuilt
only when a particle stagnates past the refreshing gap. Positions are bit
strings sampled through a sigmoid of the velocity. The global best is tracked
for termination and reporting only; it never enters the velocity update.

Also houses the codec between bit strings and (feature mask, hyperparameter)
configurations: the first n_lags bits select lags, and each hyperparameter
occupies a fixed-width big-endian index into its candidate list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError
from .util import dumps_exact


@dataclass(frozen=True)
class SwarmConfig:
    """Swarm settings; the defaults follow the published tuning recipe."""

    swarm_size: int = 8
    max_iterations: int = 200
    stall_limit: int = 30
    refreshing_gap: int = 8
    acceleration: float = 2.0
    inertia_start: float = 0.9
    inertia_end: float = 0.4
    velocity_clamp: float = 6.0
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be at least 2")
        if self.max_iterations < 1 or self.stall_limit < 1 or self.refreshing_gap < 0:
            raise ValueError("iteration, stall, and gap settings must be positive")
        if self.velocity_clamp <= 0.0:
            raise ValueError("velocity_clamp must be positive")


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float
    stagnation_counter: int
    exemplar_indices: np.ndarray
    learning_probability: float


def learning_probability(index: int, swarm_size: int) -> float:
    """Per-particle probability of learning from others (index is 1-based).

    Runs from 0.05 at index 1 to 0.5 at index swarm_size along an exponential
    ramp, so early particles exploit their own history while late particles
    explore the swarm.
    """
    if swarm_size < 2:
        raise ValueError("swarm_size must be at least 2")
    if not 1 <= index <= swarm_size:
        raise ValueError(f"index {index} outside 1..{swarm_size}")
    ramp = (math.exp(10.0 * (index - 1) / (swarm_size - 1)) - 1.0) / (math.exp(10.0) - 1.0)
    return 0.05 + 0.45 * ramp


def select_exemplars(particle_index: int, particles, rng) -> np.ndarray:
    """Choose, per dimension, whose personal best this particle learns from.

    With probability 1 - Pc a dimension learns from the particle's own pbest;
    otherwise from the better (lower pbest fitness) of two distinct randomly
    drawn other particles. If every dimension chose self, one random dimension
    is forced to a random other particle.
    """
    n = len(particles)
    if n < 3:
        raise ValueError("exemplar tournament needs a swarm of at least 3")
    me = particles[particle_index]
    dims = len(me.position)
    others = np.array([k for k in range(n) if k != particle_index])
    exemplars = np.full(dims, particle_index, dtype=np.int64)
    for m in range(dims):
        if rng.random() >= me.learning_probability:
            continue
        pick = rng.choice(others, size=2, replace=False)
        a, b = int(pick[0]), int(pick[1])
        exemplars[m] = a if particles[a].pbest_fitness <= particles[b].pbest_fitness else b
    if np.all(exemplars == particle_index):
        forced_dim = int(rng.integers(dims))
        exemplars[forced_dim] = int(others[rng.integers(len(others))])
    return exemplars


def update_velocity(
    velocity, position, exemplar_bits, inertia: float, acceleration: float, rng, clamp: float
) -> np.ndarray:
    """inertia * v + acceleration * r * (exemplar_bit - bit), clamped elementwise."""
    velocity = np.asarray(velocity, dtype=np.float64)
    position = np.asarray(position, dtype=np.float64)
    exemplar_bits = np.asarray(exemplar_bits, dtype=np.float64)
    if not velocity.shape == position.shape == exemplar_bits.shape:
        raise DimensionError("velocity, position, and exemplar bits must align")
    r = rng.random(len(velocity))
    new = inertia * velocity + acceleration * r * (exemplar_bits - position)
    return np.clip(new, -clamp, clamp)


def sigmoid(v):
    return 1.0 / (1.0 + np.exp(-np.asarray(v, dtype=np.float64)))


def update_position(velocity, rng, clamp: float = 6.0) -> np.ndarray:
    """Sample bits: 1 where a fresh uniform draw falls below sigmoid(velocity)."""
    v = np.clip(np.asarray(velocity, dtype=np.float64), -clamp, clamp)
    return (rng.random(len(v)) < sigmoid(v)).astype(np.int8)


def _particle_rng(seed: int, particle_index: int, generation: int):
    """Independent stream per (seed, particle, generation); scheduling-proof."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(particle_index, generation))
    )


def bits_to_hex(bits) -> str:
    bits = np.asarray(bits, dtype=np.uint8)
    return np.packbits(bits).tobytes().hex()


@dataclass
class GenerationRecord:
    generation: int
    gbest_fitness: float
    gbest_position: np.ndarray
    pbest_fitnesses: np.ndarray


@dataclass
class ClpsoResult:
    best_position: np.ndarray
    best_fitness: float
    history: list
    evaluations: int
    generations: int


def write_history_jsonl(history, path) -> None:
    """One JSON line per generation: gbest fitness/bits and per-particle pbests."""
    lines = []
    for record in history:
        lines.append(
            dumps_exact(
                {
                    "generation": record.generation,
                    "gbest_fitness": float(record.gbest_fitness),
                    "gbest_bits": bits_to_hex(record.gbest_position),
                    "pbest_fitness": [float(v) for v in record.pbest_fitnesses],
                }
            ).replace("\n", " ")
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _checked_fitness(fitness, bits) -> float:
    value = float(fitness(bits))
    # +inf is the documented worst-fitness sentinel for failed trainings;
    # NaN or -inf would silently corrupt pbest comparisons.
    if math.isnan(value) or value == -math.inf:
        raise DomainError(f"fitness returned {value} for bits {bits_to_hex(bits)}")
    return value


def run_clpso(fitness, n_bits: int, config: SwarmConfig) -> ClpsoResult:
    """Minimise ``fitness`` over bit strings of length ``n_bits``.

    Generation 0 evaluates the random initial swarm; each later generation
    refreshes stagnated exemplars, updates velocities and positions, and
    re-evaluates. Stops after ``max_iterations`` total generations or once the
    global best has failed to improve for ``stall_limit`` consecutive
    generations. Total fitness evaluations are bounded by
    swarm_size * max_iterations.
    """
    if n_bits < 1:
        raise ValueError("n_bits must be positive")
    ps = config.swarm_size
    inertia_span = config.inertia_end - config.inertia_start
    denom = max(config.max_iterations - 1, 1)

    particles = []
    init_rngs = []
    evaluations = 0
    for idx in range(ps):
        rng = _particle_rng(config.seed, idx, 0)
        init_rngs.append(rng)
        position = (rng.random(n_bits) < 0.5).astype(np.int8)
        velocity = rng.uniform(-1.0, 1.0, size=n_bits)
        value = _checked_fitness(fitness, position)
        evaluations += 1
        particles.append(
            Particle(
                position=position,
                velocity=velocity,
                pbest_position=position.copy(),
                pbest_fitness=value,
                stagnation_counter=0,
                exemplar_indices=np.full(n_bits, idx, dtype=np.int64),
                learning_probability=learning_probability(idx + 1, ps),
            )
        )
    # exemplars need every pbest, so assign them after the whole swarm exists
    for idx in range(ps):
        particles[idx].exemplar_indices = select_exemplars(idx, particles, init_rngs[idx])

    best_idx = int(np.argmin([p.pbest_fitness for p in particles]))
    gbest_position = particles[best_idx].pbest_position.copy()
    gbest_fitness = particles[best_idx].pbest_fitness
    history = [
        GenerationRecord(
            0,
            gbest_fitness,
            gbest_position.copy(),
            np.array([p.pbest_fitness for p in particles]),
        )
    ]

    stalled = 0
    for generation in range(1, config.max_iterations):
        inertia = config.inertia_start + inertia_span * generation / denom
        improved_gbest = False
        for idx, particle in enumerate(particles):
            rng = _particle_rng(config.seed, idx, generation)
            if particle.stagnation_counter > config.refreshing_gap:
                particle.exemplar_indices = select_exemplars(idx, particles, rng)
                particle.stagnation_counter = 0
            exemplar_bits = np.array(
                [
                    particles[e].pbest_position[m]
                    for m, e in enumerate(particle.exemplar_indices)
                ],
                dtype=np.float64,
            )
            particle.velocity = update_velocity(
                particle.velocity,
                particle.position,
                exemplar_bits,
                inertia,
                config.acceleration,
                rng,
                config.velocity_clamp,
            )
            particle.position = update_position(particle.velocity, rng, config.velocity_clamp)
            value = _checked_fitness(fitness, particle.position)
            evaluations += 1
            if value < particle.pbest_fitness:
                particle.pbest_fitness = value
                particle.pbest_position = particle.position.copy()
                particle.stagnation_counter = 0
                if value < gbest_fitness:
                    gbest_fitness = value
                    gbest_position = particle.position.copy()
                    improved_gbest = True
            else:
                particle.stagnation_counter += 1
        history.append(
            GenerationRecord(
                generation,
                gbest_fitness,
                gbest_position.copy(),
                np.array([p.pbest_fitness for p in particles]),
            )
        )
        stalled = 0 if improved_gbest else stalled + 1
        if stalled >= config.stall_limit:
            break
    return ClpsoResult(
        best_position=gbest_position,
        best_fitness=gbest_fitness,
        history=history,
        evaluations=evaluations,
        generations=len(history),
    )


# ---------------------------------------------------------------------------
# particle codec


@dataclass(frozen=True)
class GridSegment:
    """One hyperparameter: an ordered candidate list occupying a bit segment."""

    name: str
    values: tuple

    def __post_init__(self):
        values = tuple(self.values)
        if len(values) < 2 or len(values) & (len(values) - 1) != 0:
            raise ValueError(
                f"candidate list for {self.name!r} must have a power-of-two "
                f"length >= 2, got {len(values)}"
            )
        object.__setattr__(self, "values", values)

    @property
    def bit_width(self) -> int:
        return int(math.log2(len(self.values)))


@dataclass(frozen=True)
class ModelConfig:
    """A decoded particle: selected lags plus one value per hyperparameter."""

    feature_mask: np.ndarray
    parameters: dict

    def __post_init__(self):
        mask = np.asarray(self.feature_mask, dtype=bool)
        if mask.sum() < 1:
            raise ValueError("feature mask must select at least one lag")
        object.__setattr__(self, "feature_mask", mask)
        object.__setattr__(self, "parameters", dict(self.parameters))

    def key(self) -> tuple:
        """Hashable identity used for fitness caching."""
        return (
            self.feature_mask.tobytes(),
            tuple(sorted(self.parameters.items())),
        )


@dataclass(frozen=True)
class ParticleCodec:
    """Bit layout: n_lags mask bits, then one big-endian index per segment."""

    n_lags: int
    segments: tuple

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.n_lags < 1:
            raise ValueError("n_lags must be positive")

    @property
    def total_bits(self) -> int:
        return self.n_lags + sum(s.bit_width for s in self.segments)

    def encode(self, config: ModelConfig) -> np.ndarray:
        if len(config.feature_mask) != self.n_lags:
            raise DimensionError(
                f"mask has {len(config.feature_mask)} bits, codec expects {self.n_lags}"
            )
        bits = list(np.asarray(config.feature_mask, dtype=np.int8))
        for segment in self.segments:
            value = config.parameters[segment.name]
            matches = [i for i, v in enumerate(segment.values) if v == value]
            if not matches:
                raise ValueError(
                    f"value {value!r} not in candidate list for {segment.name!r}"
                )
            index = matches[0]
            bits.extend(
                (index >> shift) & 1 for shift in range(segment.bit_width - 1, -1, -1)
            )
        return np.array(bits, dtype=np.int8)

    def decode(self, bits) -> ModelConfig:
        bits = np.asarray(bits).astype(np.int8)
        if bits.shape != (self.total_bits,):
            raise DimensionError(
                f"expected {self.total_bits} bits, got shape {bits.shape}"
            )
        mask = bits[: self.n_lags].astype(bool)
        if not mask.any():
            # keep every particle evaluable: force the most recent lag
            mask = mask.copy()
            mask[0] = True
        parameters = {}
        cursor = self.n_lags
        for segment in self.segments:
            index = 0
            for _ in range(segment.bit_width):
                index = (index << 1) | int(bits[cursor])
                cursor += 1
            parameters[segment.name] = segment.values[index]
        return ModelConfig(feature_mask=mask, parameters=parameters)


def encode(config: ModelConfig, codec: ParticleCodec) -> np.ndarray:
    return codec.encode(config)


def decode(bits, codec: ParticleCodec) -> ModelConfig:
    return codec.decode(bits)
