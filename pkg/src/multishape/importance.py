"""Learning per-example importance weights by cycling increments.

Each training pair is a clump scene with the ground-truth shape vectors of
its objects.  A pair's quality under the current model is the terminated
energy of a full evolution run on its scene.  The learner visits examples
in order, tentatively bumps one weight by the configured step, rebuilds the
mean and eigenbasis, and keeps the bump only while the current pair's
terminated energy strictly decreases.  Cycling stops after a full pass with
no accepted bump or when the cycle cap is reached, so every run terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyDataset
from .evolution import EvolutionConfig, evolve
from .shape_model import (
    DEFAULT_VARIANCE_THRESHOLD,
    ShapeExample,
    WeightedExampleSet,
    build_model,
)


@dataclass(frozen=True)
class TrainingPair:
    """A clump scene together with its objects' true shape vectors."""

    scene: object
    shapes: list

    def __post_init__(self):
        if len(self.shapes) != self.scene.n_objects:
            raise DimensionMismatch(
                f"{self.scene.scene_id}: {len(self.shapes)} shapes for "
                f"{self.scene.n_objects} centroids")


@dataclass(frozen=True)
class LearningConfig:
    """Weight step and the budget caps that keep learning finite."""

    step: float = 0.1
    max_tries_per_example: int = 20
    max_cycles: int = 50
    variance_threshold: float = DEFAULT_VARIANCE_THRESHOLD
    evolution: EvolutionConfig = field(
        default_factory=lambda: EvolutionConfig(max_outer_iterations=50))

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("weight step must be positive")
        if self.max_tries_per_example < 1 or self.max_cycles < 1:
            raise ValueError("learning caps must be positive")


@dataclass(frozen=True)
class WeightUpdate:
    """One committed weight increase and its effect on the pair's energy."""

    cycle: int
    pair_index: int
    example_index: int
    scene_id: str
    object_id: int
    weight: float
    energy_before: int
    energy_after: int


def dataset_examples(dataset, step=0.1, weights=None):
    """Flatten pairs into a weighted example set in manifest order."""
    examples = []
    for pair in dataset:
        for i, radii in enumerate(pair.shapes):
            examples.append(ShapeExample(
                scene_id=pair.scene.scene_id,
                object_id=i,
                radii=np.asarray(radii, dtype=np.float64),
            ))
    return WeightedExampleSet(examples=examples, weights=weights, step=step)


def terminated_energy(pair, model, evolution_config):
    """Final energy of an evolution run on the pair's scene."""
    k = np.asarray(pair.shapes[0]).size
    if k != model.k:
        raise DimensionMismatch(
            f"pair shapes have K={k} but the model has K={model.k}")
    _, state = evolve(pair.scene, model, evolution_config)
    return state.energy


def learn(dataset, config=None):
    """Cycle weight increases until no pair's terminated energy improves.

    Returns the final weights (manifest order), the model built from them,
    and the list of committed updates.
    """
    config = config or LearningConfig()
    if not dataset:
        raise EmptyDataset("no training pairs")

    example_set = dataset_examples(dataset, step=config.step)
    # integer increment counts keep tentative bumps exactly revertible
    counts = np.zeros(len(example_set), dtype=np.int64)

    def weights_for(c):
        return 1.0 + config.step * c

    def model_for(c):
        trial_set = WeightedExampleSet(
            examples=example_set.examples,
            weights=weights_for(c),
            step=config.step,
        )
        return build_model(trial_set, config.variance_threshold)

    model = model_for(counts)

    # manifest offsets of each pair's examples
    offsets = []
    pos = 0
    for pair in dataset:
        offsets.append(pos)
        pos += len(pair.shapes)

    history = []
    for cycle in range(config.max_cycles):
        committed_this_cycle = 0
        for pair_index, pair in enumerate(dataset):
            e_current = terminated_energy(pair, model, config.evolution)
            for local_index in range(len(pair.shapes)):
                global_index = offsets[pair_index] + local_index
                for _ in range(config.max_tries_per_example):
                    counts[global_index] += 1
                    trial_model = model_for(counts)
                    e_trial = terminated_energy(pair, trial_model,
                                                config.evolution)
                    if e_trial < e_current:
                        model = trial_model
                        history.append(WeightUpdate(
                            cycle=cycle,
                            pair_index=pair_index,
                            example_index=global_index,
                            scene_id=pair.scene.scene_id,
                            object_id=local_index,
                            weight=float(weights_for(counts[global_index])),
                            energy_before=e_current,
                            energy_after=e_trial,
                        ))
                        e_current = e_trial
                        committed_this_cycle += 1
                    else:
                        counts[global_index] -= 1
                        break
        if committed_this_cycle == 0:
            break
    return weights_for(counts), model, history
