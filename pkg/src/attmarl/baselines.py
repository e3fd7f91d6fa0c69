"""Rule-based reference policies.

* wcmp_split — weighted-cost multipath: split flow across candidate paths in
  proportion to inverse path cost, where a path's cost is the sum of the
  latest link utilizations along it.
* greedy_navigate / greedy_pursue — memoryless pursuit of the nearest
  landmark / the prey's current position at full speed.
"""

from __future__ import annotations

import numpy as np

WCMP_EPS = 1e-3
ARRIVAL_EPS = 1e-6


def wcmp_split(costs, eps: float = WCMP_EPS) -> np.ndarray:
    """Inverse-cost split ratios over the probability simplex.

    eps keeps idle (zero-cost) paths finite; an infinite cost (capacity-zero
    sentinel) maps to a zero ratio.
    """
    costs = np.asarray(costs, dtype=np.float64)
    weights = 1.0 / (costs + eps)
    weights[~np.isfinite(weights)] = 0.0
    total = weights.sum()
    if total <= 0.0:
        return np.full(costs.size, 1.0 / costs.size)
    return weights / total


def greedy_navigate(agent_position, landmark_positions,
                    v_max: float = 1.0) -> np.ndarray:
    """Head for the nearest landmark at full speed; ties go to the lowest
    landmark index; stop on arrival."""
    pos = np.asarray(agent_position, dtype=np.float64)
    marks = np.asarray(landmark_positions, dtype=np.float64)
    dists = np.linalg.norm(marks - pos, axis=1)
    target = marks[int(np.argmin(dists))]  # argmin takes the lowest index on ties
    offset = target - pos
    dist = np.linalg.norm(offset)
    if dist <= ARRIVAL_EPS:
        return np.zeros(2)
    return offset / dist * v_max


def greedy_pursue(predator_position, prey_position, v_max: float = 1.0) -> np.ndarray:
    """Head straight for the prey's current position at full speed."""
    offset = np.asarray(prey_position, dtype=np.float64) - np.asarray(
        predator_position, dtype=np.float64)
    dist = np.linalg.norm(offset)
    if dist <= ARRIVAL_EPS:
        return np.zeros(2)
    return offset / dist * v_max
