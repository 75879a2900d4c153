"""Named operators usable as preset:NAME on the command line and in scenarios."""

from collections.abc import Callable
from functools import partial

import numpy as np

from src.convergence.generators import l2_truncation
from src.linalg.numkernel import Mat


def _inverse_member(n: int) -> Mat:
    # scalar blocks A = 1, B = 1, C = 1 + 1/n, D = 1/n
    return np.array([[1.0, 1.0], [1.0 + 1.0 / n, 1.0 / n]])


# Named operators that scenarios can reference instead of a matrix file.
# All are split along the leading canonical vectors (e1..ek).
PRESETS: dict[str, Callable[[], Mat]] = {
    "inverse_limit": lambda: np.array([[1.0, 1.0], [1.0, 0.0]]),
    "inverse_member_2": partial(_inverse_member, 2),
    "inverse_member_3": partial(_inverse_member, 3),
    "inverse_member_4": partial(_inverse_member, 4),
    "schur_scalar": lambda: np.array([[4.0, 2.0], [2.0, 2.0]]),
    "phi_scalar": lambda: np.array([[1.0, 1.0], [2.0, 2.0]]),
    "phi_fail_scalar": lambda: np.array([[1.0, 0.0], [1.0, 1.0]]),
    "series_scalar": lambda: 0.25 * np.array([[1.0, 1.0], [2.0, 2.0]]),
    "complement_split_counterexample": lambda: np.array([[0.0, 1.0], [0.0, 1.0]]),
    "identity_4": lambda: np.eye(4),
    "l2_truncation_8": partial(l2_truncation, 8),
}


def get_preset(name: str) -> Mat:
    """
    Build a preset operator by name.

    Args:
        name: Name of the preset

    Returns:
        Fresh copy of the operator

    Raises:
        ValueError: If the preset name is not found
    """
    if name not in PRESETS:
        raise ValueError(
            f"Preset '{name}' not found. Available presets: {list(PRESETS.keys())}",
        )
    return PRESETS[name]()
