"""Vocabulary for the standard 68-point facial landmark annotation.

Landmark numbering is 1-based throughout the public API (matching the usual
annotation diagrams): chin 1-17, brows 18-27, nose 28-36, left eye 37-42,
right eye 43-48, mouth 49-68.  Arrays are 0-indexed internally; helpers here
convert.
"""

from __future__ import annotations

import numpy as np

N_LANDMARKS = 68

CHIN = tuple(range(1, 18))
LEFT_BROW = (18, 19, 20, 21, 22)
RIGHT_BROW = (23, 24, 25, 26, 27)
NOSE_BRIDGE = (28, 29, 30, 31)
NOSTRILS = (32, 33, 34, 35, 36)
LEFT_EYE = (37, 38, 39, 40, 41, 42)
RIGHT_EYE = (43, 44, 45, 46, 47, 48)
OUTER_MOUTH = tuple(range(49, 61))
INNER_MOUTH = tuple(range(61, 69))

LEFT_MOUTH_CORNER = 49
RIGHT_MOUTH_CORNER = 55


def _build_mirror() -> dict[int, int]:
    pairs = [
        # chin: 1<->17 ... 8<->10, 9 fixed
        *[(i, 18 - i) for i in range(1, 9)],
        (18, 27), (19, 26), (20, 25), (21, 24), (22, 23),
        (32, 36), (33, 35),
        (37, 46), (38, 45), (39, 44), (40, 43), (41, 48), (42, 47),
        (49, 55), (50, 54), (51, 53), (56, 60), (57, 59),
        (61, 65), (62, 64), (66, 68),
    ]
    mirror = {i: i for i in range(1, N_LANDMARKS + 1)}
    for a, b in pairs:
        mirror[a] = b
        mirror[b] = a
    return mirror


#: 1-based map from each landmark to its left/right mirror partner.
MIRROR = _build_mirror()

#: 0-based permutation array: ``pts[MIRROR_INDEX]`` reorders a (68, 2) array
#: so that index i holds the mirror partner of landmark i+1.
MIRROR_INDEX = np.array([MIRROR[i] - 1 for i in range(1, N_LANDMARKS + 1)], dtype=np.intp)


def idx(numbers) -> np.ndarray:
    """1-based landmark numbers -> 0-based index array."""
    return np.asarray(numbers, dtype=np.intp) - 1


def mirror_sample(points: np.ndarray) -> np.ndarray:
    """Reflect a (68, 2) landmark array about the vertical line x = 0.5.

    The result is re-indexed with the left/right permutation so that, e.g.,
    the left-eye slots again hold the (reflected) left side of the face.
    """
    out = points[MIRROR_INDEX].copy()
    out[:, 0] = 1.0 - out[:, 0]
    return out
