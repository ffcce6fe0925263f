"""Counter-based random substreams keyed by (seed, frame, role).

Draws depend only on the key, never on which worker handles the frame.
"""
from enum import IntEnum

import numpy as np


class Role(IntEnum):
    BITS = 1
    CHANNEL = 2
    NOISE = 3
    PAYLOAD = 4


def stream(seed, frame, role):
    ss = np.random.SeedSequence([int(seed), int(frame), int(role)])
    return np.random.Generator(np.random.Philox(ss))
