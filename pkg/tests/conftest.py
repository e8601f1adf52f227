import numpy as np
import pytest

from gazetrack.grid import FixationPoint, GazeRecord, GridShape


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_record(rng, shape=GridShape(64, 64), n=None, image_id="img"):
    """Record with ``n`` (default 1-20) fixations at continuous positions."""
    n = int(rng.integers(1, 21)) if n is None else n
    starts = rng.permutation(np.arange(n)) * 37.0 + 5.0
    fixes = tuple(
        FixationPoint(float(rng.uniform(0, shape.width)), float(rng.uniform(0, shape.height)),
                      float(rng.uniform(50, 800)), float(t))
        for t in starts
    )
    # numpy floats may land exactly on width via rounding; keep strictly inside
    fixes = tuple(
        FixationPoint(min(f.x, np.nextafter(shape.width, 0)), min(f.y, np.nextafter(shape.height, 0)),
                      f.duration, f.start_ts)
        for f in fixes
    )
    return GazeRecord(image_id, shape, fixes)
