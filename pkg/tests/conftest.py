import numpy as np
import pytest

from torusmfg import (DiscreteMeasure, DynamicsSpec, Modulus, bilinear,
                      mean_field_attraction, measure_space, separable_affine)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_cloud(rng, n, d=1, uniform_weights=True):
    pos = rng.random((n, d))
    if uniform_weights:
        w = np.full(n, 1.0 / n)
    else:
        w = rng.random(n) + 0.05
        w = w / w.sum()
    return DiscreteMeasure(measure_space(d), (pos,), w)


def spec_u_plus_v(u_grid=(-1.0, 0.0, 1.0), v_grid=(-1.0, 0.0, 1.0), drift=0.0):
    """1-d separable fixture f = drift*sin(2pi x) + u + v with honest constants."""
    dyn = separable_affine(1, drift_amp=drift, bu=[[1.0]], bv=[[1.0]])
    c_f = abs(drift) + max(abs(u) for u in u_grid) + max(abs(v) for v in v_grid)
    lip = max(1.0, 2 * np.pi * abs(drift))
    return DynamicsSpec(1, np.asarray(u_grid)[:, None], np.asarray(v_grid)[:, None],
                        dyn, lipschitz=lip, modulus=Modulus(1.0), speed_bound=c_f)


def spec_bilinear(u_grid=(-1.0, 1.0), v_grid=(-1.0, 1.0)):
    dyn = bilinear(1)
    c_f = max(abs(u) for u in u_grid) * max(abs(v) for v in v_grid)
    scale = max(max(abs(u) for u in u_grid), max(abs(v) for v in v_grid))
    return DynamicsSpec(1, np.asarray(u_grid)[:, None], np.asarray(v_grid)[:, None],
                        dyn, lipschitz=1.0, modulus=Modulus(scale), speed_bound=c_f)


def spec_attraction(gain=0.5, bu=0.0, bv=0.0, u_grid=(-1.0, 1.0), v_grid=(-1.0, 1.0)):
    dyn = mean_field_attraction(1, gain=gain, bu=[bu], bv=[bv])
    c_f = abs(gain) + abs(bu) * max(abs(u) for u in u_grid) + abs(bv) * max(
        abs(v) for v in v_grid)
    lip = max(1.0, 2 * np.pi * abs(gain) + 1e-9)
    scale = max(abs(bu), abs(bv), 1e-9)
    return DynamicsSpec(1, np.asarray(u_grid)[:, None], np.asarray(v_grid)[:, None],
                        dyn, lipschitz=lip, modulus=Modulus(scale), speed_bound=c_f)
