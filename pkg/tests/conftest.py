import numpy as np
import pytest

from elastiq.nn import NetworkMeta, init_params


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_network(n_cell=8, n_den=8, t_in=6, t_out=4, seed=0, scale=1.0, tail_position=False):
    meta = NetworkMeta(n_cell=n_cell, n_den=n_den, t_in=t_in, t_out=t_out, tail_position=tail_position)
    params = init_params(meta, seed)
    r = np.random.default_rng(seed + 100)
    for arr in params.named_arrays().values():
        arr += scale * 0.3 * r.standard_normal(arr.shape)
    return params


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
