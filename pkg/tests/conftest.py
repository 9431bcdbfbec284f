import numpy as np
import pytest

from hkgame import GameParams, SocialGraph

E2 = np.exp(-2.0)
E4 = np.exp(-4.0)
# two-node instance, x0 = (-1, 1), t_f = 1, r = b = 1, tau = 0
TWO_NODE_Q = (1 - E4) / 4
TWO_NODE_C = 2 * E2 / (1 + (1 - E4) / 2)
TWO_NODE_U0 = TWO_NODE_C * E2
TWO_NODE_GAP = -2 * E2 + 2 * TWO_NODE_C * TWO_NODE_Q


def random_connected_graph(rng, n, p_extra=0.4):
    """Random spanning tree plus extra edges."""
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, n)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p_extra:
                edges.add((i, j))
    return SocialGraph.from_edges(n, edges)


@pytest.fixture
def two_node():
    g = SocialGraph.from_edges(2, [(0, 1)])
    p = GameParams.create(2, 1.0, [-1.0, 1.0])
    return g, p


@pytest.fixture
def path3():
    return SocialGraph.from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def small_instances():
    rng = np.random.default_rng(7)
    out = []
    for _ in range(4):
        n = int(rng.integers(3, 6))
        g = random_connected_graph(rng, n)
        p = GameParams.create(
            n,
            float(rng.uniform(1.0, 3.0)),
            rng.uniform(-1, 1, n),
            tau=float(rng.uniform(0.0, 0.5)),
            r=rng.uniform(0.3, 2.0, n),
            b=rng.uniform(0.5, 1.5, n),
            omega=rng.uniform(0.0, 1.0, n),
        )
        out.append((g, p))
    return out
