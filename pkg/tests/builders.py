"""Small graphs shared by the test modules."""
import numpy as np
from hypothesis import strategies as st

from scatterlab.graph_core import (GraphFamilySpec, Profile, WeightedGraph, build_truncation,
                                   pair_graphs)

ONE = Profile("constant", {"value": 1.0})


def const(v):
    return Profile("constant", {"value": float(v)})


def line(radius, mu=ONE, b=ONE, family="line"):
    return build_truncation(GraphFamilySpec(family, b=b, mu=mu, base_radius=radius), 0)


def line_family(mu=ONE, b=ONE, step=1, base=0, family="line"):
    return GraphFamilySpec(family, b=b, mu=mu, base_radius=base, radius_step=step)


def two_vertex(mu=(1.0, 1.0), b=1.0):
    return WeightedGraph.from_entries([1, 2], mu, [(1, 2, b), (2, 1, b)])


def single(mu=1.0):
    return build_truncation(GraphFamilySpec("single", b=ONE, mu=const(mu)), 0)


def cycle(n, mu=1.0):
    edges = [(i, (i + 1) % n, 1.0) for i in range(n)]
    fam = GraphFamilySpec("edge_list", b=ONE, mu=const(mu), edges=tuple(edges),
                          labels=tuple(range(n)), base_radius=n)
    return build_truncation(fam, 0)


def scaled_pair(g, mu_factor=1.0, b_factor=1.0):
    g2 = WeightedGraph(g.labels, g.mu * mu_factor, g.weights * b_factor,
                       level_sizes=g.level_sizes)
    return pair_graphs(g, g2)


@st.composite
def random_graphs(draw, max_n=30, connected=True):
    """Random weighted graphs given by a spanning path plus extra edges."""
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    mu = rng.uniform(0.2, 5.0, n)
    entries = {}
    if connected:
        for i in range(n - 1):
            entries[(i, i + 1)] = rng.uniform(0.1, 3.0)
    for _ in range(draw(st.integers(0, 2 * n))):
        i, j = rng.integers(0, n, 2)
        if i != j:
            entries[(min(i, j), max(i, j))] = rng.uniform(0.0, 3.0)
    both = [(i, j, w) for (i, j), w in entries.items()] + [(j, i, w) for (i, j), w in entries.items()]
    return WeightedGraph.from_entries(np.arange(n), mu, both)


def random_state(rng, n, complex_=True):
    psi = rng.normal(size=n)
    return psi + 1j * rng.normal(size=n) if complex_ else psi
