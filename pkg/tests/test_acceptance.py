"""Acceptance criteria, one test per criterion, each at its stated tolerance.

The terminal summary prints a PASS/FAIL line per criterion (see conftest.py).
"""
import dataclasses
import math
import time

import numpy as np
import pytest

from scatterlab.criteria import (MetricPairSample, delta_from_pencil, edge_sum, density_distortion_margin,
                                 vertex_sum)
from scatterlab.graph_core import build_truncation
from scatterlab.lab.cli import main
from scatterlab.lab.config import load_config
from scatterlab.lab.runner import build_pair, time_grid
from scatterlab.operators import assemble_laplacian, identification, norm
from scatterlab.propagation import (Propagator, heat_apply, heat_kernel_rows, phi_all)
from scatterlab.scattering import (asymptotic_equivalence_test, build_wave_packet, rage_decay)

MASTER_SEED = 20240611
BUNDLED = load_config()
SCENARIOS = {s.scenario_id: s for s in BUNDLED.scenarios}


def distinct_families():
    seen, out = set(), []
    for scn in BUNDLED.scenarios:
        for fam in (scn.g1, scn.g2):
            key = repr(fam)
            if key not in seen:
                seen.add(key)
                out.append((f"{scn.scenario_id}.{'g1' if fam is scn.g1 else 'g2'}", fam))
    return out


FAMILIES = distinct_families()


def small_graph(fam):
    """The bundled family on the box [-99, 99] (n = 199)."""
    return build_truncation(dataclasses.replace(fam, base_radius=99, radius_step=1), 0)


@pytest.fixture(scope="module")
def full_graphs():
    return {name: build_truncation(fam, max(SCENARIOS[name.split(".")[0]].levels))
            for name, fam in FAMILIES}


@pytest.fixture(scope="module")
def bundled_runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundled")
    runs, codes = [], []
    for name in ("a", "b"):
        out = root / name
        codes.append(main(["criteria", "--out", str(out), "--jobs", "4"]))
        codes.append(main(["scatter", "--out", str(out), "--jobs", "4"]))
        runs.append(out)
    return runs, codes


@pytest.mark.parametrize("name,fam", FAMILIES, ids=[n for n, _ in FAMILIES])
def test_criterion_1_operator_correctness(name, fam):
    g = small_graph(fam)
    assert g.vertex_count <= 200
    start = time.perf_counter()
    h = assemble_laplacian(g)
    rng = np.random.default_rng(MASTER_SEED)
    psi = rng.normal(size=h.n) + 1j * rng.normal(size=h.n)
    psi /= norm(psi, g.mu)
    worst = 0.0
    for s in (0.1, 1.0):
        worst = max(worst, np.max(np.abs(heat_apply(h, s, psi) - heat_apply(h, s, psi, "dense_eigen"))))
    prop, dense = Propagator(h), Propagator(h, method="dense_eigen")
    for t in (1.0, 10.0, 100.0):
        worst = max(worst, np.max(np.abs(prop(psi, t) - dense(psi, t))))
    elapsed = time.perf_counter() - start
    assert worst <= 1e-9
    assert elapsed < 10.0


@pytest.mark.parametrize("name", [n for n, _ in FAMILIES])
def test_criterion_2_markov_positivity(name, full_graphs):
    g = full_graphs[name]
    h = assemble_laplacian(g)
    idx = np.arange(h.n)
    for s in (0.1, 0.5, 1.0):
        for start in range(0, h.n, 1024):
            rows = heat_kernel_rows(h, s, idx[start:start + 1024])
            assert rows.min() >= -1e-12
            assert np.max(rows @ g.mu) <= 1 + 1e-10


@pytest.mark.parametrize("name", [n for n, _ in FAMILIES])
def test_criterion_3_phi_bound(name, full_graphs):
    g = full_graphs[name]
    h = assemble_laplacian(g)
    for s in (0.25, 0.5, 0.75):
        assert np.all(phi_all(h, s) <= 1.0 / g.mu + 1e-10)


def test_criterion_4_unitarity():
    pair = build_pair(SCENARIOS["geometric_decay"])
    j = identification(pair, "unitary_J")
    h1 = assemble_laplacian(pair.g1)
    prop = Propagator(h1)
    worst_j = worst_drift = 0.0
    for child in np.random.SeedSequence(MASTER_SEED).spawn(100):
        rng = np.random.default_rng(child)
        psi = rng.normal(size=h1.n) + 1j * rng.normal(size=h1.n)
        psi /= norm(psi, pair.g1.mu)
        worst_j = max(worst_j, abs(norm(j.apply(psi), pair.g2.mu) - 1.0))
        for state in prop.along(psi, [1.0, 10.0, 100.0]):
            worst_drift = max(worst_drift, abs(norm(state, pair.g1.mu) - 1.0))
    assert worst_j <= 1e-13
    assert worst_drift <= 1e-9


def test_criterion_5_delta_oracle():
    ident = MetricPairSample.from_matrix(np.eye(3))
    assert delta_from_pencil(ident) == 0.0
    assert delta_from_pencil(MetricPairSample.from_eigenvalues([4.0, 0.25])) == pytest.approx(1.5, abs=1e-12)
    lhs, rhs = density_distortion_margin(MetricPairSample.from_eigenvalues([0.25, 0.25]))
    assert lhs == pytest.approx(1.5, abs=1e-12) and rhs == pytest.approx(1.5, abs=1e-12)
    rng = np.random.default_rng(MASTER_SEED)
    for i in range(10_000):
        m = 2 + i % 3
        a, b = rng.normal(size=(2, m, m))
        sample = MetricPairSample.from_metrics(a @ a.T + 1e-3 * np.eye(m), b @ b.T + 1e-3 * np.eye(m))
        lhs, rhs = density_distortion_margin(sample)
        assert lhs <= rhs + 1e-12


def test_criterion_6_geometric_perturbation():
    start = time.perf_counter()
    scn = SCENARIOS["geometric_decay"]
    pair = build_pair(scn)
    assert pair.g1.labels.min() == -2000 and pair.g1.labels.max() == 2000
    levels = list(scn.levels)
    assert vertex_sum(pair, levels).verdict == "converging"
    assert edge_sum(pair, 1, levels).verdict == "converging"
    assert edge_sum(pair, 2, levels).verdict == "converging"
    packet = build_wave_packet(pair.g1, math.pi / 2, 0, 40.0)
    rep = asymptotic_equivalence_test(pair, packet, time_grid(scn.time_grid))
    d = [v for _, v in rep.decay_curve]
    assert all(t < packet.reflection_time_estimate for t, _ in rep.decay_curve)
    assert rep.verdict == "equivalent"
    assert d[-1] / max(d) <= 0.05
    assert rep.final_distance <= 0.1
    assert time.perf_counter() - start < 300


def test_criterion_7_negative_control(bundled_runs):
    scn = SCENARIOS["constant_rescale"]
    pair = build_pair(scn)
    assert vertex_sum(pair, list(scn.levels)).verdict == "diverging"
    packet = build_wave_packet(pair.g1, math.pi / 2, 0, 40.0)
    rep = asymptotic_equivalence_test(pair, packet, time_grid(scn.time_grid), wave_operators=False)
    d = np.array([v for _, v in rep.decay_curve])
    expected = abs(math.sqrt(4.0) - 1.0) * norm(packet.state, pair.g1.mu)
    assert np.all(np.abs(d - expected) <= 0.01 * expected)
    assert rep.verdict == "not_equivalent"
    _, codes = bundled_runs
    assert 3 not in codes


def test_criterion_8_rage_decay():
    g = build_truncation(SCENARIOS["identity"].g1, max(SCENARIOS["identity"].levels))
    h = assemble_laplacian(g)
    sigma = 40.0
    packet = build_wave_packet(g, math.pi / 2, 0, sigma)
    window = range(-int(5 * sigma), int(5 * sigma) + 1)
    t_end = 0.8 * packet.reflection_time_estimate
    masses = rage_decay(h, packet, window, [0.0, t_end / 2, t_end])
    assert masses[-1][1] / masses[0][1] <= 0.05


def test_criterion_9_determinism(bundled_runs):
    (a, b), codes = bundled_runs
    assert codes == [0, 0, 0, 0]
    csv_a = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    csv_b = sorted(p.relative_to(b) for p in b.rglob("*.csv"))
    assert csv_a == csv_b and len(csv_a) > 50
    for rel in csv_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel
