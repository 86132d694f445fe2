"""Track the centre of a Gaussian packet on the free line and compare with 2 sin k."""
import argparse
import math

import numpy as np

from scatterlab.graph_core import GraphFamilySpec, build_truncation
from scatterlab.operators import assemble_laplacian
from scatterlab.propagation import Propagator
from scatterlab.scattering import build_wave_packet


def measured_speed(k: float, radius: int = 1500, sigma: float = 40.0, t_max: float = 300.0) -> float:
    g = build_truncation(GraphFamilySpec("line", base_radius=radius), 0)
    packet = build_wave_packet(g, k, 0, sigma)
    times = np.linspace(0.0, t_max, 7)
    x = g.labels.astype(float)
    centres = [np.sum(g.mu * x * np.abs(s) ** 2) for s in
               Propagator(assemble_laplacian(g)).along(packet.state, times)]
    return float(np.polyfit(times, centres, 1)[0])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("k_over_pi", type=float, nargs="*", default=[0.25, 0.5, 2 / 3])
    args = ap.parse_args()
    print("k/pi      measured   2 sin k    rel.err")
    for kp in args.k_over_pi:
        k = kp * math.pi
        v, want = measured_speed(k), 2 * math.sin(k)
        print(f"{kp:<9.4f} {v:<10.5f} {want:<10.5f} {abs(v - want) / want:.2e}")
