"""Quantum-behaved swarm on benchmark functions, with CVT start positions.

A centroidal Voronoi start spreads the particles evenly; the swarm then
contracts as the spread coefficient falls from 1 to 0.5.
"""
import numpy as np

from bioaction import cvt, qpso

for name, bound, dims in [("sphere", 100.0, 10), ("rosenbrock", 5.0, 2)]:
    for init in ("uniform", "cvt"):
        res = qpso.optimize(qpso.BENCHMARKS[name], [(-bound, bound)] * dims,
                            qpso.OptimizerConfig(M=20, iterations=500, seed=0, initializer=init), vectorized=True)
        print(f"{name:10s} {init:7s} best {res.fitness:.2e} (iteration 50: {res.history[50]:.2e})")


def spread(points):
    d = np.sqrt(((points[:, None] - points[None]) ** 2).sum(-1))
    return d[np.triu_indices(len(points), 1)].min()


u = [spread(qpso.init_swarm([(-1, 1)] * 2, 20, seed=s).positions) for s in range(20)]
c = [spread(qpso.init_swarm([(-1, 1)] * 2, 20, seed=s, initializer="cvt").positions) for s in range(20)]
print(f"closest particle pair, median over 20 swarms: uniform {np.median(u):.3f}, cvt {np.median(c):.3f}")

gen = cvt.jdg_cvt([(0.0, 1.0)] * 2, 8, cvt.CvtConfig(samples=4000, iterations=60, seed=3))
print(f"8 generators on the unit square, energy {cvt.cvt_energy(gen):.4f}")
print(np.round(gen.points, 3))
