"""Four-state toy recursion: exact laws, then the same quantities by simulation.

    python demos/toy_recursion.py
"""
from regen_srs import (DiscreteCdf, StateGrid, best_splitting_point, contraction_profile, embedded_matrix,
                       embedded_samples, estimate_limit_distribution, exact_contraction, limiting_mu,
                       stationary, uniform_distance)
from regen_srs.fixtures import example4_driver, example4_grid, example4_map

f, driver, grid = example4_map(), example4_driver(), example4_grid()

chain = embedded_matrix(f, driver, grid)
law = stationary(chain)
mu = limiting_mu(f, driver, grid, law)
print("embedded matrix (rows: Y_n, columns: Y_n+1)")
for x, row in zip(grid.points, chain.matrix):
    print(f"  {x}:", "  ".join(f"{str(p):>6}" for p in row))
print("pi =", [str(p) for p in law.pi])
print("mu =", [str(m) for m in mu.mass])

c, e1, e2 = best_splitting_point(f, driver, grid)
print(f"best splitting point c = {c}: eps1 = {e1}, eps2 = {e2}")
print("exact d_k for k = 1..5:", [str(d) for d in exact_contraction(chain, 5)])

# the same numbers by Monte Carlo on the float backend
fd = example4_driver("float")
fgrid = StateGrid([0.0, 1.0, 2.0, 3.0])
ys = embedded_samples(f, fd, 0, 200_000, seed=1)
print("d(empirical pi, pi) =", round(uniform_distance(DiscreteCdf.empirical(ys, grid=fgrid), law.as_cdf().to_float()), 4))
est = estimate_limit_distribution(f, fd, 200, 200_000, seed=2, grid=fgrid)
print("d(empirical mu, mu) =", round(uniform_distance(est.cdf, mu.to_float()), 4), f"(ESS {est.ess:.0f})")
prof = contraction_profile(f, fd, 5, seed=3)
print("simulated d_k:", [round(float(x), 4) for x in prof.d])
