# %% [markdown]
# Variations on the desk reconstruction: a looser tolerance (the phantom's
# own residual), one steering step instead of twenty, no nonnegativity
# clipping, and steering interleaved with the blocks.  Same data and grid
# as demo 02.  Runs for several minutes.

# %%
import time

from superiorization import (SuperiorizationConfig, TotalVariation, algorithm_r,
                             efficient_view_order, interleaved_run, plain_run, res,
                             superiorized_run)
from superiorization.tomo import (ImageGrid, NoiseModel, ScanGeometry, assemble_problem,
                                  head_phantom, rasterize_phantom, simulate_projections)

side = 64
phantom = head_phantom()
grid = ImageGrid(side, phantom.extent / side)
data = simulate_projections(phantom, ScanGeometry(15, 12.0, 96, 0.27, 11),
                            NoiseModel(2_000_000, 0.05, seed=1))
problem = assemble_problem(data, grid, efficient_view_order(15))
tv = TotalVariation(side)
loose = res(problem, rasterize_phantom(phantom, side).values)
eps = plain_run(algorithm_r(problem), problem.proximity(), 0.33 / 0.91 * loose).trace[-1].res


def config(n):
    return SuperiorizationConfig(tv, n_steering=n, gamma_base=0.99995, keep_vectors=False)


variants = {
    "standard (N=20)": lambda: superiorized_run(algorithm_r(problem), problem.proximity(),
                                                config(20), eps),
    "loose epsilon": lambda: superiorized_run(algorithm_r(problem), problem.proximity(),
                                              config(20), loose),
    "N=1": lambda: superiorized_run(algorithm_r(problem), problem.proximity(), config(1), eps),
    "no Q": lambda: superiorized_run(algorithm_r(problem, apply_nonneg=False),
                                     problem.proximity(), config(20), eps),
    "interleaved": lambda: interleaved_run(problem, config(1), eps),
}

# %%
print(f"{'variant':<16} {'iterations':>10} {'res':>8} {'TV':>8} {'seconds':>8}")
for name, run in variants.items():
    t = time.perf_counter()
    out = run()
    last = out.trace[-1]
    status = "" if out.output.defined else "  (cap reached)"
    print(f"{name:<16} {last.k:>10} {last.res:>8.4f} {last.phi:>8.2f} "
          f"{time.perf_counter() - t:>8.0f}{status}")
