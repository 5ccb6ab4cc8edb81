# %% [markdown]
# # A CNOT gate on a six-level transmon
#
# Four essential levels are read as two qubits; levels 4 and 5 are guard
# levels.  Three carriers sit at the 0-1, 1-2 and 2-3 transitions and the
# spline coefficients are boxed at 3 MHz.

# %%
import math
import time

import numpy as np

from qudit_control import load_config
from qudit_control.config import build_problem, optimizer_config
from qudit_control.optimizer import initial_guess, optimize

cfg = load_config("builtin:cnot")
problem = build_problem(cfg)
print(f"M = {problem.grid.M} steps, h = {problem.grid.h:.4f} ns, {problem.num_params} parameters")

# %%
ocfg = optimizer_config(cfg, seed=0)
t0 = time.perf_counter()
res = optimize(
    problem.value_and_gradient,
    initial_guess(problem.num_params, ocfg),
    ocfg,
    callback=lambda k, x, f: print(f"{k:4d}  {f:.4e}") if k % 20 == 0 else None,
)
print(f"{res.status} after {res.iterations} iterations, {time.perf_counter() - t0:.0f} s")

# %%
final = problem.objective(res.alpha, trace=True)
print(f"J1h = {final.J1h:.3e}   J2h = {final.J2h:.3e}")
print("peak guard populations:", final.max_guard_population)

# %% [markdown]
# Population of every level, started from each essential state, sampled
# along the gate.

# %%
tr = final.population_trace
for j in range(problem.model.E):
    end = tr[-1, :, j]
    print(f"from |{j}>: final populations", np.round(end, 4))

# %%
amp, phase = problem.controls.amplitude_phase(res.alpha)
print("largest spline amplitude per carrier (MHz):", np.round(amp.max(axis=1) / (2 * math.pi) * 1e3, 3))
