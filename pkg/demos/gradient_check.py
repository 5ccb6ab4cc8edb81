# %% [markdown]
# # Three ways to the same gradient
#
# The adjoint sweep, a forward-sensitivity march and central differences
# are computed on a small four-level problem and compared entry by entry.

# %%
import numpy as np

from qudit_control import fd_gradient, forward_sensitivity_gradient, load_config
from qudit_control.config import build_problem, optimizer_config
from qudit_control.optimizer import initial_guess

cfg = load_config("builtin:small")
problem = build_problem(cfg)
alpha = initial_guess(problem.num_params, optimizer_config(cfg))
print(f"{problem.num_params} parameters, {problem.grid.M} time steps")

# %%
g_adj = problem.gradient(alpha)
g_fs = forward_sensitivity_gradient(problem, alpha)


def rel(a, b):
    den = np.maximum(np.abs(a), np.abs(b))
    return np.max(np.abs(a - b) / np.where(den > 0, den, 1.0))


print("adjoint vs forward sensitivity:", rel(g_adj, g_fs))

# %% [markdown]
# Central differences trade truncation error against cancellation, so
# the agreement is best at an intermediate step.

# %%
for eps in 10.0 ** -np.arange(2, 10):
    print(f"eps={eps:.0e}  rel. error {rel(g_adj, fd_gradient(problem, alpha, eps)):.2e}")
