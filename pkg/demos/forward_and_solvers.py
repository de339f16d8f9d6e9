"""Simulate lemon data of a spin-top phantom and compare Landweber with CGLS-TV.

Runs at 21^3 voxels and 11 x 21 x 15 lemons so it finishes in about a minute.
"""
import numpy as np

from lemoncst import (CylinderDomain, LimitedAxes, NoiseSpec, PhantomSpec, SolverConfig,
                      add_noise, apply, build_operator, cgls_tv, landweber, make_phantom)

dims = 21
op = build_operator(CylinderDomain(), LimitedAxes.default(n_h=11, n_theta=21, n_z=15), dims)
print(f"system matrix {op.shape[0]} x {op.shape[1]}, {op.matrix.nnz} nonzeros")

truth = make_phantom(PhantomSpec("spin_top"), dims)
x_ref = truth.data.ravel()
for gamma in (0.001, 0.05):
    b = add_noise(apply(op, truth), NoiseSpec(gamma, seed=0)).data.ravel()
    lw = landweber(op, b, SolverConfig(iterations=200), x_ref=x_ref)
    tv = cgls_tv(op, b, SolverConfig(method="cgls_tv", tv_lambda=0.03), truth.dims, x_ref=x_ref)
    print(f"gamma={gamma}: landweber eps_r {min(lw.errors):.3f} (iteration {lw.best_iteration}), "
          f"cgls-tv eps_r {tv.errors[-1]:.3f}")

# the adjoint is exact to rounding
rng = np.random.default_rng(0)
x, y = rng.standard_normal(op.shape[1]), rng.standard_normal(op.shape[0])
print("adjoint gap", abs((op @ x) @ y - x @ (op.T @ y)) / (np.linalg.norm(op @ x) * np.linalg.norm(y)))
