# coding: utf-8

# # The adversary's best response
#
# For a fixed potential, the worst L^p perturbation of size delta is explicit
# in terms of the worst-case state. Here we check that no random perturbation
# of the same size does better, and that the explicit one attains the value.

import numpy as np

from robustshape.fem import lp_norm
from robustshape.functionals import dirichlet_energy, random_perturbations, worstcase_energy
from robustshape.grid import interpolate, piecewise_x, unit_square_mesh
from robustshape.state import solve_worstcase_state, worst_perturbation

mesh = unit_square_mesh(30)
f = interpolate(mesh, piecewise_x(1.0, 2.0, 0.5))
V = 50.0 * (mesh.x < 0.3)
delta, p = 0.25, 2.0

sol = solve_worstcase_state(mesh, V, f, delta, p)
E = worstcase_energy(mesh, V, f, delta, p).value
g_star = worst_perturbation(mesh, sol.u, delta, p)
print(f"fixed point iterations: {sol.iterations}, residual {sol.residual:.2e}")
print(f"worst-case energy      {E:.10f}")
print(f"||g*||_p               {lp_norm(mesh, g_star, p):.10f}  (delta = {delta})")

# Dirichlet energy of the linear problem with source f + g*, compared to the
# worst-case value.

E_star = dirichlet_energy(mesh, V, f + g_star)
print(f"energy at g*           {E_star:.10f}  gap {abs(E_star - E):.2e}")

# Random perturbations on the sphere ||g||_p = delta never exceed it.

rng = np.random.default_rng(1)
samples = [dirichlet_energy(mesh, V, f + g)
           for g in random_perturbations(mesh, 200, delta, p, rng)]
print(f"max over 200 samples   {max(samples):.10f}  (<= worst case: {max(samples) <= E + 1e-12})")
