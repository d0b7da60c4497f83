"""A potential given as an expression, with its symbolic gradient."""

from actionforge import ExpressionPotential, minimize_direct, ode_residual, parse
from actionforge.expr import differentiate, to_source
from actionforge.solvers import SolveConfig

src = "-cos(x1) - 0.5*cos(x2) + 0.2*cos(x1 - x2) - 0.3*sin(2*pi*t)*x1"
node = parse(src, 2)
print("canonical:", to_source(node))
# derivatives are built rule by rule and left unsimplified
for i in (1, 2):
    print(f"dF/dx{i}:", to_source(differentiate(node, i)))

p = ExpressionPotential(src, 1.0, 2)
r = minimize_direct(None, p, cfg=SolveConfig(M=12, seed=1))
print(f"{r.status} after {r.iterations} iterations, f = {r.f_value:.10f}, "
      f"residual {ode_residual(r.trajectory, p).residual_sup:.2e}")
