"""Randomized audit of the functional inequalities and the gradient."""

from actionforge import property_suite

report = property_suite(1000, seed=0)
for name, check in report.checks.items():
    print(f"{name:<26} passed={check.passed!s:<5} trials={check.trials} margin={check.worst:.2e}")
print("all passed:", report.passed)
