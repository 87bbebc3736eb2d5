"""Monte Carlo tools for the random affine recursion X_{n+1} = A X_n + B:
Lyapunov exponents, tail index, exit times from balls, and assumption checks."""

__version__ = "0.1.0"
