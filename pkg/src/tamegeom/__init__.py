"""Numerical checks for convex sums of Riemannian metrics, geodesics,
quantitative inverse function bounds and symplectic polar decomposition."""
import jax

jax.config.update("jax_enable_x64", True)

__version__ = "0.1.0"
