"""Distributed Sobol-sequence storage audit protocols.

Modules: ``sobol`` (block sequences), ``gf`` and ``setrecon`` (set
reconciliation over GF(q)), ``strrecon`` (string reconciliation and TDK
delivery), ``tdk`` (task distribution keys), ``cloudsim`` (simulated block
store), ``audit`` (the four protocols), ``analysis`` (tables and fits) and
``cli``.
"""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
