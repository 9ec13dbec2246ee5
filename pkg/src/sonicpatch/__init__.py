"""Semi-hyperbolic patch solver for the self-similar nonlinear wave system (Chaplygin gas).

Modules: ``core`` (coefficient formulas), ``wave`` (exact planar wave and
characteristic tracing), ``goursat`` (characteristic mesh), ``soniclayer``
(near-sonic march and diagnostics), ``verify`` (finite-difference identity
checks), ``config``/``pipeline``/``cli`` (runs and artifacts).
"""

__version__ = "0.1.0"
