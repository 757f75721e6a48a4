"""Tame almost complex structures near a curve in a symplectic 4-manifold.

Submodules:

* :mod:`jtame.linear_core` -- fibrewise tameness, splitting and skew parts
* :mod:`jtame.linear_isotopy` -- the linear isotopy to a compatible pair
* :mod:`jtame.inflation` -- radial profiles and inflated forms on tube models
* :mod:`jtame.jet_extension` -- extension of jets along the curve to the tube
* :mod:`jtame.pipeline` -- stepwise preparation of J along the curve
* :mod:`jtame.cli` -- scenario runner (``jtame`` command)
"""

__version__ = "0.1.0"
