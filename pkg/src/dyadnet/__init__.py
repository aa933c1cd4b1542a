"""dyadnet: dual-stream video interaction recognition at desk scale.

A self-contained package: numpy-backed autodiff substrate, a shared-weight
multi-scale 3D-conv backbone, token projection with class tokens, cross-
attention fusion between the two person streams, a synthetic dyadic clip
generator, and a deterministic training/benchmark harness.
"""

__version__ = "0.1.0"
