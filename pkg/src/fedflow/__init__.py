"""fedflow: deterministic workbench for federated traffic-flow prediction
with diffusion-based synthetic data augmentation."""

__version__ = "0.1.0"
