"""Hyperspectral image generation with a diffusion model in abundance space."""

from .io import HsiCube, PatchSet, extract_patches, export_pseudocolor, load_cube, normalize, save_cube
from .latent import from_latent, to_latent
from .metrics import MetricsReport, block_diversity, metric_report, point_fidelity
from .unmixing import (
    UnmixingAutoencoder,
    decode,
    encode,
    project_to_simplex,
    reconstruction_report,
    solve_abundance_fcls,
    solve_abundance_linear,
    vca,
)

__version__ = "0.1.0"
