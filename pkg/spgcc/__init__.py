"""spgcc: superpixel graph contrastive clustering for hyperspectral images."""
__version__ = "1.0.0"
