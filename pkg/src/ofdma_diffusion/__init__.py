"""Multi-user OFDMA link simulation with diffusion-based regeneration of
signal chunks that were never transmitted (or were corrupted in transit)."""

__version__ = "0.1.0"
