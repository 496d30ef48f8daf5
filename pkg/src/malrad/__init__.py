"""malrad: multi-channel replay speech detection with a learnable
adaptive time-frequency beamformer and a CRNN classifier."""

__version__ = "0.1.0"
