from .features import FeatureTensor, init_feature_tensor
from .decoder import DecodedParams, DecoderNet, build_decoder, decode
from .gaussians import GaussianSet, assemble, base_scale_from_samples, repose, repose_with
from .checkpoint import Checkpoint, read_checkpoint, write_checkpoint

__all__ = [
    "FeatureTensor", "init_feature_tensor",
    "DecodedParams", "DecoderNet", "build_decoder", "decode",
    "GaussianSet", "assemble", "base_scale_from_samples", "repose", "repose_with",
    "Checkpoint", "read_checkpoint", "write_checkpoint",
]
