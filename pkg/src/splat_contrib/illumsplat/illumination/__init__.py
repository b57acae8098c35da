from .field import (
    FieldEvaluator,
    IlluminationLatent,
    LatentSource,
    decode,
    encode,
    evaluate_field,
    generate_latent,
    normalize_latent,
    predict_color_residual,
    sample_noise,
    sample_point_features,
)
from .losses import DEFAULT_TAU, contrastive_loss, generator_alignment_loss
from .networks import (
    ENCODER_STRIDE,
    ColorMLP,
    Decoder,
    Encoder,
    FieldNetworks,
    Generator,
    NetworkShape,
    positional_encoding,
    positional_encoding_size,
)
from .queue import LatentQueueBank, queue_push

__all__ = [
    "DEFAULT_TAU",
    "ENCODER_STRIDE",
    "ColorMLP",
    "Decoder",
    "Encoder",
    "FieldEvaluator",
    "FieldNetworks",
    "Generator",
    "IlluminationLatent",
    "LatentQueueBank",
    "LatentSource",
    "NetworkShape",
    "contrastive_loss",
    "decode",
    "encode",
    "evaluate_field",
    "generate_latent",
    "generator_alignment_loss",
    "normalize_latent",
    "positional_encoding",
    "positional_encoding_size",
    "predict_color_residual",
    "queue_push",
    "sample_noise",
    "sample_point_features",
]
