"""Semantic-forward relaying simulator: LDPC-coded image broadcast, relay-side
semantic compression, and destination-side iterative joint decoding."""

from .bounds import RateBounds, RateRegionModel, binary_entropy, rate_region
from .channel import ChannelParams, IntraLinkModel, bpsk_awgn, bsc_corrupt, channel_llr
from .correlation import CorrelationEstimate, estimate_rho, exchange, fc_update
from .harness import (SimConfig, SweepContext, TrialRecord, dump_iteration_images,
                      run_sweep, run_trial)
from .joint import (IdentityTranscoder, IterationStats, IterationTrace,
                    SemanticTranscoder, TraceTruth, independent_decode, joint_decode)
from .ldpc import (L_MAX, LdpcCode, SumProductState, build_code, decode, encode,
                   encode_stream, hard_decision)
from .media import (BITS_PER_IMAGE, IMAGE_SHAPE, dequantize_image,
                    euclidean_distance, load_cifar_batch, load_image_any, load_png,
                    quantize_image, save_png)
from .semantic import (FEATURE_SHAPE, SEMANTIC_BITS, CorruptModelError,
                       SemanticModel, apriori_to_semantic_llrs, bits_to_features,
                       features_to_bits, load_model, pixel_bit_llrs, save_model,
                       sem_decode, sem_encode)

__version__ = "0.1.0"
