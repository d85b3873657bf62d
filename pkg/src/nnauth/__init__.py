"""Block-wise image authentication with keyed single-neuron threshold codes."""

from .authcore import (BlockSecret, ExtractedBit, compute_bias, extract_bit,
                       normalize_block, sign_block, verify_block)
from .bench import SweepSpec, cdr, estimate_security, run_jpeg_sweep, run_noise_sweep
from .imagepipe import (BlockGrid, GeometryError, KeyMismatchError, VerificationReport,
                        add_gaussian_noise, jpeg_roundtrip, partition, read_image,
                        render_tamper_map, sign_image, verify_image, write_image)
from .sidecar import Descriptor, decode, encode

__version__ = "0.1.0"
