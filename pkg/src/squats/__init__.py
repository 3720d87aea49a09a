"""Serial quantization of sparse time sequences into a single OR register."""
from .codebook import Codebook, generate
from .codec import (DecodeResult, NoiseModel, Register, SerialEncoder, decode_coma, decode_ml,
                    eliminate, encode, fragment_pipeline)
from .errors import BudgetExceeded, ConfigError, FeasibilityError, SquatsError
from .quantizer import ScalarQuantizer
from .rates import (level_budget, noisy_length_factor, rate_upper_bound, repetition_feasibility,
                    sufficient_rate_coma, sufficient_rate_distributed, sufficient_rate_ml)

__version__ = "0.1.0"

__all__ = [
    "Codebook", "generate", "DecodeResult", "NoiseModel", "Register", "SerialEncoder",
    "decode_coma", "decode_ml", "eliminate", "encode", "fragment_pipeline", "BudgetExceeded",
    "ConfigError", "FeasibilityError", "SquatsError", "ScalarQuantizer", "level_budget",
    "noisy_length_factor", "rate_upper_bound", "repetition_feasibility", "sufficient_rate_coma",
    "sufficient_rate_distributed", "sufficient_rate_ml",
]
