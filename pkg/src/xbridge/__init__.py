"""Cross-chain bridge transaction pairing."""

from .abi import AbiRegistry, decode_instance, encode_call, encode_log
from .categorize import Categorizer, categorize, combination_count
from .examiner import examine
from .inference import LexicalProvider, LLMProvider, RoleLexicon, infer_candidates
from .model import FieldPath, PairingParams, Quintuple, Side, TransactionInstance
from .pairing import pair_all, score
from .pipeline import BridgePairer, InstanceDecoder

__version__ = "0.1.0"

__all__ = [
    "AbiRegistry",
    "BridgePairer",
    "Categorizer",
    "FieldPath",
    "InstanceDecoder",
    "LLMProvider",
    "LexicalProvider",
    "PairingParams",
    "Quintuple",
    "RoleLexicon",
    "Side",
    "TransactionInstance",
    "categorize",
    "combination_count",
    "decode_instance",
    "encode_call",
    "encode_log",
    "examine",
    "infer_candidates",
    "pair_all",
    "score",
]
