"""Homomorphic scheme: parameters, ring arithmetic, round PRG, codec, encryption."""

from esafl.scheme.codec import (
    EncodedPoly,
    PackedPlain,
    check_zero_slot,
    codec_error_bound,
    dcd_unpk,
    ecd_pack,
)
from esafl.scheme.eshe import Ciphertext, KeyMaterial, decrypt, encrypt, eval_add, keygen
from esafl.scheme.params import SchemeParams, capacity, setup
from esafl.scheme.prg import prpg, round_public
from esafl.scheme.ring import RingElem, SmallPoly, SparseTernaryKey

__all__ = [
    "SchemeParams",
    "setup",
    "capacity",
    "RingElem",
    "SmallPoly",
    "SparseTernaryKey",
    "prpg",
    "round_public",
    "EncodedPoly",
    "PackedPlain",
    "ecd_pack",
    "check_zero_slot",
    "codec_error_bound",
    "dcd_unpk",
    "Ciphertext",
    "KeyMaterial",
    "keygen",
    "encrypt",
    "eval_add",
    "decrypt",
]
