from .keys import CryptoSuite, PartyCrypto
from .merkle import MerkleProof
from .tsig import CombinedSig, SigShare

__all__ = ["CryptoSuite", "PartyCrypto", "MerkleProof", "CombinedSig", "SigShare"]
