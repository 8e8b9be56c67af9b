"""Exception types shared across the package."""


class BdtError(Exception):
    pass


class BadParams(BdtError):
    """Invalid threshold/coding parameters (e.g. k > n, t > n)."""


class EmptyTree(BdtError):
    """Merkle tree requested over an empty leaf list."""


class InsufficientFragments(BdtError):
    """Fewer than k distinct fragments supplied to the erasure decoder."""


class BadShareSet(BdtError):
    """Combine called with duplicate signers or an invalid share."""


class InsufficientShares(BdtError):
    """Fewer than t valid decryption shares supplied."""


class MalformedCiphertext(BdtError):
    """Ciphertext failed structural parsing or its integrity tag."""


class ConfigError(BdtError):
    """Scenario configuration is invalid (n < 3f+1, unknown field, ...)."""


class SafetyViolation(BdtError):
    """An omniscient monitor detected a protocol safety violation."""
