"""Token-based vehicular PKI: enrollment, anonymous tokens, edge-issued
pseudonym certificates, hash-chain revocation and clone detection."""

__version__ = "0.1.0"
