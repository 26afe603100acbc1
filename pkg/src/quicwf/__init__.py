"""Fingerprint visited websites from the first packets of QUIC and HTTPS visits."""

__version__ = "0.1.0"
