"""Secure rate-distortion-perception regions, closed forms and a finite-blocklength simulator."""

__version__ = "0.1.0"
