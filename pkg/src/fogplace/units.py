"""Unit conventions.

Traffic is stored in bytes, bandwidth in bits per second, time in seconds and
money in currency units. Prefixes are decimal (1 KB = 1e3 bytes, 1 GB = 1e9
bytes) everywhere, including per-GB transfer prices.
"""

BITS_PER_BYTE = 8

KB = 1e3
MB = 1e6
GB = 1e9

KBPS = 1e3
MBPS = 1e6
GBPS = 1e9

MS = 1e-3


def bits(nbytes):
    return nbytes * BITS_PER_BYTE


def per_gb(price):
    """Currency per GB -> currency per byte."""
    return price / GB


def ms_per_mb(delay):
    """Processing delay in ms per MB -> seconds per byte."""
    return delay * MS / MB
