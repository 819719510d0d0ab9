"""Entangled valuations for a toy commodity market and a quantum guessing game."""
from importlib.metadata import PackageNotFoundError, version

from .qcore import InputDomainError

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
