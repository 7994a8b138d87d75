"""SDP lower bounds on the error of approximate teleportation and
approximate quantum error correction, via simulation with two-PPT-extendible
and no-signaling constrained channels."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("pptsim")
except PackageNotFoundError:  # running from a source tree without install
    __version__ = "0.0.0"
