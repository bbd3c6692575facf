"""Morph Lab - LoRa SF-hopping encoder, decoders, channel simulator and SER harness."""

__version__ = "0.1.0"
