"""Configuration module for ESAFL."""

from esafl.config.settings import Settings

__all__ = ["Settings"]
