"""Configuration management for the likelihood embedding toolkit"""

from .settings import Settings, get_settings, reset_settings

__all__ = ["Settings", "get_settings", "reset_settings"]
