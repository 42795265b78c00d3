"""Configuration package (hard-coded defaults for the prosody toolkit)."""
