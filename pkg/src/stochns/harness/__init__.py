"""Configuration, persistence and command-line orchestration."""
