"""NLI microservice: entailment triples over HTTP with a deterministic stub mode."""

from .app import Settings, create_app, stub_triple

__version__ = "0.1.0"

__all__ = ["Settings", "create_app", "stub_triple"]
