"""Stochastic vacuum-field simulator for induced-coherence and biphoton interference experiments."""

__version__ = "0.1.0"

from .scenarios import SCENARIOS, ResultBundle, make_scenario, run  # noqa: E402

__all__ = ["SCENARIOS", "ResultBundle", "make_scenario", "run", "__version__"]
