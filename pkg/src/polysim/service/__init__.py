from .app import app, create_app, run_simulation, validate_scenario

__all__ = ["app", "create_app", "run_simulation", "validate_scenario"]
