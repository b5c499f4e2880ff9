"""Interpenetration-free rigid and articulated body simulation with adaptive,
contact-event-resolving integration steps."""

__version__ = "0.1.0"
