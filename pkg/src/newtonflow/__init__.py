"""Visualization of complex analytic vector fields through their Newton maps."""
__version__ = "0.1.0"
