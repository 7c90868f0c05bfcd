"""
RiSTL toolkit

Risk Signal Temporal Logic: monitoring, determinization and barrier-based control.
"""

__version__ = "1.0.0"
