"""High-stealth backdoor risk (HSBR) evaluation toolkit.

Computes 16 weighted risk metrics across four dimensions (dependency
impact, payload concealment, community quality, continuous integration)
for open-source repositories and aggregates them into a single HSBR
score, with calibration, sensitivity and correlation tooling.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
