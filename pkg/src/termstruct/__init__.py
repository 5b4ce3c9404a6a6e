"""Term-structure statistics for futures markets.

Constant-maturity curve construction, return moments across maturities,
maturity-scaling power laws, per-maturity tail exponents and their
cross-market aggregation, with synthetic generators for validation.
"""

__version__ = "0.1.0"
