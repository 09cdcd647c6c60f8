"""clpverify: partial-correctness verification of a small imperative
language by unfold/fold transformation of constrained Horn clauses."""

from .driver import Verdict, VerifyConfig, VerifyResult, verify

__all__ = ["verify", "Verdict", "VerifyConfig", "VerifyResult"]
__version__ = "0.1.0"
