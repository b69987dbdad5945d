"""Centralized numeric tolerance constants.

All inequality assertions in the verification code are exact in real
arithmetic; these slacks only absorb floating-point noise.
"""

# absolute slack for per-update / per-event monotonicity checks, scaled by
# max(1, |initial objective|)
MONOTONE_SLACK = 1e-8

# relative slack for the randomized inequality suite
LEMMA_REL_SLACK = 1e-9

# replay: F series must match direct evaluation this tightly (relative)
REPLAY_F_REL = 1e-9

# per-coordinate tolerance when checking replayed final state in parallel mode
REPLAY_STATE_ATOL = 1e-9

# prox closed forms vs. 1-D search oracle
ORACLE_W_ATOL = 1e-6
ORACLE_D_ATOL = 1e-4

# finite-difference gradient checks (relative)
FDIFF_REL = 1e-5


def monotone_slack(f0: float) -> float:
    return MONOTONE_SLACK * max(1.0, abs(f0))
