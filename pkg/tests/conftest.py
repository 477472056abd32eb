"""Shared test helpers: precision contexts and deterministic randomness."""

from __future__ import annotations

import random

from cmtraces.numkernel import PrecCtx

try:
    from hypothesis import HealthCheck, settings

    settings.register_profile(
        "frozen",
        derandomize=True,
        max_examples=60,
        deadline=None,
        suppress_health_check=list(HealthCheck),
    )
    settings.load_profile("frozen")
except ImportError:
    pass


def ctx128() -> PrecCtx:
    return PrecCtx(prec_bits=128, guard_bits=64)


def ctx192() -> PrecCtx:
    return PrecCtx(prec_bits=192, guard_bits=64)


def ctx256() -> PrecCtx:
    return PrecCtx(prec_bits=256, guard_bits=64)


def rng(tag: str) -> random.Random:
    # seeded per test so shrinking one test never reshuffles another
    return random.Random(f"cmtraces:{tag}")
