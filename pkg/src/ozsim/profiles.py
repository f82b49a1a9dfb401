"""Synthetic onboarding corpus: profiles with deliberately flawed entries."""

from __future__ import annotations

from dataclasses import dataclass

from .agents.compliance import UserProfile
from .sim import RngStream

REGIONS = ("SG", "US", "EU", "UK", "JP", "AU")


@dataclass(frozen=True)
class CorpusSpec:
    clean: int
    low_confidence: int = 0
    sanctioned: int = 0
    bad_docs: int = 0

    @property
    def total(self) -> int:
        return self.clean + self.low_confidence + self.sanctioned + self.bad_docs


def generate_profiles(spec: CorpusSpec, rng: RngStream) -> list[UserProfile]:
    """Exactly the requested category mix, deterministic under the stream."""
    profiles: list[UserProfile] = []
    n = 0

    def next_id() -> str:
        nonlocal n
        n += 1
        return f"user-{n:04d}"

    for _ in range(spec.clean):
        profiles.append(
            UserProfile(
                next_id(),
                region=rng.choice(REGIONS),
                face_match_confidence=round(rng.uniform(0.92, 0.995), 4),
                tier=1 if rng.random() < 0.8 else 2,
            )
        )
    for _ in range(spec.low_confidence):
        profiles.append(
            UserProfile(
                next_id(),
                region=rng.choice(REGIONS),
                face_match_confidence=round(rng.uniform(0.80, 0.895), 4),
            )
        )
    for _ in range(spec.sanctioned):
        profiles.append(
            UserProfile(next_id(), region=rng.choice(REGIONS), sanctions_match=True)
        )
    for _ in range(spec.bad_docs):
        profiles.append(
            UserProfile(next_id(), region=rng.choice(REGIONS), docs_valid=False)
        )
    return profiles
