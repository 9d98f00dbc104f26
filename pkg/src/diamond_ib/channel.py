"""System parameters shared by all bounds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class ChannelConfig:
    """Source/relay antenna counts, noise power and fronthaul capacities.

    Capacities are in bits per complex channel use; ``sigma2`` is linear and
    the per-antenna SNR is ``1 / sigma2`` since the input has unit power.
    """

    M: int = 3
    N1: int = 3
    N2: int = 3
    sigma2: float = 1e-4
    C1: float = 40.0
    C2: float = 40.0

    def __post_init__(self):
        if min(self.M, self.N1, self.N2) < 1:
            raise ValueError("antenna counts must be >= 1")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive and finite, got {self.sigma2}")
        if self.C1 < 0 or self.C2 < 0 or not (math.isfinite(self.C1) and math.isfinite(self.C2)):
            raise ValueError("capacities must be finite and nonnegative")

    @classmethod
    def from_snr_db(cls, snr_db: float, **kw) -> "ChannelConfig":
        return cls(sigma2=10.0 ** (-snr_db / 10.0), **kw)

    @property
    def snr_db(self) -> float:
        return -10.0 * math.log10(self.sigma2)

    @property
    def N(self) -> tuple[int, int]:
        return (self.N1, self.N2)

    @property
    def C(self) -> tuple[float, float]:
        return (self.C1, self.C2)

    def with_(self, **changes) -> "ChannelConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)
