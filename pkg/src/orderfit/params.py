"""Distribution tags and parameter containers shared across the package."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class DistributionKind(str, Enum):
    LOGLOGISTIC = "loglogistic"
    WEIBULL = "weibull"
    LOGISTIC = "logistic"

    @classmethod
    def parse(cls, value: "str | DistributionKind") -> "DistributionKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown distribution {value!r}")

    @property
    def log_family(self) -> bool:
        """True when the regressor is log(x) and the data must be positive."""
        return self is not DistributionKind.LOGISTIC


class PlottingScheme(str, Enum):
    STANDARD = "standard"
    BERNARD = "bernard"

    @classmethod
    def parse(cls, value: "str | PlottingScheme") -> "PlottingScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown plotting scheme {value!r}") from None


@dataclass(frozen=True)
class DistributionParams:
    """Scale ``alpha`` and shape ``beta`` of a log-logistic or Weibull law."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")


@dataclass(frozen=True)
class LocScaleParams:
    """Location ``mu`` and scale ``sigma`` of a logistic law."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be finite and > 0, got {self.sigma!r}")
