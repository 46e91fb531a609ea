"""Laplace noise, report-noisy-max and privacy composition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class PrivacyError(ValueError):
    pass


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0 or not 0 <= self.delta < 1:
            raise PrivacyError(f"invalid privacy parameters ({self.epsilon}, {self.delta})")

    def check_algorithm_range(self):
        """Entry-point range ``0 < eps < 1/2`` and ``0 < delta < 1/2``."""
        if not (0 < self.epsilon < 0.5 and 0 < self.delta < 0.5):
            raise PrivacyError(
                f"epsilon and delta must lie in (0, 1/2); got ({self.epsilon}, {self.delta})")
        return self


@dataclass(frozen=True)
class Charge:
    tag: str
    eps: float
    delta: float

    def to_dict(self):
        return {"tag": self.tag, "eps": self.eps, "delta": self.delta}


@dataclass
class PrivacyLedger:
    """Append-only list of ``(eps, delta)`` charges with provenance tags."""

    charges: list = field(default_factory=list)

    def charge(self, tag, eps, delta=0.0):
        eps, delta = float(eps), float(delta)
        if eps < 0 or delta < 0 or delta >= 1 or (eps == 0 and delta == 0):
            raise PrivacyError(f"invalid charge ({eps}, {delta}) for {tag!r}")
        self.charges.append(Charge(tag, eps, delta))

    def __len__(self):
        return len(self.charges)

    def __iter__(self):
        return iter(self.charges)

    def by_tag(self, tag):
        return [c for c in self.charges if c.tag == tag]

    def to_list(self):
        return [c.to_dict() for c in self.charges]

    @classmethod
    def from_list(cls, items):
        ledger = cls()
        for i, item in enumerate(items):
            try:
                ledger.charge(item.get("tag", ""), item["eps"], item.get("delta", 0.0))
            except (KeyError, TypeError) as exc:
                raise PrivacyError(f"charges[{i}]: missing or bad field {exc}") from None
        return ledger


def make_rng(seed):
    """The package-wide generator: PCG64 seeded through ``SeedSequence``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def sample_laplace(scale, rng, size=None):
    """Zero-mean Laplace draw(s) with the given scale."""
    if not scale > 0:
        raise PrivacyError(f"Laplace scale must be positive, got {scale}")
    return rng.laplace(0.0, scale, size=size)


def laplace_mechanism(value, sensitivity, epsilon, rng):
    if not sensitivity > 0:
        raise PrivacyError(f"sensitivity must be positive, got {sensitivity}")
    if not epsilon > 0:
        raise PrivacyError(f"epsilon must be positive, got {epsilon}")
    return value + sample_laplace(sensitivity / epsilon, rng)


def report_noisy_max(values, sensitivity, epsilon, rng):
    """Largest of ``values[i] + Lap(sensitivity / epsilon)``, independent per entry.

    Returns the noisy value rather than its index.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise PrivacyError("report_noisy_max needs at least one value")
    if not sensitivity > 0 or not epsilon > 0:
        raise PrivacyError("sensitivity and epsilon must be positive")
    noise = sample_laplace(sensitivity / epsilon, rng, size=values.shape)
    return float((values + noise).max())


class LaplaceNoise:
    """Laplace source that can be switched off for noise-free debug runs."""

    def __init__(self, rng, enabled=True):
        self.rng = rng
        self.enabled = enabled

    def __call__(self, scale, size=None):
        if not self.enabled:
            return 0.0 if size is None else np.zeros(size)
        return sample_laplace(scale, self.rng, size=size)


def compose_basic(ledger):
    charges = list(ledger)
    return PrivacyParams(math.fsum(c.eps for c in charges), math.fsum(c.delta for c in charges))


@dataclass(frozen=True)
class AdvancedComposition:
    epsilon: float
    delta: float
    terms: tuple

    def params(self):
        return PrivacyParams(self.epsilon, self.delta)


def advanced_terms(eps_list, delta_tilde):
    """The three candidate bounds on the composed epsilon."""
    eps = np.asarray(eps_list, dtype=np.float64)
    total = math.fsum(eps)
    if eps.size == 0:
        return (0.0, 0.0, 0.0)
    # (e^x - 1) x / (e^x + 1) == x tanh(x / 2)
    drift = math.fsum(eps * np.tanh(eps / 2))
    sq = math.fsum(eps ** 2)
    second = drift + math.sqrt(2 * sq * math.log(1 / delta_tilde))
    third = drift + math.sqrt(2 * sq * math.log(math.e + math.sqrt(sq) / delta_tilde))
    return (total, second, third)


def compose_advanced(ledger, delta_tilde):
    """Adaptive k-fold composition of heterogeneous ``(eps_l, delta_l)`` charges.

    Returns the minimum of the plain sum and the two concentration bounds,
    together with ``1 - (1 - delta_tilde) * prod(1 - delta_l)``.
    """
    if not 0 < delta_tilde < 1:
        raise PrivacyError(f"delta_tilde must lie in (0, 1), got {delta_tilde}")
    charges = list(ledger)
    terms = advanced_terms([c.eps for c in charges], delta_tilde)
    log_keep = math.log1p(-delta_tilde) + math.fsum(math.log1p(-c.delta) for c in charges)
    return AdvancedComposition(min(terms), -math.expm1(log_keep), terms)
