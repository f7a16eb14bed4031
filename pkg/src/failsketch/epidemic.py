"""Closed-form logistic model of random-scanning worm propagation.

With address space N, vulnerable population V, v hosts infected at time
zero and per-host scan rate r (addresses per second), the infected
fraction follows the logistic curve

    i(t) = expit(beta * (t - T)),   beta = r * V / N,

where T = -logit(v / V) / beta is the half-infection time.  Inverting
gives the time for a fraction a to be infected:

    t(a) = (logit(a) - logit(v / V)) / beta

which is inversely proportional to the scan rate: capping the scan rate
of flagged hosts stretches the whole timeline by exactly the rate
ratio.  That ratio is what the rate-limiting pipeline buys.

Both logits are evaluated through the same code path so t(v/V) is
exactly zero in floating point, and the exponentials run through expit
to avoid overflow at large |beta * (t - T)|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit


class DomainError(ValueError):
    """An argument is outside the model's valid domain."""


@dataclass(frozen=True)
class EpidemicParams:
    """Propagation parameters; rates are per second."""

    address_space: int  # N
    vulnerable: int  # V
    initially_infected: int  # v
    scan_rate: float  # r, addresses probed per second

    def __post_init__(self) -> None:
        if not 0 < self.initially_infected < self.vulnerable <= self.address_space:
            raise DomainError(
                "need 0 < initially_infected < vulnerable <= address_space, got "
                f"v={self.initially_infected}, V={self.vulnerable}, N={self.address_space}"
            )
        if self.scan_rate <= 0:
            raise DomainError(f"scan rate must be positive, got {self.scan_rate}")

    @property
    def beta(self) -> float:
        """Effective contact rate r * V / N per second."""
        return self.scan_rate * self.vulnerable / self.address_space

    @property
    def initial_fraction(self) -> float:
        return self.initially_infected / self.vulnerable

    @property
    def half_time(self) -> float:
        """T: the time at which half the vulnerable hosts are infected."""
        return -float(logit(self.initial_fraction)) / self.beta


def logistic_fraction(beta: float, initial_fraction: float, t: float) -> float:
    """Generic logistic growth d i/dt = beta * i * (1 - i) at time t.

    Entry point for an arbitrary contact rate; infected_fraction is this
    with beta = scan_rate * vulnerable / address_space.
    """
    if beta <= 0:
        raise DomainError(f"contact rate must be positive, got {beta}")
    if not 0.0 < initial_fraction < 1.0:
        raise DomainError(f"initial fraction must be in (0, 1), got {initial_fraction}")
    return float(expit(beta * t + logit(initial_fraction)))


def infected_fraction(params: EpidemicParams, t: float) -> float:
    """Infected fraction i(t) of the vulnerable population at time t."""
    return float(expit(params.beta * (t - params.half_time)))


def time_to_fraction(params: EpidemicParams, fraction: float) -> float:
    """Time until `fraction` of the vulnerable hosts are infected.

    Defined for initial_fraction <= fraction < 1; returns exactly 0 at
    the initial fraction.
    """
    if not params.initial_fraction <= fraction < 1.0:
        raise DomainError(
            f"fraction must be in [{params.initial_fraction}, 1), got {fraction}"
        )
    return (float(logit(fraction)) - float(logit(params.initial_fraction))) / params.beta


def slowdown_factor(rate_before: float, rate_after: float) -> float:
    """How much longer every t(a) becomes when the scan rate drops.

    Equals rate_before / rate_after; the timeline scales exactly
    inversely with the scan rate.
    """
    if rate_before <= 0 or rate_after <= 0:
        raise DomainError(
            f"rates must be positive, got {rate_before} and {rate_after}"
        )
    return rate_before / rate_after


def integrate_epidemic(
    params: EpidemicParams, horizon: float, step: float
) -> np.ndarray:
    """Validation oracle: classic fourth-order Runge-Kutta integration of

        di/dt = beta * i * (1 - i),  i(0) = v / V

    over [0, horizon].  Returns an array of (t, i) rows including both
    endpoints; used to cross-check the closed form, not for production.
    """
    if step <= 0:
        raise DomainError(f"step must be positive, got {step}")
    beta = params.beta
    deriv = lambda i: beta * i * (1.0 - i)
    steps = int(np.ceil(horizon / step))
    out = np.empty((steps + 1, 2))
    i = params.initial_fraction
    out[0] = (0.0, i)
    t = 0.0
    for n in range(1, steps + 1):
        h = min(step, horizon - t)
        k1 = deriv(i)
        k2 = deriv(i + 0.5 * h * k1)
        k3 = deriv(i + 0.5 * h * k2)
        k4 = deriv(i + h * k3)
        i += (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
        out[n] = (t, i)
    return out
