"""Random input builders shared by the test modules."""
import numpy as np

from gateassign.pricing import FORCED, FREE, PricingFlight, PricingInput


def random_pricing_input(rng, n_max=12, n_min=0, integral_pi=False, forced_prob=0.0,
                         spread=15, pi_max=60.0):
    n = int(rng.integers(n_min, n_max + 1))
    arrivals = np.sort(rng.integers(0, spread * max(n, 1) + 1, n))
    flights = []
    for i in range(n):
        pi = float(rng.uniform(0.0, pi_max))
        pi = max(pi, 1e-3)
        if integral_pi:
            pi = float(max(1, round(pi)))
        status = FORCED if rng.random() < forced_prob else FREE
        flights.append(PricingFlight(i, int(arrivals[i]), pi, int(rng.integers(20, 61)), status))
    return PricingInput(0, flights)


def random_pricing_inputs(count, seed, **kw):
    rng = np.random.default_rng(seed)
    return [random_pricing_input(rng, **kw) for _ in range(count)]
