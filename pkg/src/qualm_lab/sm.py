"""Simple-measurement (incoherent) strategies and their executor.

A strategy with k rounds measures |0^L> once (round 0), then in each round
i = 1..k prepares sigma on L, calls the oracle once and measures L with a
rank-one POVM. Both the POVM and the prepared state may depend on all earlier
outcomes; nothing quantum survives from one round to the next.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import PreconditionError, ShapeError
from .linalg import DensityMatrix, Povm, _sample_index, as_density


@dataclass(frozen=True)
class SmPolicy:
    """History-indexed POVMs and preparations.

    ``povm_for(h)`` receives the history ``(s_0, ..., s_{i-1})`` and returns the
    POVM of round i (``h == ()`` for round 0). ``prepare_for(h)`` receives the
    same history for rounds i >= 1 and returns the state prepared before the
    i-th oracle call. ``adaptive`` tells exact analysis whether the maps can be
    evaluated once and reused.
    """

    rounds: int
    dim: int
    povm_for: Callable
    prepare_for: Callable
    adaptive: bool = True
    name: str = ""

    def __post_init__(self):
        if self.rounds < 1:
            raise PreconditionError("a policy needs at least one round")

    def povm(self, history) -> Povm:
        p = self.povm_for(tuple(history))
        if not isinstance(p, Povm):
            p = Povm.from_pairs(p)
        if p.dim != self.dim:
            raise ShapeError(f"POVM acts on dimension {p.dim}, policy on {self.dim}")
        return p

    def prepare(self, history) -> DensityMatrix:
        rho = as_density(self.prepare_for(tuple(history)))
        if rho.dim != self.dim:
            raise ShapeError(f"prepared state has dimension {rho.dim}, policy {self.dim}")
        return rho

    @property
    def arity(self) -> int:
        return self.povm(()).size


def fixed_policy(k: int, povm: Povm, sigma, name: str = "") -> SmPolicy:
    """Non-adaptive policy: the same POVM and preparation in every round."""
    rho = as_density(sigma)
    return SmPolicy(k, povm.dim, lambda h: povm, lambda h: rho, adaptive=False, name=name)


def execute_sm(policy: SmPolicy, oracle, rng, post_measurement=None) -> tuple:
    """Run ``policy`` against ``oracle`` and return the transcript (s_0, ..., s_k).

    ``post_measurement(i, s_i, state)`` is called after every round with the
    post-measurement state of L; whatever it returns is dropped, so a hook
    cannot carry quantum information into the next round.
    """
    D = policy.dim
    if oracle.D != D:
        raise ShapeError(f"oracle dimension {oracle.D} differs from policy dimension {D}")
    zero = np.zeros(D, dtype=complex)
    zero[0] = 1
    povm = policy.povm(())
    s = _sample_index(povm.probabilities(zero), rng)
    history = [s]
    if post_measurement is not None:
        post_measurement(0, s, povm.vectors[:, s])
    for i in range(1, policy.rounds + 1):
        sigma = policy.prepare(history)
        rho = oracle.channel(sigma)
        povm = policy.povm(history)
        s = _sample_index(povm.probabilities(rho.matrix), rng)
        history.append(s)
        if post_measurement is not None:
            post_measurement(i, s, povm.vectors[:, s])
    return tuple(history)
