"""Lab oracles: stateful channels on the lab register L with hidden classical memory.

The hidden state (sampled matrices, states, call counter) stands in for the
Nature register. Every oracle exposes two views of the same channel:

* ``channel(rho)`` acts on a density matrix of L (incoherent use);
* ``draw()`` returns one Kraus-level action for trajectory simulation,
  either a unitary on L or a replacement pure state for L.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PreconditionError, ShapeError
from .groups import SeededStream, sample_haar, sample_haar_unitary
from .linalg import DensityMatrix, MAX_STATE_QUBITS, as_density, is_unitary

ORACLE_KINDS = ("LOQ", "LOP", "LOD", "LO_U", "LO_O", "LO_Sp", "correlated", "state_ensemble")
_GROUP_OF = {"LO_U": "U", "LO_O": "O", "LO_Sp": "Sp"}
_ALIASES = {"LO^U": "LO_U", "LO^O": "LO_O", "LO^Sp": "LO_Sp", "LOS": "state_ensemble"}
STATE_MODES = ("fixed", "fresh", "pair")


@dataclass(frozen=True)
class OracleAction:
    """One sampled action: apply ``unitary`` to L, or replace L by ``state``."""

    unitary: np.ndarray | None = None
    state: np.ndarray | None = None


def _haar_state(D: int, rng) -> np.ndarray:
    g = rng.generator
    v = g.standard_normal(D) + 1j * g.standard_normal(D)
    return v / np.linalg.norm(v)


class LabOracle:
    """A lab oracle on ``ell`` qubits.

    ``deterministic`` is true when every call applies one and the same
    unitary, so repeated runs of a program see identical channels.
    """

    def __init__(self, kind: str, ell: int, rng: SeededStream, options: dict | None = None):
        kind = _ALIASES.get(kind, kind)
        if kind not in ORACLE_KINDS:
            raise ConfigError(f"unknown oracle kind {kind!r}")
        if ell < 1:
            raise PreconditionError("ell must be at least 1")
        if ell > MAX_STATE_QUBITS:
            raise PreconditionError(f"ell={ell} exceeds {MAX_STATE_QUBITS}")
        self.kind = kind
        self.ell = ell
        self.D = 2**ell
        self.rng = rng
        self.options = dict(options or {})
        self.calls = 0
        self.hidden: dict = {}
        self._init_hidden()

    # hidden state ---------------------------------------------------------
    def _init_hidden(self) -> None:
        opts, D = self.options, self.D
        forced = opts.get("hidden_unitary")
        if forced is not None:
            forced = np.asarray(forced, dtype=complex)
            if forced.shape != (D, D) or not is_unitary(forced, 1e-9):
                raise ConfigError("hidden_unitary must be a DxD unitary")
        if self.kind in ("LOQ", "LO_U", "LO_O", "LO_Sp"):
            group = _GROUP_OF.get(self.kind, "U")
            self.hidden["U"] = forced if forced is not None else sample_haar(group, D, self.rng)
        elif self.kind == "correlated":
            self.hidden["U"] = forced if forced is not None else sample_haar_unitary(D, self.rng)
            rots = opts.get("rotations")
            self.hidden["R"] = [np.eye(D, dtype=complex)]
            if rots is not None:
                for r in rots:
                    r = np.asarray(r, dtype=complex)
                    if r.shape != (D, D) or not is_unitary(r, 1e-9):
                        raise ConfigError("rotations must be DxD unitaries")
                    self.hidden["R"].append(r)
            else:
                seed = int(opts.get("rotation_seed", 0))
                self._rot_rng = SeededStream(seed, 1)
                self._rot_angle = opts.get("rotation_angle")
        elif self.kind == "state_ensemble":
            mode = opts.get("mode", "fixed")
            if mode not in STATE_MODES:
                raise ConfigError(f"unknown state-ensemble mode {mode!r}")
            self.hidden["mode"] = mode
            if mode == "fixed":
                self.hidden["states"] = [_haar_state(D, self.rng)]
            elif mode == "pair":
                self.hidden["states"] = [_haar_state(D, self.rng), _haar_state(D, self.rng)]
        elif self.kind == "LOP" and forced is not None:
            raise ConfigError("hidden_unitary is not meaningful for LOP")

    def _rotation(self, i: int) -> np.ndarray:
        R = self.hidden["R"]
        if i < len(R):
            return R[i]
        if "rotations" in self.options:
            raise PreconditionError(f"no rotation supplied for call {i + 1}")
        while len(R) <= i:
            if self._rot_angle is None:
                R.append(sample_haar_unitary(self.D, self._rot_rng))
            else:
                g = self._rot_rng.generator
                h = g.standard_normal((self.D, self.D)) + 1j * g.standard_normal((self.D, self.D))
                h = (h + h.conj().T) / 2
                w, v = np.linalg.eigh(h / np.linalg.norm(h, 2))
                R.append((v * np.exp(-1j * float(self._rot_angle) * w)) @ v.conj().T)
        return R[i]

    @property
    def deterministic(self) -> bool:
        return self.kind in ("LOQ", "LO_U", "LO_O", "LO_Sp")

    @property
    def is_unitary(self) -> bool:
        return self.kind not in ("LOD", "state_ensemble")

    @property
    def hidden_unitary(self) -> np.ndarray:
        if "U" not in self.hidden:
            raise PreconditionError(f"{self.kind} has no stored unitary")
        return self.hidden["U"]

    # actions --------------------------------------------------------------
    def draw(self) -> OracleAction:
        """Sample the action of the next call and advance the call counter."""
        i = self.calls
        self.calls += 1
        kind = self.kind
        if kind == "LOP":
            return OracleAction(unitary=sample_haar_unitary(self.D, self.rng))
        if kind == "correlated":
            return OracleAction(unitary=self.hidden["U"] @ self._rotation(i))
        if kind == "LOD":
            x = int(self.rng.generator.integers(self.D))
            v = np.zeros(self.D, dtype=complex)
            v[x] = 1
            return OracleAction(state=v)
        if kind == "state_ensemble":
            mode = self.hidden["mode"]
            if mode == "fixed":
                return OracleAction(state=self.hidden["states"][0])
            if mode == "pair":
                j = int(self.rng.generator.integers(2))
                return OracleAction(state=self.hidden["states"][j])
            return OracleAction(state=_haar_state(self.D, self.rng))
        return OracleAction(unitary=self.hidden["U"])

    def channel(self, state) -> DensityMatrix:
        """Apply one call to a density matrix on L."""
        rho = as_density(state)
        if rho.dim != self.D:
            raise ShapeError(f"oracle acts on dimension {self.D}, got {rho.dim}")
        if self.kind == "LOD":
            self.calls += 1
            return DensityMatrix(np.eye(self.D, dtype=complex) / self.D, validate=False)
        act = self.draw()
        if act.unitary is not None:
            U = act.unitary
            return DensityMatrix(U @ rho.matrix @ U.conj().T, validate=False)
        v = act.state
        return DensityMatrix(np.outer(v, v.conj()), validate=False)

    def __repr__(self) -> str:
        return f"LabOracle(kind={self.kind!r}, ell={self.ell}, calls={self.calls})"


def make_oracle(kind: str, ell: int, seed: int, options: dict | None = None, stream_id: int = 0) -> LabOracle:
    """Build an oracle whose hidden state is drawn from ``SeededStream(seed, stream_id)``."""
    return LabOracle(kind, ell, SeededStream(int(seed), stream_id), options)
