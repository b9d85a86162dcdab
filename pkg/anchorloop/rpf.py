"""
Relational particle filter: the temporary world model.

Each particle holds, per object, a position, a velocity and a relation that is either
free or attached to another object (the host) with a fixed offset. Attached objects
move rigidly with their host. All per-particle state is kept in dense arrays indexed
[particle, object], so every step is vectorized across the ensemble.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .dclite.distributions import Gaussian
from .errors import ProgramError, TrackerError

logger = logging.getLogger(__name__)

FREE = -1
FREE_LABEL = "free"
WEIGHT_TOL = 1e-9


def _isotropic(sigma: float) -> np.ndarray:
    return (sigma**2) * np.eye(3)


@dataclass
class TrackerConfig:
    n_particles: int = 1000
    init_cov: np.ndarray = field(default_factory=lambda: _isotropic(0.02))
    motion_cov: np.ndarray = field(default_factory=lambda: _isotropic(0.05))  # per second
    obs_cov: np.ndarray = field(default_factory=lambda: _isotropic(0.02))
    p_miss: float = 0.1
    ess_threshold: float = 0.5
    attach_length_scale: float = 0.15
    free_weight: float = 0.05
    carry_jitter: float = 0.01
    reestimate_velocity: bool = True

    def __post_init__(self) -> None:
        if self.n_particles < 1:
            raise TrackerError("n_particles must be >= 1")
        for name in ("init_cov", "motion_cov", "obs_cov"):
            cov = np.asarray(getattr(self, name), dtype=float)
            if cov.shape != (3, 3):
                raise TrackerError(f"{name} must be 3x3")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise TrackerError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(cov).min() < -1e-12:
                raise TrackerError(f"{name} must be positive semi-definite")
            setattr(self, name, cov)
        if np.linalg.eigvalsh(self.obs_cov).min() <= 0.0:
            raise TrackerError("obs_cov must be positive definite")
        if not 0.0 < self.p_miss < 1.0:
            raise TrackerError("p_miss must lie in (0,1)")
        if not 0.0 <= self.ess_threshold <= 1.0:
            raise TrackerError("ess_threshold must lie in [0,1]")
        if self.attach_length_scale <= 0.0 or self.free_weight < 0.0:
            raise TrackerError("attachment proposal needs a positive length scale and a non-negative free weight")


@dataclass(frozen=True)
class ObjectEstimate:
    mean: np.ndarray
    attachment: Dict[str, float]

    @property
    def host(self) -> str:
        """Most probable relation value; ties resolve to the first in sorted order."""
        return max(sorted(self.attachment), key=lambda k: self.attachment[k])

    def to_dict(self) -> Dict[str, object]:
        return {"mean": [float(v) for v in self.mean], "attachment": dict(self.attachment)}


@dataclass(frozen=True)
class TrackerSnapshot:
    """Copy of the particle cloud, for inspection and plotting."""

    object_ids: List[str]
    positions: np.ndarray
    hosts: List[List[str]]
    weights: np.ndarray

    def cloud(self, object_id: str) -> np.ndarray:
        return self.positions[:, self.object_ids.index(object_id), :]

    def to_dict(self) -> Dict[str, object]:
        return {
            "object_ids": list(self.object_ids),
            "weights": self.weights.tolist(),
            "particles": {
                oid: {
                    "positions": self.positions[:, j, :].tolist(),
                    "hosts": [row[j] for row in self.hosts],
                }
                for j, oid in enumerate(self.object_ids)
            },
        }


class ParticleEnsemble:
    def __init__(self, config: Optional[TrackerConfig] = None) -> None:
        self.config = config or TrackerConfig()
        n = self.config.n_particles
        self.object_ids: List[str] = []
        self.positions = np.zeros((n, 0, 3))
        self.velocities = np.zeros((n, 0, 3))
        self.hosts = np.full((n, 0), FREE, dtype=int)
        self.offsets = np.zeros((n, 0, 3))
        self.weights = np.full(n, 1.0 / n)
        self.last_ess = float(n)
        self._previous = np.zeros((n, 0, 3))
        self._last_dt = 0.0
        self._obs_noise = Gaussian(np.zeros(3), self.config.obs_cov)

    @property
    def n_particles(self) -> int:
        return self.config.n_particles

    def __contains__(self, object_id: object) -> bool:
        return object_id in self.object_ids

    def index(self, object_id: str) -> int:
        try:
            return self.object_ids.index(object_id)
        except ValueError:
            raise TrackerError(f"unknown object id '{object_id}'") from None

    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights**2))

    def _noise(self, cov: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
        try:
            return Gaussian(np.zeros(3), cov).sample_n(rng, count)
        except ProgramError as exc:
            raise TrackerError(str(exc)) from exc

    def init_object(
        self,
        object_id: str,
        observed: Sequence[float],
        rng: np.random.Generator,
        velocity: Optional[Sequence[float]] = None,
    ) -> None:
        if object_id in self.object_ids:
            raise TrackerError(f"object '{object_id}' is already tracked")
        n = self.n_particles
        belief = Gaussian(np.asarray(observed, dtype=float), self.config.init_cov)
        pos = belief.sample_n(rng, n)
        vel = np.tile(np.zeros(3) if velocity is None else np.asarray(velocity, dtype=float), (n, 1))
        self.object_ids.append(object_id)
        self.positions = np.concatenate([self.positions, pos[:, None, :]], axis=1)
        self.velocities = np.concatenate([self.velocities, vel[:, None, :]], axis=1)
        self.hosts = np.concatenate([self.hosts, np.full((n, 1), FREE, dtype=int)], axis=1)
        self.offsets = np.concatenate([self.offsets, np.zeros((n, 1, 3))], axis=1)
        self._previous = np.concatenate([self._previous, pos[:, None, :]], axis=1)

    def remove_object(self, object_id: str) -> None:
        """Drop an object; particles carrying something on it release their load as free."""
        j = self.index(object_id)
        dependents = self.hosts == j
        self.hosts[dependents] = FREE
        self.velocities[dependents] = 0.0
        self.hosts[self.hosts > j] -= 1
        keep = [k for k in range(len(self.object_ids)) if k != j]
        self.object_ids.pop(j)
        self.positions = self.positions[:, keep, :]
        self.velocities = self.velocities[:, keep, :]
        self.hosts = self.hosts[:, keep]
        self.offsets = self.offsets[:, keep, :]
        self._previous = self._previous[:, keep, :]

    def _carry(self) -> np.ndarray:
        """Place attached objects at host + offset, following host chains. Returns the attached mask."""
        n, m = self.hosts.shape
        rows = np.arange(n)
        attached = self.hosts != FREE
        resolved = ~attached
        for _ in range(m):
            pending = attached & ~resolved
            if not pending.any():
                break
            for j in range(m):
                host = self.hosts[:, j]
                ready = pending[:, j] & resolved[rows, np.where(host >= 0, host, 0)]
                if ready.any():
                    self.positions[ready, j] = self.positions[ready, host[ready]] + self.offsets[ready, j]
                    resolved[ready, j] = True
        return attached

    def predict(self, dt: float, rng: np.random.Generator) -> None:
        if dt < 0:
            raise TrackerError(f"dt must be non-negative, got {dt}")
        n, m = self.hosts.shape
        self._last_dt = dt
        self._previous = self.positions.copy()
        if m == 0:
            return
        free = self.hosts == FREE
        noise = self._noise(self.config.motion_cov * dt, n * m, rng).reshape(n, m, 3)
        moved = self.positions + self.velocities * dt + noise
        self.positions = np.where(free[..., None], moved, self.positions)
        attached = self._carry()
        if attached.any():
            jitter = self._noise(self.config.motion_cov * dt * self.config.carry_jitter, n * m, rng)
            self.positions = np.where(attached[..., None], self.positions + jitter.reshape(n, m, 3), self.positions)

    def weight_and_resample(
        self,
        observations: Mapping[str, Sequence[float]],
        unobserved: Sequence[str],
        rng: np.random.Generator,
        visible: Optional[Sequence[Sequence[float]]] = None,
    ) -> None:
        """
        Likelihood weighting with a product of Gaussian observation densities.

        `visible` lists every position seen this frame; a free unobserved object predicted
        farther than twice the attachment length scale from all of them is penalized by
        p_miss. It defaults to the observed positions.
        """
        for object_id in list(observations) + list(unobserved):
            self.index(object_id)
        log_w = np.log(np.maximum(self.weights, np.finfo(float).tiny))
        for object_id in sorted(observations):
            j = self.index(object_id)
            diff = self.positions[:, j, :] - np.asarray(observations[object_id], dtype=float)
            log_w = log_w + self._obs_noise.logpdf(diff)

        seen = np.asarray(
            list(visible) if visible is not None else [observations[k] for k in sorted(observations)],
            dtype=float,
        ).reshape(-1, 3)
        reach = 2.0 * self.config.attach_length_scale
        for object_id in sorted(unobserved):
            j = self.index(object_id)
            free = self.hosts[:, j] == FREE
            if seen.shape[0]:
                dist = np.linalg.norm(self.positions[:, j, None, :] - seen[None, :, :], axis=2).min(axis=1)
                exposed = free & (dist > reach)
            else:
                exposed = free
            log_w = log_w + np.where(exposed, np.log(self.config.p_miss), 0.0)

        total = logsumexp(log_w)
        if not np.isfinite(total):
            logger.warning("particle weights collapsed; resetting to uniform")
            self.weights = np.full(self.n_particles, 1.0 / self.n_particles)
        else:
            self.weights = np.exp(log_w - total)
            self.weights /= self.weights.sum()
        self.last_ess = self.ess()
        if self.last_ess < self.config.ess_threshold * self.n_particles:
            self.resample(rng)
        if self.config.reestimate_velocity and self._last_dt > 0:
            for object_id in observations:
                j = self.index(object_id)
                free = self.hosts[:, j] == FREE
                vel = (self.positions[:, j, :] - self._previous[:, j, :]) / self._last_dt
                self.velocities[free, j] = vel[free]

    def resample(self, rng: np.random.Generator) -> None:
        """Systematic resampling; particle i is copied floor or ceil of N * w_i times."""
        n = self.n_particles
        cumulative = np.cumsum(self.weights)
        cumulative[-1] = 1.0
        points = (rng.random() + np.arange(n)) / n
        picks = np.searchsorted(cumulative, points, side="right")
        picks = np.minimum(picks, n - 1)
        self.positions = self.positions[picks]
        self.velocities = self.velocities[picks]
        self.hosts = self.hosts[picks]
        self.offsets = self.offsets[picks]
        self._previous = self._previous[picks]
        self.weights = np.full(n, 1.0 / n)

    def _reaches(self, start: np.ndarray, target: int) -> np.ndarray:
        """Per particle: does the host chain starting at `start` pass through `target`?"""
        n, m = self.hosts.shape
        rows = np.arange(n)
        current = start.copy()
        hit = current == target
        for _ in range(m):
            valid = current >= 0
            current = np.where(valid, self.hosts[rows, np.where(valid, current, 0)], FREE)
            hit |= current == target
        return hit

    def propose_attachments(
        self,
        object_id: str,
        hosts: Mapping[str, Sequence[float]],
        last_seen: Sequence[float],
        rng: np.random.Generator,
    ) -> None:
        """
        Resample the relation of a vanished object: attach to a candidate host with weight
        exp(-d/length_scale), or stay free with the fixed free weight.
        """
        j = self.index(object_id)
        candidates = [h for h in sorted(hosts) if h != object_id]
        if not candidates:
            self.hosts[:, j] = FREE
            return
        n = self.n_particles
        seen = np.asarray(last_seen, dtype=float)
        host_idx = np.array([self.index(h) for h in candidates])
        host_pos = np.array([np.asarray(hosts[h], dtype=float) for h in candidates])
        scores = np.exp(-np.linalg.norm(host_pos - seen, axis=1) / self.config.attach_length_scale)
        table = np.tile(np.append(scores, self.config.free_weight), (n, 1))
        for k, h in enumerate(host_idx):
            # attaching to h must not close a cycle through this object
            table[self._reaches(np.full(n, h), j), k] = 0.0
        row_sums = table.sum(axis=1, keepdims=True)
        table = np.where(row_sums > 0, table / np.where(row_sums > 0, row_sums, 1.0), 0.0)
        table[row_sums[:, 0] == 0, -1] = 1.0
        cumulative = np.cumsum(table, axis=1)
        cumulative[:, -1] = 1.0
        picks = (cumulative < rng.random(n)[:, None]).sum(axis=1)

        attach = picks < len(candidates)
        chosen = np.where(attach, host_idx[np.minimum(picks, len(candidates) - 1)], FREE)
        offsets = seen - host_pos[np.minimum(picks, len(candidates) - 1)]
        self.hosts[:, j] = chosen
        self.offsets[attach, j] = offsets[attach]
        self.velocities[attach, j] = 0.0
        rows = np.flatnonzero(attach)
        self.positions[rows, j] = self.positions[rows, chosen[rows]] + self.offsets[rows, j]
        logger.debug(
            "attachment proposal for %s: %s",
            object_id,
            {h: float(np.mean(chosen == idx)) for h, idx in zip(candidates, host_idx)},
        )

    def detach_on_reveal(self, object_id: str) -> None:
        j = self.index(object_id)
        self.hosts[:, j] = FREE
        self.offsets[:, j] = 0.0
        self.velocities[:, j] = 0.0

    def attachment_posterior(self, object_id: str) -> Dict[str, float]:
        j = self.index(object_id)
        posterior: Dict[str, float] = {}
        for value in np.unique(self.hosts[:, j]):
            label = FREE_LABEL if value == FREE else self.object_ids[value]
            posterior[label] = float(self.weights[self.hosts[:, j] == value].sum())
        return dict(sorted(posterior.items()))

    def estimate(self, object_id: str) -> ObjectEstimate:
        j = self.index(object_id)
        mean = self.weights @ self.positions[:, j, :]
        return ObjectEstimate(mean=mean, attachment=self.attachment_posterior(object_id))

    def snapshot(self) -> TrackerSnapshot:
        labels = [FREE_LABEL] + list(self.object_ids)
        return TrackerSnapshot(
            object_ids=list(self.object_ids),
            positions=self.positions.copy(),
            hosts=[[labels[h + 1] for h in row] for row in self.hosts],
            weights=self.weights.copy(),
        )
