"""Corrective insertion policy.

An attempt starts above the estimated hole center and descends under an
accommodation controller. If the peg reaches the success depth inside the
hole the attempt succeeds. Otherwise the quasi-steady wrench is read once the
contact settles, the direction models predict which side of the hole the peg
sits on, and the peg steps laterally by a fixed amount towards the predicted
center while holding its settled z command. It then descends again. The loop
ends on success, on the correction cap, or when the next step would leave
the divergence radius around the estimate.
"""
import collections
import math
from typing import Optional

import numpy as np

from pihlab import log
from pihlab._common import ConfigObject
from pihlab.console import ensure_progress
from pihlab.control import NonlinearAccommodationController, run_episode
from pihlab.convergence import ConvergenceCriterionConfig, convergence_stop, snapshot_features
from pihlab.core import Position3, TrajectoryConfig, TrajectorySpec, derive_seed, seeded_rng
from pihlab.errors import ConfigError
from pihlab.learning._common import AXES


__all__ = (
    "PolicyConfig",
    "HoleEstimate",
    "CorrectionRecord",
    "TrialResult",
    "RunSummary",
    "ContactOracle",
    "simulate_hole_estimate",
    "attempt_insertion",
    "evaluate_policy",
    "geometric_correction_count",
)


SUCCESS = "success"
ATTEMPT_CAP = "attempt_cap"
DIVERGED = "diverged"
ABORTED = "aborted"
NO_CONVERGENCE = "no_convergence"


class PolicyConfig(ConfigObject):
    """
    Attributes:
        step_size (float): Lateral correction per step and axis, mm.
        max_corrections (int): Correction cap per attempt.
        divergence_limit (float): Largest allowed distance, mm, between a
            commanded lateral position and the initial hole estimate.
        success_depth (float): Depth below the surface, mm, that counts as
            inserted.
        step_gate (float): Smallest |classifier score| for which an axis is
            stepped. When no axis passes, the most confident axis is stepped.
        estimate_error (float): Half-width, mm, of the uniform per-axis error
            of the simulated hole estimate.
    """

    SECTION = "policy"
    FIELDS = ("step_size", "max_corrections", "divergence_limit", "success_depth", "step_gate", "estimate_error")

    def __init__(self, step_size=0.5, max_corrections=10, divergence_limit=5.0, success_depth=5.0,
                 step_gate=0.1, estimate_error=3.0):
        self.step_size = float(step_size)
        self.max_corrections = int(max_corrections)
        self.divergence_limit = float(divergence_limit)
        self.success_depth = float(success_depth)
        self.step_gate = float(step_gate)
        self.estimate_error = float(estimate_error)
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive", step_size=self.step_size)
        if not self.divergence_limit > self.step_size:
            raise ConfigError("divergence_limit must exceed step_size",
                              divergence_limit=self.divergence_limit, step_size=self.step_size)
        if self.max_corrections < 0:
            raise ConfigError("max_corrections must not be negative", max_corrections=self.max_corrections)
        if not self.success_depth > 0:
            raise ConfigError("success_depth must be positive", success_depth=self.success_depth)
        if self.estimate_error < 0:
            raise ConfigError("estimate_error must not be negative", estimate_error=self.estimate_error)


HoleEstimate = collections.namedtuple("HoleEstimate", ("center", "error_bound"))

CorrectionRecord = collections.namedtuple(
    "CorrectionRecord", (
        "signs",
        "scores",
        "step",
        "wrench",
        "position",
    )
)


class TrialResult(object):
    """Outcome of one attempt.

    Attributes:
        success (bool)
        reason (str): success, attempt_cap, diverged, aborted or
            no_convergence.
        corrections_used (int)
        final_offset (tuple of 2 float): Peg lateral offset from the true
            hole center at the end, mm.
        corrections (list of CorrectionRecord)
        ticks (int): Control ticks over all descents.
    """

    def __init__(self, success, reason, corrections_used, final_offset, corrections, ticks):
        self.success = success
        self.reason = reason
        self.corrections_used = corrections_used
        self.final_offset = final_offset
        self.corrections = corrections
        self.ticks = ticks

    def to_dict(self):
        return {
            "success": self.success,
            "reason": self.reason,
            "corrections_used": self.corrections_used,
            "final_offset": list(self.final_offset),
            "ticks": self.ticks,
            "corrections": [
                {
                    "signs": dict(c.signs),
                    "scores": dict(c.scores),
                    "step": list(c.step),
                    "wrench": list(c.wrench),
                    "position": list(c.position),
                }
                for c in self.corrections
            ],
        }


class RunSummary(object):
    def __init__(self, trials, controller=None):
        self.trials = list(trials)
        self.controller = controller

    @property
    def n_trials(self):
        return len(self.trials)

    @property
    def n_success(self):
        return sum(1 for t in self.trials if t.success)

    @property
    def success_rate(self):
        return self.n_success / self.n_trials if self.trials else 0.0

    @property
    def mean_corrections(self):
        """Mean corrections over successful trials; None without successes."""
        used = [t.corrections_used for t in self.trials if t.success]
        return float(np.mean(used)) if used else None

    def to_dict(self):
        return {
            "controller": self.controller,
            "n_trials": self.n_trials,
            "success_rate": self.success_rate,
            "mean_corrections": self.mean_corrections,
            "trials": [t.to_dict() for t in self.trials],
        }


def simulate_hole_estimate(true_center, rng, error_bound=3.0) -> HoleEstimate:
    """Stand-in for a vision hole detector: the true center plus independent
    uniform error in [-error_bound, error_bound] per axis."""
    error = rng.uniform(-error_bound, error_bound, size=2)
    return HoleEstimate((true_center[0] + float(error[0]), true_center[1] + float(error[1])), error_bound)


def geometric_correction_count(offset, clearance, step_size):
    """Steps needed along one axis to bring |offset| below the clearance."""
    return int(math.ceil(max(0.0, abs(offset) - clearance) / step_size))


class ContactOracle(object):
    """Direction "model" that inverts the contact signature exactly.

    From fx = -mu * fz * tanh(dx / s) the offset is recovered as
    dx = s * atanh(-fx / (mu * fz)), likewise for y. An axis is reported with
    score +/-1 when the recovered offset exceeds half a step, else 0. With
    `invert` every sign is flipped, which makes a predictor that is always
    wrong.
    """

    trained = True

    # keeps atanh finite when noise pushes the ratio past 1
    RATIO_LIMIT = 1.0 - 1e-12

    def __init__(self, env_cfg, step_size=0.5, invert=False):
        self.env_cfg = env_cfg
        self.step_size = step_size
        self.invert = invert

    def offsets(self, features):
        fx, fy, fz = features[0], features[1], features[2]
        cfg = self.env_cfg
        if fz <= 0:
            return {axis: 0.0 for axis in AXES}
        result = { }
        for axis, lateral in zip(AXES, (fx, fy)):
            ratio = float(np.clip(-lateral / (cfg.friction_gain * fz), -self.RATIO_LIMIT, self.RATIO_LIMIT))
            result[axis] = cfg.lateral_shape * math.atanh(ratio)
        return result

    def predict(self, features):
        flip = -1 if self.invert else 1
        result = { }
        for axis, d in self.offsets(features).items():
            sign = (1 if d >= 0 else -1) * flip
            score = float(sign) if abs(d) > 0.5 * self.step_size else 0.0
            result[axis] = (sign, score)
        return result


def check_models(models):
    if models is None or not getattr(models, "trained", False):
        raise ConfigError("insertion needs trained direction models for both axes")


def attempt_insertion(
    env_cfg,
    models,
    policy_cfg: Optional[PolicyConfig],
    estimate: HoleEstimate,
    rng,
    controller=None,
    traj_cfg: Optional[TrajectoryConfig] = None,
    criterion: Optional[ConvergenceCriterionConfig] = None,
    logger=None,
) -> TrialResult:
    """Run one corrective insertion attempt.

    Args:
        env_cfg (EnvConfig): Environment holding the true hole center.
        models: Direction predictor with `trained` and `predict(features)`
            returning {axis: (sign, score)}; a DirectionModels or a
            ContactOracle.
        policy_cfg (PolicyConfig or None)
        estimate (HoleEstimate): Where the attempt starts.
        rng: Noise stream for every descent of the attempt.
        controller: Accommodation controller; defaults to the nonlinear one.
        traj_cfg (TrajectoryConfig or None): Approach height, speed and
            per-descent horizon.
        criterion (ConvergenceCriterionConfig or None)
        logger (log.Logger or None)

    Raises:
        ConfigError: `models` is missing or untrained.
    """
    check_models(models)
    logger = log.ensure_logger(logger)
    policy_cfg = policy_cfg if policy_cfg is not None else PolicyConfig()
    controller = controller if controller is not None else NonlinearAccommodationController()
    traj_cfg = traj_cfg if traj_cfg is not None else TrajectoryConfig()
    criterion = criterion if criterion is not None else ConvergenceCriterionConfig()

    success_z = env_cfg.surface_z - policy_cfg.success_depth
    settled = convergence_stop(criterion)

    def inserted(episode):
        last = episode.last
        return last.in_hole and last.x.z <= success_z

    def stop(episode):
        # a peg inside the hole keeps descending until it is deep enough
        return inserted(episode) or (not episode.last.in_hole and settled(episode))

    lateral = np.array(estimate.center, dtype=float)
    center = np.array(estimate.center, dtype=float)
    z_start = env_cfg.surface_z + traj_cfg.approach_height
    corrections = [ ]
    ticks = 0
    reset = True

    def finish(success, reason, episode):
        last = episode.last
        offset = env_cfg.offset_of(last.x)
        logger.debug(
            "attempt ended: {reason} after {n} corrections, offset=({dx:.3f}, {dy:.3f})",
            reason=reason, n=len(corrections), dx=offset[0], dy=offset[1],
        )
        return TrialResult(success, reason, len(corrections), offset, corrections, ticks)

    while True:
        traj = TrajectorySpec(
            Position3(lateral[0], lateral[1], z_start), (0.0, 0.0, -1.0),
            traj_cfg.speed, traj_cfg.num_ticks, traj_cfg.dt,
        )
        episode = run_episode(controller, env_cfg, traj, None, rng, logger=logger, stop=stop, reset=reset)
        ticks += len(episode) - 1

        if episode.aborted:
            return finish(False, ABORTED, episode)
        if inserted(episode):
            return finish(True, SUCCESS, episode)

        features = snapshot_features(episode, criterion)
        if features is None:
            return finish(False, NO_CONVERGENCE, episode)
        if len(corrections) >= policy_cfg.max_corrections:
            return finish(False, ATTEMPT_CAP, episode)

        prediction = models.predict(features)
        gated = [axis for axis in AXES if abs(prediction[axis][1]) > policy_cfg.step_gate]
        if not gated:
            gated = [max(AXES, key=lambda axis: abs(prediction[axis][1]))]

        step = np.zeros(2)
        for index, axis in enumerate(AXES):
            if axis in gated:
                step[index] = -prediction[axis][0] * policy_cfg.step_size
        candidate = lateral + step

        if np.linalg.norm(candidate - center) > policy_cfg.divergence_limit:
            return finish(False, DIVERGED, episode)

        corrections.append(CorrectionRecord(
            signs={axis: int(prediction[axis][0]) for axis in AXES},
            scores={axis: float(prediction[axis][1]) for axis in AXES},
            step=tuple(step.tolist()),
            wrench=tuple(float(v) for v in features),
            position=tuple(candidate.tolist()),
        ))
        logger.debug(
            "correction {n}: step=({sx:+.2f}, {sy:+.2f})",
            n=len(corrections), sx=step[0], sy=step[1],
        )

        # hold the settled z command, keep the controller's feedback state
        lateral = candidate
        z_start = episode.last.x_c.z
        reset = False


def evaluate_policy(
    env_cfg,
    models,
    policy_cfg: Optional[PolicyConfig],
    n_trials,
    rng,
    controller=None,
    traj_cfg=None,
    criterion=None,
    workspace=50.0,
    logger=None,
    progress_handler=None,
) -> RunSummary:
    """Run `n_trials` attempts, each with the hole moved to a random location
    in a square workspace of half-width `workspace` and a fresh estimate."""
    check_models(models)
    if n_trials < 1:
        raise ConfigError("need at least one trial", n_trials=n_trials)
    logger = log.ensure_logger(logger)
    progress = ensure_progress(progress_handler)
    policy_cfg = policy_cfg if policy_cfg is not None else PolicyConfig()
    controller = controller if controller is not None else NonlinearAccommodationController()

    trials = [ ]
    for index in range(n_trials):
        trial_rng = seeded_rng(derive_seed(rng))
        hole = tuple(trial_rng.uniform(-workspace, workspace, size=2).tolist())
        trial_env = env_cfg.replace(hole_center=hole)
        estimate = simulate_hole_estimate(hole, trial_rng, policy_cfg.estimate_error)

        result = attempt_insertion(
            trial_env, models, policy_cfg, estimate, trial_rng,
            controller=controller, traj_cfg=traj_cfg, criterion=criterion,
            logger=logger.tagged("trial %d" % index),
        )
        trials.append(result)
        logger.verbose(
            "trial {index}: {reason}, {n} corrections",
            index=index, reason=result.reason, n=result.corrections_used,
        )
        progress.progress(index + 1, n_trials)

    progress.complete()
    summary = RunSummary(trials, controller.kind)
    logger.info(
        "{kind}: success rate {rate:.2f} over {n} trials",
        kind=controller.kind, rate=summary.success_rate, n=summary.n_trials,
    )
    return summary
