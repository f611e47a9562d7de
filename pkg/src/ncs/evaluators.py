"""Evaluators: everything the tournament can train candidates with.

Three interchangeable kinds behind one interface:
  * trace   -- replays pre-recorded per-candidate accuracy traces from disk
  * synthetic -- deterministic saturating curves derived from candidate cost
  * external  -- drives real trainer processes over an NDJSON stdio protocol

All evaluators answer jobs in the order issued, so substituting one kind for
another (with identical accuracy values) yields identical tournament states.
"""

from __future__ import annotations

import json
import math
import os
import random
import subprocess
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from . import arch as arch_mod
from .errors import ConfigError, EvaluatorError, ProtocolError
from .pool import Candidate

Job = tuple[Candidate, int, int]  # (candidate, from_epoch, n_epochs)

DEFAULT_HYPERPARAMS = {
    "batch_size": 100,
    "optimizer": "rmsprop",
    "augmentation_policy_id": "none",
}


@dataclass(frozen=True)
class EvaluatorCapability:
    kind: str
    deterministic: bool
    parallelism: int = 1


class Evaluator:
    """Base: answers (candidate, from_epoch, n_epochs) with exactly n_epochs values."""

    capability: EvaluatorCapability

    def evaluate(self, candidate: Candidate, from_epoch: int, n_epochs: int) -> list[float]:
        raise NotImplementedError

    def evaluate_batch(self, jobs: Sequence[Job]) -> list[list[float]]:
        return [self.evaluate(c, f, n) for c, f, n in jobs]

    def close(self) -> None:
        pass

    def __enter__(self) -> "Evaluator":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()


def _check_window(from_epoch: int, n_epochs: int) -> None:
    if from_epoch < 0:
        raise EvaluatorError(f"from_epoch must be >= 0, got {from_epoch}")
    if n_epochs < 1:
        raise EvaluatorError(f"n_epochs must be >= 1, got {n_epochs}")


# --- trace replay ------------------------------------------------------------


def trace_path(traces_dir: str, candidate_id: str) -> str:
    return os.path.join(traces_dir, f"{candidate_id}.json")


def save_trace(traces_dir: str, candidate_id: str, epoch_acc: Sequence[float]) -> None:
    os.makedirs(traces_dir, exist_ok=True)
    doc = {"candidate_id": candidate_id, "epoch_acc": list(epoch_acc)}
    with open(trace_path(traces_dir, candidate_id), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_trace(traces_dir: str, candidate_id: str) -> list[float]:
    path = trace_path(traces_dir, candidate_id)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise EvaluatorError(f"no trace for candidate {candidate_id}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise EvaluatorError(f"trace {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or set(doc.keys()) != {"candidate_id", "epoch_acc"}:
        raise EvaluatorError(f"trace {path}: expected exactly candidate_id and epoch_acc fields")
    if doc["candidate_id"] != candidate_id:
        raise EvaluatorError(
            f"trace {path} holds candidate {doc['candidate_id']!r}, expected {candidate_id!r}"
        )
    acc = doc["epoch_acc"]
    if not isinstance(acc, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in acc
    ):
        raise EvaluatorError(f"trace {path}: epoch_acc must be an array of numbers")
    return [float(v) for v in acc]


def load_all_traces(traces_dir: str) -> dict[str, list[float]]:
    """Every *.json trace in a directory, keyed by candidate id (sorted)."""
    try:
        names = sorted(n for n in os.listdir(traces_dir) if n.endswith(".json"))
    except OSError as exc:
        raise ConfigError(f"cannot list traces in {traces_dir}: {exc}") from exc
    if not names:
        raise ConfigError(f"no *.json traces found in {traces_dir}")
    return {name[: -len(".json")]: load_trace(traces_dir, name[: -len(".json")]) for name in names}


class TraceEvaluator(Evaluator):
    """Replays recorded traces verbatim; asking past the end is an error."""

    def __init__(self, traces_dir: str):
        self.traces_dir = traces_dir
        self.capability = EvaluatorCapability(kind="trace", deterministic=True)
        self._cache: dict[str, list[float]] = {}

    def evaluate(self, candidate: Candidate, from_epoch: int, n_epochs: int) -> list[float]:
        _check_window(from_epoch, n_epochs)
        cid = candidate.id
        if cid not in self._cache:
            self._cache[cid] = load_trace(self.traces_dir, cid)
        acc = self._cache[cid]
        end = from_epoch + n_epochs
        if len(acc) < end:
            lo, hi = len(acc) + 1, end
            which = f"epochs {lo}..{hi}" if hi > lo else f"epochs {lo}"
            raise EvaluatorError(
                f"trace for candidate {cid}: {which} missing (trace ends at epoch {len(acc)})"
            )
        return acc[from_epoch:end]


# --- synthetic curves --------------------------------------------------------

# saturation ceiling grows with parameter count; timescale grows with MACs,
# so bigger candidates learn slower but peak higher (curves can cross)
_A_RANGE = (60.0, 78.0)
_TAU_RANGE = (4.0, 40.0)
_PARAMS_REF = 5_300_000
_MACS_REF = 390_000_000


def default_curve(candidate: Candidate) -> tuple[float, float]:
    a_lo, a_hi = _A_RANGE
    t_lo, t_hi = _TAU_RANGE
    a = a_lo + (a_hi - a_lo) * min(1.0, candidate.params / _PARAMS_REF)
    tau = t_lo + (t_hi - t_lo) * min(1.0, candidate.macs / _MACS_REF)
    return a, tau


def synthetic_accuracy(
    seed: int, curve: tuple[float, float], candidate_id: str, epoch: int, noise: float
) -> float:
    """Accuracy at one epoch: a * (1 - exp(-epoch/tau)) plus seeded noise.

    The noise draw is keyed by (seed, candidate, epoch), not by call order, so
    any slicing of the curve reproduces the same values.
    """
    a, tau = curve
    value = a * (1.0 - math.exp(-epoch / tau))
    if noise > 0:
        rng = random.Random(f"{seed}|{candidate_id}|{epoch}")
        value += rng.uniform(-noise, noise)
    return min(100.0, max(0.0, value))


class SyntheticEvaluator(Evaluator):
    """Deterministic stand-in trainer; same seed in, same accuracies out."""

    def __init__(
        self,
        seed: int = 1,
        noise: float = 0.25,
        curve_fn: Callable[[Candidate], tuple[float, float]] = default_curve,
        curves: dict[str, tuple[float, float]] | None = None,
    ):
        if noise < 0:
            raise ConfigError(f"noise must be >= 0, got {noise}")
        self.seed = seed
        self.noise = noise
        self.curve_fn = curve_fn
        self.curves = curves or {}
        self.capability = EvaluatorCapability(kind="synthetic", deterministic=True)

    def curve_for(self, candidate: Candidate) -> tuple[float, float]:
        return self.curves.get(candidate.id) or self.curve_fn(candidate)

    def evaluate(self, candidate: Candidate, from_epoch: int, n_epochs: int) -> list[float]:
        _check_window(from_epoch, n_epochs)
        curve = self.curve_for(candidate)
        return [
            synthetic_accuracy(self.seed, curve, candidate.id, epoch, self.noise)
            for epoch in range(from_epoch + 1, from_epoch + n_epochs + 1)
        ]


# --- external trainer protocol -----------------------------------------------


@dataclass(frozen=True)
class TrainRequest:
    candidate_id: str
    arch: dict[str, Any]
    from_epoch: int
    n_epochs: int
    hyperparams: dict[str, Any]
    checkpoint_dir: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "candidate_id": self.candidate_id,
            "arch": self.arch,
            "from_epoch": self.from_epoch,
            "n_epochs": self.n_epochs,
            "hyperparams": self.hyperparams,
            "checkpoint_dir": self.checkpoint_dir,
        }


@dataclass(frozen=True)
class TrainResponse:
    candidate_id: str
    epoch_acc: tuple[float, ...]
    status: str
    message: str = ""

    @staticmethod
    def from_dict(data: Any) -> "TrainResponse":
        if not isinstance(data, dict):
            raise ProtocolError(f"trainer response must be a JSON object, got {type(data).__name__}")
        required = {"candidate_id", "epoch_acc", "status"}
        missing = required - data.keys()
        if missing:
            raise ProtocolError(f"trainer response missing field(s) {sorted(missing)}")
        unknown = data.keys() - required - {"message"}
        if unknown:
            raise ProtocolError(f"trainer response has unknown field(s) {sorted(unknown)}")
        status = data["status"]
        if status not in ("ok", "error"):
            raise ProtocolError(f"trainer response status must be ok or error, got {status!r}")
        acc = data["epoch_acc"]
        if not isinstance(acc, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in acc
        ):
            raise ProtocolError("trainer response epoch_acc must be an array of numbers")
        return TrainResponse(
            candidate_id=data["candidate_id"],
            epoch_acc=tuple(float(v) for v in acc),
            status=status,
            message=data.get("message", ""),
        )


class _Worker:
    """One trainer child process plus a kill-on-timeout watchdog."""

    def __init__(self, command: Sequence[str], cwd: str | None):
        try:
            self.proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                cwd=cwd,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise ProtocolError(f"cannot start trainer {command!r}: {exc}") from exc
        self.timed_out = False

    def _kill(self) -> None:
        self.timed_out = True
        self.proc.kill()

    def round_trip(self, request: TrainRequest, timeout_s: float) -> TrainResponse:
        line = json.dumps(request.to_dict(), sort_keys=True)
        try:
            assert self.proc.stdin is not None and self.proc.stdout is not None
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise ProtocolError(
                f"trainer rejected request for candidate {request.candidate_id}: {exc}"
            ) from exc
        watchdog = threading.Timer(timeout_s, self._kill)
        watchdog.start()
        try:
            reply = self.proc.stdout.readline()
        finally:
            watchdog.cancel()
        if self.timed_out:
            raise ProtocolError(
                f"trainer timed out after {timeout_s}s on candidate {request.candidate_id}"
            )
        if not reply:
            raise ProtocolError(
                f"trainer closed its stdout while candidate {request.candidate_id} was pending"
            )
        try:
            data = json.loads(reply)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"trainer sent a malformed frame: {reply!r}") from exc
        return TrainResponse.from_dict(data)

    def stop(self) -> None:
        if self.proc.poll() is None:
            try:
                if self.proc.stdin:
                    self.proc.stdin.close()
                self.proc.wait(timeout=2)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()
                self.proc.wait()


class ExternalEvaluator(Evaluator):
    """Drives trainer child processes over newline-delimited JSON on stdio.

    One request frame per line on the child's stdin, one response frame per
    line on its stdout. Up to `parallelism` children run at once; results are
    still merged back in issue order.
    """

    def __init__(
        self,
        command: Sequence[str],
        *,
        timeout_s: float = 300.0,
        parallelism: int = 1,
        hyperparams: dict[str, Any] | None = None,
        checkpoint_dir: str | None = None,
        cwd: str | None = None,
    ):
        if not command:
            raise ConfigError("external evaluator needs a non-empty command")
        if timeout_s <= 0:
            raise ConfigError(f"timeout_s must be positive, got {timeout_s}")
        if parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {parallelism}")
        self.command = list(command)
        self.timeout_s = timeout_s
        self.parallelism = parallelism
        self.hyperparams = dict(DEFAULT_HYPERPARAMS, **(hyperparams or {}))
        self.checkpoint_dir = checkpoint_dir
        self.cwd = cwd
        self.capability = EvaluatorCapability(kind="external", deterministic=False, parallelism=parallelism)
        self._idle: list[_Worker] = []
        self._all: list[_Worker] = []
        self._lock = threading.Lock()

    def _borrow(self) -> _Worker:
        with self._lock:
            if self._idle:
                return self._idle.pop()
            worker = _Worker(self.command, self.cwd)
            self._all.append(worker)
            return worker

    def _give_back(self, worker: _Worker) -> None:
        with self._lock:
            self._idle.append(worker)

    def _discard(self, worker: _Worker) -> None:
        worker.stop()
        with self._lock:
            if worker in self._all:
                self._all.remove(worker)

    def evaluate(self, candidate: Candidate, from_epoch: int, n_epochs: int) -> list[float]:
        _check_window(from_epoch, n_epochs)
        request = TrainRequest(
            candidate_id=candidate.id,
            arch=arch_mod.to_dict(candidate.arch),
            from_epoch=from_epoch,
            n_epochs=n_epochs,
            hyperparams=self.hyperparams,
            checkpoint_dir=self.checkpoint_dir,
        )
        worker = self._borrow()
        try:
            response = worker.round_trip(request, self.timeout_s)
        except ProtocolError:
            self._discard(worker)
            raise
        self._give_back(worker)
        if response.candidate_id != candidate.id:
            raise ProtocolError(
                f"trainer answered for candidate {response.candidate_id!r}, expected {candidate.id!r}"
            )
        if response.status == "error":
            raise ProtocolError(f"trainer error for candidate {candidate.id}: {response.message}")
        if len(response.epoch_acc) != n_epochs:
            raise ProtocolError(
                f"trainer returned {len(response.epoch_acc)} epochs for candidate {candidate.id}, expected {n_epochs}"
            )
        return list(response.epoch_acc)

    def evaluate_batch(self, jobs: Sequence[Job]) -> list[list[float]]:
        if self.parallelism == 1 or len(jobs) <= 1:
            return super().evaluate_batch(jobs)
        with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
            futures = [pool.submit(self.evaluate, c, f, n) for c, f, n in jobs]
            # surface the first failure in issue order, not completion order
            return [fut.result() for fut in futures]

    def close(self) -> None:
        with self._lock:
            workers = list(self._all)
            self._all.clear()
            self._idle.clear()
        for worker in workers:
            worker.stop()


def make_evaluator(config: dict[str, Any], seed: int) -> Evaluator:
    """Build an evaluator from a run config's `evaluator` section."""
    if not isinstance(config, dict) or "kind" not in config:
        raise ConfigError("evaluator config must be an object with a 'kind' field")
    kind = config["kind"]
    if kind == "trace":
        if "traces_dir" not in config:
            raise ConfigError("trace evaluator config needs 'traces_dir'")
        return TraceEvaluator(config["traces_dir"])
    if kind == "synthetic":
        return SyntheticEvaluator(seed=seed, noise=config.get("noise", 0.25))
    if kind == "external":
        if "command" not in config:
            raise ConfigError("external evaluator config needs 'command'")
        return ExternalEvaluator(
            config["command"],
            timeout_s=config.get("timeout_s", 300.0),
            parallelism=config.get("parallelism", 1),
            hyperparams=config.get("hyperparams"),
            checkpoint_dir=config.get("checkpoint_dir"),
            cwd=config.get("cwd"),
        )
    raise ConfigError(f"unknown evaluator kind {kind!r}; expected trace, synthetic, or external")
