"""Bounded reversed-step search: sharded scan, process pool, checkpoints.

A reversed-step search asks for the least odd prime r, up to a bound, such
that `constraint_prime` is the smallest odd prime divisor of `partner + r`.
Every valid r has the form constraint*m - partner with m even and the odd
part of m free of prime factors below the constraint, so the scan enumerates
multipliers m instead of candidates r.  Shards are contiguous multiplier
ranges; they may run in parallel but are finalized strictly in multiplier
order, so a hit is only accepted once every lower shard has completed and the
result is bit-identical for any worker count.
"""

from __future__ import annotations

import json
import os
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures import TimeoutError as FutureTimeout
from dataclasses import InitVar, dataclass, replace
from functools import lru_cache

from .arith import ensure_odd_prime, is_prime, sieve_primes, smallest_odd_prime_divisor

__all__ = [
    "Checkpoint",
    "CheckpointError",
    "DEFAULT_SHARD_WIDTH",
    "SearchResult",
    "SearchTask",
    "load_checkpoint",
    "multiplier_limit",
    "run_search",
    "save_checkpoint",
    "scan_multiplier_range",
]

DEFAULT_SHARD_WIDTH = 1 << 16
CHECKPOINT_FORMAT_VERSION = 1
DEFAULT_CHECKPOINT_INTERVAL = 30.0


class CheckpointError(Exception):
    """Raised for unreadable, inconsistent, or mismatched checkpoints."""


@dataclass(frozen=True)
class SearchTask:
    """Immutable description of one reversed-step search.

    `constraint_prime` is the prime whose minimality must hold (the divisor),
    `partner` the known neighbour term, `bound` the inclusive candidate
    ceiling, `shard_width` the multiplier-range width of one work unit.
    Equal primes describe a constant extension and must be flagged explicitly
    at construction; the flag itself is not part of the task identity.
    """

    constraint_prime: int
    partner: int
    bound: int
    shard_width: int = DEFAULT_SHARD_WIDTH
    constant_mode: InitVar[bool] = False

    def __post_init__(self, constant_mode: bool):
        ensure_odd_prime(self.constraint_prime)
        ensure_odd_prime(self.partner)
        if self.constraint_prime == self.partner and not constant_mode:
            raise ValueError(
                "equal constraint and partner primes need constant_mode=True"
            )
        if self.shard_width < 1:
            raise ValueError(f"shard_width must be positive, got {self.shard_width}")
        if self.bound < self.constraint_prime - self.partner:
            raise ValueError(
                f"bound {self.bound} below constraint-partner gap "
                f"{self.constraint_prime - self.partner}"
            )


@dataclass(frozen=True)
class Checkpoint:
    """Resumable search state.

    next_multiplier is the smallest even multiplier not yet fully processed;
    everything below it has been exhaustively tested.  best_found, when set,
    is the search's answer (it arose from a multiplier below next_multiplier
    and all smaller multipliers are done, so it is the global minimum).
    """

    task: SearchTask
    next_multiplier: int
    best_found: int | None
    shards_done: int
    wall_seconds: float

    def validate(self) -> None:
        if self.next_multiplier < 2 or self.next_multiplier % 2 != 0:
            raise CheckpointError(
                f"next_multiplier must be even and >= 2, got {self.next_multiplier}"
            )
        if self.shards_done < 0:
            raise CheckpointError(f"negative shards_done {self.shards_done}")
        if self.wall_seconds < 0:
            raise CheckpointError(f"negative wall_seconds {self.wall_seconds}")
        best = self.best_found
        if best is None:
            return
        task = self.task
        if best < 3 or best % 2 == 0 or not is_prime(best):
            raise CheckpointError(f"best_found {best} is not an odd prime")
        total = task.partner + best
        m, rem = divmod(total, task.constraint_prime)
        if rem or m % 2 or m >= self.next_multiplier:
            raise CheckpointError(
                f"best_found {best} inconsistent with next_multiplier "
                f"{self.next_multiplier}"
            )
        if smallest_odd_prime_divisor(total) != task.constraint_prime:
            raise CheckpointError(
                f"best_found {best} fails the divisor property for "
                f"constraint {task.constraint_prime}"
            )


@dataclass(frozen=True)
class SearchResult:
    """Outcome of run_search: a prime, exhaustion, or suspension."""

    prime: int | None
    completed: bool
    checkpoint: Checkpoint

    @property
    def exhausted(self) -> bool:
        return self.completed and self.prime is None


def multiplier_limit(constraint: int, partner: int, bound: int) -> int:
    """Largest multiplier m with constraint*m - partner <= bound."""
    return (bound + partner) // constraint


@lru_cache(maxsize=64)
def _odd_sieve_primes(limit: int) -> tuple[int, ...]:
    if limit < 3:
        return ()
    return tuple(p for p in sieve_primes(limit) if p != 2)


def scan_multiplier_range(
    constraint: int, partner: int, m_lo: int, m_hi: int
) -> int | None:
    """Least valid candidate with even multiplier in [m_lo, m_hi), or None.

    Candidates are r = constraint*m - partner.  Only even m can make r odd,
    and r is valid iff r >= 3 is prime and no odd prime below the constraint
    divides m (any such prime would divide partner + r and beat the
    constraint as smallest odd prime divisor; conversely every valid r yields
    such an m, so the enumeration is exact and ascending in r).
    """
    if m_hi <= m_lo:
        return None
    j_lo = (m_lo + 1) // 2  # m = 2j
    j_hi = (m_hi + 1) // 2
    # candidates below 3 can never be odd primes; skip their multipliers
    min_m = (3 + partner + constraint - 1) // constraint
    j_lo = max(j_lo, (min_m + 1) // 2, 1)
    if j_lo >= j_hi:
        return None
    # odd primes dividing m are exactly those dividing j
    primes = _odd_sieve_primes(min(constraint - 1, j_hi - 1))
    width = j_hi - j_lo
    flags = bytearray(b"\x01") * width
    for q in primes:
        start = ((j_lo + q - 1) // q) * q
        i0 = start - j_lo
        if i0 < width:
            flags[i0::q] = b"\x00" * ((width - i0 + q - 1) // q)
    two_c = 2 * constraint
    find = flags.find
    pos = find(1)
    while pos != -1:
        r = two_c * (j_lo + pos) - partner
        if r >= 3 and is_prime(r):
            return r
        pos = find(1, pos + 1)
    return None


def save_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    """Atomically write a checkpoint (temp file + rename, same directory)."""
    checkpoint.validate()
    task = checkpoint.task
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "task": {
            "constraint_prime": task.constraint_prime,
            "partner": task.partner,
            "bound": task.bound,
            "shard_width": task.shard_width,
        },
        "next_multiplier": checkpoint.next_multiplier,
        "best_found": checkpoint.best_found,
        "shards_done": checkpoint.shards_done,
        "wall_seconds": checkpoint.wall_seconds,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="ascii") as handle:
        json.dump(doc, handle)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(tmp, path)


_TASK_FIELDS = {"constraint_prime", "partner", "bound", "shard_width"}
_DOC_FIELDS = {
    "format_version",
    "task",
    "next_multiplier",
    "best_found",
    "shards_done",
    "wall_seconds",
}


def load_checkpoint(path: str) -> Checkpoint:
    """Read and validate a checkpoint; refuse anything malformed."""
    with open(path, "r", encoding="ascii") as handle:
        text = handle.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid checkpoint JSON ({exc})") from exc
    if not isinstance(doc, dict) or set(doc) != _DOC_FIELDS:
        raise CheckpointError(f"{path}: unexpected document fields")
    if doc["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format_version {doc['format_version']!r}"
        )
    raw_task = doc["task"]
    if not isinstance(raw_task, dict) or set(raw_task) != _TASK_FIELDS:
        raise CheckpointError(f"{path}: unexpected task fields")
    for key in _TASK_FIELDS:
        if not isinstance(raw_task[key], int) or isinstance(raw_task[key], bool):
            raise CheckpointError(f"{path}: task field {key} must be an integer")
    for key in ("next_multiplier", "shards_done"):
        if not isinstance(doc[key], int) or isinstance(doc[key], bool):
            raise CheckpointError(f"{path}: field {key} must be an integer")
    if doc["best_found"] is not None and (
        not isinstance(doc["best_found"], int) or isinstance(doc["best_found"], bool)
    ):
        raise CheckpointError(f"{path}: best_found must be an integer or null")
    if not isinstance(doc["wall_seconds"], (int, float)) or isinstance(
        doc["wall_seconds"], bool
    ):
        raise CheckpointError(f"{path}: wall_seconds must be a number")
    try:
        task = SearchTask(
            raw_task["constraint_prime"],
            raw_task["partner"],
            raw_task["bound"],
            raw_task["shard_width"],
            constant_mode=raw_task["constraint_prime"] == raw_task["partner"],
        )
    except ValueError as exc:
        raise CheckpointError(f"{path}: invalid task ({exc})") from exc
    checkpoint = Checkpoint(
        task=task,
        next_multiplier=doc["next_multiplier"],
        best_found=doc["best_found"],
        shards_done=doc["shards_done"],
        wall_seconds=float(doc["wall_seconds"]),
    )
    checkpoint.validate()
    return checkpoint


def _even_ceil(m: int) -> int:
    return m if m % 2 == 0 else m + 1


def run_search(
    task: SearchTask,
    resume_from: Checkpoint | None = None,
    workers: int = 1,
    *,
    checkpoint_path: str | None = None,
    checkpoint_interval: float = DEFAULT_CHECKPOINT_INTERVAL,
    max_shards: int | None = None,
) -> SearchResult:
    """Run one bounded reversed-step search to a result or suspension.

    Shards are finalized in multiplier order, so the first hit is the least
    valid candidate and the outcome does not depend on `workers`.  With a
    `checkpoint_path`, state is written after every finalized shard and on a
    timer while waiting; `max_shards` suspends the run after that many shards
    (the deterministic stand-in for killing the process).  Resuming with a
    checkpoint for a different task raises CheckpointError.
    """
    if workers < 1:
        raise ValueError(f"workers must be positive, got {workers}")
    if resume_from is not None:
        if resume_from.task != task:
            raise CheckpointError("checkpoint was written for a different task")
        resume_from.validate()
        if resume_from.best_found is not None:
            return SearchResult(resume_from.best_found, True, resume_from)
        m_next = resume_from.next_multiplier
        shards_done = resume_from.shards_done
        base_wall = resume_from.wall_seconds
    else:
        m_next = 2
        shards_done = 0
        base_wall = 0.0

    m_end = multiplier_limit(task.constraint_prime, task.partner, task.bound) + 1
    started = time.monotonic()

    def snapshot(next_m: int, best: int | None) -> Checkpoint:
        return Checkpoint(
            task=task,
            next_multiplier=_even_ceil(next_m),
            best_found=best,
            shards_done=shards_done,
            wall_seconds=base_wall + (time.monotonic() - started),
        )

    def emit(checkpoint: Checkpoint) -> Checkpoint:
        if checkpoint_path is not None:
            save_checkpoint(checkpoint, checkpoint_path)
        return checkpoint

    def shard_bounds():
        lo = m_next
        while lo < m_end:
            hi = min(lo + task.shard_width, m_end)
            yield lo, hi
            lo = hi

    def finalize(hi: int, hit: int | None):
        # returns a final SearchResult, or None to continue
        nonlocal shards_done, m_next
        shards_done += 1
        if hit is not None:
            m_hit = (hit + task.partner) // task.constraint_prime
            return SearchResult(hit, True, emit(snapshot(m_hit + 2, hit)))
        m_next = _even_ceil(hi)
        checkpoint = emit(snapshot(m_next, None))
        if max_shards is not None and shards_done - (
            resume_from.shards_done if resume_from else 0
        ) >= max_shards:
            return SearchResult(None, False, checkpoint)
        return None

    try:
        if workers == 1:
            for lo, hi in shard_bounds():
                result = finalize(
                    hi,
                    scan_multiplier_range(
                        task.constraint_prime, task.partner, lo, hi
                    ),
                )
                if result is not None:
                    return result
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                pending: deque = deque()
                bounds = shard_bounds()

                def refill():
                    while len(pending) < workers + 2:
                        nxt = next(bounds, None)
                        if nxt is None:
                            return
                        lo, hi = nxt
                        pending.append(
                            (
                                hi,
                                pool.submit(
                                    scan_multiplier_range,
                                    task.constraint_prime,
                                    task.partner,
                                    lo,
                                    hi,
                                ),
                            )
                        )

                refill()
                while pending:
                    hi, future = pending[0]
                    while True:
                        try:
                            hit = future.result(timeout=checkpoint_interval)
                            break
                        except FutureTimeout:
                            emit(snapshot(m_next, None))
                    pending.popleft()
                    result = finalize(hi, hit)
                    if result is not None:
                        for _, f in pending:
                            f.cancel()
                        return result
                    refill()
    except KeyboardInterrupt:
        emit(snapshot(m_next, None))
        raise
    return SearchResult(None, True, emit(snapshot(max(m_next, m_end), None)))
