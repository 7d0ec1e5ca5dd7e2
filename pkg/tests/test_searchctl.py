import dataclasses
import json
import os
import random

import pytest

import oracles
from pfib.searchctl import (
    Checkpoint,
    CheckpointError,
    SearchTask,
    load_checkpoint,
    multiplier_limit,
    run_search,
    save_checkpoint,
    scan_multiplier_range,
)


def brute_scan(constraint, partner, m_lo, m_hi):
    """Reference for scan_multiplier_range: try every multiplier in order."""
    for m in range(m_lo, m_hi):
        if m % 2:
            continue
        r = constraint * m - partner
        if r >= 3 and oracles.trial_is_prime(r) and oracles.sopd_trial(partner + r) == constraint:
            return r
    return None


class TestSearchTask:
    def test_accepts_valid(self):
        task = SearchTask(439, 7, 10**6)
        assert task.shard_width == 1 << 16
        SearchTask(7, 7, 100, constant_mode=True)

    def test_equal_primes_need_flag(self):
        with pytest.raises(ValueError, match="constant_mode"):
            SearchTask(7, 7, 100)

    def test_flag_not_part_of_identity(self):
        assert SearchTask(7, 7, 100, constant_mode=True) == SearchTask(
            7, 7, 100, constant_mode=True
        )

    @pytest.mark.parametrize("args", [(2, 7, 100), (9, 7, 100), (7, 2, 100)])
    def test_rejects_non_odd_primes(self, args):
        with pytest.raises(ValueError, match="not an odd prime"):
            SearchTask(*args)

    def test_rejects_bound_below_gap(self):
        with pytest.raises(ValueError, match="below constraint-partner gap"):
            SearchTask(439, 7, 100)

    def test_rejects_bad_shard_width(self):
        with pytest.raises(ValueError, match="shard_width"):
            SearchTask(3, 5, 100, shard_width=0)


class TestMultiplierLimit:
    @pytest.mark.parametrize("c,p,bound,expected", [
        (3, 5, 100, 35),
        (7, 3, 10, 1),
        (406507, 67, 2_000_000_000, 4919),
    ])
    def test_values(self, c, p, bound, expected):
        assert multiplier_limit(c, p, bound) == expected
        assert c * expected - p <= bound < c * (expected + 1) - p


class TestScanMultiplierRange:
    def test_empty_range(self):
        assert scan_multiplier_range(3, 5, 10, 10) is None
        assert scan_multiplier_range(3, 5, 10, 4) is None

    def test_skips_candidates_below_three(self):
        # m = 2 gives r = 1, which no prime test should even see
        assert scan_multiplier_range(3, 5, 2, 4) is None
        assert scan_multiplier_range(3, 5, 2, 6) == 7

    def test_reference_hit(self):
        assert scan_multiplier_range(439, 7, 926, 928) == 406507
        assert scan_multiplier_range(439, 7, 2, 926) is None

    def test_hit_satisfies_divisor_property(self):
        r = scan_multiplier_range(439, 7, 2, 2000)
        assert r == 406507
        assert oracles.sopd_trial(7 + r) == 439

    def test_matches_brute_force(self):
        rng = random.Random(7)
        primes = [p for p in oracles.simple_primes(200) if p > 2]
        for _ in range(60):
            c = rng.choice(primes)
            p = rng.choice(primes)
            lo = rng.randrange(2, 500)
            hi = lo + rng.randrange(0, 400)
            assert scan_multiplier_range(c, p, lo, hi) == brute_scan(c, p, lo, hi), (
                c, p, lo, hi,
            )


def make_checkpoint(best=None, next_multiplier=100, shards=2, wall=1.5):
    task = SearchTask(439, 7, 10**6, shard_width=64)
    return Checkpoint(task, next_multiplier, best, shards, wall)


class TestCheckpointIO:
    def test_roundtrip(self, tmp_path):
        path = str(tmp_path / "cp.json")
        checkpoint = make_checkpoint(best=406507, next_multiplier=928, shards=15)
        save_checkpoint(checkpoint, path)
        assert load_checkpoint(path) == checkpoint
        assert not os.path.exists(path + ".tmp")

    def test_document_shape(self, tmp_path):
        path = str(tmp_path / "cp.json")
        save_checkpoint(make_checkpoint(), path)
        with open(path) as handle:
            doc = json.load(handle)
        assert doc == {
            "format_version": 1,
            "task": {
                "constraint_prime": 439,
                "partner": 7,
                "bound": 10**6,
                "shard_width": 64,
            },
            "next_multiplier": 100,
            "best_found": None,
            "shards_done": 2,
            "wall_seconds": 1.5,
        }

    def test_overwrite_keeps_latest(self, tmp_path):
        path = str(tmp_path / "cp.json")
        save_checkpoint(make_checkpoint(next_multiplier=100), path)
        save_checkpoint(make_checkpoint(next_multiplier=200, shards=3), path)
        assert load_checkpoint(path).next_multiplier == 200

    def test_equal_prime_task_roundtrip(self, tmp_path):
        path = str(tmp_path / "cp.json")
        task = SearchTask(7, 7, 100, constant_mode=True)
        save_checkpoint(Checkpoint(task, 2, None, 0, 0.0), path)
        assert load_checkpoint(path).task == task

    def test_save_refuses_invalid_state(self, tmp_path):
        path = str(tmp_path / "cp.json")
        with pytest.raises(CheckpointError, match="even"):
            save_checkpoint(make_checkpoint(next_multiplier=101), path)
        assert not os.path.exists(path)

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_checkpoint(str(tmp_path / "nope.json"))


def _valid_doc():
    return {
        "format_version": 1,
        "task": {
            "constraint_prime": 439,
            "partner": 7,
            "bound": 10**6,
            "shard_width": 64,
        },
        "next_multiplier": 100,
        "best_found": None,
        "shards_done": 2,
        "wall_seconds": 1.5,
    }


class TestLoadRejections:
    def check(self, tmp_path, mutate, match):
        doc = _valid_doc()
        mutate(doc)
        path = tmp_path / "cp.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match=match):
            load_checkpoint(str(path))

    def test_valid_doc_loads(self, tmp_path):
        path = tmp_path / "cp.json"
        path.write_text(json.dumps(_valid_doc()))
        load_checkpoint(str(path))

    def test_unknown_field(self, tmp_path):
        self.check(tmp_path, lambda d: d.update(extra=1), "document fields")

    def test_missing_field(self, tmp_path):
        self.check(tmp_path, lambda d: d.pop("shards_done"), "document fields")

    def test_unknown_task_field(self, tmp_path):
        self.check(tmp_path, lambda d: d["task"].update(note="x"), "task fields")

    def test_missing_task_field(self, tmp_path):
        self.check(tmp_path, lambda d: d["task"].pop("shard_width"), "task fields")

    def test_wrong_format_version(self, tmp_path):
        self.check(
            tmp_path, lambda d: d.update(format_version=2), "format_version"
        )

    def test_bool_masquerading_as_int(self, tmp_path):
        self.check(
            tmp_path, lambda d: d.update(next_multiplier=True), "must be an integer"
        )

    def test_string_task_value(self, tmp_path):
        self.check(
            tmp_path, lambda d: d["task"].update(bound="1000000"), "must be an integer"
        )

    def test_string_wall_seconds(self, tmp_path):
        self.check(
            tmp_path, lambda d: d.update(wall_seconds="fast"), "must be a number"
        )

    def test_string_best_found(self, tmp_path):
        self.check(
            tmp_path, lambda d: d.update(best_found="7"), "integer or null"
        )

    def test_odd_next_multiplier(self, tmp_path):
        self.check(tmp_path, lambda d: d.update(next_multiplier=101), "even")

    def test_negative_shards(self, tmp_path):
        self.check(tmp_path, lambda d: d.update(shards_done=-1), "shards_done")

    def test_negative_wall(self, tmp_path):
        self.check(tmp_path, lambda d: d.update(wall_seconds=-0.5), "wall_seconds")

    def test_composite_best_found(self, tmp_path):
        self.check(tmp_path, lambda d: d.update(best_found=406509), "odd prime")

    def test_best_found_wrong_residue(self, tmp_path):
        # 104729 is prime but 7 + 104729 is not divisible by 439
        self.check(
            tmp_path, lambda d: d.update(best_found=104729), "inconsistent"
        )

    def test_best_found_above_next_multiplier(self, tmp_path):
        # 406507 comes from multiplier 926, not yet covered by next=900
        def mutate(doc):
            doc.update(best_found=406507, next_multiplier=900)

        self.check(tmp_path, mutate, "inconsistent")

    def test_best_found_failing_divisor_property(self, tmp_path):
        # multiplier 12 gives the prime 5261 = 439*12 - 7, but
        # 7 + 5261 = 4 * 3 * 439: the constraint 439 is not smallest
        def mutate(doc):
            doc.update(best_found=5261)

        self.check(tmp_path, mutate, "divisor property")

    def test_invalid_task_values(self, tmp_path):
        self.check(
            tmp_path, lambda d: d["task"].update(constraint_prime=4), "invalid task"
        )

    def test_bound_below_gap(self, tmp_path):
        self.check(tmp_path, lambda d: d["task"].update(bound=10), "invalid task")

    def test_corrupt_json(self, tmp_path):
        path = tmp_path / "cp.json"
        path.write_text("{not json")
        with pytest.raises(CheckpointError, match="not valid checkpoint JSON"):
            load_checkpoint(str(path))

    def test_non_object_document(self, tmp_path):
        path = tmp_path / "cp.json"
        path.write_text("[1, 2]")
        with pytest.raises(CheckpointError, match="document fields"):
            load_checkpoint(str(path))


class TestRunSearch:
    def test_immediate_hit(self):
        result = run_search(SearchTask(3, 5, 100))
        assert result.prime == 7
        assert result.completed and not result.exhausted
        assert result.checkpoint.best_found == 7
        assert result.checkpoint.next_multiplier == 6
        assert result.checkpoint.shards_done == 1

    def test_deep_hit(self):
        result = run_search(SearchTask(439, 7, 10**6))
        assert result.prime == 406507
        assert result.checkpoint.next_multiplier == 928

    def test_exhaustion(self):
        result = run_search(SearchTask(406507, 67, 2_000_000_000))
        assert result.prime is None
        assert result.completed and result.exhausted
        assert result.checkpoint.next_multiplier == 4920

    def test_bound_allowing_no_multiplier(self):
        result = run_search(SearchTask(439, 7, 439))
        assert result.exhausted
        assert result.checkpoint.next_multiplier == 2

    def test_constant_mode(self):
        result = run_search(SearchTask(7, 7, 100, constant_mode=True))
        assert result.prime == 7

    def test_pool_matches_serial(self):
        for c, p, bound in [(439, 7, 10**6), (3, 5, 100), (406507, 67, 2 * 10**9)]:
            task = SearchTask(c, p, bound, shard_width=256)
            serial = run_search(task, workers=1)
            pooled = run_search(task, workers=2)
            assert serial.prime == pooled.prime
            assert serial.checkpoint.next_multiplier == pooled.checkpoint.next_multiplier
            assert serial.checkpoint.shards_done == pooled.checkpoint.shards_done

    def test_matches_linear_oracle(self):
        rng = random.Random(20)
        primes = [p for p in oracles.simple_primes(300) if p > 2]
        for _ in range(15):
            c = rng.choice(primes)
            p = rng.choice(primes)
            bound = rng.randrange(max(10, c - p), 20_000)
            task = SearchTask(c, p, bound, shard_width=128, constant_mode=c == p)
            assert run_search(task).prime == oracles.reversed_step_scan(p, c, bound)

    def test_rejects_bad_workers(self):
        with pytest.raises(ValueError, match="workers"):
            run_search(SearchTask(3, 5, 100), workers=0)

    def test_resume_task_mismatch(self):
        checkpoint = run_search(SearchTask(3, 5, 100)).checkpoint
        with pytest.raises(CheckpointError, match="different task"):
            run_search(SearchTask(3, 5, 200), resume_from=checkpoint)

    def test_resume_with_answer_is_instant(self):
        done = run_search(SearchTask(439, 7, 10**6))
        again = run_search(SearchTask(439, 7, 10**6), resume_from=done.checkpoint)
        assert again.prime == 406507
        assert again.checkpoint == done.checkpoint


class TestSuspendResume:
    TASK = SearchTask(439, 7, 10**6, shard_width=64)

    def test_full_run_shard_count(self):
        # the hit at multiplier 926 sits in the 15th shard of width 64
        result = run_search(self.TASK)
        assert result.prime == 406507
        assert result.checkpoint.shards_done == 15

    @pytest.mark.parametrize("stop_after", [1, 2, 7, 14])
    def test_resume_at_boundary(self, stop_after):
        suspended = run_search(self.TASK, max_shards=stop_after)
        assert suspended.prime is None and not suspended.completed
        assert not suspended.exhausted
        checkpoint = suspended.checkpoint
        assert checkpoint.next_multiplier == 2 + 64 * stop_after
        assert checkpoint.shards_done == stop_after
        resumed = run_search(self.TASK, resume_from=checkpoint)
        assert resumed.prime == 406507
        assert resumed.completed
        assert resumed.checkpoint.shards_done == 15
        assert resumed.checkpoint.wall_seconds >= checkpoint.wall_seconds

    def test_every_boundary_gives_same_answer(self):
        expected = run_search(self.TASK).prime
        for stop_after in range(1, 15):
            suspended = run_search(self.TASK, max_shards=stop_after)
            resumed = run_search(self.TASK, resume_from=suspended.checkpoint, workers=2)
            assert resumed.prime == expected, stop_after

    def test_max_shards_counts_new_work_only(self):
        suspended = run_search(self.TASK, max_shards=3)
        again = run_search(self.TASK, resume_from=suspended.checkpoint, max_shards=3)
        assert again.checkpoint.shards_done == 6
        assert again.checkpoint.next_multiplier == 2 + 64 * 6

    def test_checkpoint_file_tracks_progress(self, tmp_path):
        path = str(tmp_path / "cp.json")
        state = None
        seen = []
        for _ in range(40):
            result = run_search(
                self.TASK, resume_from=state, checkpoint_path=path, max_shards=1
            )
            on_disk = load_checkpoint(path)
            assert on_disk == result.checkpoint
            seen.append(on_disk.next_multiplier)
            if result.completed:
                assert result.prime == 406507
                assert on_disk.best_found == 406507
                break
            state = result.checkpoint
        else:
            pytest.fail("search never completed")
        assert seen == sorted(seen)
        assert len(seen) == 15

        # a fresh process would pick the answer straight off the disk
        revived = run_search(self.TASK, resume_from=load_checkpoint(path))
        assert revived.prime == 406507


class TestResultInvariants:
    def test_hit_checkpoint_is_self_consistent(self):
        result = run_search(SearchTask(439, 7, 10**6, shard_width=512))
        checkpoint = result.checkpoint
        checkpoint.validate()
        clone = dataclasses.replace(checkpoint, wall_seconds=0.0)
        clone.validate()

    def test_exhausted_checkpoint_covers_whole_range(self):
        task = SearchTask(406507, 67, 2_000_000_000)
        result = run_search(task)
        limit = multiplier_limit(task.constraint_prime, task.partner, task.bound)
        assert result.checkpoint.next_multiplier > limit
