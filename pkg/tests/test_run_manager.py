"""Run lifecycle, rank handling, and environment capture."""

import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import provtrack
from provtrack import (
    Context,
    HostInfo,
    IllegalStateError,
    InvalidArgumentError,
    ManualClock,
    capture_environment,
    resolve_rank,
)
from provtrack.prov.jsonio import parse, validate
from provtrack.prov.model import RecordKind

from helpers import start_fixed_run


class TestRunIds:
    def test_fresh_directory_starts_at_zero(self, tmp_path):
        handle = start_fixed_run(tmp_path, experiment="experiment_name")
        assert handle.run_id == 0
        assert handle.rank == 0
        assert handle.run_dir == tmp_path / "experiment_name_0"
        assert (handle.run_dir / "artifacts").is_dir()
        assert (handle.run_dir / "metrics").is_dir()
        handle.end()

    def test_sequential_runs_count_up(self, tmp_path):
        first = start_fixed_run(tmp_path)
        first.end()
        second = start_fixed_run(tmp_path)
        second.end()
        assert (first.run_id, second.run_id) == (0, 1)
        assert first.run_dir != second.run_dir
        assert sorted(p.name for p in tmp_path.iterdir()) == ["exp_0", "exp_1"]

    def test_crashed_run_still_claims_its_slot(self, tmp_path):
        # A directory without any files is what a crash right after
        # start_run leaves behind; the scan must skip past it.
        (tmp_path / "exp_3").mkdir(parents=True)
        handle = start_fixed_run(tmp_path)
        assert handle.run_id == 4
        handle.end()

    def test_ids_are_per_experiment(self, tmp_path):
        a = start_fixed_run(tmp_path, experiment="a")
        a.end()
        b = start_fixed_run(tmp_path, experiment="b")
        b.end()
        assert (a.run_id, b.run_id) == (0, 0)

    def test_unrelated_directories_ignored(self, tmp_path):
        (tmp_path / "exp_notanumber").mkdir(parents=True)
        (tmp_path / "other_7").mkdir()
        handle = start_fixed_run(tmp_path)
        assert handle.run_id == 0
        handle.end()


class TestLifecycle:
    def test_second_start_is_illegal(self, tmp_path):
        start_fixed_run(tmp_path)
        with pytest.raises(IllegalStateError):
            start_fixed_run(tmp_path)
        provtrack.end_run()

    def test_end_twice_is_illegal(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        handle.end()
        with pytest.raises(IllegalStateError):
            handle.end()

    def test_logging_after_end_is_illegal(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        handle.end()
        with pytest.raises(IllegalStateError):
            handle.log_param("k", 1)
        with pytest.raises(IllegalStateError):
            handle.log_metric("m", 1.0, Context.TRAINING, 0)
        with pytest.raises(IllegalStateError):
            handle.log_current_execution_time("t", Context.TRAINING, 0)

    def test_module_level_directives_need_active_run(self):
        with pytest.raises(IllegalStateError):
            provtrack.log_param("k", 1)
        with pytest.raises(IllegalStateError):
            provtrack.end_run()

    def test_new_run_possible_after_end(self, tmp_path):
        start_fixed_run(tmp_path).end()
        handle = start_fixed_run(tmp_path)
        assert handle.active
        handle.end()

    @settings(max_examples=40, deadline=None)
    @given(ops=st.lists(st.sampled_from(["param", "metric", "end"]), max_size=12))
    def test_state_machine_property(self, tmp_path_factory, ops):
        # After the first end, every further call must raise illegal-state.
        import provtrack.run as runmod

        runmod._ACTIVE = None
        handle = start_fixed_run(tmp_path_factory.mktemp("sm"))
        ended = False
        n = 0
        for op in ops:
            n += 1
            if ended:
                with pytest.raises(IllegalStateError):
                    if op == "param":
                        handle.log_param(f"k{n}", 1)
                    elif op == "metric":
                        handle.log_metric("m", 1.0, Context.TRAINING, 0)
                    else:
                        handle.end()
            elif op == "param":
                handle.log_param(f"k{n}", 1)
            elif op == "metric":
                handle.log_metric("m", 1.0, Context.TRAINING, 0)
            else:
                handle.end()
                ended = True
        if not ended:
            handle.end()
        runmod._ACTIVE = None

    def test_config_validation(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            provtrack.RunConfig(user_namespace="")
        with pytest.raises(InvalidArgumentError):
            provtrack.RunConfig(user_namespace="x", experiment_name="")
        with pytest.raises(InvalidArgumentError):
            provtrack.RunConfig(user_namespace="x", experiment_name="a/b")
        with pytest.raises(InvalidArgumentError):
            provtrack.RunConfig(user_namespace="x", save_after_n_logs=0)
        with pytest.raises(InvalidArgumentError):
            provtrack.RunConfig(user_namespace="x", rank=-1)


class TestEmptyRun:
    def test_zero_log_run_is_minimal_and_valid(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        path = handle.end()
        assert path.name == "provgraph_exp_0_rank0.json"
        doc = parse(path.read_bytes())
        assert validate(doc).errors == []
        assert len(doc.records_of(RecordKind.ACTIVITY)) == 1
        assert len(doc.records_of(RecordKind.AGENT)) == 1
        entities = doc.records_of(RecordKind.ENTITY)
        assert [str(e.id) for e in entities] == ["user:environment"]
        assert len(doc.relations) == 2

    def test_activity_times_come_from_clock(self, tmp_path):
        clock = ManualClock(1000)
        handle = start_fixed_run(tmp_path, clock=clock)
        clock.advance(5000)
        path = handle.end()
        doc = parse(path.read_bytes())
        activity = doc.records_of(RecordKind.ACTIVITY)[0]
        assert activity.start_ms == 1000
        assert activity.end_ms == 6000


class TestSinkMode:
    def test_nonzero_rank_writes_nothing(self, tmp_path):
        handle = start_fixed_run(tmp_path, rank=3)
        assert handle.sink
        handle.log_param("lr", 0.1)
        handle.log_metric("loss", 1.0, Context.TRAINING, 0)
        handle.save_model_version("m", b"bytes", Context.TRAINING, 0)
        handle.log_dataset(provtrack.DatasetDescriptor("d"))
        assert handle.end() is None
        assert list(tmp_path.iterdir()) == []

    @pytest.mark.parametrize("rank", [1, 2, 7])
    def test_rank_gating_property(self, tmp_path, rank):
        handle = start_fixed_run(tmp_path, rank=rank)
        for step in range(300):  # enough to cross any flush threshold
            handle.log_metric("loss", 0.5, Context.TRAINING, step)
        assert handle.end() is None
        assert list(tmp_path.iterdir()) == []

    def test_collect_all_processes_keeps_nonzero_ranks(self, tmp_path):
        handle = start_fixed_run(tmp_path, rank=2, collect_all_processes=True)
        assert not handle.sink
        path = handle.end()
        assert path.name == "provgraph_exp_0_rank2.json"

    def test_rank_zero_never_sinks(self, tmp_path):
        handle = start_fixed_run(tmp_path, rank=0)
        assert not handle.sink
        handle.end()

    def test_sink_still_enforces_lifecycle(self, tmp_path):
        handle = start_fixed_run(tmp_path, rank=1)
        handle.end()
        with pytest.raises(IllegalStateError):
            handle.log_param("k", 1)


class TestResolveRank:
    def test_explicit_wins_over_environment(self):
        assert resolve_rank(3, {"RANK": "7"}) == 3

    def test_slurm_variable(self):
        assert resolve_rank(None, {"SLURM_PROCID": "5"}) == 5

    def test_empty_environment_defaults_to_zero(self):
        assert resolve_rank(None, {}) == 0

    def test_precedence_order(self):
        env = {
            "SLURM_PROCID": "1",
            "OMPI_COMM_WORLD_RANK": "2",
            "RANK": "3",
            "LOCAL_RANK": "4",
        }
        assert resolve_rank(None, env) == 1
        del env["SLURM_PROCID"]
        assert resolve_rank(None, env) == 2
        del env["OMPI_COMM_WORLD_RANK"]
        assert resolve_rank(None, env) == 3
        del env["RANK"]
        assert resolve_rank(None, env) == 4

    def test_unparsable_variable_skipped_with_warning(self):
        with pytest.warns(RuntimeWarning):
            assert resolve_rank(None, {"SLURM_PROCID": "banana", "RANK": "2"}) == 2

    def test_negative_variable_skipped(self):
        with pytest.warns(RuntimeWarning):
            assert resolve_rank(None, {"RANK": "-4"}) == 0

    def test_negative_explicit_rejected(self):
        with pytest.raises(InvalidArgumentError):
            resolve_rank(-1, {})


class TestCaptureEnvironment:
    def test_allowlist_filters(self):
        env = {"SLURM_JOB_ID": "9", "RANK": "0", "HOME": "/root", "EDITOR": "vi"}
        snap = capture_environment(environ=env, prober=lambda: [])
        assert dict(snap.variables) == {"SLURM_JOB_ID": "9", "RANK": "0"}

    def test_allowlist_override_counts(self):
        env = {"AAA_X": "1", "BBB_Y": "2", "CCC_Z": "3", "AAB": "4"}
        snap = capture_environment(environ=env, prober=lambda: [], allowlist=("AA",))
        assert len(snap.variables) == 2

    def test_secret_values_redacted(self):
        env = {"MY_TOKEN": "abc", "API_KEY": "xyz", "MY_SECRET_THING": "s", "PASSWORD": "p"}
        snap = capture_environment(environ=env, prober=lambda: [], allowlist=("MY_", "API", "PASS"))
        assert all(value == "[redacted]" for _, value in snap.variables)

    def test_missing_prober_warns_and_flags(self):
        with pytest.warns(RuntimeWarning):
            snap = capture_environment(environ={}, prober=None)
        assert snap.prober_missing
        assert snap.dependencies == ()

    def test_failing_prober_degrades(self):
        def boom():
            raise RuntimeError("no metadata")

        with pytest.warns(RuntimeWarning):
            snap = capture_environment(environ={}, prober=boom)
        assert snap.prober_missing

    def test_default_prober_sees_installed_packages(self):
        snap = capture_environment(environ={})
        names = {name.lower() for name, _ in snap.dependencies}
        assert "pytest" in names

    def test_host_info_injectable(self):
        host = HostInfo("h", "plan9", 1, ("cmd",))
        snap = capture_environment(environ={}, prober=lambda: [], host_info=host)
        assert snap.host == host


class TestThreadSafety:
    def test_concurrent_metric_logging_conserves_count(self, tmp_path):
        handle = start_fixed_run(tmp_path, save_after_n_logs=7)
        per_thread = 200

        def work(thread_id):
            for i in range(per_thread):
                handle.log_metric("loss", float(i), Context.TRAINING, i)

        threads = [threading.Thread(target=work, args=(t,)) for t in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        series = handle.metrics.series("loss", Context.TRAINING)
        assert series.count == 4 * per_thread
        handle.end()
        lines = (handle.metrics_dir / "training_loss.tsv").read_text().splitlines()
        assert len(lines) == 4 * per_thread
