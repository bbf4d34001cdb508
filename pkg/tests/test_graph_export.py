"""Document assembly, DOT/SVG rendering, and the CSV/plot exporters."""

import os
import stat

import pytest

from provtrack import Context, ExportError, InvalidArgumentError, NotFoundError
from provtrack.exports import export_metric_csv, plot_metrics
from provtrack.graph import to_dot, to_svg
from provtrack.prov.jsonio import parse, serialize, validate
from provtrack.prov.model import QualifiedName, RecordKind, RelationKind, new_document

from dotcheck import check_dot, quoted_values
from helpers import start_fixed_run

TRAIN = Context.TRAINING


def attr(record, name):
    wanted = QualifiedName("provtrack", name)
    for qn, value in record.attributes:
        if qn == wanted:
            return value
    return None


def build_reference_run(root, **kw):
    """2 params, 1 dataset, 3 series, 1 artifact, 5 versions, final model."""
    import provtrack

    handle = start_fixed_run(root, **kw)
    handle.log_param("lr", 0.01)
    handle.log_param("epochs", 2)
    handle.log_dataset(provtrack.DatasetDescriptor("train_set", num_samples=100))
    for step in range(4):
        handle.log_metric("loss", 1.0 / (step + 1), TRAIN, step)
        handle.log_metric("accuracy", 0.2 * step, TRAIN, step)
        handle.log_metric("loss", 2.0 / (step + 1), Context.VALIDATION, step)
        handle.save_model_version("net", f"w{step}".encode(), TRAIN, step)
    handle.save_model_version("net", b"w4", TRAIN, 4)
    source = root / "source.txt"
    source.write_bytes(b"aux data")
    handle.log_artifact("aux", source)
    handle.log_model(
        "net",
        provtrack.ModelDescriptor(
            total_parameters=10,
            memory_bytes=40,
            layers=(provtrack.LayerInfo("fc", "Linear", (4,), (2,), "float32"),),
        ),
    )
    return handle


class TestEntityCounts:
    def test_reference_run_counts(self, tmp_path):
        handle = build_reference_run(tmp_path)
        path = handle.end()
        doc = parse(path.read_bytes())
        assert validate(doc).errors == []
        entities = doc.records_of(RecordKind.ENTITY)
        # env + 2 params + 1 dataset + 3 series + 1 artifact + 5 versions + final
        assert len(entities) == 1 + 2 + 1 + 3 + 1 + 5 + 1
        derive = [r for r in doc.relations if r.kind is RelationKind.WAS_DERIVED_FROM]
        # one chain of 5 versions (4 edges) plus the final-model edge
        assert len(derive) == 5

    def test_version_chain_is_simple_path(self, tmp_path):
        handle = build_reference_run(tmp_path)
        path = handle.end()
        doc = parse(path.read_bytes())
        versions = {
            str(e.id)
            for e in doc.records_of(RecordKind.ENTITY)
            if attr(e, "kind") and attr(e, "kind").value == "model_version"
        }
        chain = [
            (str(r.subject), str(r.object))
            for r in doc.relations
            if r.kind is RelationKind.WAS_DERIVED_FROM
            and str(r.subject) in versions
            and str(r.object) in versions
        ]
        assert len(chain) == 4
        outgoing = {}
        incoming = {}
        for newer, older in chain:
            assert outgoing.setdefault(newer, older) == older, "branching chain"
            assert incoming.setdefault(older, newer) == newer, "branching chain"
        # a simple path has exactly one head and one tail
        heads = versions - set(incoming)
        tails = versions - set(outgoing)
        assert len(heads) == 1 and len(tails) == 1

    def test_final_model_derives_from_last_version(self, tmp_path):
        handle = build_reference_run(tmp_path)
        path = handle.end()
        doc = parse(path.read_bytes())
        final_edges = [
            r
            for r in doc.relations
            if r.kind is RelationKind.WAS_DERIVED_FROM
            and str(r.subject).endswith("final_model_net")
        ]
        assert len(final_edges) == 1
        assert str(final_edges[0].object) == "user:model_version_net_4"


class TestDeterminism:
    def test_identical_scripted_runs_serialize_identically(self, tmp_path):
        import provtrack.run as runmod

        paths = []
        for name in ("a", "b"):
            runmod._ACTIVE = None
            handle = build_reference_run(tmp_path / name)
            paths.append(handle.end())
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_serialize_parse_round_trip_is_stable(self, tmp_path):
        handle = build_reference_run(tmp_path)
        path = handle.end()
        raw = path.read_bytes()
        assert serialize(parse(raw)) == raw


class TestDot:
    def test_node_and_edge_conservation(self, tmp_path):
        handle = build_reference_run(tmp_path)
        path = handle.end()
        doc = parse(path.read_bytes())
        dot = to_dot(doc)
        nodes, edges = check_dot(dot)
        assert nodes == len(doc.records)
        assert edges == len(doc.relations)

    def test_empty_document_renders(self):
        dot = to_dot(new_document("www.example.org"))
        assert check_dot(dot) == (0, 0)

    def test_minimal_run_is_three_nodes_two_edges(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        path = handle.end()
        dot = to_dot(parse(path.read_bytes()))
        assert check_dot(dot) == (3, 2)

    def test_node_names_carry_record_kind(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        path = handle.end()
        dot = to_dot(parse(path.read_bytes()))
        names = quoted_values(dot)
        assert "activity:user:exp_0_run" in names
        assert "agent:user:user" in names
        assert "entity:user:environment" in names

    def test_styling_and_direction(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        dot = to_dot(parse(handle.end().read_bytes()))
        assert "rankdir=BT" in dot
        assert "#FFFC87" in dot  # entity fill
        assert "#9FB1FC" in dot  # activity fill
        assert "#FED37F" in dot  # agent fill
        assert "shape=ellipse" in dot
        assert "shape=box" in dot
        assert "shape=house" in dot

    def test_edge_labels_name_the_relation(self, tmp_path):
        handle = build_reference_run(tmp_path)
        dot = to_dot(parse(handle.end().read_bytes()))
        for label in ("used", "wasGeneratedBy", "wasAssociatedWith", "wasDerivedFrom"):
            assert f'label="{label}"' in dot

    def test_rendering_is_deterministic(self, tmp_path):
        handle = build_reference_run(tmp_path)
        doc = parse(handle.end().read_bytes())
        assert to_dot(doc) == to_dot(doc)


class StubDotPath:
    """Context manager that puts a fake `dot` executable on PATH."""

    def __init__(self, tmp_path, script):
        self.tmp_path = tmp_path
        self.script = script

    def __enter__(self):
        exe = self.tmp_path / "bin" / "dot"
        exe.parent.mkdir(parents=True, exist_ok=True)
        exe.write_text("#!/bin/sh\n" + self.script)
        exe.chmod(exe.stat().st_mode | stat.S_IEXEC)
        self._old = os.environ.get("PATH", "")
        os.environ["PATH"] = f"{exe.parent}{os.pathsep}{self._old}"
        return exe

    def __exit__(self, *exc):
        os.environ["PATH"] = self._old
        return False


class TestSvg:
    EMPTY_DOT = "digraph provenance {\n}\n"

    def test_missing_tool_returns_none(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PATH", str(tmp_path / "definitely-empty"))
        assert to_svg(self.EMPTY_DOT) is None

    def test_tool_output_passed_through(self, tmp_path):
        with StubDotPath(tmp_path, 'printf "<svg>fake</svg>"\n'):
            rendered = to_svg(self.EMPTY_DOT)
        assert rendered == b"<svg>fake</svg>"

    def test_tool_failure_raises_export_error(self, tmp_path):
        with StubDotPath(tmp_path, 'echo "syntax error near line 3" >&2\nexit 1\n'):
            with pytest.raises(ExportError) as err:
                to_svg(self.EMPTY_DOT)
        assert "syntax error" in err.value.tool_output


class TestCsvExport:
    def test_three_rows_verbatim(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        for step, value in enumerate([0.5, 0.25, 1e-9]):
            handle.log_metric("loss", value, TRAIN, step)
        handle.end()
        out = export_metric_csv(handle.run_dir, "loss", TRAIN)
        lines = out.read_text().splitlines()
        assert lines[0] == "step,timestamp,value"
        assert len(lines) == 4
        tsv_lines = (handle.metrics_dir / "training_loss.tsv").read_text().splitlines()
        for csv_line, tsv_line in zip(lines[1:], tsv_lines):
            assert csv_line.split(",") == tsv_line.split("\t")

    def test_missing_series_raises(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        handle.end()
        with pytest.raises(NotFoundError):
            export_metric_csv(handle.run_dir, "nope", TRAIN)

    def test_custom_output_path(self, tmp_path):
        handle = start_fixed_run(tmp_path)
        handle.log_metric("m", 1.0, TRAIN, 0)
        handle.end()
        target = tmp_path / "exported.csv"
        assert export_metric_csv(handle.run_dir, "m", TRAIN, target) == target
        assert target.exists()


class TestPlot:
    def make_run(self, tmp_path, series):
        handle = start_fixed_run(tmp_path)
        for key, context, values in series:
            for step, value in enumerate(values):
                handle.log_metric(key, value, context, step)
        handle.end()
        return handle

    def test_single_series_single_polyline(self, tmp_path):
        handle = self.make_run(tmp_path, [("loss", TRAIN, [1.0, 0.5, 0.25])])
        out = plot_metrics(handle.run_dir, [("loss", TRAIN)], tmp_path / "p.svg")
        svg = out.read_text()
        assert svg.count("<polyline") == 1
        assert svg.startswith("<svg")

    def test_two_series_two_polylines(self, tmp_path):
        handle = self.make_run(
            tmp_path,
            [("loss", TRAIN, [1.0, 0.5]), ("accuracy", TRAIN, [0.1, 0.9])],
        )
        out = plot_metrics(
            handle.run_dir, [("loss", TRAIN), ("accuracy", TRAIN)], tmp_path / "p.svg"
        )
        assert out.read_text().count("<polyline") == 2

    def test_disjoint_ranges_get_two_axes(self, tmp_path):
        handle = self.make_run(
            tmp_path,
            [("loss", TRAIN, [0.1, 0.2]), ("samples", TRAIN, [1000.0, 2000.0])],
        )
        svg = plot_metrics(
            handle.run_dir, [("loss", TRAIN), ("samples", TRAIN)], tmp_path / "p.svg"
        ).read_text()
        # right-hand axis labels only appear in dual-axis mode
        assert 'x="738.00"' in svg

    def test_overlapping_ranges_share_axis(self, tmp_path):
        handle = self.make_run(
            tmp_path,
            [("a", TRAIN, [0.0, 1.0]), ("b", TRAIN, [0.5, 1.5])],
        )
        svg = plot_metrics(
            handle.run_dir, [("a", TRAIN), ("b", TRAIN)], tmp_path / "p.svg"
        ).read_text()
        assert 'x="738.00"' not in svg

    def test_empty_selection_rejected(self, tmp_path):
        handle = self.make_run(tmp_path, [("loss", TRAIN, [1.0])])
        with pytest.raises(InvalidArgumentError):
            plot_metrics(handle.run_dir, [], tmp_path / "p.svg")

    def test_unknown_series_rejected(self, tmp_path):
        handle = self.make_run(tmp_path, [("loss", TRAIN, [1.0])])
        with pytest.raises(NotFoundError):
            plot_metrics(handle.run_dir, [("ghost", TRAIN)], tmp_path / "p.svg")

    def test_legend_is_escaped(self, tmp_path):
        handle = self.make_run(tmp_path, [("a<b", TRAIN, [1.0, 2.0])])
        svg = plot_metrics(
            handle.run_dir, [("a<b", TRAIN)], tmp_path / "p.svg"
        ).read_text()
        assert "a&lt;b" in svg
        assert "a<b" not in svg.replace("a&lt;b", "")
