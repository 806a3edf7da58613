"""
Tests for the command-line application.
"""
import csv
import io
import json

import pytest
import yaml

from src.applications.cli import main
from src.meshgrade.config import MESH_FORMAT_VERSION, REPORT_FORMAT_VERSION
from src.meshgrade.mesh import read_mesh, write_mesh
from src.meshgrade.synth import DefectSpec, SynthSpec, generate_labeled_mesh


def run(*argv):
    """Run the application and return (exit status, stdout text)."""
    stdout = io.StringIO()
    status = main([str(a) for a in argv], stdout=stdout)
    return status, stdout.getvalue()


@pytest.fixture
def corpus(tmp_path):
    """Directory of four small labelled meshes."""
    directory = tmp_path / "meshes"
    for index in range(4):
        spec = SynthSpec(rows=4, cols=4, surface='cylinder' if index % 2 else 'flat',
                         defects=(DefectSpec('warped', 1, 40.0),), seed=index)
        labeled = generate_labeled_mesh(spec)
        write_mesh(directory / f"part-{index}.mesh.json", labeled.mesh, labeled.labels)
    return directory


@pytest.fixture
def model_file(tmp_path, corpus):
    path = tmp_path / "model.json"
    assert run('train', corpus, '--trees', 3, '--K', 1, '--out', path)[0] == 0
    return path


def _error_line(capsys):
    return capsys.readouterr().err.strip().splitlines()[-1]


class TestMeshCommands:
    def test_metrics_to_stdout(self, corpus):
        status, text = run('metrics', corpus / "part-0.mesh.json", '--stdout')
        assert status == 0
        lines = text.splitlines()
        assert lines[0].startswith("element_id,skewness,aspect_ratio")
        assert len(lines) == 17

    def test_metrics_of_one_square(self, tmp_path, unit_square):
        write_mesh(tmp_path / "square.mesh.json", unit_square)
        out = tmp_path / "props.csv"
        assert run('metrics', tmp_path / "square.mesh.json", '--out', out)[0] == 0
        row = out.read_text(encoding='utf-8').splitlines()[1].split(',')
        assert [float(v) for v in row[1:]] == [0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]

    def test_convert_to_obj(self, corpus):
        status, text = run('convert', corpus / "part-1.mesh.json", '--to', 'obj', '--stdout')
        assert status == 0
        assert sum(line.startswith("f ") for line in text.splitlines()) == 16

    def test_validate(self, tmp_path, corpus):
        dangling = tmp_path / "dangling.mesh.json"
        dangling.write_text(json.dumps({
            'format': MESH_FORMAT_VERSION,
            'nodes': [{'id': i, 'xyz': [float(i), 0.0, 0.0]} for i in (1, 2, 3)],
            'elements': [{'id': 1, 'nodes': [1, 2, 3, 9]}],
        }), encoding='utf-8')
        assert run('validate', corpus / "part-0.mesh.json")[0] == 0
        assert run('validate', dangling)[0] == 1

    def test_synth_single_mesh(self, tmp_path):
        out = tmp_path / "plate.mesh.json"
        status, _ = run('synth', '--rows', 3, '--cols', 4, '--defect', 'sliver:1', '--out', out)
        assert status == 0
        mesh, labels = read_mesh(out)
        assert len(mesh) == 12
        assert labels.rework_ids

    def test_synth_benchmark(self, tmp_path):
        status, text = run('synth', '--meshes', 2, '--out', tmp_path / "bench", '--stdout')
        assert status == 0
        assert yaml.safe_load(text)['meshes'] == 2
        assert (tmp_path / "bench" / "manifest.yaml").exists()


class TestModelCommands:
    def test_predict(self, corpus, model_file):
        status, text = run('predict', corpus / "part-2.mesh.json", '--model', model_file,
                           '--threshold', 0.3, '--stdout')
        assert status == 0
        rows = list(csv.DictReader(io.StringIO(text)))
        assert len(rows) == 16
        assert rows[0]['mesh_id'] == "part-2"
        for row in rows:
            expected = 'rework' if float(row['probability']) >= 0.3 else 'passed'
            assert row['label'] == expected

    def test_featurize(self, corpus):
        status, text = run('featurize', corpus, '--K', 1, '--stdout')
        assert status == 0
        assert len(text.splitlines()) == 1 + 4 * 16

    def test_crossval_and_evaluate(self, tmp_path, corpus):
        predictions = tmp_path / "predictions.csv"
        status, text = run('crossval', corpus, '--folds', 2, '--trees', 3, '--K', 1,
                           '--predictions', predictions, '--pr-curve', tmp_path / "pr.csv", '--stdout')
        assert status == 0
        report = yaml.safe_load(text)
        assert report['format'] == REPORT_FORMAT_VERSION
        assert len(report['table']) == 3
        assert (tmp_path / "pr.csv").read_text(encoding='utf-8').startswith("threshold,precision,recall")

        status, text = run('evaluate', '--predictions', predictions, '--thresholds', '0.4,0.6', '--stdout')
        assert status == 0
        assert [row['threshold'] for row in yaml.safe_load(text)['table']] == [0.4, 0.6]

    def test_crossval_reports_are_reproducible(self, tmp_path, corpus):
        for name in ("first.yaml", "second.yaml"):
            assert run('crossval', corpus, '--folds', 2, '--trees', 3, '--K', 1, '--seed', 7,
                       '--out', tmp_path / name)[0] == 0
        assert (tmp_path / "first.yaml").read_bytes() == (tmp_path / "second.yaml").read_bytes()

    def test_evaluate_model(self, corpus, model_file):
        status, text = run('evaluate', corpus, '--model', model_file, '--stdout')
        assert status == 0
        assert yaml.safe_load(text)['elements'] == 64

    def test_export_viz(self, tmp_path, corpus, model_file):
        vtk, png = tmp_path / "view.vtk", tmp_path / "view.png"
        status, _ = run('export-viz', corpus / "part-0.mesh.json", '--model', model_file,
                        '--out', vtk, '--png', png)
        assert status == 0
        assert "SCALARS outcome int 1" in vtk.read_text(encoding='utf-8')
        assert png.exists()

    def test_config_file(self, tmp_path, corpus):
        config = tmp_path / "run.yaml"
        config.write_text("trees: 2\nK: 1\nfolds: 2\n", encoding='utf-8')
        status, text = run('crossval', corpus, '--config', config, '--stdout')
        assert status == 0
        assert yaml.safe_load(text)['config']['n_trees'] == 2


class TestErrors:
    def test_unknown_command(self, capsys):
        assert run('polish')[0] == 1
        assert _error_line(capsys).startswith("meshgrade: error[usage]:")

    def test_missing_file(self, tmp_path, capsys):
        assert run('metrics', tmp_path / "absent.mesh.json", '--stdout')[0] == 1
        assert _error_line(capsys).startswith("meshgrade: error[io]:")

    def test_no_output_target(self, corpus, capsys):
        assert run('metrics', corpus / "part-0.mesh.json")[0] == 1
        assert _error_line(capsys) == "meshgrade: error[config]: no output target, pass --out or --stdout"

    def test_unknown_config_key(self, tmp_path, corpus, capsys):
        config = tmp_path / "run.yaml"
        config.write_text("colour: red\n", encoding='utf-8')
        assert run('crossval', corpus, '--config', config)[0] == 1
        assert _error_line(capsys).startswith("meshgrade: error[config]: unknown keys")

    def test_predict_needs_a_model(self, corpus, capsys):
        assert run('predict', corpus, '--stdout')[0] == 1
        assert "error[usage]" in _error_line(capsys)

    def test_unreadable_model(self, tmp_path, corpus, capsys):
        broken = tmp_path / "broken.json"
        broken.write_text("{}", encoding='utf-8')
        assert run('predict', corpus, '--model', broken, '--stdout')[0] == 1
        assert _error_line(capsys).startswith("meshgrade: error[model-")

    @pytest.mark.parametrize('option, value, what', [
        ('--properties', 'roundness', 'property'),
        ('--aggregators', 'median', 'aggregator'),
    ])
    def test_unknown_feature_name(self, corpus, capsys, option, value, what):
        assert run('featurize', corpus, option, value, '--stdout')[0] == 1
        assert _error_line(capsys).startswith(f"meshgrade: error[config]: unknown {what} '{value}'")

    @pytest.mark.parametrize('command', ['metrics', 'validate'])
    def test_undecodable_mesh(self, tmp_path, capsys, command):
        binary = tmp_path / "binary.mesh.json"
        binary.write_bytes(b"\xff\xfe\x00garbage")
        assert run(command, binary, '--stdout')[0] == 1
        assert _error_line(capsys).startswith("meshgrade: error[mesh-format]:")

    def test_undecodable_predictions(self, tmp_path, capsys):
        binary = tmp_path / "predictions.csv"
        binary.write_bytes(b"\xff\xfe\x00")
        assert run('evaluate', '--predictions', binary, '--stdout')[0] == 1
        assert _error_line(capsys).startswith("meshgrade: error[mesh-format]:")

    def test_undecodable_model(self, tmp_path, corpus, capsys):
        binary = tmp_path / "model.json"
        binary.write_bytes(b"\xff\xfe\x00")
        assert run('predict', corpus, '--model', binary, '--stdout')[0] == 1
        assert _error_line(capsys).startswith("meshgrade: error[model-format]:")
