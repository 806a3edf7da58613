"""
Command-line interface of the meshgrade toolkit.

Usage:
    python -m src.applications.cli <command> [options]

Commands: convert, validate, metrics, featurize, train, predict, evaluate,
crossval, synth, export-viz. Progress goes to stderr; stdout carries data
only with --stdout. Any failure prints one line
``meshgrade: error[<code>]: <message>`` and exits with status 1.
"""
import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np
import yaml

from src.meshgrade.config import (
    DEFAULT_FOLDS, DEFAULT_K, DEFAULT_SEED, DEFAULT_THRESHOLD, BENCH_MESH_COUNT,
    BENCH_REWORK_SHARE, REPORT_THRESHOLDS, DefectKind, K0Mode, ModelKind, Surface, TrainConfig,
    load_config_file
)
from src.meshgrade.errors import ConfigError, MeshgradeError
from src.meshgrade.evaluation import (
    crossval_report, pr_curve, predictions_for, predictions_from_csv, predictions_to_csv,
    report_to_text, run_crossval, write_text
)
from src.meshgrade.features import (
    Dataset, FeatureLayout, build_dataset, dataset_to_csv, featurize_mesh
)
from src.meshgrade.logging.logger import MeshLogger
from src.meshgrade.mesh import (
    LabeledMesh, export_obj, import_obj, load_raw_mesh, mesh_id_from_path, parse_mesh,
    read_mesh_text, serialize_mesh, validate_mesh
)
from src.meshgrade.metrics import compute_property_table, property_table_to_csv
from src.meshgrade.models import load_model, save_model, train_model
from src.meshgrade.synth import (
    DefectSpec, SynthSpec, benchmark_specs, generate_labeled_mesh, read_benchmark, write_benchmark
)
from src.meshgrade.viz import (
    element_fields, outcome_colors, probability_colors, save_overlay, write_vtk
)

PROGRAM = "meshgrade"
CONFIG_KEYS = ('model', 'seed', 'n_trees', 'max_features', 'min_samples_split', 'n_jobs',
               'learning_rate', 'batch_size', 'max_epochs', 'patience', 'validation_fraction',
               'hidden_layers')


class UsageError(MeshgradeError):
    """The command line could not be parsed."""
    code = "usage"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _csv_list(text):
    return [item.strip() for item in text.split(',') if item.strip()]


def _int_list(text):
    return tuple(int(item) for item in _csv_list(text))


def _float_list(text):
    return [float(item) for item in _csv_list(text)]


def _defect(text):
    """``kind[:count[:severity]]``, e.g. ``warped:2:30``."""
    parts = text.split(':')
    try:
        kind = DefectKind(parts[0])
        count = int(parts[1]) if len(parts) > 1 else 1
        severity = float(parts[2]) if len(parts) > 2 else None
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"invalid defect {text!r}, expected kind[:count[:severity]]")
    return DefectSpec(kind, count, severity)


def build_parser():
    """Argument parser with one subparser per command."""
    common = _Parser(add_help=False)
    common.add_argument('--config', help="YAML file of option defaults (keys as flag names)")
    common.add_argument('--log-level', default='INFO', help="console log level")
    common.add_argument('--log-file', help="also write a DEBUG log to logs/<name>")
    common.add_argument('--stdout', action='store_true', help="write the primary output to stdout")
    common.add_argument('--seed', type=int, default=DEFAULT_SEED, help="seed of all randomness")

    features = _Parser(add_help=False)
    features.add_argument('--K', dest='K', type=int, default=DEFAULT_K, help="largest ring distance")
    features.add_argument('--properties', type=_csv_list, help="comma-separated property names")
    features.add_argument('--aggregators', type=_csv_list, help="comma-separated: min,max,mean")
    features.add_argument('--k0-mode', choices=[m.value for m in K0Mode], default=K0Mode.FULL.value)

    training = _Parser(add_help=False)
    training.add_argument('--model', choices=[m.value for m in ModelKind], default=ModelKind.EXTRATREES.value)
    training.add_argument('--trees', dest='n_trees', type=int)
    training.add_argument('--max-features', type=int)
    training.add_argument('--min-samples-split', type=int)
    training.add_argument('--jobs', dest='n_jobs', type=int)
    training.add_argument('--learning-rate', type=float)
    training.add_argument('--batch-size', type=int)
    training.add_argument('--epochs', dest='max_epochs', type=int)
    training.add_argument('--patience', type=int)
    training.add_argument('--validation-fraction', type=float)
    training.add_argument('--hidden-layers', type=_int_list, help="e.g. 64,128,16")

    parser = _Parser(prog=PROGRAM, description="Element quality assessment for shell meshes")
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True
    parser.command_parsers = commands.choices

    sub = commands.add_parser('convert', parents=[common], help="OBJ <-> canonical mesh")
    sub.add_argument('input')
    sub.add_argument('--out')
    sub.add_argument('--to', choices=['canonical', 'obj'], default='canonical')

    sub = commands.add_parser('validate', parents=[common], help="report structural findings")
    sub.add_argument('inputs', nargs='+')
    sub.add_argument('--require-labels', action='store_true')

    sub = commands.add_parser('metrics', parents=[common], help="per-element property table")
    sub.add_argument('input')
    sub.add_argument('--out')

    sub = commands.add_parser('featurize', parents=[common, features], help="feature table")
    sub.add_argument('inputs', nargs='+')
    sub.add_argument('--out')

    sub = commands.add_parser('train', parents=[common, features, training], help="train a model")
    sub.add_argument('inputs', nargs='+')
    sub.add_argument('--out')

    sub = commands.add_parser('predict', parents=[common], help="rework probability per element")
    sub.add_argument('inputs', nargs='+')
    sub.add_argument('--model', dest='model_path', required=True)
    sub.add_argument('--threshold', type=float, default=DEFAULT_THRESHOLD)
    sub.add_argument('--out')

    sub = commands.add_parser('evaluate', parents=[common], help="score a model or a prediction table")
    sub.add_argument('inputs', nargs='*')
    sub.add_argument('--model', dest='model_path')
    sub.add_argument('--predictions', dest='predictions_in')
    sub.add_argument('--thresholds', type=_float_list)
    sub.add_argument('--pr-curve')
    sub.add_argument('--out')

    sub = commands.add_parser('crossval', parents=[common, features, training],
                              help="mesh-grouped crossvalidation")
    sub.add_argument('inputs', nargs='+')
    sub.add_argument('--folds', type=int, default=DEFAULT_FOLDS)
    sub.add_argument('--thresholds', type=_float_list)
    sub.add_argument('--predictions', dest='predictions_out')
    sub.add_argument('--pr-curve')
    sub.add_argument('--out')

    sub = commands.add_parser('synth', parents=[common], help="synthetic labelled meshes")
    sub.add_argument('--out')
    sub.add_argument('--meshes', type=int, default=BENCH_MESH_COUNT)
    sub.add_argument('--share', type=float, default=BENCH_REWORK_SHARE)
    sub.add_argument('--rows', type=int, help="generate a single mesh of this many rows")
    sub.add_argument('--cols', type=int)
    sub.add_argument('--surface', choices=[s.value for s in Surface], default=Surface.FLAT.value)
    sub.add_argument('--defect', type=_defect, action='append', default=[])
    sub.add_argument('--dilation', type=int, default=1)
    sub.add_argument('--bridge-gap', type=int, default=0)

    sub = commands.add_parser('export-viz', parents=[common], help="VTK and PNG result views")
    sub.add_argument('input')
    sub.add_argument('--model', dest='model_path', required=True)
    sub.add_argument('--threshold', type=float, default=DEFAULT_THRESHOLD)
    sub.add_argument('--out')
    sub.add_argument('--png')
    sub.add_argument('--color-by', choices=['outcome', 'probability'], default='outcome')
    return parser


def parse_args(argv):
    """
    Parse a command line, applying ``--config`` values as defaults.

    Explicit flags win over the config file, which wins over built-in defaults.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        subparser = parser.command_parsers[args.command]
        dests = {}
        for action in subparser._actions:
            dests[action.dest] = action.dest
            for option in action.option_strings:
                dests[option.lstrip('-').replace('-', '_')] = action.dest
        values = load_config_file(args.config)
        unknown = sorted(set(values) - set(dests))
        if unknown:
            raise ConfigError(f"unknown keys in {args.config}: {', '.join(unknown)}")
        subparser.set_defaults(**{dests[key]: value for key, value in values.items()})
        args = parser.parse_args(argv)
    return args


class MeshgradeApp:
    """
    Runs one command per invocation.

    Every command reads its inputs, logs progress through a MeshLogger and
    writes its artifacts; ``run`` returns the process exit status.
    """

    def __init__(self, args, stdout=None):
        self.args = args
        self.stdout = stdout if stdout is not None else sys.stdout
        self.log = MeshLogger(log_file=args.log_file, log_level=args.log_level)

    # -- input and output helpers ------------------------------------------

    def emit(self, text, out=None):
        """Write a primary artifact to ``out`` and/or stdout."""
        out = out if out is not None else getattr(self.args, 'out', None)
        if out is None and not self.args.stdout:
            raise ConfigError("no output target, pass --out or --stdout")
        if out is not None:
            write_text(out, text)
            self.log.log_event("written", out)
        if self.args.stdout:
            self.stdout.write(text)

    @staticmethod
    def read_one(path):
        """(Mesh, LabelSet or None) from a canonical or OBJ file."""
        path = Path(path)
        text = read_mesh_text(path)
        if path.suffix.lower() == '.obj':
            return import_obj(text), None
        return parse_mesh(text)

    def read_meshes(self, paths):
        """
        LabeledMesh entries from files and directories.

        A directory holding a benchmark manifest yields its listed meshes;
        any other directory yields every ``*.mesh.json`` file inside it.
        """
        meshes = []
        for path in map(Path, paths):
            if path.is_dir() and (path / 'manifest.yaml').exists():
                meshes.extend(read_benchmark(path))
                continue
            files = sorted(path.glob('*.mesh.json')) if path.is_dir() else [path]
            for file in files:
                mesh, labels = self.read_one(file)
                meshes.append(LabeledMesh(mesh_id_from_path(file), mesh, labels))
        if not meshes:
            raise ConfigError("no meshes found in the given inputs")
        self.log.log_event("loaded", f"{len(meshes)} meshes, {sum(len(m.mesh) for m in meshes)} elements")
        return meshes

    def layout(self):
        args = self.args
        return FeatureLayout(
            K=args.K,
            **({'properties': tuple(args.properties)} if args.properties else {}),
            **({'aggregators': tuple(args.aggregators)} if args.aggregators else {}),
            k0_mode=args.k0_mode,
        )

    def train_config(self):
        values = {key: getattr(self.args, key, None) for key in CONFIG_KEYS}
        return TrainConfig.from_mapping(values)

    def unlabelled_dataset(self, meshes, layout):
        """Dataset of every element, with labels only if all meshes carry them."""
        if all(m.labels is not None and m.labels.covers(m.mesh) for m in meshes):
            return build_dataset(meshes, layout)
        parts = []
        for entry in sorted(meshes, key=lambda m: m.mesh_id):
            ids, matrix, _ = featurize_mesh(entry.mesh, layout)
            parts.append((np.full(len(ids), entry.mesh_id, dtype=object), ids, matrix))
        return Dataset(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]),
                       np.vstack([p[2] for p in parts]), None, layout)

    # -- commands ----------------------------------------------------------

    def convert(self):
        mesh, labels = self.read_one(self.args.input)
        text = export_obj(mesh) if self.args.to == 'obj' else serialize_mesh(mesh, labels)
        self.emit(text)
        return 0

    def validate(self):
        status = 0
        for path in self.args.inputs:
            text = read_mesh_text(path)
            if Path(path).suffix.lower() == '.obj':
                mesh, labels = import_obj(text), None
            else:
                mesh, labels = load_raw_mesh(text)
            findings = validate_mesh(mesh, labels, require_labels=self.args.require_labels)
            for finding in findings:
                self.log.logger.warning(f"{path}: {finding}")
                status = 1
            if not findings:
                self.log.log_event("valid", f"{path}: {len(mesh.nodes)} nodes, {len(mesh)} elements")
        return status

    def metrics(self):
        mesh, _ = self.read_one(self.args.input)
        self.emit(property_table_to_csv(compute_property_table(mesh)))
        return 0

    def featurize(self):
        meshes = self.read_meshes(self.args.inputs)
        self.emit(dataset_to_csv(self.unlabelled_dataset(meshes, self.layout())))
        return 0

    def train(self):
        if self.args.out is None:
            raise ConfigError("train needs --out for the model file")
        config = self.train_config()
        dataset = build_dataset(self.read_meshes(self.args.inputs), self.layout())
        self.log.log_event("training", f"{config.model.value} on {len(dataset)} rows, D = {dataset.dimension}")
        model = train_model(dataset, config)
        save_model(model, self.args.out)
        return 0

    def predict(self):
        model = load_model(self.args.model_path)
        layout = model.layout or FeatureLayout()
        dataset = self.unlabelled_dataset(self.read_meshes(self.args.inputs), layout)
        probabilities = np.atleast_1d(model.predict_proba(dataset.features))
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(['mesh_id', 'element_id', 'probability', 'label'])
        for row, probability in enumerate(probabilities):
            label = 'rework' if probability >= self.args.threshold else 'passed'
            writer.writerow([dataset.mesh_ids[row], int(dataset.element_ids[row]), repr(float(probability)), label])
        self.emit(buffer.getvalue())
        return 0

    def _report(self, records, **echo):
        thresholds = tuple(self.args.thresholds) if self.args.thresholds else REPORT_THRESHOLDS
        report = crossval_report(records, thresholds=thresholds, **echo)
        if self.args.pr_curve:
            write_text(self.args.pr_curve, pr_curve(records).to_csv())
        for row in report['table']:
            self.log.log_event("threshold", f"{row['threshold']:.2f}: precision {row['precision']:.3f}, "
                                            f"recall {row['recall']:.3f}, F1 {row['f1']:.3f}")
        self.emit(report_to_text(report))
        return 0

    def evaluate(self):
        if self.args.predictions_in:
            records = predictions_from_csv(read_mesh_text(self.args.predictions_in))
            return self._report(records)
        if not self.args.model_path or not self.args.inputs:
            raise ConfigError("evaluate needs --predictions, or --model and labelled meshes")
        model = load_model(self.args.model_path)
        layout = model.layout or FeatureLayout()
        dataset = build_dataset(self.read_meshes(self.args.inputs), layout)
        return self._report(predictions_for(model, dataset), layout=layout)

    def crossval(self):
        config = self.train_config()
        layout = self.layout()
        meshes = self.read_meshes(self.args.inputs)
        records = run_crossval(meshes, config, self.args.folds, self.args.seed, layout,
                               progress=self.log.log_progress)
        if self.args.predictions_out:
            write_text(self.args.predictions_out, predictions_to_csv(records))
        return self._report(records, config=config, n_folds=self.args.folds,
                            seed=self.args.seed, layout=layout)

    def synth(self):
        args = self.args
        if args.out is None:
            raise ConfigError("synth needs --out")
        if args.rows is not None:
            spec = SynthSpec(rows=args.rows, cols=args.cols or args.rows, surface=Surface(args.surface),
                             defects=tuple(args.defect), dilation_radius=args.dilation,
                             bridge_gap=args.bridge_gap, seed=args.seed)
            labeled = generate_labeled_mesh(spec, mesh_id_from_path(args.out))
            self.emit(serialize_mesh(labeled.mesh, labeled.labels))
            return 0
        specs = benchmark_specs(args.meshes, args.seed, args.share, dilation_radius=args.dilation)
        manifest = write_benchmark(args.out, specs, progress=self.log.log_progress)
        self.log.log_event("benchmark", f"{manifest['meshes']} meshes, {manifest['elements']} elements, "
                                        f"rework share {manifest['rework_share']:.4f}")
        if args.stdout:
            self.stdout.write(yaml.safe_dump(manifest, sort_keys=False))
        return 0

    def export_viz(self):
        args = self.args
        if not args.out and not args.png:
            raise ConfigError("export-viz needs --out and/or --png")
        model = load_model(args.model_path)
        mesh, labels = self.read_one(args.input)
        entry = LabeledMesh(mesh_id_from_path(args.input), mesh, labels)
        dataset = self.unlabelled_dataset([entry], model.layout or FeatureLayout())
        probabilities = np.atleast_1d(model.predict_proba(dataset.features))
        fields = element_fields(probabilities, args.threshold, dataset.labels)
        if args.out:
            write_vtk(args.out, mesh, fields, title=f"meshgrade {entry.mesh_id}")
        if args.png:
            if args.color_by == 'outcome' and 'outcome' in fields:
                colors = outcome_colors(fields['outcome'])
            else:
                colors = probability_colors(probabilities)
            save_overlay(args.png, mesh, colors)
        return 0

    def run(self):
        """Execute the selected command and return the exit status."""
        handler = getattr(self, self.args.command.replace('-', '_'))
        self.log.log_event("command", self.args.command)
        return handler()


def _fail(error):
    code = getattr(error, 'code', None) or ('io' if isinstance(error, OSError) else 'config')
    message = str(error).replace('\n', ' ')
    sys.stderr.write(f"{PROGRAM}: error[{code}]: {message}\n")
    return 1


def main(argv=None, stdout=None):
    """
    Entry point.

    Args:
        argv (list): Arguments without the program name; defaults to sys.argv[1:]
        stdout (file): Data stream; defaults to sys.stdout

    Returns:
        int: Exit status, 0 on success.
    """
    app = None
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        app = MeshgradeApp(args, stdout)
        return app.run()
    except (MeshgradeError, OSError, yaml.YAMLError) as error:
        if app is not None:
            app.log.exception(error)
        return _fail(error)


if __name__ == "__main__":
    sys.exit(main())
