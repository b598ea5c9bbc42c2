"""Command-line surface binding the pipeline end to end.

Subcommands:

    extract-background   flood-fill background removal + white fill + resize
    build-records        serialize image trees into shard files
    train                train a network on the train shards
    test                 evaluate a checkpoint on the test (or train) shards
    predict              classify a single PPM image
    gen-synthetic        emit a labeled synthetic corpus for desk-scale runs

A key=value config file pointed to by the FRUITS_CONFIG environment variable
supplies defaults; flags override it.  Exit code 0 means the operation
completed; on failure partial outputs are removed.
"""

import argparse
import sys
from pathlib import Path

from .augmentation import Scenario
from .config import ProjectConfig
from .errors import ConfigurationError, FruitnetError
from .evaluation import evaluate, predict_image
from .imaging import FloodFillParams, flood_fill_background, read_ppm, remove_background, resize_bilinear, write_ppm
from .network import preset_configuration
from .records import IMAGE_SIDE, LabelMap, build_shards, find_shards
from .synthetic import generate_corpus
from .training import (
    CHECKPOINT_NAME,
    METRICS_NAME,
    TrainConfig,
    load_checkpoint,
    train,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fruitnet", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-background", help="remove backgrounds and rescale a directory of PPM images")
    p.add_argument("--input_directory", required=True)
    p.add_argument("--output_directory", required=True)
    p.add_argument("--threshold", type=float, default=0.1, help="flood-fill color-distance threshold, tuned per run")

    p = sub.add_parser("build-records", help="serialize image trees into shard files")
    p.add_argument("--train_directory", default=None)
    p.add_argument("--validation_directory", default=None, help="directory with the test images")
    p.add_argument("--output_directory", default=None)
    p.add_argument("--labels_file", default=None)
    p.add_argument("--train_shards", type=int, default=1)
    p.add_argument("--test_shards", type=int, default=1)
    p.add_argument("--num_threads", type=int, default=1)

    p = sub.add_parser("train", help="train a network")
    p.add_argument("--scenario", default="hsv_gray_aug")
    p.add_argument("--config-nr", type=int, default=1, choices=range(1, 11), help="benchmark configuration 1..10")
    p.add_argument("--iterations", type=int, default=75000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory for checkpoint and metrics")
    p.add_argument("--records-dir", default=None)
    p.add_argument("--labels-file", default=None)
    p.add_argument("--batch-size", type=int, default=60)
    p.add_argument("--keep-prob", type=float, default=0.8)
    p.add_argument("--display-interval", type=int, default=50)
    p.add_argument("--shuffle-capacity", type=int, default=None)
    p.add_argument("--shuffle-min-fill", type=int, default=5000)
    p.add_argument("--resume", default=None, help="checkpoint to continue from")

    p = sub.add_parser("test", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--use-train", action="store_true", help="evaluate the train split instead of the test split")
    p.add_argument("--scenario", default="hsv_gray_aug")
    p.add_argument("--records-dir", default=None)
    p.add_argument("--batch-size", type=int, default=60)
    p.add_argument("--json-out", default=None, help="where to write the JSON report")

    p = sub.add_parser("predict", help="classify one PPM image")
    p.add_argument("--image_path", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--scenario", default="hsv_gray_aug")

    p = sub.add_parser("gen-synthetic", help="emit a labeled synthetic corpus")
    p.add_argument("--output_directory", required=True)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--train-per-class", type=int, default=20)
    p.add_argument("--test-per-class", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--image-size", type=int, default=IMAGE_SIDE)
    p.add_argument("--style", choices=("clean", "raw"), default="clean")
    return parser


def _required(value, flag: str, config_value, key: str):
    if value is not None:
        return Path(value)
    if config_value is not None:
        return Path(config_value)
    raise ConfigurationError(f"{flag} not given and {key} not set in the config file")


def _existing_dir(path: Path, what: str) -> Path:
    if not path.is_dir():
        raise ConfigurationError(f"{what} does not exist: {path}")
    return path


def _existing_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise ConfigurationError(f"{what} does not exist: {path}")
    return path


def _cmd_extract_background(args) -> int:
    in_dir = _existing_dir(Path(args.input_directory), "--input_directory")
    out_dir = Path(args.output_directory)
    params = FloodFillParams(threshold=args.threshold)
    written = []
    try:
        count = 0
        for src in sorted(in_dir.rglob("*.ppm")):
            img = read_ppm(src)
            mask = flood_fill_background(img, params)
            cleaned = resize_bilinear(remove_background(img, mask), IMAGE_SIDE, IMAGE_SIDE)
            dst = out_dir / src.relative_to(in_dir)
            dst.parent.mkdir(parents=True, exist_ok=True)
            write_ppm(cleaned, dst)
            written.append(dst)
            count += 1
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    print(f"extracted backgrounds from {count} images into {out_dir}")
    return 0


def _cmd_build_records(args, project: ProjectConfig) -> int:
    train_dir = _existing_dir(
        _required(args.train_directory, "--train_directory", project.training_images_dir, "training_images_dir"),
        "train image directory",
    )
    test_dir = _existing_dir(
        _required(args.validation_directory, "--validation_directory", project.test_images_dir, "test_images_dir"),
        "test image directory",
    )
    labels_file = _existing_file(
        _required(args.labels_file, "--labels_file", project.labels_file, "labels_file"), "labels file"
    )
    out_dir = _required(args.output_directory, "--output_directory", project.data_dir, "data_dir")
    train_set, test_set = build_shards(
        train_dir,
        test_dir,
        labels_file,
        out_dir,
        train_shards=args.train_shards,
        test_shards=args.test_shards,
        num_threads=args.num_threads,
    )
    print(f"wrote {train_set.count} train records across {len(train_set.paths)} shards")
    print(f"wrote {test_set.count} test records across {len(test_set.paths)} shards")
    print(f"records directory: {out_dir}")
    return 0


def _cmd_train(args, project: ProjectConfig) -> int:
    records_dir = _existing_dir(
        _required(args.records_dir, "--records-dir", project.data_dir, "data_dir"), "records directory"
    )
    labels_file = _existing_file(
        _required(args.labels_file, "--labels-file", project.labels_file, "labels_file"), "labels file"
    )
    out_dir = _required(args.out, "--out", project.models_dir, "models_dir")
    scenario = Scenario.from_tag(args.scenario)
    labels = LabelMap.from_file(labels_file)
    net = preset_configuration(args.config_nr, num_classes=labels.num_classes, input_channels=scenario.input_channels)
    cfg = TrainConfig(
        net=net,
        scenario=scenario,
        iterations=args.iterations,
        batch_size=args.batch_size,
        keep_prob=args.keep_prob,
        display_interval=args.display_interval,
        seed=args.seed,
        shuffle_capacity=args.shuffle_capacity,
        shuffle_min_fill=args.shuffle_min_fill,
    )
    shards = find_shards(records_dir, "train")
    resume_from = load_checkpoint(Path(args.resume)) if args.resume else None

    ckpt_path = Path(out_dir) / CHECKPOINT_NAME
    metrics_path = Path(out_dir) / METRICS_NAME
    preexisting = {p for p in (ckpt_path, metrics_path) if p.exists()}
    try:
        train(cfg, shards, out_dir, labels, resume_from=resume_from)
    except BaseException:
        for path in (ckpt_path, metrics_path):
            if path not in preexisting:
                path.unlink(missing_ok=True)
        raise
    print(f"checkpoint: {ckpt_path}")
    print(f"metrics csv: {metrics_path}")
    return 0


def _cmd_test(args, project: ProjectConfig) -> int:
    ckpt_path = _existing_file(
        _required(
            args.checkpoint,
            "--checkpoint",
            project.models_dir / CHECKPOINT_NAME if project.models_dir else None,
            "models_dir",
        ),
        "checkpoint",
    )
    records_dir = _existing_dir(
        _required(args.records_dir, "--records-dir", project.data_dir, "data_dir"), "records directory"
    )
    split = "train" if args.use_train else "test"
    expected = project.number_train_images if args.use_train else project.number_test_images
    shards = find_shards(records_dir, split)
    if expected is not None:
        print(f"expecting {expected} images in the {split} split, shards hold {shards.count}")

    ckpt = load_checkpoint(ckpt_path)
    scenario = Scenario.from_tag(args.scenario)
    report = evaluate(ckpt, shards, scenario, batch_size=args.batch_size)
    print(f"final accuracy on the {split} set: {report.accuracy:.4f}")
    print(report.format_text())

    json_path = Path(args.json_out) if args.json_out else ckpt_path.parent / f"report-{split}.json"
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(report.to_json() + "\n", encoding="utf-8")
    print(f"json report: {json_path}")
    return 0


def _cmd_predict(args, project: ProjectConfig) -> int:
    ckpt_path = _existing_file(
        _required(
            args.checkpoint,
            "--checkpoint",
            project.models_dir / CHECKPOINT_NAME if project.models_dir else None,
            "models_dir",
        ),
        "checkpoint",
    )
    image_path = _existing_file(Path(args.image_path), "--image_path")
    ckpt = load_checkpoint(ckpt_path)
    scenario = Scenario.from_tag(args.scenario)
    prediction = predict_image(ckpt, read_ppm(image_path), scenario)
    print(
        f"Label index: {prediction.class_id} ({prediction.class_name}), "
        f"probability: {prediction.probability:.4f}"
    )
    return 0


def _cmd_gen_synthetic(args) -> int:
    out_dir = Path(args.output_directory)
    try:
        parts = generate_corpus(
            out_dir,
            num_classes=args.classes,
            train_per_class=args.train_per_class,
            test_per_class=args.test_per_class,
            seed=args.seed,
            image_size=args.image_size,
            style=args.style,
        )
    except BaseException:
        import shutil

        shutil.rmtree(out_dir, ignore_errors=True)
        raise
    print(f"labels file: {parts['labels_file']}")
    print(f"train images: {parts['train_dir']}")
    print(f"test images: {parts['test_dir']}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        project = ProjectConfig.from_environment()
        if args.command == "extract-background":
            return _cmd_extract_background(args)
        if args.command == "build-records":
            return _cmd_build_records(args, project)
        if args.command == "train":
            return _cmd_train(args, project)
        if args.command == "test":
            return _cmd_test(args, project)
        if args.command == "predict":
            return _cmd_predict(args, project)
        if args.command == "gen-synthetic":
            return _cmd_gen_synthetic(args)
        parser.error(f"unknown command {args.command!r}")
    except FruitnetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
