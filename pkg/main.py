#!/usr/bin/env python3
"""
manialign - alignement de variétés semi-supervisé (SSMA) et à noyau (KEMA)

Sous-commandes : synth, fit, transform, eval, experiment.
Codes de sortie : 0 succès, 2 configuration, 3 données, 4 échec numérique.
"""

import argparse
import json
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv(".env")
load_dotenv(".env.logging", override=True)

from utils.logging_config import setup_logging, get_logger

from core.alignment import fit, transform
from core.errors import ConfigError, ManiAlignError
from core.experiment import LATENT_METHODS, evaluate_model, record_summary, run_experiment
from core.synth import ARCHETYPE_ALIASES, generate
from models.config import RunConfig
from models.projection import AlignmentModel
from utils.dataset_io import read_dataset, write_curve, write_dataset, write_json, write_latent
from utils.step_logger import pipeline_logger

logger = get_logger("manialign.cli")

ARCHETYPE_CHOICES = sorted(set(ARCHETYPE_ALIASES) | set(ARCHETYPE_ALIASES.values()))


def load_config(args) -> RunConfig:
    """RunConfig du fichier --config, surchargé par les options de la ligne de commande."""
    payload = RunConfig.load(getattr(args, "config", None)).model_dump(mode="json")
    if getattr(args, "seed", None) is not None:
        payload["seed"] = args.seed
        payload["alignment"]["seed"] = args.seed
        payload["synth"]["seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        payload["alignment"]["mode"] = args.mode
    if getattr(args, "p", None) is not None:
        payload["alignment"]["p"] = args.p
    if getattr(args, "repetitions", None) is not None:
        payload["protocol"]["repetitions"] = args.repetitions
    if getattr(args, "archetype", None) is not None:
        payload["synth"]["archetype"] = ARCHETYPE_ALIASES.get(args.archetype, args.archetype)
    return RunConfig.model_validate(payload)


def worker_threads() -> int:
    value = os.getenv("MANIALIGN_THREADS", "1")
    try:
        threads = int(value)
    except ValueError as e:
        raise ConfigError("cli", f"MANIALIGN_THREADS must be an integer, got {value!r}") from e
    if threads < 1:
        raise ConfigError("cli", f"MANIALIGN_THREADS must be >= 1, got {threads}")
    return threads


def cmd_synth(args) -> int:
    config = load_config(args)
    dataset = generate(config.synth)
    manifest = write_dataset(dataset, args.out)
    print(f"{dataset.collection.M} domains written, manifest {manifest}")
    return 0


def cmd_fit(args) -> int:
    config = load_config(args)
    dataset = read_dataset(args.data)
    model = fit(dataset.collection, config.alignment)
    model.save(args.out)

    values = ", ".join(f"{value:.6g}" for value in model.eigenvalues[:10])
    print(f"mode={model.mode} p={model.p} eigenvalues[:10]=[{values}]")
    if model.metadata.get("bandwidths"):
        print(f"bandwidths={model.metadata['bandwidths']}")
    print(f"model written to {args.out}")
    return 0


def cmd_transform(args) -> int:
    model = AlignmentModel.load(args.model)
    dataset = read_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    domains = [args.domain] if args.domain is not None else range(dataset.collection.M)
    for m in domains:
        domain = dataset.collection.domain(m)
        latent = transform(model, m, domain.features)
        path = write_latent(latent, domain, out / f"domain{m + 1}_latent.csv")
        print(f"domain {m}: {latent.coordinates.shape[0]} samples x {latent.p} dimensions -> {path}")
    return 0


def cmd_eval(args) -> int:
    config = load_config(args)
    dataset = read_dataset(args.data)
    if args.no_adaptation:
        model = None
    elif args.model:
        model = AlignmentModel.load(args.model)
    else:
        raise ConfigError("cli", "eval needs --model or --no-adaptation")

    outcome = evaluate_model(dataset, model, config.protocol, seed=config.seed, curve=bool(args.curve))
    payload = outcome.report.to_dict()
    if args.out:
        write_json(payload, args.out)
    else:
        sys.stdout.write(outcome.report.dumps())
    if args.curve and outcome.curve:
        write_curve([(p, accuracy, 0.0) for p, accuracy in outcome.curve], args.curve)
    logger.info(f"Evaluation: OA={outcome.report.overall_accuracy:.4f} kappa={outcome.report.kappa:.4f}")
    return 0


def cmd_experiment(args) -> int:
    config = load_config(args)
    dataset = read_dataset(args.data) if args.data else generate(config.synth)
    run_id = pipeline_logger.new_run_id()
    summary = run_experiment(dataset, config, threads=worker_threads(), curve=bool(args.curve), run_id=run_id)

    payload = summary.to_dict()
    if args.out:
        write_json(payload, args.out)
    else:
        print(json.dumps(payload, sort_keys=True, indent=1))
    if args.curve:
        method = next((m for m in LATENT_METHODS if m in summary.methods()), None)
        if method is not None:
            write_curve(summary.curve(method), args.curve)
        else:
            logger.warning("No latent method in this experiment, no accuracy curve written")
    if args.record:
        record_summary(summary, dataset.metadata.get("archetype", "custom"), config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manialign", description="Semi-supervised and kernel manifold alignment")
    parser.add_argument("--log-level", default=None, help="overrides LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic multi-domain dataset")
    synth.add_argument("--archetype", choices=ARCHETYPE_CHOICES)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--config")
    synth.add_argument("--out", required=True, help="output directory")
    synth.set_defaults(func=cmd_synth)

    fit_cmd = commands.add_parser("fit", help="fit an alignment model")
    fit_cmd.add_argument("--data", required=True, help="dataset manifest or directory")
    fit_cmd.add_argument("--config")
    fit_cmd.add_argument("--mode", choices=["ssma", "kema"])
    fit_cmd.add_argument("--p", type=int)
    fit_cmd.add_argument("--seed", type=int)
    fit_cmd.add_argument("--out", required=True, help="model JSON path")
    fit_cmd.set_defaults(func=cmd_fit)

    transform_cmd = commands.add_parser("transform", help="project samples into the latent space")
    transform_cmd.add_argument("--model", required=True)
    transform_cmd.add_argument("--data", required=True)
    transform_cmd.add_argument("--domain", type=int)
    transform_cmd.add_argument("--out", required=True, help="output directory for latent CSV files")
    transform_cmd.set_defaults(func=cmd_transform)

    eval_cmd = commands.add_parser("eval", help="train the latent classifier and report accuracy")
    eval_cmd.add_argument("--data", required=True)
    eval_cmd.add_argument("--model")
    eval_cmd.add_argument("--no-adaptation", action="store_true", help="classify the common bands instead")
    eval_cmd.add_argument("--config")
    eval_cmd.add_argument("--seed", type=int)
    eval_cmd.add_argument("--curve", help="CSV path for accuracy by latent dimension")
    eval_cmd.add_argument("--out", help="report JSON path (stdout if absent)")
    eval_cmd.set_defaults(func=cmd_eval)

    experiment = commands.add_parser("experiment", help="run the repeated evaluation protocol")
    experiment.add_argument("--data", help="dataset manifest (synthetic dataset from the config if absent)")
    experiment.add_argument("--archetype", choices=ARCHETYPE_CHOICES)
    experiment.add_argument("--config")
    experiment.add_argument("--repetitions", type=int)
    experiment.add_argument("--seed", type=int)
    experiment.add_argument("--curve", help="CSV path for the mean accuracy curve")
    experiment.add_argument("--record", action="store_true", help="store each run in the experiment ledger")
    experiment.add_argument("--out", help="summary JSON path (stdout if absent)")
    experiment.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(
        log_level=args.log_level or os.getenv("LOG_LEVEL", "INFO"),
        log_dir=os.getenv("LOG_DIR", "logs"),
        app_name=os.getenv("APP_NAME", "manialign"),
    )
    try:
        return args.func(args)
    except ManiAlignError as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        logger.error(f"{args.command} failed: invalid configuration: {e}")
        print(f"error: [config] {e}", file=sys.stderr)
        return ConfigError.exit_code
    except (OSError, ValueError, KeyError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: [cli] {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
