"""Command line client for the patchaug service.

Each subcommand builds one request body and posts it to the service. By
default the app runs in-process, so no server needs to be started; pass
``--server http://host:port`` to talk to a remote instance instead.

Exit codes: 0 on success, 1 on a service or transport error, 2 on bad
usage.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import parse_spec_file

SPEC_KEYS = {
    "augment": {
        "dataset", "data_dir", "probability", "min_frac", "max_frac",
        "fixed_area", "seed", "previews", "out",
        "train_examples", "test_examples", "num_classes",
    },
    "train": {
        "dataset", "data_dir", "mode", "model", "hidden", "epochs",
        "batch_size", "lr", "probability", "min_frac", "max_frac",
        "fixed_area", "mixup_alpha", "seed", "out",
        "train_examples", "test_examples", "num_classes",
    },
    "attack": {
        "dataset", "data_dir", "checkpoint", "epsilon", "n_attack",
        "seed", "out", "train_examples", "test_examples", "num_classes",
    },
    "report": {"out"},
}


def _add_data_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", default="synthetic",
                        choices=["synthetic", "cifar10", "cifar100"])
    parser.add_argument("--data-dir", default=None,
                        help="directory holding the dataset's binary files")
    parser.add_argument("--train-examples", type=int, default=2000,
                        help="synthetic dataset only: training set size")
    parser.add_argument("--test-examples", type=int, default=500,
                        help="synthetic dataset only: test set size")
    parser.add_argument("--num-classes", type=int, default=2,
                        help="synthetic dataset only: number of classes")


def _add_patch_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--probability", type=float, default=0.9,
                        help="chance each example is augmented")
    parser.add_argument("--min-frac", type=float, default=0.3)
    parser.add_argument("--max-frac", type=float, default=0.8)
    parser.add_argument("--fixed-area", type=float, default=None,
                        help="use a fixed patch area fraction instead of a range")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchaug")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)
    # Subparser handles are kept so a --spec file can set defaults on the
    # right one; set_defaults on the root parser never reaches them.
    parser.subcommands = {}

    p = parser.subcommands["augment"] = \
        sub.add_parser("augment", help="write an augmented copy of a dataset")
    _add_data_args(p)
    _add_patch_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--previews", type=int, default=9,
                   help="how many PNG previews to export")
    p.add_argument("--spec", default=None, help="key=value defaults file")
    p.add_argument("--out", required=False, default=None,
                   help="output directory")
    p.add_argument("--json", action="store_true", help="print the raw response")

    p = parser.subcommands["train"] = \
        sub.add_parser("train", help="train a classifier")
    _add_data_args(p)
    _add_patch_args(p)
    p.add_argument("--mode", default="none", choices=["none", "patch", "mixup"])
    p.add_argument("--model", default="linear", choices=["linear", "mlp"])
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--mixup-alpha", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", default=None, help="key=value defaults file")
    p.add_argument("--out", required=False, default=None,
                   help="output directory")
    p.add_argument("--json", action="store_true", help="print the raw response")

    p = parser.subcommands["attack"] = \
        sub.add_parser("attack", help="measure adversarial accuracy")
    _add_data_args(p)
    p.add_argument("--checkpoint", default=None, help="trained model file")
    p.add_argument("--epsilon", type=float, action="append", default=None,
                   help="perturbation budget, repeatable")
    p.add_argument("--n-attack", type=int, default=1000,
                   help="number of test examples to attack")
    p.add_argument("--no-clip", action="store_true",
                   help="skip clipping adversarial images to [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", default=None, help="key=value defaults file")
    p.add_argument("--out", default=None, help="report CSV path")
    p.add_argument("--json", action="store_true", help="print the raw response")

    p = parser.subcommands["report"] = \
        sub.add_parser("report", help="summarize training metrics files")
    p.add_argument("metrics", nargs="+", help="metrics CSV files")
    p.add_argument("--out", default=None, help="write the table here too")
    p.add_argument("--json", action="store_true", help="print the raw response")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _apply_spec(parser: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    """Parse argv twice so a --spec file sets defaults, flags override."""
    args = parser.parse_args(argv)
    spec_path = getattr(args, "spec", None)
    if spec_path is None:
        return args
    raw = parse_spec_file(spec_path)
    allowed = SPEC_KEYS.get(args.command, set())
    defaults = {}
    for key, value in raw.items():
        dest = key.replace("-", "_")
        if dest not in allowed:
            parser.error(f"spec file: unknown key {key!r} for {args.command}")
        if dest == "epsilon":
            defaults[dest] = [float(v) for v in value.split(",") if v]
        elif dest in ("dataset", "data_dir", "mode", "model", "checkpoint", "out"):
            defaults[dest] = value
        elif dest in ("probability", "min_frac", "max_frac", "fixed_area",
                      "lr", "mixup_alpha"):
            defaults[dest] = float(value)
        else:
            defaults[dest] = int(value)
    parser.subcommands[args.command].set_defaults(**defaults)
    return parser.parse_args(argv)


def _client(server: str | None):
    if server is None:
        from fastapi.testclient import TestClient

        from .service import create_app

        return TestClient(create_app())
    import httpx

    return httpx.Client(base_url=server, timeout=None)


def _synthetic_body(args: argparse.Namespace) -> dict | None:
    if args.dataset != "synthetic":
        return None
    return {
        "train_examples": args.train_examples,
        "test_examples": args.test_examples,
        "num_classes": args.num_classes,
    }


def _post(args: argparse.Namespace, path: str, body: dict) -> dict:
    with _client(args.server) as client:
        response = client.post(path, json=body)
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        print(f"error: {detail}", file=sys.stderr)
        raise SystemExit(1)
    return response.json()


def _print(payload: dict, as_json: bool, lines) -> None:
    if as_json:
        print(json.dumps(payload, indent=2))
        return
    for line in lines(payload):
        print(line)


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_spec(parser, list(sys.argv[1:] if argv is None else argv))

    if args.command == "serve":
        import uvicorn

        from .service import create_app

        uvicorn.run(create_app(), host=args.host, port=args.port)
        return 0

    if args.command == "augment":
        if args.out is None:
            parser.error("augment: --out is required")
        body = {
            "dataset": args.dataset, "data_dir": args.data_dir,
            "out_dir": args.out, "probability": args.probability,
            "min_frac": args.min_frac, "max_frac": args.max_frac,
            "fixed_area": args.fixed_area, "seed": args.seed,
            "previews": args.previews, "synthetic": _synthetic_body(args),
        }
        payload = _post(args, "/augment", body)
        _print(payload, args.json, lambda p: [
            f"wrote {p['container']} ({p['examples']} examples, "
            f"{p['augmented']} augmented)",
            f"manifest: {p['manifest']}",
            *(f"preview: {path}" for path in p["previews"]),
        ])
        return 0

    if args.command == "train":
        if args.out is None:
            parser.error("train: --out is required")
        body = {
            "dataset": args.dataset, "data_dir": args.data_dir,
            "out_dir": args.out, "mode": args.mode, "model": args.model,
            "hidden": args.hidden, "epochs": args.epochs,
            "batch_size": args.batch_size, "lr": args.lr,
            "probability": args.probability, "min_frac": args.min_frac,
            "max_frac": args.max_frac, "fixed_area": args.fixed_area,
            "mixup_alpha": args.mixup_alpha, "seed": args.seed,
            "synthetic": _synthetic_body(args),
        }
        payload = _post(args, "/train", body)

        def lines(p: dict):
            out = [f"checkpoint: {p['checkpoint']}", f"metrics: {p['metrics']}"]
            for row in p["final"]:
                out.append(
                    f"final {row['split']}: loss {row['loss']:.4f} "
                    f"accuracy {row['accuracy']:.4f}"
                )
            return out

        _print(payload, args.json, lines)
        return 0

    if args.command == "attack":
        if args.checkpoint is None:
            parser.error("attack: --checkpoint is required")
        if not args.epsilon:
            parser.error("attack: at least one --epsilon is required")
        body = {
            "dataset": args.dataset, "data_dir": args.data_dir,
            "checkpoint": args.checkpoint, "epsilons": args.epsilon,
            "n_attack": args.n_attack, "clip": not args.no_clip,
            "seed": args.seed, "out": args.out,
            "synthetic": _synthetic_body(args),
        }
        payload = _post(args, "/attack", body)

        def lines(p: dict):
            out = [f"attacked {p['n_examples']} examples"]
            for row in p["rows"]:
                out.append(
                    f"epsilon {row['epsilon']:g}: clean "
                    f"{row['clean_accuracy']:.4f} adversarial "
                    f"{row['adversarial_accuracy']:.4f}"
                )
            if p["report"]:
                out.append(f"report: {p['report']}")
            return out

        _print(payload, args.json, lines)
        return 0

    if args.command == "report":
        body = {"metrics_files": args.metrics, "out": args.out}
        payload = _post(args, "/report", body)
        _print(payload, args.json, lambda p: [p["table"]])
        return 0

    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
