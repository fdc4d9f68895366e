"""Operator command line.

Every subcommand honors ``--seed`` (all randomness is derived from it) and
``--format {table,csv,json-lines}`` for machine consumption; identical argv
plus identical seed produces byte-identical output.  Passwords are read from
files or stdin, never from argv, so they stay out of shell history.

Exit codes: 0 success, 2 configuration/usage error, 3 persisted-store
corruption.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from typing import Any, Dict, List, Optional

from . import __version__, defaults
from .attack import (
    METRICS_HEADER,
    NoiseConfig,
    enumerate_guesses,
    evaluate_defense,
    evaluate_detector,
    simulate_inference,
    write_metrics_csv,
)
from .bloom import analytic_fpr, bf_params
from .corpus import random_like, read_password_file, synthetic_passwords
from .detector import DetectorStore, StoreCorruptionError
from .generator import (
    PRESETS,
    Constraint,
    GeneratorConfig,
    NO_CONSTRAINT,
    generate,
    mix_seed,
)
from .layout import KeyboardLayout, default_layout, load_layout
from .markov import MarkovModel
from .meter import calibrate, load_calibration, save_calibration
from .service import ServiceConfig, ServiceConfigError
from . import service as service_mod

FORMATS = ("table", "csv", "json-lines")

PROG = "ghostkeys"


# -- output rendering -----------------------------------------------------------


def _fmt_value(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(records: List[Dict[str, Any]], fmt: str, out) -> None:
    """Render homogeneous records as a table, CSV, or JSON lines."""
    if fmt == "json-lines":
        import json

        for rec in records:
            out.write(json.dumps(rec, separators=(",", ":")) + "\n")
        return
    if not records:
        return
    columns = list(records[0])
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_fmt_value(rec[c]) for c in columns])
        return
    # table
    cells = [[_fmt_value(rec[c]) for c in columns] for rec in records]
    widths = [
        max(len(col), *(len(row[i]) for row in cells))
        for i, col in enumerate(columns)
    ]
    out.write(
        "  ".join(col.ljust(widths[i]) for i, col in enumerate(columns)).rstrip()
        + "\n"
    )
    for row in cells:
        out.write(
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
            + "\n"
        )


def _read_lines(path: Optional[str]) -> List[str]:
    """Non-empty input lines from a file or stdin ('-' or omitted)."""
    if path is None or path == "-":
        text = sys.stdin.read()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    return [line for line in text.splitlines() if line]


def _parse_constraint(text: str) -> Constraint:
    if text == "none":
        return NO_CONSTRAINT
    kind, sep, value = text.partition(":")
    if not sep or kind not in ("soft", "hard"):
        raise ValueError(
            f"constraint must be 'none', 'soft:LAMBDA' or 'hard:TAU', got {text!r}"
        )
    return Constraint(kind, float(value))


def _parse_float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part]


def _parse_int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part]


def _load_model(path: Optional[str]) -> MarkovModel:
    if path is None:
        return defaults.default_model()
    return MarkovModel.load(path)


def _load_calibration_arg(path: Optional[str]):
    if path is None:
        return defaults.default_calibration()
    return load_calibration(path)


def _load_layout_arg(path: Optional[str]) -> KeyboardLayout:
    if path is None:
        return default_layout()
    return load_layout(path)


# -- subcommands ---------------------------------------------------------------


def cmd_train_markov(args) -> int:
    if args.corpus is not None:
        passwords = read_password_file(args.corpus)
    else:
        passwords = synthetic_passwords(args.corpus_size, seed=args.seed)
    model = MarkovModel.train(
        passwords, order=args.order, smoothing=args.smoothing
    )
    model.save(args.out)
    _emit(
        [
            {
                "order": model.order,
                "smoothing": model.smoothing,
                "passwords": len(passwords),
                "bytes": len(model.to_bytes()),
                "crc": f"{model.crc():08x}",
            }
        ],
        args.fmt,
        sys.stdout,
    )
    return 0


def cmd_calibrate_meter(args) -> int:
    model = _load_model(args.model)
    if args.human is not None:
        human = _read_lines(args.human)
        if args.random is not None:
            random_corpus = _read_lines(args.random)
        else:
            random_corpus = random_like(human, seed=args.seed)
        cal = calibrate(model, human, random_corpus)
        n_strings = len(human)
    else:
        # pinned internal recipe; see defaults module
        cal = defaults.default_calibration()
        if cal.model_crc != model.crc():
            raise ValueError(
                "default calibration corpus is bound to the default model; "
                "pass --human when calibrating a custom model"
            )
        n_strings = defaults.HELD_OUT_SIZE
    save_calibration(cal, args.out)
    _emit(
        [
            {
                "scale": cal.scale,
                "midpoint": cal.midpoint,
                "model_crc": f"{cal.model_crc:08x}",
                "strings": n_strings,
            }
        ],
        args.fmt,
        sys.stdout,
    )
    return 0


def _generator_config(args) -> GeneratorConfig:
    base = PRESETS[args.preset]
    overrides = {}
    for field, flag in (
        ("r", "r"),
        ("p0", "p0"),
        ("delta_p", "delta_p"),
        ("alpha", "alpha"),
        ("p_min", "p_min"),
        ("p_max", "p_max"),
        ("max_consecutive_ghost", "max_consecutive_ghost"),
        ("min_total_ghost", "min_total_ghost"),
        ("selection", "selection"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[field] = value
    if args.constraint is not None:
        overrides["constraint"] = _parse_constraint(args.constraint)
    return dataclasses.replace(base, **overrides)


def cmd_gen_ghost(args) -> int:
    model = _load_model(args.model)
    cal = _load_calibration_arg(args.calibration)
    layout = _load_layout_arg(args.layout)
    base = _generator_config(args)
    passwords = _read_lines(args.password_file)
    if not passwords:
        raise ValueError("no passwords supplied")
    records = []
    for i, password in enumerate(passwords):
        config = dataclasses.replace(base, rng_seed=mix_seed(args.seed, i))
        result = generate(config, password, model, cal, layout)
        report = layout.overhead(password, result.ghost)
        records.append(
            {
                "index": i,
                "ghost": result.ghost,
                "mask": "".join("1" if m else "0" for m in result.mask),
                "ghosts": result.ghost_count(),
                "rel_overhead": report.relative_overhead,
            }
        )
    _emit(records, args.fmt, sys.stdout)
    return 0


def _metrics_records(rows) -> List[Dict[str, Any]]:
    columns = METRICS_HEADER.split(",")
    return [
        {col: getattr(row, col) for col in columns}
        for row in rows
    ]


def cmd_eval_defense(args) -> int:
    model = _load_model(args.model)
    cal = _load_calibration_arg(args.calibration)
    layout = _load_layout_arg(args.layout)
    if args.passwords is not None:
        passwords = _read_lines(args.passwords)
    else:
        passwords = defaults.evaluation_passwords(
            args.corpus_size, seed=args.seed, min_len=args.min_len
        )
    rs = _parse_float_list(args.r) if args.r else list(defaults.EVAL_R_SWEEP)
    configs = defaults.evaluation_grid(
        rs, with_constraints=(args.grid == "default")
    )
    noise = NoiseConfig(
        rate=args.noise_rate, radius=args.noise_radius, rng_seed=args.noise_seed
    )
    budgets = _parse_int_list(args.budget)
    rows, notes = evaluate_defense(
        passwords, configs, noise, budgets, model, cal, layout
    )
    for note in notes:
        print(f"note: {note}", file=sys.stderr)
    if args.fmt == "csv":
        write_metrics_csv(rows, sys.stdout)
    else:
        _emit(_metrics_records(rows), args.fmt, sys.stdout)
    return 0


def cmd_eval_detector(args) -> int:
    model = _load_model(args.model)
    cal = _load_calibration_arg(args.calibration)
    layout = _load_layout_arg(args.layout)
    if args.passwords is not None:
        passwords = _read_lines(args.passwords)
    else:
        passwords = defaults.evaluation_passwords(
            args.corpus_size, seed=args.seed, min_len=args.min_len
        )
    configs = [
        defaults.evaluation_config(r) for r in _parse_float_list(args.r)
    ]
    noise = None
    if args.noise_rate > 0:
        noise = NoiseConfig(
            rate=args.noise_rate,
            radius=args.noise_radius,
            rng_seed=args.noise_seed,
        )
    store = DetectorStore(
        oracle=lambda observed, budget: enumerate_guesses(
            observed, model, budget
        ),
        honeyword_count=args.honeywords,
        iterations=200,  # evaluation store, not a production credential store
    )
    rows = evaluate_detector(
        store,
        passwords,
        configs,
        args.honeywords,
        _parse_int_list(args.attempts),
        model,
        cal,
        layout,
        noise=noise,
    )
    records = [
        {
            "r": row.r,
            "attempts": row.attempts,
            "detection_rate": row.detection_rate,
            "breaches": row.breaches,
            "n": row.n,
        }
        for row in rows
    ]
    _emit(records, args.fmt, sys.stdout)
    return 0


def cmd_bf_params(args) -> int:
    params = bf_params(args.n, args.fpr)
    storage = params.storage_bytes()
    _emit(
        [
            {
                "expected_n": params.expected_n,
                "target_fpr": params.target_fpr,
                "m_bits": params.m_bits,
                "hash_count": params.hash_count,
                "storage_bytes": storage,
                "storage_mb": storage / 1e6,
                "fpr_at_capacity": analytic_fpr(
                    params.m_bits, params.hash_count, params.expected_n
                ),
            }
        ],
        args.fmt,
        sys.stdout,
    )
    return 0


def cmd_dump_layout(args) -> int:
    layout = _load_layout_arg(args.layout)
    if args.fmt == "table":
        sys.stdout.write(layout.dump())
        return 0
    records = [
        {"char": char, "x": x, "y": y}
        for char, (x, y) in sorted(layout.keys.items())
    ]
    _emit(records, args.fmt, sys.stdout)
    return 0


def cmd_simulate_attack(args) -> int:
    model = _load_model(args.model)
    layout = _load_layout_arg(args.layout)
    observations = _read_lines(args.observed_file)
    if not observations:
        raise ValueError("no observations supplied")
    records = []
    for i, observed in enumerate(observations):
        if args.noise_rate > 0:
            noise = NoiseConfig(
                rate=args.noise_rate,
                radius=args.noise_radius,
                rng_seed=mix_seed(args.seed, i),
            )
            observed = simulate_inference(layout, observed, noise)
        guesses = enumerate_guesses(observed, model, args.budget)
        for rank, guess in enumerate(guesses, start=1):
            records.append({"index": i, "rank": rank, "guess": guess})
    _emit(records, args.fmt, sys.stdout)
    return 0


def cmd_serve(args) -> int:
    import os

    def setting(flag_value, env_name, fallback, conv=str):
        if flag_value is not None:
            return flag_value
        raw = os.environ.get(env_name)
        if raw is not None:
            return conv(raw)
        return fallback

    try:
        config = ServiceConfig(
            host=setting(args.host, service_mod.ENV_HOST, "127.0.0.1"),
            port=setting(args.port, service_mod.ENV_PORT, service_mod.DEFAULT_PORT, int),
            store_dir=setting(args.store, service_mod.ENV_STORE, None),
            preset=setting(args.preset, service_mod.ENV_PRESET, "default"),
            seed=args.seed,
            session_timeout=setting(
                args.session_timeout,
                service_mod.ENV_SESSION_TIMEOUT,
                service_mod.DEFAULT_SESSION_TIMEOUT,
                float,
            ),
            http_port=args.http_port,
            demo_dir=args.demo_dir,
        )
    except ValueError as exc:
        raise ServiceConfigError(str(exc))
    service_mod.run(
        config,
        model=_load_model(args.model),
        calibration=_load_calibration_arg(args.calibration),
        layout=_load_layout_arg(args.layout),
    )
    return 0


# -- parser ---------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--seed", type=int, default=0, help="base seed for all randomness"
    )
    parser.add_argument(
        "--format",
        dest="fmt",
        choices=FORMATS,
        default="table",
        help="output rendering",
    )


def _add_bundle_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="Markov model file (default: built-in)")
    parser.add_argument(
        "--calibration", help="meter calibration file (default: built-in)"
    )
    parser.add_argument("--layout", help="layout file (default: ANSI QWERTY)")


class _StrictParser(argparse.ArgumentParser):
    """ArgumentParser without prefix abbreviation.

    Abbreviation would let ``--password`` silently parse as
    ``--password-file``; flags on this CLI always mean exactly what they say.
    """

    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = _StrictParser(
        prog=PROG,
        description="Ghost-character keystroke-inference defense toolkit.",
    )
    parser.add_argument(
        "--version", action="version", version=f"{PROG} {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_StrictParser)

    p = sub.add_parser("train-markov", help="train and save a Markov model")
    _add_common(p)
    p.add_argument("--corpus", help="password file (default: synthetic corpus)")
    p.add_argument(
        "--corpus-size",
        type=int,
        default=defaults.TRAIN_SIZE,
        help="synthetic corpus size when --corpus is omitted",
    )
    p.add_argument("--order", type=int, default=defaults.MARKOV_ORDER)
    p.add_argument(
        "--smoothing", type=float, default=defaults.MARKOV_SMOOTHING
    )
    p.add_argument("--out", required=True, help="output model file")
    p.set_defaults(func=cmd_train_markov)

    p = sub.add_parser(
        "calibrate-meter", help="calibrate the randomness meter"
    )
    _add_common(p)
    p.add_argument("--model", help="Markov model file (default: built-in)")
    p.add_argument(
        "--human",
        help="human-typed strings, one per line "
        "(default: built-in held-out prefix corpus)",
    )
    p.add_argument(
        "--random",
        help="machine-random strings (default: generated to match --human)",
    )
    p.add_argument("--out", required=True, help="output calibration file")
    p.set_defaults(func=cmd_calibrate_meter)

    p = sub.add_parser(
        "gen-ghost", help="generate ghost strings for passwords"
    )
    _add_common(p)
    _add_bundle_flags(p)
    p.add_argument(
        "--password-file",
        help="one password per line; '-' or omitted reads stdin",
    )
    p.add_argument(
        "--preset", choices=sorted(PRESETS), default="default"
    )
    p.add_argument("--r", type=float, help="randomness target override")
    p.add_argument("--p0", type=float)
    p.add_argument("--delta-p", dest="delta_p", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--p-min", dest="p_min", type=float)
    p.add_argument("--p-max", dest="p_max", type=float)
    p.add_argument(
        "--max-consecutive-ghost", dest="max_consecutive_ghost", type=int
    )
    p.add_argument(
        "--min-total-ghost", dest="min_total_ghost", type=int
    )
    p.add_argument("--selection", choices=("uniform", "markov"))
    p.add_argument(
        "--constraint", help="none, soft:LAMBDA or hard:TAU"
    )
    p.set_defaults(func=cmd_gen_ghost)

    p = sub.add_parser(
        "eval-defense", help="attacker accuracy / overhead sweep"
    )
    _add_common(p)
    _add_bundle_flags(p)
    p.add_argument("--passwords", help="password file (default: synthetic)")
    p.add_argument("--corpus-size", type=int, default=1000)
    p.add_argument("--min-len", type=int, default=16)
    p.add_argument(
        "--grid",
        choices=("default", "r-sweep"),
        default="default",
        help="default adds distance-constraint cells at r=0.4",
    )
    p.add_argument("--r", help="comma-separated randomness levels")
    p.add_argument("--budget", default="10,100,1000")
    p.add_argument("--noise-rate", type=float, default=0.05)
    p.add_argument("--noise-radius", type=float, default=1.2)
    p.add_argument("--noise-seed", type=int, default=5)
    p.set_defaults(func=cmd_eval_defense)

    p = sub.add_parser(
        "eval-detector", help="malicious-login detection rates"
    )
    _add_common(p)
    _add_bundle_flags(p)
    p.add_argument("--passwords", help="password file (default: synthetic)")
    p.add_argument("--corpus-size", type=int, default=100)
    p.add_argument("--min-len", type=int, default=16)
    p.add_argument("--r", default="0.5", help="comma-separated levels")
    p.add_argument("--attempts", default="1,3,10")
    p.add_argument("--honeywords", type=int, default=20)
    p.add_argument("--noise-rate", type=float, default=0.0)
    p.add_argument("--noise-radius", type=float, default=1.2)
    p.add_argument("--noise-seed", type=int, default=5)
    p.set_defaults(func=cmd_eval_detector)

    p = sub.add_parser("bf-params", help="Bloom-filter sizing")
    _add_common(p)
    p.add_argument("--n", type=int, required=True, help="expected elements")
    p.add_argument(
        "--fpr", type=float, required=True, help="target false-positive rate"
    )
    p.set_defaults(func=cmd_bf_params)

    p = sub.add_parser("serve", help="run the authentication service")
    _add_common(p)
    _add_bundle_flags(p)
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--store", help="store directory (default: in-memory)")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--session-timeout", type=float)
    p.add_argument(
        "--http-port", type=int, help="enable the HTTP demo shim on this port"
    )
    p.add_argument("--demo-dir", help="static demo assets directory")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("dump-layout", help="print the keyboard layout")
    _add_common(p)
    p.add_argument("--layout", help="layout file (default: ANSI QWERTY)")
    p.set_defaults(func=cmd_dump_layout)

    p = sub.add_parser(
        "simulate-attack", help="enumerate candidate originals"
    )
    _add_common(p)
    p.add_argument("--model", help="Markov model file (default: built-in)")
    p.add_argument("--layout", help="layout file (default: ANSI QWERTY)")
    p.add_argument(
        "--observed-file",
        help="observed keystroke strings; '-' or omitted reads stdin",
    )
    p.add_argument("--budget", type=int, default=10)
    p.add_argument(
        "--noise-rate",
        type=float,
        default=0.0,
        help="apply sensor noise to observations first",
    )
    p.add_argument("--noise-radius", type=float, default=1.2)
    p.set_defaults(func=cmd_simulate_attack)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StoreCorruptionError as exc:
        print(f"{PROG}: store corruption: {exc}", file=sys.stderr)
        return 3
    except ServiceConfigError as exc:
        print(f"{PROG}: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
