"""Experiment runner: parses circuit/config files, dispatches subcommands,
manages seeds, and emits versioned CSV result files.

Subcommands: ``sample``, ``oracle``, ``markov-scan``, ``cmi``,
``clifford-dbar``, ``markov-length-scan``, ``bounds``.  Every output embeds
the tool version, a config echo, the seed, and the circuit file hash in
comment lines; reruns with identical config and seed produce byte-identical
CSV bodies (the timestamp lives in a comment).

Exit codes: 0 success, 2 config error, 3 budget exceeded, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from . import __version__, clifford, diagnostics, sampler
from .circuit import (
    CircuitSpec,
    brickwork_circuit,
    circuit_content_hash,
    load_circuit,
)
from .densesim import full_distribution
from .errors import (
    BudgetExceeded,
    CircuitFormatError,
    InsufficientData,
    NoisyCircuitsError,
    NormalizationError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERICAL = 4


class ConfigError(NoisyCircuitsError):
    pass


# ---------------------------------------------------------------------------
# experiment config


@dataclass
class ExperimentConfig:
    """One resolved experiment: subcommand, circuit source, parameters."""

    subcommand: str
    out: Path
    seed: int
    params: dict[str, Any] = field(default_factory=dict)
    circuit_path: Path | None = None
    generator: dict[str, Any] | None = None
    threads: int = 1
    budget: int | None = None

    def echo(self) -> str:
        data = {
            "subcommand": self.subcommand,
            "out": str(self.out),
            "seed": self.seed,
            "params": self.params,
            "circuit": str(self.circuit_path) if self.circuit_path else None,
            "generator": self.generator,
            "threads": self.threads,
            "budget": self.budget,
        }
        return json.dumps(data, sort_keys=True, default=str)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    if not isinstance(data, Mapping):
        raise ConfigError(f"config file {path} must hold a key-value mapping")
    return dict(data)


def _resolve_circuit(config: ExperimentConfig) -> tuple[CircuitSpec, str]:
    """Build the circuit from a file or generator params; returns the spec
    and the content hash string for the header."""
    if config.circuit_path is not None:
        if not config.circuit_path.exists():
            raise ConfigError(f"circuit file {config.circuit_path} does not exist")
        try:
            spec = load_circuit(config.circuit_path)
        except CircuitFormatError as exc:
            raise ConfigError(str(exc))
        return spec, circuit_content_hash(config.circuit_path)
    gen = config.generator or {}
    try:
        geometry = gen.get("geometry")
        if geometry is None:
            if "rows" in gen and "cols" in gen:
                geometry = (int(gen["rows"]), int(gen["cols"]))
            elif "n" in gen:
                geometry = (int(gen["n"]),)
            else:
                raise ConfigError(
                    "need a --circuit file or generator params (n, or rows+cols)"
                )
        spec = brickwork_circuit(
            geometry=tuple(int(x) for x in geometry),
            h=int(gen.get("h", 2)),
            depth=int(gen.get("depth", 1)),
            p=float(gen.get("p", 0.0)),
            kind=str(gen.get("gate_family", "haar")),
            seed=int(gen.get("circuit_seed", 0)),
        )
    except CircuitFormatError as exc:
        raise ConfigError(str(exc))
    return spec, "n/a"


# ---------------------------------------------------------------------------
# CSV output


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return repr(value)
    return str(value)


def write_csv(
    path: Path,
    schema: str,
    columns: Sequence[str],
    rows: Sequence[Sequence[Any]],
    config: ExperimentConfig,
    circuit_hash: str,
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# noisycircuits {__version__}\n")
        fh.write(f"# config: {config.echo()}\n")
        fh.write(f"# seed: {config.seed}\n")
        fh.write(f"# circuit_sha256: {circuit_hash}\n")
        fh.write(f"# generated: {datetime.now(timezone.utc).isoformat()}\n")
        fh.write(f"schema,{schema}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# subcommand implementations


def _cmd_sample(config: ExperimentConfig) -> None:
    spec, chash = _resolve_circuit(config)
    p = config.params
    radius = int(p["l"])
    shots = int(p.get("shots", 1))
    order = _parse_int_list(p.get("order")) or None
    metric = p.get("ball_metric", "manhattan")
    rows: list[list[Any]] = []
    for shot in range(shots):
        trace = sampler.sample(
            spec,
            radius,
            order,
            seed=_derive_seed(config.seed, shot),
            budget=config.budget,
            metric=metric,
        )
        for step_index, step in enumerate(trace.steps):
            rows.append(
                [
                    shot,
                    step_index,
                    step.site,
                    step.outcome,
                    step.u,
                    "|".join(str(s) for s in step.ball_sites),
                    "|".join(repr(c) for c in step.conditional),
                    int(step.zero_conditional),
                ]
            )
        rows.append([shot, -1, -1, trace.outcome_string, "", "", "", ""])
    write_csv(
        config.out,
        "sample-v1",
        ["shot", "step", "site", "outcome", "u", "ball", "conditional", "zero_conditional"],
        rows,
        config,
        chash,
    )


def _cmd_oracle(config: ExperimentConfig) -> None:
    spec, chash = _resolve_circuit(config)
    table = full_distribution(spec, config.budget)
    dist = diagnostics.tvd_to_uniform(table)
    bound = diagnostics.bound_uniform(
        spec.n, float(np.asarray(spec.noise).min(initial=0.0)), spec.depth
    )
    rows: list[list[Any]] = [
        ["tvd_to_uniform", "", dist],
        ["bound_uniform", "", bound.value],
    ]
    rows.extend(
        ["prob", table.outcome_string(i), float(pr)]
        for i, pr in enumerate(table.probs)
    )
    write_csv(
        config.out,
        "oracle-v1",
        ["record", "outcome", "value"],
        rows,
        config,
        chash,
    )


def _cmd_markov_scan(config: ExperimentConfig) -> None:
    spec, chash = _resolve_circuit(config)
    p = config.params
    radii = _parse_int_list(p.get("l_values")) or list(range(0, spec.diameter + 1))
    points = sampler.markov_scan(
        spec,
        radii,
        order=_parse_int_list(p.get("order")) or None,
        trials=int(p.get("trials", 0)),
        seed=config.seed,
        budget=config.budget,
        metric=p.get("ball_metric", "manhattan"),
    )
    rows = [[pt.radius, pt.mode, pt.tvd, pt.stderr, pt.trials] for pt in points]
    write_csv(
        config.out,
        "markov-scan-v1",
        ["l", "mode", "tvd", "stderr", "trials"],
        rows,
        config,
        chash,
    )


def _cmd_cmi(config: ExperimentConfig) -> None:
    spec, chash = _resolve_circuit(config)
    p = config.params
    a_size = int(p.get("a_size", 1))
    c_size = int(p.get("c_size", 1))
    gaps = _parse_int_list(p.get("gaps"))
    if not gaps:
        gaps = list(range(0, max(1, spec.n - a_size - c_size) + 1))
    table = full_distribution(spec, config.budget)
    rows: list[list[Any]] = []
    for gap in gaps:
        if a_size + gap + c_size > spec.n:
            continue
        a = list(range(a_size))
        b = list(range(a_size, a_size + gap))
        c = list(range(a_size + gap, a_size + gap + c_size))
        stats = diagnostics.tripartition_stats(table, a, b, c)
        rows.append(
            [
                "|".join(map(str, a)),
                "|".join(map(str, b)),
                "|".join(map(str, c)),
                stats.i_cmi,
                stats.i_cmi / math.log(2),
                stats.markov_gap,
                stats.pinsker_rhs,
            ]
        )
    write_csv(
        config.out,
        "cmi-v1",
        ["A", "B", "C", "cmi_nats", "cmi_bits", "markov_gap", "pinsker_rhs"],
        rows,
        config,
        chash,
    )


def _cmd_clifford_dbar(config: ExperimentConfig) -> None:
    p = config.params
    rows_param = int(p.get("rows", 10))
    depth = int(p.get("depth", 3))
    rate = float(p.get("p", 0.1))
    l_values = _parse_int_list(p.get("l_values")) or [int(p.get("l", 2))]
    shots = int(p.get("shots", 100))
    out_rows: list[list[Any]] = []
    for l_ac in l_values:
        pt = clifford.dbar_clifford(
            rows_param, depth, rate, l_ac, shots, config.seed, config.threads
        )
        out_rows.append(
            [pt.rows, pt.cols, pt.depth, pt.p, pt.l_ac, pt.shots, pt.dbar, pt.stderr, pt.seed]
        )
    write_csv(
        config.out,
        "clifford-dbar-v1",
        ["rows", "cols", "d", "p", "l_ac", "shots", "dbar", "stderr", "seed"],
        out_rows,
        config,
        "n/a",
    )


def _cmd_markov_length_scan(config: ExperimentConfig) -> None:
    p = config.params
    rows_param = int(p.get("rows", 10))
    depths = _parse_int_list(p.get("depths")) or [3]
    ps = _parse_float_list(p.get("ps")) or [0.1]
    l_values = _parse_int_list(p.get("l_values")) or list(range(2, 13))
    shots = int(p.get("shots", 100))
    points, fits = clifford.markov_length_scan(
        rows_param, depths, ps, l_values, shots, config.seed, config.threads
    )
    curve_rows = [
        [pt.rows, pt.cols, pt.depth, pt.p, pt.l_ac, pt.shots, pt.dbar, pt.stderr, pt.seed]
        for pt in points
    ]
    write_csv(
        config.out,
        "clifford-dbar-v1",
        ["rows", "cols", "d", "p", "l_ac", "shots", "dbar", "stderr", "seed"],
        curve_rows,
        config,
        "n/a",
    )
    fit_rows: list[list[Any]] = []
    for f in fits:
        if f.fit is None:
            fit_rows.append([f.rows, f.depth, f.p, "", "", "", 0, 0, f.note])
        else:
            fit_rows.append(
                [
                    f.rows,
                    f.depth,
                    f.p,
                    f.fit.xi,
                    f.fit.inverse_xi,
                    f.fit.r_squared,
                    len(f.fit.used),
                    len(f.fit.excluded),
                    "",
                ]
            )
    write_csv(
        _sibling(config.out, ".fits.csv"),
        "markov-length-fits-v1",
        ["rows", "d", "p", "xi", "inv_xi", "r_squared", "points_used", "points_excluded", "note"],
        fit_rows,
        config,
        "n/a",
    )


def _cmd_bounds(config: ExperimentConfig) -> None:
    p = config.params
    n = int(p["n"])
    rate = float(p["p"])
    depth = int(p["d"])
    rows: list[list[Any]] = []
    uni = diagnostics.bound_uniform(n, rate, depth)
    rows.append(["bound_uniform", uni.value])
    h = int(p.get("h", 2))
    k = int(p.get("k", 2))
    degree = int(p.get("degree", 2 * k))
    q = p.get("q")
    report = diagnostics.bound_cmi_threshold(
        h,
        k,
        degree,
        q=float(q) if q is not None else None,
        d=depth,
        boundary_a=int(p.get("boundary_a", 1)),
        boundary_c=int(p.get("boundary_c", 1)),
        l_ac=int(p.get("l_ac", 0)),
    )
    rows.append(["q_c", report.extras["q_c"]])
    if q is not None:
        if report.status == "not_applicable":
            rows.append(["cmi_bound", "not_applicable"])
        else:
            rows.append(["cmi_bound", report.value])
    potts = diagnostics.potts_large_h(
        n, depth, rate,
        cross_section=float(p["cross_section"]) if p.get("cross_section") else None,
    )
    rows.append(["potts_p_prime", potts.extras["p_prime"]])
    rows.append(["potts_z1_bound", potts.extras["z1_bound"]])
    rows.append(["potts_z2", potts.extras["z2"]])
    rows.append(["potts_z3", potts.extras["z3"]])
    rows.append(["potts_z4", potts.extras["z4"]])
    rows.append(["potts_delta_z_bound", potts.value])
    if "xi_p" in potts.extras:
        rows.append(["potts_xi_p", potts.extras["xi_p"]])
    write_csv(config.out, "bounds-v1", ["quantity", "value"], rows, config, "n/a")


_SUBCOMMANDS = {
    "sample": _cmd_sample,
    "oracle": _cmd_oracle,
    "markov-scan": _cmd_markov_scan,
    "cmi": _cmd_cmi,
    "clifford-dbar": _cmd_clifford_dbar,
    "markov-length-scan": _cmd_markov_length_scan,
    "bounds": _cmd_bounds,
}


# ---------------------------------------------------------------------------
# plumbing


def _derive_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence([int(seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _parse_int_list(value) -> list[int]:
    return [int(x) for x in _parse_list(value)]


def _parse_float_list(value) -> list[float]:
    return [float(x) for x in _parse_list(value)]


def _parse_list(value) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    text = str(value)
    if ":" in text and "," not in text:
        lo, hi = text.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [x for x in text.split(",") if x != ""]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisycircuits",
        description="Noisy-circuit sampling, oracles, and Markov-length experiments.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp, circuit=True):
        sp.add_argument("--config", help="YAML key-value config file")
        sp.add_argument("--out", help="output CSV path")
        sp.add_argument("--seed", type=int, help="master seed (auto if absent)")
        sp.add_argument("--threads", type=int, help="worker-pool size")
        sp.add_argument("--budget", type=int, help="dense entry budget override")
        if circuit:
            sp.add_argument("--circuit", help="circuit description file (YAML)")
            sp.add_argument("--n", type=int, help="generator: chain length")
            sp.add_argument("--rows", type=int, help="generator: grid rows")
            sp.add_argument("--cols", type=int, help="generator: grid cols")
            sp.add_argument("--h", type=int, help="generator: local dimension")
            sp.add_argument("--depth", type=int, help="generator: circuit depth")
            sp.add_argument("--p", type=float, help="generator: noise rate")
            sp.add_argument("--gate-family", choices=["haar", "clifford", "cshift"])
            sp.add_argument("--circuit-seed", type=int)

    sp = sub.add_parser("sample", help="draw outcome strings with full traces")
    common(sp)
    sp.add_argument("--l", type=int, help="conditioning ball radius")
    sp.add_argument("--shots", type=int)
    sp.add_argument("--order", help="comma-separated site order")
    sp.add_argument("--ball-metric", choices=["manhattan", "chebyshev"])

    sp = sub.add_parser("oracle", help="brute-force distribution dump")
    common(sp)

    sp = sub.add_parser("markov-scan", help="truncation error vs radius")
    common(sp)
    sp.add_argument("--l-values", help="radii, e.g. 0:4 or 0,2,4")
    sp.add_argument("--trials", type=int)
    sp.add_argument("--order", help="comma-separated site order")
    sp.add_argument("--ball-metric", choices=["manhattan", "chebyshev"])

    sp = sub.add_parser("cmi", help="tripartition sweep of CMI and Markov gap")
    common(sp)
    sp.add_argument("--a-size", type=int)
    sp.add_argument("--c-size", type=int)
    sp.add_argument("--gaps", help="separations, e.g. 0:4")

    sp = sub.add_parser("clifford-dbar", help="stabilizer conditional distance")
    common(sp, circuit=False)
    sp.add_argument("--rows", type=int)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--l", type=int)
    sp.add_argument("--l-values", help="separations, e.g. 2:12")
    sp.add_argument("--shots", type=int)

    sp = sub.add_parser("markov-length-scan", help="decay curves and fits")
    common(sp, circuit=False)
    sp.add_argument("--rows", type=int)
    sp.add_argument("--depths", help="e.g. 2:4")
    sp.add_argument("--ps", help="e.g. 0.05,0.1,0.2")
    sp.add_argument("--l-values", help="e.g. 2:12")
    sp.add_argument("--shots", type=int)

    sp = sub.add_parser("bounds", help="closed-form bound reports")
    common(sp, circuit=False)
    sp.add_argument("--n", type=int)
    sp.add_argument("--p", type=float)
    sp.add_argument("--d", type=int)
    sp.add_argument("--h", type=int)
    sp.add_argument("--k", type=int)
    sp.add_argument("--degree", type=int)
    sp.add_argument("--q", type=float)
    sp.add_argument("--boundary-a", type=int)
    sp.add_argument("--boundary-c", type=int)
    sp.add_argument("--l-ac", type=int)
    sp.add_argument("--cross-section", type=float)

    return parser


_GENERATOR_KEYS = ("n", "rows", "cols", "h", "depth", "p", "gate_family", "circuit_seed")

_PARAM_KEYS = {
    "sample": ("l", "shots", "order", "ball_metric"),
    "oracle": (),
    "markov-scan": ("l_values", "trials", "order", "ball_metric"),
    "cmi": ("a_size", "c_size", "gaps"),
    "clifford-dbar": ("rows", "depth", "p", "l", "l_values", "shots"),
    "markov-length-scan": ("rows", "depths", "ps", "l_values", "shots"),
    "bounds": (
        "n", "p", "d", "h", "k", "degree", "q",
        "boundary_a", "boundary_c", "l_ac", "cross_section",
    ),
}

#: subcommands whose grid params are experiment params, not circuit generators
_NO_CIRCUIT = ("clifford-dbar", "markov-length-scan", "bounds")


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge CLI flags over the optional config file (flags win)."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    sub = args.subcommand

    def pick(key: str, default=None):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag
        return file_cfg.get(key, default)

    params: dict[str, Any] = {}
    for key in _PARAM_KEYS[sub]:
        value = pick(key)
        if value is not None:
            params[key] = value
    generator = None
    circuit_path = pick("circuit")
    if sub not in _NO_CIRCUIT and circuit_path is None:
        generator = dict(file_cfg.get("generator") or {})
        for key in _GENERATOR_KEYS:
            flag = getattr(args, key, None)
            if flag is not None and key not in _PARAM_KEYS[sub]:
                generator[key] = flag
    seed = pick("seed")
    if seed is None:
        seed = secrets.randbits(32)
    out = pick("out")
    if out is None:
        raise ConfigError("an --out path is required")
    return ExperimentConfig(
        subcommand=sub,
        out=Path(out),
        seed=int(seed),
        params=params,
        circuit_path=Path(circuit_path) if circuit_path else None,
        generator=generator,
        threads=int(pick("threads", 1)),
        budget=int(pick("budget")) if pick("budget") is not None else None,
    )


def run(config: ExperimentConfig) -> int:
    """Execute one resolved experiment; returns the process exit code."""
    try:
        _SUBCOMMANDS[config.subcommand](config)
    except (ConfigError, CircuitFormatError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (NormalizationError, InsufficientData, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except (ConfigError, CircuitFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
