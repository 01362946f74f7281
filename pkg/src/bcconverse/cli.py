"""Command-line interface: ``bcconverse {region,exponent,verify,sweep}``.

Every command reads a channel spec, merges an optional JSON config with the
command-line flags (flags win), validates everything before touching the
output directory, and writes CSV/JSON files stamped with the SHA-256 of the
effective config and the seed. Exit status: 0 success, 1 a bound check
failed, 2 invalid input or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .channels import ChannelPair, load_channel, test_aux_size
from .exponent import ExponentEngine, ExponentParams, ExponentSearch, log2_grid, omega_is_bounded, omega_max_batch
from .probability import ValidationError
from .region import (
    OptimizerBudget,
    ba_capacity,
    hyperplane_grid,
    hyperplane_values,
    region_boundary,
    region_membership,
    sum_rate_segment,
)
from .verifier import (
    ENUMERATION_BUDGET,
    BoundReport,
    EnumerationBudgetExceeded,
    check_lemma1_bound,
    check_theorem3_bound,
    code_from_dict,
    induced_test_laws,
    load_codes,
    optimize_decoders,
)

logger = logging.getLogger("bcconverse")

EXIT_OK, EXIT_BOUND_FAILED, EXIT_INVALID = 0, 1, 2

BUDGET_PRESETS = {
    "fast": {"starts": 4, "max_iter": 1000},
    "default": {"starts": 8, "max_iter": 3000},
    "thorough": {"starts": 16, "max_iter": 6000},
}

DEFAULTS = {
    "seed": 0,
    "grid_gamma": 65,
    "grid_mu": 33,
    "bits": False,
    "budget": "default",
}


class UsageError(ValidationError):
    pass


def fmt(x: float) -> str:
    return f"{x:.9g}"


def num(x: float):
    """A float rounded to 9 significant digits for JSON output (non-finite as strings)."""
    x = float(x)
    if not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return float(fmt(x))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _load_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path} is not valid JSON: {exc}") from None


def effective_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        doc = _load_json(args.config, "config")
        if not isinstance(doc, dict):
            raise UsageError("config must be a JSON object")
        cfg.update(doc)
    for key, value in vars(args).items():
        if key in ("config", "func", "command") or value is None:
            continue
        if key == "bits" and value is False:
            continue
        cfg[key] = value
    if "channel" not in cfg:
        raise UsageError("a channel spec is required (--channel or config 'channel')")
    if "out" not in cfg:
        raise UsageError("an output directory is required (--out or config 'out')")
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise UsageError(f"seed must be a nonnegative integer, got {seed!r}")
    for k in ("grid_gamma", "grid_mu"):
        v = cfg[k]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise UsageError(f"{k} must be a positive integer, got {v!r}")
    return cfg


def resolve_budget(spec, seed: int) -> OptimizerBudget:
    if isinstance(spec, str) and spec in BUDGET_PRESETS:
        fields = dict(BUDGET_PRESETS[spec])
    elif isinstance(spec, dict):
        fields = dict(spec)
    elif isinstance(spec, str):
        fields = _load_json(spec, "budget")
        if not isinstance(fields, dict):
            raise UsageError("budget file must hold a JSON object")
    else:
        raise UsageError(f"budget must be a preset name {sorted(BUDGET_PRESETS)} or a JSON path")
    allowed = {"starts", "max_iter", "tol", "ftol"}
    extra = set(fields) - allowed
    if extra:
        raise UsageError(f"unknown budget keys {sorted(extra)}")
    try:
        return OptimizerBudget(seed=seed, **fields)
    except TypeError as exc:
        raise UsageError(f"bad budget: {exc}") from None


# Paths are replaced by the contents of the files they name, so moving inputs
# or choosing another output directory does not change the hash. The display
# flag only affects printed text.
_UNHASHED_KEYS = ("channel", "codes", "out", "bits")


def config_hash(cfg: dict, channel_text: str, extra_texts: list[str] = ()) -> str:
    h = hashlib.sha256()
    body = {k: v for k, v in cfg.items() if k not in _UNHASHED_KEYS}
    h.update(json.dumps(body, sort_keys=True, separators=(",", ":")).encode())
    h.update(channel_text.encode())
    for t in extra_texts:
        h.update(t.encode())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def csv_text(header: list[str], rows, stamp: str) -> str:
    buf = io.StringIO()
    buf.write(stamp + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_files(out: Path, files: dict[str, str]):
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out / name).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc}") from None


def display(value: float, bits: bool) -> str:
    return fmt(value / math.log(2)) + " bits" if bits else fmt(value) + " nats"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def _channel(cfg) -> tuple[ChannelPair, str]:
    path = cfg["channel"]
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read channel spec {path}: {exc}") from None
    return load_channel(path), text


def cmd_region(cfg: dict) -> int:
    ch, text = _channel(cfg)
    budget = resolve_budget(cfg["budget"], cfg["seed"])
    digest = config_hash(cfg, text)
    stamp = f"# config_sha256={digest} seed={cfg['seed']}"
    rb = region_boundary(ch, (cfg["grid_gamma"], cfg["grid_mu"]), budget)
    c1 = ba_capacity(ch.w1)
    c2 = ba_capacity(ch.w2)
    sweep = [(p.gamma, p.mu, float(v)) for p, v in zip(rb.params, rb.values)]
    summary = {
        "config_sha256": digest,
        "seed": cfg["seed"],
        "capacity_w1": num(c1),
        "capacity_w2": num(c2),
        "vertices": [[num(a), num(b)] for a, b in rb.vertices],
        "max_r1": num(rb.max_r1),
        "max_r2": num(rb.max_r2),
        "partial": rb.partial,
        "unconverged_points": rb.unconverged,
        "sum_rate_segment_length": num(sum_rate_segment(rb, c1)),
        "capacity_point": region_membership(c1, 0.0, rb),
    }
    write_files(
        Path(cfg["out"]),
        {
            "sweep.csv": csv_text(["gamma", "mu", "c_value"], sweep, stamp),
            "polygon.csv": csv_text(["r1", "r2"], [tuple(map(float, v)) for v in rb.vertices], stamp),
            "summary.json": json_text(summary),
        },
    )
    bits = bool(cfg["bits"])
    print(f"C(W1) = {display(c1, bits)}; {len(rb.vertices)} vertices; max R1 = {display(rb.max_r1, bits)}, max R2 = {display(rb.max_r2, bits)}")
    return EXIT_OK


def _rates(cfg: dict) -> list[tuple[float, float]]:
    raw = cfg.get("rates")
    if raw is None and cfg.get("rate_grid"):
        spec = cfg["rate_grid"]
        try:
            r1max, r2max, k = (float(t) for t in str(spec).split(","))
        except ValueError:
            raise UsageError("rate grid must read 'R1MAX,R2MAX,N'") from None
        k = int(k)
        if k < 1:
            raise UsageError("rate grid needs N >= 1")
        raw = [[float(a), float(b)] for a in np.linspace(0, r1max, k) for b in np.linspace(0, r2max, k)]
    if raw is None:
        raise UsageError("no rates given (--rate, --rate-grid, or config 'rates')")
    out = []
    for r in raw:
        if isinstance(r, str):
            try:
                r = [float(t) for t in r.split(",")]
            except ValueError:
                raise UsageError(f"bad rate pair {r!r}") from None
        if not isinstance(r, (list, tuple)) or len(r) != 2:
            raise UsageError(f"bad rate pair {r!r}")
        a, b = float(r[0]), float(r[1])
        if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
            raise UsageError(f"rates must be finite and nonnegative, got {r!r}")
        out.append((a, b))
    if not out:
        raise UsageError("rate list is empty")
    return out


def _search(cfg: dict) -> ExponentSearch:
    budget = resolve_budget(cfg.get("exponent_budget", {"starts": 32, "max_iter": 1000}), cfg["seed"])
    return ExponentSearch(grid=(cfg["grid_gamma"], cfg["grid_mu"]), budget=budget, seed=cfg["seed"])


def cmd_exponent(cfg: dict) -> int:
    ch, text = _channel(cfg)
    rates = _rates(cfg)
    search = _search(cfg)
    budget = resolve_budget(cfg["budget"], cfg["seed"])
    digest = config_hash(cfg, text)
    stamp = f"# config_sha256={digest} seed={cfg['seed']}"
    rb = region_boundary(ch, search.grid, budget)
    eng = ExponentEngine(ch, search, region=rb)
    rows, points = [], []
    for r1, r2 in rates:
        f, ep = eng.value(r1, r2)
        p = ep.to_dict() if ep is not None else {"alpha": math.nan, "beta": math.nan, "gamma": math.nan, "mu": math.nan, "lambda": math.nan}
        rows.append((r1, r2, f, p["alpha"], p["beta"], p["gamma"], p["mu"], p["lambda"]))
        points.append(
            {
                "r1": num(r1),
                "r2": num(r2),
                "f_value": num(f),
                "membership": region_membership(r1, r2, rb),
                "params": {k: num(v) for k, v in p.items()} if ep is not None else None,
            }
        )
        print(f"F({fmt(r1)}, {fmt(r2)}) = {display(f, bool(cfg['bits']))}")
    summary = {"config_sha256": digest, "seed": cfg["seed"], "points": points}
    write_files(
        Path(cfg["out"]),
        {
            "surface.csv": csv_text(["r1", "r2", "f_value", "alpha", "beta", "gamma", "mu", "lambda"], rows, stamp),
            "summary.json": json_text(summary),
        },
    )
    return EXIT_OK


def default_params(seed: int, count: int, shape) -> list[ExponentParams]:
    """A seeded sample from the default parameter grids (bounded cases only)."""
    rng = np.random.default_rng(seed)
    ab = log2_grid(-6, 6, 2)
    lams = log2_grid(-10, 4, 2)
    hps = hyperplane_grid(65, 33)
    out: list[ExponentParams] = []
    while len(out) < count:
        hp = hps[int(rng.integers(len(hps)))]
        ep = ExponentParams(ab[int(rng.integers(len(ab)))], ab[int(rng.integers(len(ab)))], hp.gamma, hp.mu, lams[int(rng.integers(len(lams)))])
        if omega_is_bounded(ep, shape):
            out.append(ep)
    return out


def _params_from_cfg(cfg: dict, shape) -> list[ExponentParams]:
    raw = cfg.get("params")
    if raw is None:
        return default_params(cfg["seed"], int(cfg.get("param_count", 8)), shape)
    out = []
    for d in raw:
        try:
            out.append(ExponentParams(d["alpha"], d["beta"], d["gamma"], d["mu"], d["lambda"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad parameter tuple {d!r}: {exc}") from None
    return out


def cmd_verify(cfg: dict) -> int:
    ch, text = _channel(cfg)
    if "codes" not in cfg:
        raise UsageError("a code spec is required (--codes or config 'codes')")
    try:
        codes_text = Path(cfg["codes"]).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read code spec {cfg['codes']}: {exc}") from None
    docs = load_codes(codes_text, ch)
    shape = (test_aux_size(ch.ny, ch.nz), ch.nx, ch.ny, ch.nz)
    params = _params_from_cfg(cfg, shape)
    etas = [float(e) for e in cfg.get("eta", [0.05, 0.1, 0.5])]
    if any(not e > 0 for e in etas):
        raise UsageError("eta values must be positive")
    f_scale = float(cfg.get("f_scale", 1.0))
    resolution = int(cfg.get("lattice_resolution", 4))
    enum_budget = int(cfg.get("enumeration_budget", ENUMERATION_BUDGET))
    digest = config_hash(cfg, text, [codes_text])

    # validate every code spec up front; budget overruns are reported per code
    parsed = []
    for i, d in enumerate(docs):
        try:
            parsed.append(code_from_dict(d, ch))
        except ValidationError as exc:
            raise UsageError(f"code {i}: {exc}") from None

    omegas = omega_max_batch(
        ch, params, OptimizerBudget(starts=32, max_iter=1000, seed=cfg["seed"]), lattice_resolution=resolution
    )
    entries = []
    failed = False
    for i, code in enumerate(parsed):
        try:
            if code.enumeration_terms(ch) > enum_budget:
                raise EnumerationBudgetExceeded(code.enumeration_terms(ch), enum_budget)
            if cfg.get("optimize_decoders", True):
                code = optimize_decoders(code, ch, budget=enum_budget)
            reports: list[BoundReport] = []
            for ep, om in zip(params, omegas):
                reports.append(check_theorem3_bound(code, ch, ep, om, f_scale=f_scale))
            laws = induced_test_laws(code, ch)
            for eta in etas:
                reports.append(check_lemma1_bound(code, ch, laws, eta, budget=enum_budget))
        except EnumerationBudgetExceeded as exc:
            entries.append({"code": i, "error": str(exc)})
            continue
        for r in reports:
            failed |= not r.passed
            entries.append({"code": i, **_round_report(r.to_dict())})
    doc = {"config_sha256": digest, "seed": cfg["seed"], "reports": entries}
    write_files(Path(cfg["out"]), {"report.json": json_text(doc)})
    n_pass = sum(1 for e in entries if e.get("pass"))
    n_err = sum(1 for e in entries if "error" in e)
    print(f"{n_pass} of {len(entries) - n_err} checks passed; {n_err} codes skipped")
    return EXIT_BOUND_FAILED if failed else EXIT_OK


def _round_report(d):
    if isinstance(d, dict):
        return {k: _round_report(v) for k, v in d.items()}
    if isinstance(d, list):
        return [_round_report(v) for v in d]
    if isinstance(d, bool) or not isinstance(d, (float, np.floating)):
        return d
    return num(d)


def cmd_sweep(cfg: dict) -> int:
    """Hyperplane values under each budget preset, to show optimizer sensitivity."""
    ch, text = _channel(cfg)
    digest = config_hash(cfg, text)
    stamp = f"# config_sha256={digest} seed={cfg['seed']}"
    params = hyperplane_grid(cfg["grid_gamma"], cfg["grid_mu"])
    presets = list(cfg.get("presets", ["fast", "default", "thorough"]))
    for p in presets:
        resolve_budget(p, cfg["seed"])
    cols = {p: hyperplane_values(ch, params, resolve_budget(p, cfg["seed"]))[0] for p in presets}
    rows = [(hp.gamma, hp.mu, *(float(cols[p][i]) for p in presets)) for i, hp in enumerate(params)]
    ref = cols[presets[-1]]
    spread = {p: num(float(np.max(np.abs(cols[p] - ref)))) for p in presets}
    summary = {"config_sha256": digest, "seed": cfg["seed"], "max_abs_difference_to_last": spread}
    write_files(
        Path(cfg["out"]),
        {
            "budget_sweep.csv": csv_text(["gamma", "mu", *presets], rows, stamp),
            "summary.json": json_text(summary),
        },
    )
    for p in presets:
        print(f"{p}: max |difference| to {presets[-1]} = {display(spread[p], bool(cfg['bits']))}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bcconverse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--channel", help="channel spec JSON")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--grid-gamma", dest="grid_gamma", type=int)
        p.add_argument("--grid-mu", dest="grid_mu", type=int)
        p.add_argument("--bits", action="store_true", default=False, help="print values in bits (files stay in nats)")
        p.add_argument("--budget", help="optimizer preset (fast, default, thorough) or JSON path")
        p.add_argument("--config", help="JSON config; command-line flags override its values")

    p = sub.add_parser("region", help="capacity region polygon")
    common(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("exponent", help="converse exponent at rate pairs")
    common(p)
    p.add_argument("--rate", dest="rates", action="append", help="rate pair R1,R2 in nats (repeatable)")
    p.add_argument("--rate-grid", dest="rate_grid", help="R1MAX,R2MAX,N: an N x N grid from the origin")
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("verify", help="check correct-probability bounds on block codes")
    common(p)
    p.add_argument("--codes", help="code spec JSON (object or list)")
    p.add_argument("--f-scale", dest="f_scale", type=float, help="multiply exponents (values > 1 corrupt the bound)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="hyperplane values under several optimizer budgets")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = effective_config(args)
        return args.func(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
