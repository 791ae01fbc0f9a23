"""Command-line surface: simulate, fit, weights, adjust, diagnose.

Every run resolves its configuration as flags > config file > defaults,
embeds the resolved configuration and its hash in the outputs, and writes
only deterministic artifacts - reports are reproducible byte for byte from
(inputs, config, seed).

Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
statistics.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .adjust import LossSpec, derive_equal_opportunity, derive_equalized_odds, \
    optimal_equal_opportunity
from .dataset import load_csv, view, write_csv, write_empty_csv
from .diagnose import (
    check_strong_dbd,
    find_weak_dbd_interval,
    group_censoring_null_check,
    inequity,
    inequity_shift_identity,
    weight_ratio_direction_test,
)
from .errors import ConfigError, DataError, FairshiftError, StatisticsError
from .policy import expected_rates, policy_from_json, policy_to_dict, policy_to_json
from .rates import conditional_cdf, delta_curve, roc_curve
from .reweight import (
    TableWeight,
    effective_sample_size,
    fit_density_ratio,
    fit_inclusion_propensity,
)
from .scoring import fit_logistic, model_from_json, model_to_json, score_sample
from .synth import (
    LoanScenarioSpec,
    QuantileCensorSpec,
    generate_loan,
    generate_quantile_censoring,
    load_oracle_csv,
    write_oracle_csv,
)

SCHEMA_VERSION = 1

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "config", "config_hash", "inequity",
                 "rates", "identity_check", "dbd_findings"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "config": {"type": "object"},
        "config_hash": {"type": "string"},
        "policy": {"type": "object"},
        "rates": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["group", "tpr", "fpr", "fnr", "tnr"],
                    "properties": {
                        "group": {"type": "integer"},
                        "tpr": {"type": "number"},
                        "fpr": {"type": "number"},
                        "fnr": {"type": "number"},
                        "tnr": {"type": "number"},
                    },
                },
            },
        },
        "inequity": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["groups", "values"],
                "properties": {
                    "event": {"type": "string"},
                    "groups": {"type": "array", "items": {"type": "integer"}},
                    "values": {"type": "array",
                               "items": {"type": "array", "items": {"type": "number"}}},
                },
            },
        },
        "identity_check": {
            "type": ["object", "null"],
            "properties": {"residual": {"type": "number"}},
        },
        "dbd_findings": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["kind"],
                "properties": {
                    "kind": {"enum": ["strong", "strong_strict", "weak_interval",
                                      "weak_endowed_interval", "none"]},
                    "advantaged": {"type": ["integer", "null"]},
                    "disadvantaged": {"type": ["integer", "null"]},
                    "interval": {"type": ["array", "null"]},
                    "tpr_range": {"type": ["array", "null"]},
                },
            },
        },
        "censoring_null": {"type": ["object", "null"]},
        "ratio_tests": {"type": "array"},
        "weight_summary": {"type": ["object", "null"]},
    },
}


def _config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _resolve_config(args: argparse.Namespace, defaults: dict) -> dict:
    """flags > config file > defaults; unset flags arrive as None."""
    resolved = dict(defaults)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_conf = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        unknown = set(file_conf) - set(defaults)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        resolved.update(file_conf)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            resolved[key] = value
    return resolved


def _out_dir(args) -> Path:
    out = Path(getattr(args, "out_dir", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: str) -> None:
    path.write_text(payload + ("\n" if not payload.endswith("\n") else ""),
                    encoding="utf-8")


def _load_scores(args, sample):
    """Score vector from a fitted model JSON or an oracle sidecar."""
    if getattr(args, "model", None):
        model = model_from_json(Path(args.model).read_text(encoding="utf-8"))
        return score_sample(model, sample)
    if getattr(args, "oracle_sidecar", None):
        oracle = load_oracle_csv(args.oracle_sidecar)
        which = getattr(args, "oracle_score", None) or "blind"
        scores = oracle.score_blind if which == "blind" else oracle.score_aware
        if scores.shape[0] != sample.n:
            raise ConfigError("oracle sidecar row count does not match the data")
        return scores
    raise ConfigError("provide scores via --model or --oracle-sidecar")


def _weight_source(args, conf, sample, train_view, target_view):
    """Weight function from the configured source, or None for naive runs."""
    source = conf.get("weights_from")
    if conf.get("eval", "naive") == "naive" and source is None:
        return None
    if source is None:
        raise ConfigError("reweighted evaluation requires --weights-from")
    cap = float(conf.get("cap") or 10.0)
    if source == "propensity":
        return fit_inclusion_propensity(sample, cap=cap)
    if source == "density":
        return fit_density_ratio(train_view, target_view,
                                 alpha=float(conf.get("alpha", 1.0)),
                                 cap=cap, bins=int(conf.get("bins", 10)))
    if source == "oracle-sidecar":
        if not getattr(args, "oracle_sidecar", None):
            raise ConfigError("--weights-from oracle-sidecar needs --oracle-sidecar")
        oracle = load_oracle_csv(args.oracle_sidecar)
        if oracle.propensity.shape[0] != sample.n:
            raise ConfigError("oracle sidecar row count does not match the data")
        return TableWeight(1.0 / oracle.propensity, cap=cap)
    raise ConfigError(f"unknown weight source {source!r}")


def _full_weights(weight_fn, sample, view_):
    if weight_fn is None:
        return None
    full = np.zeros(sample.n)
    full[view_.indices] = weight_fn.row_weights(view_)
    return full


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    defaults = {"scenario": "loan", "n": 100_000, "seed": 20_240_501,
                "censor_outcomes": False, "feature": 0, "q": 0.1, "data": None}
    conf = _resolve_config(args, defaults)
    out = _out_dir(args)
    if conf["scenario"] == "loan":
        spec = LoanScenarioSpec(n=int(conf["n"]), seed=int(conf["seed"]),
                                censor_outcomes=bool(conf["censor_outcomes"]))
        sample, oracle = generate_loan(spec)
        if sample.n == 0:
            write_empty_csv(out / "loan.csv", ("accounts", "delinquencies"))
        else:
            write_csv(sample, out / "loan.csv")
        write_oracle_csv(oracle, out / "loan_oracle.csv")
        print(f"wrote {out / 'loan.csv'} ({sample.n} rows) and sidecar")
        return 0
    if conf["scenario"] == "quantile":
        if not conf["data"]:
            raise ConfigError("quantile scenario requires --data with a base sample")
        base = load_csv(conf["data"])
        censored = generate_quantile_censoring(
            QuantileCensorSpec(feature=int(conf["feature"]), q=float(conf["q"])), base)
        write_csv(censored, out / "quantile_censored.csv")
        print(f"wrote {out / 'quantile_censored.csv'} ({censored.n} rows)")
        return 0
    raise ConfigError(f"unknown scenario {conf['scenario']!r}")


def cmd_fit(args) -> int:
    defaults = {"per_group": False, "ridge": 1e-6}
    conf = _resolve_config(args, defaults)
    sample = load_csv(args.data)
    model = fit_logistic(view(sample, "z=1"), per_group=bool(conf["per_group"]),
                         ridge=float(conf["ridge"]))
    out = _out_dir(args)
    _write_json(out / "model.json", model_to_json(model))
    print(f"wrote {out / 'model.json'}")
    return 0


def cmd_weights(args) -> int:
    defaults = {"method": "propensity", "alpha": 1.0, "cap": 10.0, "bins": 10}
    conf = _resolve_config(args, defaults)
    sample = load_csv(args.data)
    train = view(sample, "z=1")
    target = view(sample, "t=1")
    out = _out_dir(args)
    if conf["method"] == "propensity":
        fn = fit_inclusion_propensity(sample, cap=float(conf["cap"]))
    elif conf["method"] == "density":
        fn = fit_density_ratio(train, target, alpha=float(conf["alpha"]),
                               cap=float(conf["cap"]), bins=int(conf["bins"]))
    else:
        raise ConfigError(f"unknown weights method {conf['method']!r}")
    _write_json(out / "weights.json", fn.to_json())
    w = fn.row_weights(train)
    with open(out / "weights.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "group", "weight", "clipped"])
        raw = fn._raw_row_weights(train)
        for i in range(train.n):
            writer.writerow([int(train.indices[i]), int(train.group[i]),
                             repr(float(w[i])),
                             int(fn.cap is not None and raw[i] > fn.cap)])
    print(f"wrote {out / 'weights.json'} and weights.csv "
          f"(ESS {effective_sample_size(w):.1f}, clipped {fn.clip_count(train)})")
    return 0


def cmd_adjust(args) -> int:
    defaults = {"criterion": "eo", "eval": "naive", "rho": None,
                "fn_cost": None, "fp_cost": None, "fn_fp_rate": None,
                "weights_from": None, "alpha": 1.0, "cap": 10.0, "bins": 10,
                "oracle_score": "blind"}
    conf = _resolve_config(args, defaults)
    sample = load_csv(args.data)
    train = view(sample, "z=1")
    target = view(sample, "t=1")
    scores = _load_scores(args, sample)
    weight_fn = _weight_source(args, conf, sample, train, target)
    weights = _full_weights(weight_fn, sample, train)

    if conf["fn_fp_rate"] is not None:
        loss = LossSpec.from_exchange_rate(float(conf["fn_fp_rate"]))
    elif conf["fn_cost"] is not None or conf["fp_cost"] is not None:
        loss = LossSpec(float(conf["fn_cost"] or 0.0), float(conf["fp_cost"] or 0.0))
    else:
        loss = LossSpec(1.0, 1.0)

    if conf["criterion"] == "eo":
        if conf["rho"] is not None:
            pol = derive_equal_opportunity(scores, train, float(conf["rho"]), weights)
        else:
            pol, _ = optimal_equal_opportunity(scores, train, loss, weights)
    elif conf["criterion"] == "eodds":
        pol = derive_equalized_odds(scores, train, loss, weights)
    else:
        raise ConfigError(f"unknown criterion {conf['criterion']!r}")

    pol.provenance["config"] = conf
    pol.provenance["config_hash"] = _config_hash(conf)
    out = _out_dir(args)
    _write_json(out / "policy.json", policy_to_json(pol))

    events = [("z=1", train, weights)]
    if np.all(target.outcome_observed):
        events.append(("t=1", target, None))  # only meaningful when labeled
    with open(out / "rates.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event", "group", "tpr", "fpr", "fnr", "tnr"])
        for event, v, w_ in events:
            try:
                table = expected_rates(pol, v, scores, w_)
            except StatisticsError:
                continue
            for g, tpr, fpr, fnr, tnr in table.as_rows():
                writer.writerow([event, g, repr(tpr), repr(fpr), repr(fnr), repr(tnr)])
    print(f"wrote {out / 'policy.json'} and rates.csv")
    return 0


def cmd_diagnose(args) -> int:
    defaults = {"weights_from": None, "alpha": 1.0, "cap": 10.0, "bins": 10,
                "oracle_score": "blind", "seed": 0, "eval": "naive"}
    conf = _resolve_config(args, defaults)
    sample = load_csv(args.data)
    train = view(sample, "z=1")
    target = view(sample, "t=1")
    scores = _load_scores(args, sample)
    policy = policy_from_json(Path(args.policy).read_text(encoding="utf-8"))
    weight_fn = _weight_source(args, conf, sample, train, target)
    out = _out_dir(args)

    groups = sorted(int(g) for g in set(train.group))
    target_labeled = bool(np.all(target.outcome_observed))

    report = {
        "schema_version": SCHEMA_VERSION,
        "config": conf,
        "config_hash": _config_hash(conf),
        "policy": policy_to_dict(policy),
        "rates": {},
        "inequity": {},
        "identity_check": None,
        "dbd_findings": [],
        "censoring_null": None,
        "ratio_tests": [],
        "weight_summary": None,
    }

    events = [("z=1", train)] + ([("t=1", target)] if target_labeled else [])
    for event, v in events:
        table = expected_rates(policy, v, scores)
        report["rates"][event] = [
            {"group": g, "tpr": tpr, "fpr": fpr, "fnr": fnr, "tnr": tnr}
            for g, tpr, fpr, fnr, tnr in table.as_rows()]
        report["inequity"][event] = inequity(policy, v, scores).to_dict()

    curves = []
    cdfs = {}
    for event, v in events:
        for g in groups:
            pos = conditional_cdf(v, scores, g, 1)
            cdfs[(event, g)] = pos
            curves.extend(("cdf", event, g, float(x), float(y))
                          for x, y in zip(pos.support, pos.cumulative))
            roc = roc_curve(v, scores, g)
            curves.extend(("roc", event, g, float(f), float(t))
                          for f, t in roc.points)

    if target_labeled:
        try:
            check = inequity_shift_identity(policy, train, target, scores)
            report["identity_check"] = {
                "residual": check.residual,
                "epsilon_direct": check.epsilon_direct.to_dict(),
                "epsilon_via_delta": check.epsilon_via_delta.to_dict(),
            }
        except StatisticsError as exc:
            report["identity_check"] = {"skipped": str(exc)}

        null = group_censoring_null_check(sample, policy, scores)
        report["censoring_null"] = {
            "epsilon_train": null.epsilon_train.to_dict(),
            "epsilon_target": null.epsilon_target.to_dict(),
            "max_gap": null.max_gap,
        }

        deltas = {g: delta_curve(cdfs[("z=1", g)], cdfs[("t=1", g)]) for g in groups}
        for g in groups:
            grid = deltas[g].merged_support()
            curves.extend(("delta", "t=1", g, float(x), float(y))
                          for x, y in zip(grid, deltas[g].evaluate(grid)))
        interval_rows = []
        for a in groups:
            for b in groups:
                if a == b:
                    continue
                strong = check_strong_dbd(cdfs[("z=1", a)], cdfs[("t=1", a)],
                                          cdfs[("z=1", b)], cdfs[("t=1", b)])
                if strong.kind != "none" and strong.advantaged == a:
                    report["dbd_findings"].append(strong.to_dict())
                weak = find_weak_dbd_interval(deltas[a], deltas[b], mode="strict")
                if weak.kind != "none":
                    report["dbd_findings"].append(weak.to_dict())
                    if weak.tpr_range is not None:
                        interval_rows.append((a, b, *weak.interval, *weak.tpr_range))
        with open(out / "intervals.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["advantaged", "disadvantaged", "theta_lo", "theta_hi",
                             "tpr_lo", "tpr_hi"])
            for row in interval_rows:
                writer.writerow([row[0], row[1], *(repr(float(x)) for x in row[2:])])

    if weight_fn is not None:
        w = weight_fn.row_weights(train)
        report["weight_summary"] = {
            "form": weight_fn.form,
            "clip_count": weight_fn.clip_count(train),
            "effective_sample_size": effective_sample_size(w),
        }
        for g in groups:
            try:
                test = weight_ratio_direction_test(policy, train, scores,
                                                   weight_fn, g)
            except StatisticsError:
                continue
            report["ratio_tests"].append(test.to_dict())

    with open(out / "curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "event", "group", "x", "y"])
        for kind, event, g, x, y in curves:
            writer.writerow([kind, event, g, repr(x), repr(y)])

    _write_json(out / "report.json", json.dumps(report, indent=2, sort_keys=True))
    print(f"wrote {out / 'report.json'}, curves.csv"
          + (", intervals.csv" if target_labeled else ""))
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairshift",
        description="Audit and adjust threshold policies learned from censored data")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with defaults for this command")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("simulate", help="generate a synthetic scenario")
    common(p)
    p.add_argument("--scenario", choices=["loan", "quantile"])
    p.add_argument("--n", type=int)
    p.add_argument("--censor-outcomes", dest="censor_outcomes", action="store_const",
                   const=True)
    p.add_argument("--data", help="base sample CSV (quantile scenario)")
    p.add_argument("--feature", type=int, help="feature index to censor on")
    p.add_argument("--q", type=float, help="censoring quantile")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit the logistic score model on z=1 rows")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--per-group", dest="per_group", action="store_const", const=True)
    p.add_argument("--ridge", type=float)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("weights", help="fit importance weights")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=["propensity", "density"])
    p.add_argument("--alpha", type=float)
    p.add_argument("--cap", type=float)
    p.add_argument("--bins", type=int)
    p.set_defaults(func=cmd_weights)

    def scoring_args(p):
        p.add_argument("--model", help="fitted model JSON")
        p.add_argument("--oracle-sidecar", dest="oracle_sidecar",
                       help="oracle CSV from simulate")
        p.add_argument("--oracle-score", dest="oracle_score",
                       choices=["blind", "aware"])

    def weight_args(p):
        p.add_argument("--weights-from", dest="weights_from",
                       choices=["propensity", "density", "oracle-sidecar"])
        p.add_argument("--alpha", type=float)
        p.add_argument("--cap", type=float)
        p.add_argument("--bins", type=int)

    p = sub.add_parser("adjust", help="derive a fairness-constrained policy")
    common(p)
    p.add_argument("--data", required=True)
    scoring_args(p)
    weight_args(p)
    p.add_argument("--criterion", choices=["eo", "eodds"])
    p.add_argument("--eval", choices=["naive", "reweighted"])
    p.add_argument("--rho", type=float, help="fixed target TPR (else loss-optimal)")
    p.add_argument("--fn-cost", dest="fn_cost", type=float)
    p.add_argument("--fp-cost", dest="fp_cost", type=float)
    p.add_argument("--fn-fp-rate", dest="fn_fp_rate", type=float,
                   help="exchange rate fn_cost/fp_cost")
    p.set_defaults(func=cmd_adjust)

    p = sub.add_parser("diagnose", help="audit a policy for residual unfairness")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--policy", required=True, help="policy JSON from adjust")
    scoring_args(p)
    weight_args(p)
    p.add_argument("--eval", choices=["naive", "reweighted"])
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except StatisticsError as exc:
        print(f"degenerate statistics: {exc}", file=sys.stderr)
        return 4
    except FairshiftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
