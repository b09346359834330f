"""Command-line experiment surface emitting plot-ready CSV."""

from __future__ import annotations

import hashlib
import json
import math
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import estimator, ingest, oracle, rules
from .combinatorics import mahonian_distribution, triangular_normalization
from .rankings import ItemUniverse, Permutation, format_ranking
from .recommend import builtin_loss, loss_from_csv, posterior_predictor, evaluate_prediction

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class DataError(click.ClickException):
    exit_code = EXIT_DATA


def _threads() -> int:
    # parallelism cap; execution is deterministic and effectively serial
    try:
        return max(1, int(os.environ.get("RANKDENS_THREADS", "1")))
    except ValueError:
        return 1


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_csv(out_path: Path, config: dict, rows, columns) -> None:
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")


def _load_dataset(data, fmt, top_items, top_users):
    descriptor = ingest.parse_format(fmt)
    try:
        table = ingest.load_ratings(data, descriptor)
        items = ingest.select_items(table, top_items)
        users = ingest.select_users(table, items, top_m=top_users)
        universe, rankings = ingest.build_rankings(table, items, users)
    except ingest.IngestError as exc:
        raise DataError(str(exc)) from exc
    return descriptor, table, items, universe, rankings


def _resolve_bandwidth(bandwidth: str, n: int) -> float:
    if bandwidth == "auto":
        return estimator.default_bandwidth(n)
    try:
        return float(bandwidth)
    except ValueError:
        raise click.UsageError(f"bad bandwidth {bandwidth!r}") from None


common = [
    click.option("--data", required=True, type=click.Path(), help="ratings file"),
    click.option("--format", "fmt", default="ml100k", show_default=True,
                 help="ml100k | ml1m | csv:<delim>:<cols>:<lo>-<hi>[:header]"),
    click.option("--top-items", default=53, show_default=True),
    click.option("--top-users", default=2000, show_default=True),
    click.option("--bandwidth", default="auto", show_default=True),
    click.option("--kernel", default="modified", show_default=True,
                 type=click.Choice(["modified", "exact"])),
    click.option("--seed", default=0, show_default=True),
    click.option("--out", required=True, type=click.Path()),
    click.option("--strict", is_flag=True, help="escalate numeric warnings"),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


def _mode(kernel: str) -> str:
    return "exact-support" if kernel == "exact" else "modified"


@click.group()
def cli():
    """Preference-probability estimation over censored rankings."""


@cli.command()
@click.option("--n", "sizes", multiple=True, type=int, required=True)
@click.option("--bandwidth", "bandwidths", multiple=True, type=float, required=True)
@click.option("--out", required=True, type=click.Path())
def normtable(sizes, bandwidths, out):
    """Emit the tau-distance mass table and C(h) normalizations as CSV."""
    rows = []
    for n in sizes:
        table = mahonian_distribution(n)
        for t, mass in enumerate(table.mass):
            rows.append((n, "g", t, repr(float(mass))))
        for h in bandwidths:
            norm = triangular_normalization(n, h, "exact-support", table)
            rows.append((n, "normC", h, repr(norm.normC)))
    config = {"cmd": "normtable", "n": list(sizes), "h": list(bandwidths)}
    _write_csv(Path(out), config, rows, ("n", "kind", "index", "value"))


@cli.command()
@with_common
def pairs(data, fmt, top_items, top_users, bandwidth, kernel, seed, out, strict):
    """Pairwise preference matrix and the r(i) preference ranking."""
    _, _, items, universe, rankings = _load_dataset(data, fmt, top_items, top_users)
    h = _resolve_bandwidth(bandwidth, universe.n)
    model = estimator.fit([r for _, r in rankings], h=h, mode=_mode(kernel))
    n = universe.n
    matrix = np.full((n, n), 0.5)
    negatives = 0
    stats = model.subset_stats(range(n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            p = model.chain_prob(stats, (i, j))
            matrix[i, j] = p
            negatives += p < 0
    r_scores = matrix.sum(axis=1) / n
    order = sorted(range(n), key=lambda i: (-r_scores[i], i))
    config = {
        "cmd": "pairs", "data": str(data), "sha256": _sha256(data), "format": fmt,
        "top_items": top_items, "top_users": top_users, "h": h,
        "kernel": kernel, "seed": seed, "threads": _threads(),
    }
    rows = [
        (universe.label_of(i), universe.label_of(j), repr(float(matrix[i, j])))
        for i in range(n) for j in range(n)
    ]
    _write_csv(Path(out), config, rows, ("item_i", "item_j", "p_i_before_j"))
    rank_rows = [
        (rank + 1, universe.label_of(i), repr(float(r_scores[i])))
        for rank, i in enumerate(order)
    ]
    _write_csv(Path(out).with_suffix(".ranking.csv"), config, rank_rows,
               ("rank", "item", "r_score"))
    if negatives and strict:
        click.echo(f"{negatives} negative pair probabilities", err=True)
        sys.exit(EXIT_NUMERIC)


@cli.command()
@with_common
@click.option("--n-items", "small_ns", multiple=True, type=int, default=(3, 4, 5),
              show_default=True, help="subset sizes (Mallows needs <= 5)")
@click.option("--m-grid", multiple=True, type=int, default=(100, 500, 1000),
              show_default=True)
@click.option("--reps", default=5, show_default=True)
def loglik(data, fmt, top_items, top_users, bandwidth, kernel, seed, out, strict,
           small_ns, m_grid, reps):
    """Held-out log-likelihood: kernel vs empirical vs Mallows baseline."""
    if any(n > 5 for n in small_ns):
        raise click.UsageError("Mallows baseline requires n <= 5")
    _, _, items, universe, rankings = _load_dataset(data, fmt, top_items, top_users)
    rows = []
    rng = np.random.default_rng(seed)
    for n_sub in small_ns:
        subset = list(range(n_sub))  # the n_sub most rated items
        for m in m_grid:
            results = {"kernel": [], "empirical": [], "mallows": []}
            for rep in range(reps):
                rep_seed = int(rng.integers(2**31))
                scores = _loglik_once(
                    [r for _, r in rankings], subset, m, rep_seed,
                    bandwidth, _mode(kernel),
                )
                if scores is None:
                    continue
                for key, val in scores.items():
                    results[key].append(val)
            for key, vals in results.items():
                if vals:
                    mean = float(np.mean(vals))
                    se = float(np.std(vals) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
                    rows.append((n_sub, m, key, repr(mean), repr(se)))
    config = {"cmd": "loglik", "data": str(data), "sha256": _sha256(data),
              "n": list(small_ns), "m_grid": list(m_grid), "reps": reps,
              "seed": seed, "bandwidth": bandwidth, "kernel": kernel}
    _write_csv(Path(out), config, rows, ("n", "m", "estimator", "mean_loglik", "stderr"))


def _loglik_once(rankings, subset, m, seed, bandwidth, mode):
    from .rankings import project_ranking

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(rankings))
    projected = []
    for idx in order:
        p = project_ranking(rankings[idx], subset)
        if p is not None:
            projected.append(p)
    if len(projected) < m + 20:
        return None
    train, test = projected[:m], projected[m : m + max(200, m // 2)]
    sub_n = len(subset)
    h = estimator.default_bandwidth(sub_n) if bandwidth == "auto" else float(bandwidth)
    dist = oracle.brute_full_distribution(train, h, mode)
    pt = oracle.perm_table(sub_n)
    kernel_scorer = lambda ev: float(dist[pt.index[ev.enumerate_consistent()[0].order]])
    empirical_scorer = lambda ev: estimator.empirical_prob(train, ev)
    full = [r.enumerate_consistent()[0] for r in train
            if r.k == sub_n and all(len(g) == 1 for g in r.groups)]
    out = {}
    items = list(range(sub_n))
    try:
        out["kernel"] = estimator.test_loglikelihood(kernel_scorer, test, items).mean
        out["empirical"] = estimator.test_loglikelihood(empirical_scorer, test, items).mean
        if full:
            mallows = estimator.mallows_fit(full)
            scorer = lambda ev: math.exp(
                mallows.log_prob(ev.enumerate_consistent()[0])
            )
            out["mallows"] = estimator.test_loglikelihood(scorer, test, items).mean
    except estimator.EstimatorError:
        return None
    return out


@cli.command()
@with_common
@click.option("--loss", default="l1", show_default=True,
              help="l0 | l1 | le | path to CSV matrix")
@click.option("--test-fraction", default=0.3, show_default=True)
@click.option("--holdout-fraction", default=0.5, show_default=True)
def predict(data, fmt, top_items, top_users, bandwidth, kernel, seed, out, strict,
            loss, test_fraction, holdout_fraction):
    """Mean posterior-loss of held-out item level prediction."""
    descriptor, _, items, universe, rankings = _load_dataset(
        data, fmt, top_items, top_users
    )
    levels = tuple(range(descriptor.scale[0], descriptor.scale[1] + 1))
    if loss in ("l0", "l1", "le"):
        loss_matrix = builtin_loss(loss, levels)
    else:
        loss_matrix = loss_from_csv(loss, levels)
    train, holdout = ingest.split_users(rankings, seed, test_fraction, holdout_fraction)
    if not holdout.users:
        raise DataError("no test users with enough ranked items")
    h = _resolve_bandwidth(bandwidth, universe.n)
    model = estimator.fit(train, h=h, mode=_mode(kernel))
    mean_loss = evaluate_prediction(
        posterior_predictor(model, loss_matrix), holdout, loss_matrix
    )
    config = {"cmd": "predict", "data": str(data), "sha256": _sha256(data),
              "loss": loss, "h": h, "kernel": kernel, "seed": seed,
              "test_fraction": test_fraction, "holdout_fraction": holdout_fraction,
              "top_items": top_items, "top_users": top_users}
    rows = [
        (len(train), len(holdout.users),
         sum(len(u.held_out) for u in holdout.users), repr(mean_loss)),
    ]
    _write_csv(Path(out), config, rows,
               ("train_users", "test_users", "held_out_items", "mean_loss"))


@cli.command("rules")
@with_common
@click.option("--mode", "rule_mode", default="mi", show_default=True,
              type=click.Choice(["mi", "lift-top2", "lift-topbottom"]))
@click.option("--subset-size", default=20, show_default=True,
              help="analyze the most-rated subset of this size")
@click.option("--top-t", default=10, show_default=True)
def rules_cmd(data, fmt, top_items, top_users, bandwidth, kernel, seed, out, strict,
              rule_mode, subset_size, top_t):
    """Mine association rules over the most rated items."""
    _, _, items, universe, rankings = _load_dataset(data, fmt, top_items, top_users)
    h = _resolve_bandwidth(bandwidth, universe.n)
    model = estimator.fit([r for _, r in rankings], h=h, mode=_mode(kernel))
    subset = list(range(min(subset_size, universe.n)))
    if rule_mode == "mi":
        mined = rules.mine_mi_rules(model, subset, top_t)
    else:
        lift_mode = "top2" if rule_mode == "lift-top2" else "top-bottom"
        mined = rules.mine_lift_rules(model, subset, lift_mode, top_t)
    config = {"cmd": "rules", "data": str(data), "sha256": _sha256(data),
              "mode": rule_mode, "subset_size": subset_size, "top_t": top_t,
              "h": h, "kernel": kernel, "seed": seed,
              "top_items": top_items, "top_users": top_users}
    rows = []
    for rule in mined:
        ante = "<".join(universe.label_of(i) for i in rule.antecedent)
        cons = "<".join(universe.label_of(i) for i in rule.consequent)
        rows.append((ante, cons, repr(rule.score)))
    _write_csv(Path(out), config, rows, ("antecedent", "consequent", "score"))


@cli.command()
@with_common
@click.option("--threshold", default=1.5, show_default=True, type=float)
@click.option("--subset-size", default=20, show_default=True)
def graph(data, fmt, top_items, top_users, bandwidth, kernel, seed, out, strict,
          threshold, subset_size):
    """Emit the affinity graph edge list for external layout tools."""
    _, _, items, universe, rankings = _load_dataset(data, fmt, top_items, top_users)
    h = _resolve_bandwidth(bandwidth, universe.n)
    model = estimator.fit([r for _, r in rankings], h=h, mode=_mode(kernel))
    subset = list(range(min(subset_size, universe.n)))
    edges = rules.affinity_graph(model, subset, threshold)
    config = {"cmd": "graph", "data": str(data), "sha256": _sha256(data),
              "threshold": threshold, "subset_size": subset_size, "h": h,
              "kernel": kernel, "top_items": top_items, "top_users": top_users}
    rows = [
        (universe.label_of(i), universe.label_of(j), repr(w)) for i, j, w in edges
    ]
    _write_csv(Path(out), config, rows, ("item_a", "item_b", "weight"))
    dot_path = Path(out).with_suffix(".dot")
    with open(dot_path, "w") as fh:
        fh.write("graph affinity {\n")
        nodes = sorted({i for e in edges for i in e[:2]})
        for i in nodes:
            fh.write(f'  n{i} [label="{universe.label_of(i)}"];\n')
        for i, j, w in edges:
            fh.write(f"  n{i} -- n{j} [weight={w:.4f}];\n")
        fh.write("}\n")


@cli.command()
@click.option("--n", default=5, show_default=True)
@click.option("--users", "m", default=100, show_default=True)
@click.option("--centers", default="", help="semicolon-separated rankings, e.g. '1|2|3;3|2|1'")
@click.option("--concentration", default=1.0, show_default=True, type=float)
@click.option("--rho", default=1.0, show_default=True, type=float)
@click.option("--tie-block", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def synth(n, m, centers, concentration, rho, tie_block, seed, out):
    """Generate a reproducible synthetic corpus of censored rankings."""
    universe = ItemUniverse(n)
    if centers:
        from .rankings import parse_ranking

        perms = []
        for text in centers.split(";"):
            r = parse_ranking(text, universe)
            perms.append(Permutation(tuple(i for g in r.groups for i in g)))
    else:
        perms = [Permutation(tuple(range(n)))]
    weights = tuple(1.0 / len(perms) for _ in perms)
    config = oracle.MixtureConfig(
        universe, tuple(perms), tuple(concentration for _ in perms),
        weights, rho=rho, tie_block=tie_block,
    )
    rankings = oracle.synthesize(config, m, seed)
    header = {"cmd": "synth", "n": n, "users": m, "centers": centers,
              "concentration": concentration, "rho": rho,
              "tie_block": tie_block, "seed": seed}
    out_path = Path(out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        fh.write("# config: " + json.dumps(header, sort_keys=True) + "\n")
        for uid, r in enumerate(rankings):
            fh.write(f"{uid}\t{format_ranking(r)}\n")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except DataError as exc:
        click.echo(f"data error: {exc.format_message()}", err=True)
        return EXIT_DATA
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except SystemExit as exc:
        return int(exc.code or 0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
