"""Command-line entry point: simulate, fit, summarize, equiv, exact, score-run."""
from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .equivalence import i_markov_equivalent, transform_sequence
from .errors import (
    CapacityError,
    CorruptedStateError,
    DataError,
    GidagError,
    HyperparameterError,
    InvalidQueryError,
    MalformedGraphError,
    NumericError,
    ValidityError,
)
from .intervention import InterventionCollection
from .io import (
    dag_from_edges,
    dump_json,
    edges_from_adjacency,
    file_hash,
    format_edges,
    ingest,
    interventions_from_json,
    interventions_to_json,
    read_edges,
    read_interventions,
    state_to_json,
    write_data_csv,
    write_matrix_csv,
)
from .mcmc import ChainOutput, pool_outputs, run_chains, state_from_key, state_indicators
from .metrics import evaluate
from .modelprior import PriorHyper
from .posterior import EDGE_THRESHOLD, TARGET_THRESHOLD, exact_posterior, summarize, total_variation
from .score import hyperparams_from_config
from .simulate import simulate

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

CONFIG_KEYS = {
    "wishart_a", "wishart_U", "a_phi", "b_phi", "a_eta", "b_eta", "a_D", "b_D",
    "iters", "burnin", "thin", "chains", "seed",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    if args.q < 2 or args.k < 1 or args.n < 0:
        raise UsageError("need --q >= 2, --k >= 1 and --n >= 0")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    d, I, params, blocks = simulate(args.q, args.k, args.n, args.seed)
    write_data_csv(out / "data.csv", blocks)
    truth = {
        "q": args.q,
        "n": args.n,
        "seed": args.seed,
        "dag": [[u + 1, v + 1] for u, v in d.edges()],
        "interventions": interventions_to_json(I),
        "coefficients": [B.tolist() for B in params.B],
        "variances": [D.tolist() for D in params.Dvar],
    }
    dump_json(out / "truth.json", truth)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise UsageError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    unknown = sorted(set(cfg) - CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return cfg


def _setting(args, cfg, name, default):
    v = getattr(args, name)
    if v is None:
        v = cfg.get(name, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise UsageError(f"{name} must be an integer")
    return v


def _tallies_json(o: ChainOutput) -> dict:
    return {
        "n_eff": o.n_eff,
        "edge_counts": o.edge_counts.tolist(),
        "target_counts": o.target_counts.tolist(),
        "diff_counts": o.diff_counts.tolist(),
        "accepted": o.accepted,
        "proposed": o.proposed,
    }


def _output_from_tallies(t: dict, q: int, K: int) -> ChainOutput:
    return ChainOutput(
        q=q, K=K, S=0, burn_in=0, thin=1, seed=None, n_eff=t["n_eff"],
        edge_counts=np.array(t["edge_counts"], dtype=np.int64).reshape(K, q, q),
        target_counts=np.array(t["target_counts"], dtype=np.int64).reshape(q, K),
        diff_counts=np.array(t["diff_counts"], dtype=np.int64).reshape(K, q, q),
        accepted=t["accepted"], proposed=t["proposed"],
    )


def _summary_files(summary, q: int, K: int) -> dict[str, str]:
    """Rendered contents of every summary file, keyed by file name."""
    import io as _io

    files = {}

    def csv_text(M):
        buf = _io.StringIO()
        for row in np.asarray(M):
            buf.write(",".join(f"{x:.6f}" for x in row) + "\n")
        return buf.getvalue()

    for k in range(K):
        files[f"ppi_{k + 1}.csv"] = csv_text(summary.J[k])
        files[f"mpm_{k + 1}.edges"] = format_edges(edges_from_adjacency(summary.mpm[k]), q)
        if k:
            files[f"diff_{k + 1}.csv"] = csv_text(summary.diff_prob[k])
    files["targets.csv"] = csv_text(summary.Tprob)
    return files


def _sample_record(it: int, chain: int, key: tuple) -> str:
    d, I = state_from_key(key).to_pair()
    return json.dumps({"chain": chain + 1, "iter": it, **state_to_json(d, I)}, sort_keys=True)


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    data, warnings = ingest(args.data)
    for w in warnings:
        _warn(w)
    q, K = data.q, data.K
    h = hyperparams_from_config(cfg, q, base_dir=Path(args.config).parent if args.config else None)
    priors = PriorHyper.from_config(cfg)
    S = _setting(args, cfg, "iters", 3000 * q)
    burn = _setting(args, cfg, "burnin", 1000 * q)
    thin = _setting(args, cfg, "thin", 10)
    chains = _setting(args, cfg, "chains", 1)
    seed = _setting(args, cfg, "seed", 0)
    if S <= burn or burn < 0 or thin < 1 or chains < 1:
        raise UsageError("need iters > burnin >= 0, thin >= 1 and chains >= 1")

    outs = run_chains(data, h, priors, S, burn, thin, seed=seed, chains=chains,
                      keep_samples=not args.no_samples, track_states=args.track_states)
    pooled = pool_outputs(outs)
    summary = summarize(pooled)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in _summary_files(summary, q, K).items():
        (out / name).write_text(text)
    dump_json(out / "tallies.json", {
        "q": q, "K": K,
        "pooled": _tallies_json(pooled),
        "chains": [_tallies_json(o) for o in outs],
    })
    if not args.no_samples:
        with (out / "samples.jsonl").open("w") as fh:
            for c, o in enumerate(outs):
                for it, key in o.samples:
                    fh.write(_sample_record(it, c, key) + "\n")
    if args.track_states:
        states = []
        for key, n in sorted(pooled.state_counts.items()):
            d, I = state_from_key(key).to_pair()
            states.append({"count": n, **state_to_json(d, I)})
        dump_json(out / "states.json", {"n_eff": pooled.n_eff, "states": states})

    manifest = {
        "software": {"name": "gidag", "version": __version__},
        "command": "fit",
        "inputs": {"data": {"file": Path(args.data).name, "sha1": file_hash(args.data)}},
        "config": {
            "wishart_a": h.a,
            "wishart_U": cfg.get("wishart_U", "identity"),
            **{k: getattr(priors, k) for k in ("a_phi", "b_phi", "a_eta", "b_eta", "a_D", "b_D")},
            "iters": S, "burnin": burn, "thin": thin, "chains": chains, "seed": seed,
        },
        "q": q,
        "K": K,
        "n": data.n,
        "n_eff": pooled.n_eff,
        "thresholds": {"edge_ppi": f"> {EDGE_THRESHOLD}", "target": f">= {TARGET_THRESHOLD}",
                       "difference_graph": f"> {EDGE_THRESHOLD}"},
        "mpm_acyclic": [bool(x) for x in summary.mpm_acyclic],
        "acceptance": [{"chain": i + 1, "accepted": o.accepted, "proposed": o.proposed} for i, o in enumerate(outs)],
        "samples": None if args.no_samples else "samples.jsonl",
        "warnings": warnings,
    }
    if args.config:
        manifest["inputs"]["config"] = {"file": Path(args.config).name, "sha1": file_hash(args.config)}
    if cfg.get("wishart_U", "identity") != "identity":
        manifest["inputs"]["wishart_U"] = {"sha1": file_hash(Path(args.config).parent / cfg["wishart_U"])}
    for k, ok in enumerate(summary.mpm_acyclic):
        if not ok:
            _warn(f"MPM graph of context {k + 1} contains a cycle")
    dump_json(out / "manifest.json", manifest)
    return EXIT_OK


# ---------------------------------------------------------------------------
# summarize

def _load_run(run: Path) -> tuple[dict, dict]:
    try:
        manifest = json.loads((run / "manifest.json").read_text())
        tallies = json.loads((run / "tallies.json").read_text())
    except OSError as e:
        raise DataError(f"cannot read run directory {run}: {e.strerror}") from None
    return manifest, tallies


def cmd_summarize(args) -> int:
    run = Path(args.run)
    manifest, tallies = _load_run(run)
    q, K = tallies["q"], tallies["K"]
    problems = []

    chain_outs = [_output_from_tallies(t, q, K) for t in tallies["chains"]]
    pooled = _output_from_tallies(tallies["pooled"], q, K)
    for name in ("edge_counts", "target_counts", "diff_counts"):
        if not np.array_equal(sum(getattr(o, name) for o in chain_outs), getattr(pooled, name)):
            problems.append(f"pooled {name} differ from the sum over chains")

    for name, text in _summary_files(summarize(pooled), q, K).items():
        path = run / name
        if not path.exists() or path.read_text() != text:
            problems.append(f"{name} does not match the stored tallies")

    samples = run / "samples.jsonl"
    cfg = manifest.get("config", {})
    replayed = False
    if samples.exists() and cfg.get("thin") == 1:
        E = np.zeros((K, q, q), dtype=np.int64)
        Tm = np.zeros((q, K), dtype=np.int64)
        G = np.zeros((K, q, q), dtype=np.int64)
        n = 0
        for line in samples.read_text().splitlines():
            rec = json.loads(line)
            d = dag_from_edges(q, [(u - 1, v - 1) for u, v in rec["edges"]])
            I = interventions_from_json(rec)
            from .mcmc import ChainState

            e, t, g = state_indicators(ChainState.from_pair(d, I))
            E += e
            Tm += t
            G += g
            n += 1
        replayed = True
        if n != pooled.n_eff:
            problems.append(f"samples.jsonl holds {n} states, expected {pooled.n_eff}")
        for name, val in (("edge_counts", E), ("target_counts", Tm), ("diff_counts", G)):
            if not np.array_equal(val, getattr(pooled, name)):
                problems.append(f"{name} replayed from samples differ from stored tallies")

    for p in problems:
        print(f"MISMATCH {p}")
    if problems:
        return EXIT_DATA
    print(f"OK summaries match tallies{' and replayed samples' if replayed else ''} (n_eff={pooled.n_eff})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# equiv

def _read_pair(edge_path, int_path, q):
    q_file, edges = read_edges(edge_path)
    I = read_interventions(int_path)
    return q_file, edges, I


def cmd_equiv(args) -> int:
    q1, e1, I1 = _read_pair(args.dag1, args.int1, args.q)
    q2, e2, I2 = _read_pair(args.dag2, args.int2, args.q)
    q = args.q or q1 or q2
    if q is None:
        verts = [x for e in e1 + e2 for x in e]
        verts += [j for I in (I1, I2) for c in I for j in c.targets]
        q = max(verts) + 1 if verts else 1
    d1, d2 = dag_from_edges(q, e1), dag_from_edges(q, e2)
    if len(I1) != len(I2):
        raise DataError("intervention files have different numbers of contexts")
    p1, p2 = (d1, I1), (d2, I2)
    eq = i_markov_equivalent(p1, p2)
    print("EQUIVALENT" if eq else "NOT_EQUIVALENT")
    if eq and args.sequence:
        for k, (u, v) in transform_sequence(p1, p2):
            where = "dag" if k == 0 else f"context {k + 1}"
            print(f"reverse {u + 1} {v + 1} in {where}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# exact

def cmd_exact(args) -> int:
    cfg = load_config(args.config)
    data, warnings = ingest(args.data)
    for w in warnings:
        _warn(w)
    if data.q > args.max_q:
        raise CapacityError(f"q={data.q} exceeds --max-q {args.max_q}", data.q)
    h = hyperparams_from_config(cfg, data.q, base_dir=Path(args.config).parent if args.config else None)
    post = exact_posterior(data, h, PriorHyper.from_config(cfg))
    rows = []
    for key, p in sorted(post.items(), key=lambda kv: (-kv[1], kv[0])):
        d, I = state_from_key(key).to_pair()
        rows.append({"probability": p, **state_to_json(d, I)})
    result = {"q": data.q, "K": data.K, "n_states": len(rows), "states": rows}
    if args.run:
        try:
            stored = json.loads((Path(args.run) / "states.json").read_text())
        except OSError:
            raise DataError(f"{args.run} has no states.json; fit with --track-states") from None
        counts = Counter()
        for s in stored["states"]:
            d = dag_from_edges(data.q, [(u - 1, v - 1) for u, v in s["edges"]])
            from .mcmc import ChainState

            counts[ChainState.from_pair(d, interventions_from_json(s)).key()] += s["count"]
        total = sum(counts.values())
        tv = total_variation(post, {k: c / total for k, c in counts.items()})
        result["tv_vs_run"] = tv
        print(f"total variation vs run: {tv:.6f}")
    if args.out:
        dump_json(args.out, result)
    print(f"{len(rows)} states; top probability {rows[0]['probability']:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# score-run

def cmd_score_run(args) -> int:
    try:
        truth = json.loads(Path(args.truth).read_text())
    except OSError as e:
        raise DataError(f"cannot read {args.truth}: {e.strerror}") from None
    q = truth["q"]
    d = dag_from_edges(q, [(u - 1, v - 1) for u, v in truth["dag"]])
    I = interventions_from_json(truth["interventions"])
    run = Path(args.run)
    _, tallies = _load_run(run)
    if tallies["q"] != q or tallies["K"] != len(I):
        raise DataError("run and truth disagree on q or K")
    summary = summarize(_output_from_tallies(tallies["pooled"], q, len(I)))
    report = evaluate((d, I), summary)
    dump_json(Path(args.out) if args.out else run / "eval.json", report.to_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gidag", description=__doc__)
    p.add_argument("--version", action="version", version=f"gidag {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a ground truth and multi-context data")
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--k", type=int, required=True, help="number of contexts, including the observational one")
    s.add_argument("--n", type=int, required=True, help="rows per context")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="run the MH sampler and write posterior summaries")
    f.add_argument("--data", required=True)
    f.add_argument("--config")
    f.add_argument("--iters", type=int)
    f.add_argument("--burnin", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--seed", type=int)
    f.add_argument("--chains", type=int)
    f.add_argument("--out", required=True)
    f.add_argument("--no-samples", action="store_true", help="skip samples.jsonl")
    f.add_argument("--track-states", action="store_true", help="write visited-state counts to states.json")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("summarize", help="re-derive summaries of a run and check them against stored files")
    m.add_argument("--run", required=True)
    m.set_defaults(func=cmd_summarize)

    e = sub.add_parser("equiv", help="decide I-Markov equivalence of two (DAG, interventions) pairs")
    e.add_argument("--dag1", required=True)
    e.add_argument("--int1", required=True)
    e.add_argument("--dag2", required=True)
    e.add_argument("--int2", required=True)
    e.add_argument("--q", type=int)
    e.add_argument("--sequence", action="store_true", help="print a reversal sequence from pair 1 to pair 2")
    e.set_defaults(func=cmd_equiv)

    x = sub.add_parser("exact", help="exact posterior by enumeration (tiny problems only)")
    x.add_argument("--data", required=True)
    x.add_argument("--config")
    x.add_argument("--max-q", type=int, default=3)
    x.add_argument("--run", help="fit output directory with states.json to compare against")
    x.add_argument("--out")
    x.set_defaults(func=cmd_exact)

    r = sub.add_parser("score-run", help="compare a fit run against the simulation truth")
    r.add_argument("--truth", required=True)
    r.add_argument("--run", required=True)
    r.add_argument("--out")
    r.set_defaults(func=cmd_score_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, HyperparameterError, CapacityError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, MalformedGraphError, InvalidQueryError, ValidityError, CorruptedStateError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except GidagError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        print(f"data error: malformed input ({e})", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
