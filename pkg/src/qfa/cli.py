"""Experiment driver: library synthesis, factoring runs, chain-strength
sweeps and remedy-loop runs, all reproducible from a seed and exportable.

Every command echoes its fully-resolved configuration (including the
master seed) into a JSON sidecar next to its outputs; re-running a command
with --config <sidecar> reproduces the data files byte for byte.  The
QFA_SEED environment variable overrides --seed when set.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from pathlib import Path

from . import diagnostics as diag
from . import multiplier as mult
from . import penalty as pen
from . import remedy as rem
from . import sampler as smp
from . import topology as topo

DEFAULT_PEGASUS = 16


def _sieve(limit):
    isp = bytearray([1]) * (limit + 1)
    isp[:2] = b"\0\0"
    for i in range(2, int(limit ** 0.5) + 1):
        if isp[i]:
            isp[i * i::i] = b"\0" * len(isp[i * i::i])
    return [i for i in range(limit + 1) if isp[i]]


def primes_with_bitlength(bits: int):
    """Odd primes whose binary representation is exactly `bits` wide."""
    if bits < 2:
        return []
    return [p for p in _sieve((1 << bits) - 1)
            if p.bit_length() == bits and p % 2 == 1]


def instances_for_size(n: int, m: int, count: int = 10, mode: str = "fixed"):
    """Biprime instances per multiplier size.

    mode="fixed": the largest n-bit prime times the `count` largest m-bit
    primes (the remedy-table pattern).  mode="pairs": the `count` largest
    products of any two exact-width primes (the small-size table pattern).
    """
    ps, qs = primes_with_bitlength(n), primes_with_bitlength(m)
    if not ps or not qs:
        raise ValueError(f"no exact-width primes for size {n}x{m}")
    if mode == "fixed":
        p = ps[-1]
        pairs = [(p, q) for q in qs[-count:]]
    elif mode == "pairs":
        pairs = sorted({(min(p, q), max(p, q)) for p in ps for q in qs},
                       key=lambda pq: pq[0] * pq[1])[-count:]
    else:
        raise ValueError(f"unknown instance mode {mode!r}")
    return [(p * q, p, q) for p, q in sorted(pairs, key=lambda pq: pq[0] * pq[1])]


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="qfa",
        description="Prime factorization on a simulated quantum annealer")
    ap.add_argument("--config", help="JSON file with saved arguments "
                                     "(flags given on the command line win)")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--pegasus-size", type=int, default=DEFAULT_PEGASUS)
        p.add_argument("--seed", type=int, default=0,
                       help="master seed (env QFA_SEED overrides)")
        p.add_argument("--out", help="output directory", default=None)

    p = sub.add_parser("synth", help="synthesize the specialized cell library")
    common(p)
    p.add_argument("--cfa1", action="store_true",
                   help="tie-break toward fewer slack rows")

    p = sub.add_parser("factor", help="factor one number")
    common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--method", choices=[m.value for m in mult.InitMethod],
                   default="flux")
    p.add_argument("--chain-strength", type=float, default=2.0)
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=500)
    p.add_argument("--library", help="library JSON from `qfa synth`")

    p = sub.add_parser("sweep", help="chain-strength sweep over instance sets")
    common(p)
    p.add_argument("--sizes", default="3x3,4x4",
                   help="comma-separated nxm sizes")
    p.add_argument("--chain-strengths", default="1,1.5,2")
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=500)
    p.add_argument("--instances", type=int, default=10)
    p.add_argument("--instance-mode", choices=["fixed", "pairs"],
                   default="fixed")
    p.add_argument("--method", choices=[m.value for m in mult.InitMethod],
                   default="flux")
    p.add_argument("--library", default=None)

    p = sub.add_parser("remedy", help="incremental anneal-offset remedy run")
    common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--reads", type=int, default=1000)
    p.add_argument("--sweeps", type=int, default=500)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--threshold", type=int, default=None,
                   help="step cap (default: multiplier perimeter 2(n+m))")
    p.add_argument("--chain-strength", type=float, default=2.0)
    p.add_argument("--method", choices=[m.value for m in mult.InitMethod],
                   default="flux")
    p.add_argument("--library", default=None)
    return ap


def parse_args(argv):
    ap = _build_parser()
    args = ap.parse_args(argv)
    if args.config:
        saved = json.loads(Path(args.config).read_text())
        given = {a.split("=")[0].lstrip("-").replace("-", "_")
                 for a in argv if a.startswith("--")}
        given.add("command")
        for k, v in saved.items():
            if k not in given and hasattr(args, k):
                setattr(args, k, v)
    env_seed = os.environ.get("QFA_SEED")
    if env_seed is not None:
        args.seed = int(env_seed)
    return args


def _echo_config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "config"}


def _outdir(args) -> Path:
    out = Path(args.out) if args.out else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str):
    path.write_text(text)
    print(f"wrote {path}")


def _load_library(args, graph):
    if getattr(args, "library", None):
        return pen.library_from_json(Path(args.library).read_text())
    tile = topo.place_tiles(graph, 1, 1, layout="multiplier")[0][0]
    return pen.build_specialized_library(
        tile, minimize_slack=getattr(args, "cfa1", False))


def cmd_synth(args) -> int:
    if args.out is not None and not str(args.out).strip():
        print("error: empty output path", file=sys.stderr)
        return 2
    graph = topo.build_pegasus(args.pegasus_size)
    tile = topo.place_tiles(graph, 1, 1, layout="multiplier")[0][0]
    lib = pen.build_specialized_library(tile, minimize_slack=args.cfa1)
    base = pen.cfa_spec()
    for key, pf in sorted(lib.items()):
        fixing = dict(key)
        spec = pen.specialize(base, fixing) if fixing else base
        check = pen.verify_penalty(pf, spec)
        status = "ok" if check.satisfies_spec else "FAILED"
        print(f"fixing {fixing or '{}'}: gap {pf.gap:g} [{status}]")
    out = _outdir(args)
    _write(out / "library.json", pen.library_to_json(lib))
    _write(out / "library.config.json", json.dumps(_echo_config(args), indent=1))
    return 0


def _factor_once(graph, library, args, chain_strength, number, reads, seed):
    layout, model = mult.build_multiplier(args.n, args.m, graph, library,
                                          c=chain_strength)
    layout, applied = mult.apply_problem(layout, model, number,
                                         mult.InitMethod(args.method),
                                         graph=graph)
    config = smp.AnnealConfig(num_reads=reads, sweeps=args.sweeps,
                              master_seed=seed)
    sampleset = smp.sample_sa(applied, config)
    return layout, applied, config, sampleset


def cmd_factor(args) -> int:
    if args.N >= (1 << (args.n + args.m)):
        print(f"error: {args.N} needs more than {args.n + args.m} output bits",
              file=sys.stderr)
        return 2
    graph = topo.build_pegasus(args.pegasus_size)
    library = _load_library(args, graph)
    layout, model, config, sampleset = _factor_once(
        graph, library, args, args.chain_strength, args.N, args.reads, args.seed)
    solutions = {}
    slack_solutions = 0
    ground_reads = 0
    for sample, energy, occ in sampleset.spins_dicts():
        cand = diag.decode(layout, model, sample)
        if abs(cand.energy) <= diag.ENERGY_TOL:
            ground_reads += occ
            if cand.p * cand.q == args.N:
                solutions[(cand.p, cand.q)] = solutions.get((cand.p, cand.q), 0) + occ
        elif cand.circuit_consistent and cand.p * cand.q == args.N:
            slack_solutions += occ
    print(f"N={args.N} method={args.method} reads={args.reads}: "
          f"{ground_reads} zero-energy reads")
    for (p, q), occ in sorted(solutions.items()):
        print(f"  factors {p} x {q} = {p * q}  ({occ} reads)")
    print(f"slack solutions (valid factorization above ground): {slack_solutions}")
    out = _outdir(args)
    _write(out / f"factor_{args.N}.csv", sampleset.to_csv())
    sidecar = _echo_config(args)
    sidecar["config_digest"] = config.digest()
    sidecar["model_digest"] = model.digest()
    _write(out / f"factor_{args.N}.config.json", json.dumps(sidecar, indent=1))
    return 0 if solutions else 1


def cmd_sweep(args) -> int:
    graph = topo.build_pegasus(args.pegasus_size)
    library = _load_library(args, graph)
    sizes = []
    for token in args.sizes.split(","):
        n, m = token.lower().split("x")
        sizes.append((int(n), int(m)))
    strengths = [float(x) for x in args.chain_strengths.split(",")]
    rows = ["size,c,N,p,q,ground,no_broken_chain,no_excited_cfa,num_reads"]
    summary = {}
    for n, m in sizes:
        instances = instances_for_size(n, m, count=args.instances,
                                       mode=args.instance_mode)
        for c in strengths:
            counts = []
            for N, p, q in instances:
                largs = argparse.Namespace(**vars(args))
                largs.n, largs.m = n, m
                layout, model, config, sampleset = _factor_once(
                    graph, library, largs, c, N, args.reads, args.seed)
                report = diag.excitation_stats(layout, model, sampleset)
                clean = report.clean_reads()
                rows.append(f"{n}x{m},{c:g},{N},{p},{q},{clean['ground']},"
                            f"{clean['no_broken_chain']},"
                            f"{clean['no_excited_cfa']},{sampleset.num_reads}")
                counts.append(clean["ground"])
            summary[(f"{n}x{m}", c)] = counts
    srows = ["size,c,min_ground,median_ground,max_ground"]
    for (size, c), counts in summary.items():
        srows.append(f"{size},{c:g},{min(counts)},"
                     f"{statistics.median(counts):g},{max(counts)}")
    out = _outdir(args)
    _write(out / "sweep.csv", "\n".join(rows) + "\n")
    _write(out / "sweep_summary.csv", "\n".join(srows) + "\n")
    _write(out / "sweep.config.json", json.dumps(_echo_config(args), indent=1))
    return 0


def cmd_remedy(args) -> int:
    graph = topo.build_pegasus(args.pegasus_size)
    library = _load_library(args, graph)
    layout, model = mult.build_multiplier(args.n, args.m, graph, library,
                                          c=args.chain_strength)
    layout, applied = mult.apply_problem(layout, model, args.N,
                                         mult.InitMethod(args.method),
                                         graph=graph)
    base_config = smp.AnnealConfig(num_reads=args.reads, sweeps=args.sweeps,
                                   master_seed=args.seed)
    result = rem.remedy_loop(layout, applied, base_config, delta=args.delta,
                             threshold=args.threshold)
    first, last = result.history[0], result.history[-1]
    print(f"N={args.N}: start energy {first['best_energy']:g} "
          f"(most excited {tuple(first['most_excited'])}, "
          f"{first['excitation_count']} excitations)")
    print(f"after {result.iterations_used} iteration(s): energy "
          f"{last['best_energy']:g}, reached_ground={result.reached_ground}")
    out = _outdir(args)
    _write(out / f"remedy_{args.N}.json", result.to_json())
    # figure panels: before/after excitation counts and the offsets used
    for tag, entry in (("before", first), ("after", last)):
        config = smp.AnnealConfig(num_reads=args.reads, sweeps=args.sweeps,
                                  master_seed=entry["seed"],
                                  offsets={int(q): v for q, v in entry["offsets"].items()})
        sampleset = smp.sample_sa(applied, config)
        report = diag.excitation_stats(layout, applied, sampleset)
        _write(out / f"remedy_{args.N}.{tag}.csv", report.to_csv(layout))
    offsets_rows = ["col,row,offset"]
    per_cell = {}
    for q, v in result.final_offsets.items():
        for i, j in layout.cells():
            if q in layout.tile(i, j).qubits:
                per_cell[(j, i)] = max(per_cell.get((j, i), 0.0), v)
    for (col, row_), v in sorted(per_cell.items()):
        offsets_rows.append(f"{col},{row_},{v:g}")
    _write(out / f"remedy_{args.N}.offsets.csv", "\n".join(offsets_rows) + "\n")
    _write(out / f"remedy_{args.N}.config.json",
           json.dumps(_echo_config(args), indent=1))
    return 0


def main(argv=None) -> int:
    args = parse_args(sys.argv[1:] if argv is None else argv)
    return {"synth": cmd_synth, "factor": cmd_factor,
            "sweep": cmd_sweep, "remedy": cmd_remedy}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
