"""Command-line front end: config parsing, run manifests and the experiment subcommands.

Exit codes: 0 success, 1 scientific failure (a condition or threshold not
met), 2 usage / configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .dispersion import builtin_model, genericity_report
from .evolve import BlowUpError, Integrator, OscillatoryContext, RadiusError, series_solution, solve
from .monomials import (Decoration, OrderedTree, classify_decoration, expansion_rows, nfm_magnitude_probe,
                        series_reversion_counts)
from .spectral import inverse_transform, l1_norm_k, linf_norm_r, write_field_binary, write_field_csv
from .superpose import (DEFAULT_LADDER, SuperpositionExperiment, ci_cross_check, scaling_sweep,
                        sg_kg_closeness, _ordered_sum)
from .wavepacket import MultiWavepacket, WavepacketSpec, apply_cutoff, real_packet

log = logging.getLogger("wavelab")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
MODELS = ("fpu", "klein_gordon", "sine_gordon", "nls", "semilinear_wave")
NON_SEMANTIC = ("output", "jobs")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "model": {"name": "fpu", "params": {}},
    "packets": [],
    "grid": {},
    "integrator": {"rho_fraction": 20.0, "min_steps": 2000, "snapshots": 33, "estimate_error": True,
                   "blowup_factor": 1e6},
    "sweep": {"kind": "remainder", "betas": list(DEFAULT_LADDER), "rho_coeff": 1.0, "rho_power": 2.0,
              "tau_star": 0.5, "eps": 0.2, "norm_fraction": None, "linear": False},
    "simulate": {"beta": 0.1},
    "series": {"beta": 0.15, "M": 3, "norm_fraction": 0.25, "ci_check": False},
    "probe": {"beta": 0.1, "tree": "3,0,0,0", "decoration": [1, 1, 1, 1], "rhos": [4e-2, 1e-2, 2.5e-3],
              "tau": 0.5, "cutoff": True, "fm_decoration": [1, 1, 1, -1], "packet": 0, "n0": 1},
    "expand": {"m": 4, "S": [2, 3]},
    "output": "out",
    "jobs": 1,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "params":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _packet(entry: dict) -> dict:
    """Normalize a packet entry to the full WavepacketSpec dictionary."""
    if "components" in entry:
        spec = WavepacketSpec.from_dict(entry)
    else:
        if "kstar" not in entry:
            raise ConfigError("packet entries need a kstar")
        env = entry.get("envelope", {})
        from .wavepacket import Envelope

        amp = entry.get("amplitude", 1.0)
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        if entry.get("real", True):
            spec = real_packet(entry["kstar"], amp, Envelope.from_dict(env), int(entry.get("band", 1)),
                               entry.get("r0"))
        else:
            from .wavepacket import Component

            z = int(entry.get("zeta", 1))
            spec = WavepacketSpec(entry["kstar"], int(entry.get("band", 1)),
                                  {z: Component(amp, Envelope.from_dict(env))}, entry.get("r0"))
    d = spec.as_dict()
    d.pop("beta", None)
    return d


def resolve_config(raw: dict) -> dict:
    """Fill defaults, normalize and validate; the result is a fixed point of this function."""
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, raw)
    if cfg["schema"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {cfg['schema']}")
    name = cfg["model"].get("name")
    if name not in MODELS:
        raise ConfigError(f"unknown model {name!r}; choose from {MODELS}")
    cfg["model"]["params"] = dict(cfg["model"].get("params") or {})
    try:
        builtin_model(name, cfg["model"]["params"])
    except Exception as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc
    try:
        cfg["packets"] = [_packet(p) for p in cfg["packets"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid packet: {exc}") from exc
    sw = cfg["sweep"]
    if sw["kind"] not in ("remainder", "sg_kg"):
        raise ConfigError("sweep.kind must be 'remainder' or 'sg_kg'")
    sw["betas"] = [float(b) for b in sw["betas"]]
    if any(not 0 < b <= 0.5 for b in sw["betas"]):
        raise ConfigError("beta values must lie in (0, 1/2]")
    if any(b2 >= b1 for b1, b2 in zip(sw["betas"], sw["betas"][1:])):
        raise ConfigError("beta ladder must be strictly decreasing")
    if not 0 < float(sw["tau_star"]) <= 1:
        raise ConfigError("tau_star must lie in (0, 1]")
    if not 0 < float(sw["eps"]) < 0.5:
        raise ConfigError("eps must lie in (0, 1/2)")
    for key in ("rho_fraction", "min_steps", "snapshots"):
        if float(cfg["integrator"][key]) <= 0:
            raise ConfigError(f"integrator.{key} must be positive")
    if int(cfg["jobs"]) < 1:
        raise ConfigError("jobs must be >= 1")
    for blk in ("simulate", "series", "probe"):
        b = float(cfg[blk]["beta"])
        if not 0 < b <= 0.5:
            raise ConfigError(f"{blk}.beta must lie in (0, 1/2]")
    try:
        OrderedTree.from_preorder(cfg["probe"]["tree"])
    except ValueError as exc:
        raise ConfigError(f"probe.tree: {exc}") from exc
    cfg["probe"]["tree"] = OrderedTree.from_preorder(cfg["probe"]["tree"]).serialize()
    cfg["expand"]["S"] = sorted(int(s) for s in cfg["expand"]["S"])
    cfg["expand"]["m"] = int(cfg["expand"]["m"])
    # YAML round trip normalizes tuples / numpy scalars
    return json.loads(json.dumps(cfg, default=_jsonable))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not serializable: {type(x)}")


def load_config(path: str | None) -> dict:
    if path is None:
        return resolve_config({})
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    return resolve_config(raw)


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=True)


def config_hash(cfg: dict) -> str:
    sem = {k: v for k, v in cfg.items() if k not in NON_SEMANTIC}
    blob = json.dumps(sem, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _integrator(cfg: dict) -> Integrator:
    it = cfg["integrator"]
    return Integrator(float(it["rho_fraction"]), int(it["min_steps"]), int(it["snapshots"]),
                      bool(it["estimate_error"]), float(it["blowup_factor"]))


def _packets(cfg: dict) -> list:
    if not cfg["packets"]:
        raise ConfigError("config lists no wavepackets")
    return [WavepacketSpec.from_dict(p) for p in cfg["packets"]]


def experiment_from_config(cfg: dict, **over) -> SuperpositionExperiment:
    sw = cfg["sweep"]
    kw = dict(model=cfg["model"]["name"], packets=_packets(cfg), params=cfg["model"]["params"],
              betas=tuple(sw["betas"]), rho_coeff=float(sw["rho_coeff"]), rho_power=float(sw["rho_power"]),
              tau_star=float(sw["tau_star"]), eps=float(sw["eps"]), grid=cfg["grid"],
              snapshots=int(cfg["integrator"]["snapshots"]), integrator=_integrator(cfg),
              norm_fraction=sw["norm_fraction"], linear=bool(sw["linear"]), jobs=int(cfg["jobs"]))
    kw.update(over)
    return SuperpositionExperiment(**kw)


# ---------------------------------------------------------------------------
# manifest and output helpers
# ---------------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass
class RunManifest:
    path: Path
    command: str
    config: dict
    stages: list = field(default_factory=list)
    status: str = "running"
    started: float = field(default_factory=time.time)
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"tool": "wavelab", "version": __version__, "command": self.command,
                "config_sha256": config_hash(self.config), "config": self.config, "status": self.status,
                "started": self.started, "wall_seconds": time.time() - self.started,
                "stages": self.stages, **self.extra}

    def write(self) -> None:
        _atomic_write(self.path, json.dumps(self.as_dict(), indent=2, sort_keys=True, default=_jsonable) + "\n")

    def stage(self, name: str, passed: bool | None, seconds: float, **info) -> None:
        self.stages.append({"name": name, "passed": passed, "seconds": seconds, **info})


def _fmt(v):
    if isinstance(v, bool) or v is None:
        return "" if v is None else str(v).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, rows: list, columns: list | None = None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in columns])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_check_genericity(cfg: dict, out: Path, man: RunManifest, args) -> int:
    t0 = time.perf_counter()
    packets = _packets(cfg)
    try:
        MultiWavepacket(packets)
    except ValueError as exc:
        print(f"FAIL: {exc}")
        man.stage("check-genericity", False, time.perf_counter() - t0, reason=str(exc))
        return EXIT_FAIL
    model = builtin_model(cfg["model"]["name"], cfg["model"]["params"])
    conj = all(len(p.components) == 2 for p in packets)
    rep = genericity_report(model, [(p.kstar, p.band, p.zeta) for p in packets], conj)
    rows = rep.rows()
    write_csv(out / "genericity.csv", rows)
    for r in rows:
        print(f"center {r['center']}: k*={r['kstar']} nondegenerate={r['nondegenerate']} "
              f"margin={_fmt(r['margin'])} complete_degeneracy={r['complete_degeneracy']}")
    print(f"p0 = {rep.p0:.6g}; applicable theorem: {rep.applicable_theorem}")
    for n in rep.notes:
        print(f"note: {n}")
    ok = rep.applicable_theorem != "none"
    man.stage("check-genericity", ok, time.perf_counter() - t0, theorem=rep.applicable_theorem, p0=rep.p0)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_simulate(cfg: dict, out: Path, man: RunManifest, args) -> int:
    t0 = time.perf_counter()
    sw = cfg["sweep"]
    beta = float(cfg["simulate"]["beta"])
    ex = experiment_from_config(cfg, betas=(beta,), require_generic=False)
    prob = ex.problem(beta)
    h = _ordered_sum(ex.data(beta, prob))
    traj = solve(prob.with_initial(h))
    fdir = out / "fields"
    fdir.mkdir(exist_ok=True)
    rows = []
    for i, (t, f) in enumerate(zip(traj.times, traj.fields)):
        name = f"snap_{i:04d}." + ("wlf" if args.format == "binary" else "csv")
        (write_field_binary if args.format == "binary" else write_field_csv)(fdir / name, f)
        rows.append({"index": i, "tau": float(t), "file": f"fields/{name}", "l1_k": l1_norm_k(f),
                     "linf_r": linf_norm_r(inverse_transform(f))})
    write_csv(out / "trajectory.csv", rows)
    diag = dict(traj.diagnostics)
    diag.update({"rho": prob.rho, "beta": beta, "N": prob.grid.N, "domain": prob.grid.domain,
                 "tau_star": float(sw["tau_star"])})
    write_csv(out / "diagnostics.csv", [diag])
    man.stage("simulate", True, time.perf_counter() - t0, **{k: v for k, v in diag.items()})
    print(f"wrote {len(rows)} snapshots to {fdir}")
    return EXIT_OK


def cmd_sweep(cfg: dict, out: Path, man: RunManifest, args) -> int:
    t0 = time.perf_counter()
    sw = cfg["sweep"]
    if sw["kind"] == "sg_kg":
        packet = _packets(cfg)[0]
        res = sg_kg_closeness(sw["betas"], packet, tau_star=float(sw["tau_star"]),
                              order=int(cfg["model"]["params"].get("order", 7)),
                              rho_coeff=float(sw["rho_coeff"]), grid=cfg["grid"], integrator=_integrator(cfg))
        rows = [{"beta": b, "difference": dv, "scaled": dv / b ** 2, "runtime": rt}
                for b, dv, rt in zip(res["beta"], res["difference"], res["runtime"])]
        write_csv(out / "sg_kg.csv", rows)
        write_csv(out / "sg_kg_summary.csv", [{"exponent": res["exponent"], "C_fit": res["C_fit"]}])
        print(f"fitted beta-exponent: {res['exponent']:.4f}")
        man.stage("sg_kg", True, time.perf_counter() - t0, exponent=res["exponent"])
        return EXIT_OK
    ex = experiment_from_config(cfg)
    gen = ex.genericity()
    man.stage("genericity", gen.applicable_theorem != "none", time.perf_counter() - t0,
              theorem=gen.applicable_theorem)
    if gen.applicable_theorem == "none" and not ex.linear:
        print("FAIL: genericity conditions fail; no superposition theorem applies")
        return EXIT_FAIL
    rep = scaling_sweep(ex)
    write_csv(out / "remainder.csv", rep.rows(),
              ["beta", "rho", "supL1", "supLinf", "relative", "slope_so_far", "failed"])
    write_csv(out / "remainder_fit.csv", [{"slope": rep.slope, "slope_width": rep.slope_width,
                                           "log_corrected_slope": rep.log_corrected_slope,
                                           "monotone": rep.monotone, "excluded": len(rep.excluded)}])
    print(f"slope = {rep.slope:.4f} +- {rep.slope_width:.3f}; log-corrected = {rep.log_corrected_slope:.4f}; "
          f"monotone = {rep.monotone}")
    ok = not rep.excluded
    man.stage("sweep", ok, time.perf_counter() - t0, slope=rep.slope, monotone=rep.monotone,
              excluded=rep.excluded)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_expand(cfg: dict, out: Path, man: RunManifest, args) -> int:
    t0 = time.perf_counter()
    m = args.m if args.m is not None else cfg["expand"]["m"]
    S = sorted(args.S) if args.S else cfg["expand"]["S"]
    rows = expansion_rows(m, S)
    for r in rows:
        t = OrderedTree.from_preorder(r["preorder"])
        r.update({"incidence": t.internal, "rank": t.rank})
    write_csv(out / "trees.csv", rows, ["m", "preorder", "incidence", "rank", "c_T"])
    total = sum(r["c_T"] for r in rows)
    oracle = series_reversion_counts(m, S)[m - 1]
    write_csv(out / "expand_summary.csv", [{"m": m, "S": " ".join(map(str, S)), "rows": len(rows),
                                            "sum_c_T": total, "series_reversion": oracle,
                                            "bound": 8 ** m / 4}])
    ok = total == oracle and total <= 8 ** m / 4
    print(f"{len(rows)} trees, sum c_T = {total} (series reversion {oracle})")
    man.stage("expand-monomials", ok, time.perf_counter() - t0, rows=len(rows), sum_c_T=total)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify_series(cfg: dict, out: Path, man: RunManifest, args) -> int:
    t0 = time.perf_counter()
    sc = cfg["series"]
    beta = float(sc["beta"])
    Mmax = args.M if args.M is not None else int(sc["M"])
    ex = experiment_from_config(cfg, betas=(beta,), norm_fraction=sc["norm_fraction"])
    prob = ex.problem(beta)
    h = _ordered_sum(ex.data(beta, prob))
    prob = prob.with_initial(h)
    traj = solve(prob)
    ref = traj.final()
    err = traj.diagnostics["error_estimate"]
    rows = []
    ctx = OscillatoryContext.build(prob)
    for M in range(1, Mmax + 1):
        U, diag = series_solution(prob, M, ctx)
        gap = l1_norm_k(U - ref)
        rows.append({"M": M, "gap_l1": gap, "tail_bound": diag["tail_bound"], "integrator_error": err,
                     "R_G": diag["R_G"], "norm_h": diag["norm_h"],
                     "within_bound": gap <= diag["tail_bound"] + 10 * err})
    write_csv(out / "series.csv", rows)
    ok = rows[-1]["within_bound"]
    if sc.get("ci_check") and len(ex.packets) >= 2:
        rec = ci_cross_check(ex, beta, Mmax)
        write_csv(out / "ci_check.csv", [rec])
        ok = ok and rec["passed"]
    for r in rows:
        print(f"M={r['M']}: gap={r['gap_l1']:.3e} tail bound={r['tail_bound']:.3e}")
    man.stage("verify-series", ok, time.perf_counter() - t0)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_probe_nfm(cfg: dict, out: Path, man: RunManifest, args) -> int:
    t0 = time.perf_counter()
    pc = cfg["probe"]
    beta = float(pc["beta"])
    ex = experiment_from_config(cfg, betas=(beta,), require_generic=False)
    prob = ex.problem(beta)
    fields = ex.data(beta, prob)
    pk = ex.packets
    if pc["cutoff"]:
        fields = [apply_cutoff(f, p.kstar, beta, ex.eps, model=prob.model, band=p.band) for f, p in zip(fields, pk)]
    tree = OrderedTree.from_preorder(pc["tree"])
    j = int(pc.get("packet", 0))
    if not 0 <= j < len(fields):
        raise ConfigError("probe.packet is out of range")
    inputs = [fields[j]] * tree.leaves
    rows, ok = [], True
    for label, dec, allow in (("probe", pc["decoration"], False), ("fm_companion", pc.get("fm_decoration"), True)):
        if not dec:
            continue
        d = Decoration(tree, tuple(dec))
        cls = classify_decoration(tree, d)
        if label == "probe" and cls["fm"] == "FM":
            print("FAIL: probe decoration is frequency matched")
            return EXIT_FAIL
        res = nfm_magnitude_probe(prob, tree, d, inputs, pc["rhos"], float(pc["tau"]), allow_fm=allow,
                                  n0=int(pc["n0"]))
        for rho, mag in zip(res["rho"], res["magnitude"]):
            rows.append({"kind": label, "class": cls["fm"], "rho": rho, "magnitude": mag,
                         "exponent": res["exponent"], "ratio": res["ratio"]})
        print(f"{label} ({cls['fm']}): exponent = {res['exponent']:.4f}, last/first = {res['ratio']:.4f}")
    write_csv(out / "probe.csv", rows)
    man.stage("probe-nfm", ok, time.perf_counter() - t0)
    return EXIT_OK


COMMANDS = {
    "check-genericity": cmd_check_genericity,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "expand-monomials": cmd_expand,
    "verify-series": cmd_verify_series,
    "probe-nfm": cmd_probe_nfm,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavelab", description="Wavepacket superposition experiments.")
    p.add_argument("--version", action="version", version=f"wavelab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML experiment config")
        s.add_argument("--out", help="output directory (overrides the config)")
        s.add_argument("--jobs", type=int, help="parallel solves per beta entry")
        s.add_argument("--seed", type=int, help="reserved; all algorithms are deterministic")
        s.add_argument("--format", choices=("csv", "binary"), default="csv", help="field file format")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "expand-monomials":
            s.add_argument("--m", type=int, help="homogeneity index (leaf count)")
            s.add_argument("--S", type=int, nargs="+", help="degrees present in the nonlinearity")
        if name == "verify-series":
            s.add_argument("--M", type=int, help="largest truncation order")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg["output"] = args.out
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            cfg["jobs"] = args.jobs
        if args.command == "expand-monomials":
            m = args.m if args.m is not None else cfg["expand"]["m"]
            if not 1 <= m <= 8:
                raise ConfigError("m must lie in [1, 8]")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg["output"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_USAGE
    (out / "config.resolved.yaml").write_text(dump_config(cfg), encoding="utf-8")
    man = RunManifest(out / "manifest.json", args.command, cfg, extra={"seed": args.seed, "format": args.format})
    man.write()
    try:
        code = COMMANDS[args.command](cfg, out, man, args)
    except ConfigError as exc:
        man.status = "config-error"
        man.stage(args.command, False, 0.0, error=str(exc))
        man.write()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BlowUpError, RadiusError, RuntimeError, ValueError, ArithmeticError) as exc:
        man.status = "runtime-error"
        man.stage(args.command, False, 0.0, error=f"{type(exc).__name__}: {exc}")
        man.write()
        print(f"runtime failure in {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    man.status = "ok" if code == EXIT_OK else "failed"
    man.write()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
