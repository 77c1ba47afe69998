"""Command-line front end: ``semispec <command> --config PATH``.

Exit codes: 0 pass, 1 verification failure, 2 invalid input, 3 numerical non-convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import bargmann as bg
from . import resolvent as rv
from . import verify as vf
from .config import ExperimentConfig, load_config
from .errors import ConfigError, ConvergenceError, EllipticityError, RegionError, SymbolError
from .quantize import lattice_prefix, oracle_match
from .symbols import QuadraticSymbol, quadratic_part, require_elliptic

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_NONCONV = 0, 1, 2, 3


class Run:
    """Resolved config plus output plumbing shared by the commands."""

    def __init__(self, cfg: ExperimentConfig, out: Path, threads):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.hash = cfg.digest()

    @property
    def provenance(self) -> dict:
        return {"tool": "semispec", "version": __version__, "config_hash": self.hash, "seed": self.cfg.seed}

    def preamble(self) -> list:
        return [f"semispec {__version__} config_hash={self.hash} seed={self.cfg.seed}"]

    def write_json(self, name: str, doc: dict) -> Path:
        path = self.out / name
        body = dict(self.provenance)
        body.update(doc)
        path.write_text(json.dumps(_plain(body), sort_keys=True, indent=2) + "\n", encoding="utf-8")
        return path

    def write_csv(self, name: str, text: str) -> Path:
        path = self.out / name
        head = "".join(f"# {line}\n" for line in self.preamble())
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(head + text)
        return path


def _plain(obj):
    """JSON-safe copy: numpy scalars unwrapped, complex as [re, im], non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(obj.real), _plain(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def _symbol(cfg: ExperimentConfig):
    """Configured symbol and its quadratic part, which must be elliptic."""
    p = cfg.load_symbol()
    q = quadratic_part(p)[0]
    require_elliptic(q)
    return p, q


def _need_h(cfg: ExperimentConfig) -> float:
    if cfg.h is not None:
        return cfg.h
    if cfg.h_list:
        return cfg.h_list[0]
    raise ConfigError("this command needs h (or a non-empty h_list)")


# ----------------------------------------------------------------------------
# commands


def cmd_spectrum(run: Run) -> int:
    cfg = run.cfg
    p, q = _symbol(cfg)
    h = _need_h(cfg)
    m = oracle_match(p, h, cfg.N, cfg.count, cfg.eig_tol)
    radius = float(np.max(np.abs(m.lattice)))
    lat = lattice_prefix(q, h, cfg.count)
    rows = [(v, k) for v, k in lat.entries if abs(v) <= radius * (1 + 1e-12)]
    run.write_csv("lattice.csv", "re,im,multiplicity\n"
                  + "".join(f"{v.real!r},{v.imag!r},{k}\n" for v, k in rows))
    run.write_csv("numerical.csv", "k,re,im,converged\n"
                  + "".join(f"{k},{float(z.real)!r},{float(z.imag)!r},{int(c)}\n"
                            for k, (z, c) in enumerate(zip(m.numerical, m.converged))))
    exact = quadratic_part(p)[1].is_zero
    passed = m.passed(cfg.eig_tol)
    run.write_json("match.json", {"command": "spectrum", "h": h, "N": cfg.N, "rtol": cfg.eig_tol,
                                  "exact_oracle": exact, "pairs": m.records(),
                                  "max_rel_error": m.max_rel_error, "all_converged": bool(m.converged.all()),
                                  "passed": passed})
    print(f"spectrum: max rel error {m.max_rel_error:.3e} over {cfg.count} eigenvalues")
    if not m.converged.all():
        return EXIT_NONCONV
    return EXIT_OK if passed or not exact else EXIT_FAIL


def cmd_pseudospec(run: Run) -> int:
    cfg = run.cfg
    p, _ = _symbol(cfg)
    if cfg.grid is None:
        raise ConfigError("pseudospec needs a grid")
    h = _need_h(cfg)
    res = rv.pseudospectrum_sweep(p, h, cfg.grid_spec(), cfg.N, cfg.doubling_tol, run.threads)
    run.write_csv("pseudospec.csv", res.to_csv())
    frac = float(res.converged.mean())
    print(f"pseudospec: {res.values.size} points, {frac:.1%} converged at N={res.N}")
    return EXIT_OK if res.converged.any() else EXIT_NONCONV


def _z_path(cfg: ExperimentConfig, q: QuadraticSymbol):
    spec = cfg.z_path
    if spec == "admissible":
        def path(h):
            reg = rv.admissible_region(q, h, cfg.gamma, cfg.C_prime, cfg.allow_preasymptotic)
            return rv.snap(reg, cfg.angle)
        return path
    if spec == "sqrt":
        spec = {"power": 0.5}
    if isinstance(spec, dict) and "power" in spec:
        delta, scale = float(spec["power"]), float(spec.get("scale", 1.0))
        ang = float(spec.get("angle", cfg.angle))
        return lambda h: scale * h ** delta * complex(math.cos(ang), math.sin(ang))
    raise ConfigError(f"unknown z_path {cfg.z_path!r}")


def cmd_scaling(run: Run) -> int:
    cfg = run.cfg
    p, q = _symbol(cfg)
    if not cfg.h_list:
        raise ConfigError("scaling needs a non-empty h_list")
    try:
        res = rv.scaling_study(p, _z_path(cfg, q), cfg.h_list, cfg.gamma, cfg.N, cfg.N_max, cfg.doubling_tol,
                               cfg.windows, cfg.slope_tol, run.threads)
    except ValueError as exc:
        if isinstance(exc, RegionError):
            raise
        raise ConfigError(str(exc)) from exc
    doc = res.to_dict()
    doc.update({"command": "scaling", "z_path": cfg.z_path, "expect": cfg.expect})
    ok = res.verdict == cfg.expect if cfg.expect else res.verdict != "inconclusive"
    doc["passed"] = ok
    run.write_json("scaling.json", doc)
    print(f"scaling: global slope {res.global_slope:.3f}, windows "
          f"{[round(s, 3) for s in res.window_slopes]}, verdict {res.verdict}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_admissible(run: Run) -> int:
    cfg = run.cfg
    _, q = _symbol(cfg)
    hs = list(cfg.h_list) or [_need_h(cfg)]
    recs, ok = [], True
    for h in hs:
        reg = rv.admissible_region(q, h, cfg.gamma, cfg.C_prime, cfg.allow_preasymptotic)
        exact = rv.excluded_fraction(reg, seed=cfg.seed)
        mc = rv.excluded_fraction(reg, "monte_carlo", seed=cfg.seed)
        try:
            z = rv.snap(reg, cfg.angle)
        except RegionError:
            z = None
        agree = abs(exact.fraction - mc.fraction) <= 3 * mc.stderr if exact.method == "analytic" else True
        bound = exact.fraction <= 2 / reg.f_h
        ok = ok and agree and bound
        recs.append({"h": h, "f_h": reg.f_h, "C_gamma": reg.C_gamma, "outer_radius": reg.outer_radius,
                     "threshold": reg.threshold, "centers": list(reg.centers),
                     "fraction": exact.fraction, "method": exact.method, "fraction_mc": mc.fraction,
                     "mc_stderr": mc.stderr, "fraction_bound": 2 / reg.f_h, "within_bound": bound,
                     "mc_agrees": agree, "snapped_z": z})
    fr = [r["fraction"] for r in recs]
    f_inc = all(a["f_h"] < b["f_h"] for a, b in zip(recs, recs[1:]))
    mono = all(a > b for a, b in zip(fr, fr[1:])) if f_inc else True
    ok = ok and mono
    run.write_json("admissible.json", {"command": "admissible", "gamma": cfg.gamma, "C_prime": cfg.C_prime,
                                       "regions": recs, "fraction_decreasing": mono, "passed": ok})
    print("admissible: " + ", ".join(f"h={r['h']:.0e} fraction={r['fraction']:.4f}" for r in recs))
    return EXIT_OK if ok else EXIT_FAIL


def _suite_exit(run: Run, name: str, report: dict) -> int:
    run.write_json(name, report)
    for s in report["suites"]:
        flag = "PASS" if s["passed"] else "FAIL"
        print(f"{flag} {s['suite']}" + (f" ({s['error']})" if "error" in s else ""))
        for c in s["checks"]:
            print(f"  {'ok  ' if c['passed'] else 'FAIL'} {c['name']}")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_certify(run: Run) -> int:
    rep = vf.run_suites(run.cfg, ["bounds_certify"], run.threads)
    rep["command"] = "certify"
    return _suite_exit(run, "certify.json", rep)


def cmd_bargmann_verify(run: Run) -> int:
    cfg = run.cfg
    p = cfg.load_symbol() if cfg.symbol is not None else None
    if p is not None:
        require_elliptic(quadratic_part(p)[0])
    rep = vf.run_suites(cfg, ["bargmann_side"])
    try:
        checks = vf.bargmann_studies(cfg, p)
        rep["suites"].append({"suite": "bargmann_studies", "passed": all(c["passed"] for c in checks),
                              "checks": checks})
    except ConvergenceError:
        raise
    except Exception as exc:
        rep["suites"].append({"suite": "bargmann_studies", "passed": False, "checks": [],
                              "error": f"{type(exc).__name__}: {exc}"})
    rep["passed"] = all(s["passed"] for s in rep["suites"])
    rep["command"] = "bargmann-verify"
    rep["fbi_constant"] = bg.fbi_constant()
    return _suite_exit(run, "bargmann.json", rep)


def cmd_verify(run: Run) -> int:
    rep = vf.run_suites(run.cfg, threads=run.threads)
    rep["command"] = "verify"
    return _suite_exit(run, "verify.json", rep)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "pseudospec": cmd_pseudospec,
    "scaling": cmd_scaling,
    "admissible": cmd_admissible,
    "certify": cmd_certify,
    "bargmann-verify": cmd_bargmann_verify,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semispec", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"semispec {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="flat key = <json> configuration file")
        sp.add_argument("--out", type=Path, help="output directory (overrides the config)")
        sp.add_argument("--seed", type=int, help="random seed (overrides the config)")
        sp.add_argument("--threads", type=int, help="worker count (default: SEMISPEC_THREADS or 1)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(seed=args.seed).validate()
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive")
        out = args.out or Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](Run(cfg, out, args.threads))
    except OSError as exc:
        print(f"semispec: I/O error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, SymbolError, EllipticityError, RegionError) as exc:
        print(f"semispec: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"semispec: no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except ValueError as exc:
        print(f"semispec: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
