"""Command line driver.

Usage::

    gaborwf stft --config run.json --out results/
    gaborwf wfs --config run.json --out results/ --method both
    gaborwf frames --config run.json --out results/
    gaborwf op --config run.json --out results/
    gaborwf selftest

A run is a pure function of its JSON config.  Only the grid size and the
thread count may be overridden from the environment (``WFS_GRID_N``,
``WFS_THREADS``).  Exit codes: 0 success, 1 acceptance failure, 2 config
error, 3 numeric-guard error.
"""

import argparse
import json
import os
import sys

import numpy as np

from ._io import dumps, g17
from .exceptions import ConfigError, DomainError, NotSampleableError, NumericGuardError

__all__ = ["main", "load_config", "RunConfig"]

EXIT_OK, EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

ENV_KEYS = {"WFS_GRID_N": ("grid", "n"), "WFS_THREADS": ("threads",)}


class RunConfig:
    """Parsed and validated run configuration.

    Attributes are built lazily from the raw dict so that each command only
    validates the fields it uses; a missing field raises
    :class:`ConfigError` naming it.
    """

    def __init__(self, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object", "<root>")
        self.raw = raw

    def _need(self, key):
        if key not in self.raw:
            raise ConfigError(f"missing config field '{key}'", key)
        return self.raw[key]

    @property
    def threads(self):
        t = self.raw.get("threads", 1)
        if not isinstance(t, int) or isinstance(t, bool) or t < 1:
            raise ConfigError("threads must be a positive integer", "threads")
        return t

    def grid(self):
        from .grid import UniformGrid

        g = self.raw.get("grid", {})
        if not isinstance(g, dict):
            raise ConfigError("grid must be an object", "grid")
        n = g.get("n", 1024)
        L = g.get("half_extent")
        try:
            if L is None:
                return UniformGrid.square(int(n))
            return UniformGrid(int(n), float(L))
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "grid.n" if L is None else "grid")

    def window(self):
        from .windows import GaussWindow

        w = self.raw.get("window", {})
        try:
            return GaussWindow(float(w.get("sigma", 1.0)), float(w.get("center", 0.0)),
                               float(w.get("freq", 0.0)))
        except (DomainError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(str(exc), "window.sigma")

    def weight(self):
        from .weights import WeightFunction

        return WeightFunction.from_dict(self.raw.get("weight", {"kind": "power", "a": 0.5}))

    def partition(self):
        from .wavefront import ConePartition

        p = self.raw.get("partition", {})
        try:
            return ConePartition(int(p.get("nbins", 180)), float(p.get("overlap", 0.5)))
        except (DomainError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(str(exc), "partition")

    def lattice(self, required=False):
        from .frames import Lattice

        lat = self._need("lattice") if required else self.raw.get("lattice", {"a0": 1.0, "b0": 1.0})
        try:
            return Lattice(float(lat["a0"]), float(lat["b0"]))
        except KeyError as exc:
            raise ConfigError(f"lattice misses {exc}", f"lattice.{exc.args[0]}")
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "lattice")

    def threshold(self):
        t = self.raw.get("threshold")
        if t is not None and not (isinstance(t, (int, float)) and t > 0):
            raise ConfigError("threshold must be a positive number or null", "threshold")
        return t

    def input_spec(self):
        from .grid import distribution_from_dict, read_signal_csv

        d = self._need("input")
        if isinstance(d, dict) and d.get("kind") == "file":
            if "path" not in d:
                raise ConfigError("file input needs a path", "input.path")
            try:
                return read_signal_csv(d["path"])
            except OSError as exc:
                raise ConfigError(str(exc), "input.path")
        return distribution_from_dict(d)

    def signal(self):
        """Input sampled on the grid (Dirac masses as a grid spike)."""
        from .grid import SampledSignal, sample

        u = self.input_spec()
        if isinstance(u, SampledSignal):
            return u
        return sample(u, self.grid(), regularize=True)


def _apply_env(raw, environ):
    raw = json.loads(json.dumps(raw))
    for key, path in ENV_KEYS.items():
        if key not in environ:
            continue
        try:
            val = int(environ[key])
        except ValueError:
            raise ConfigError(f"{key} must be an integer", key)
        node = raw
        for p in path[:-1]:
            node = node.setdefault(p, {})
        node[path[-1]] = val
    return raw


def load_config(path, environ=None):
    """Read a JSON config and apply the ``WFS_`` overrides."""
    environ = os.environ if environ is None else environ
    if path is None:
        raw = {}
    else:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", "--config")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", "--config")
    return RunConfig(_apply_env(raw, environ))


def _out(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


# commands -------------------------------------------------------------------------------------


def cmd_stft(cfg, args):
    from .stft import stft, write_heatmap, write_stft_binary, write_stft_csv

    f = cfg.signal()
    hop = cfg.raw.get("stft", {}).get("hop", 1)
    F = stft(f, cfg.window(), hop=int(hop), method="numeric", threads=args.threads or cfg.threads)
    out = _out(args)
    write_stft_binary(F, os.path.join(out, "stft.bin"))
    write_heatmap(F, os.path.join(out, "heatmap.pgm"))
    write_stft_csv(F, os.path.join(out, "log_modulus.csv"), log_modulus=True)
    mod = np.abs(F.values)
    i, j = np.unravel_index(int(np.argmax(mod)), mod.shape)
    # ridge of the maximal modulus in every shift column
    ridge = [[float(x), float(F.freqs[int(np.argmax(mod[k]))])] for k, x in enumerate(F.shifts)]
    summary = {"grid": f.grid.to_dict(), "window": F.window_id, "shape": list(F.values.shape),
               "max_modulus": float(mod[i, j]), "argmax": [float(F.shifts[i]), float(F.freqs[j])],
               "zero": bool(mod.max() == 0), "ridge": ridge}
    _write(os.path.join(out, "stft_summary.json"), dumps(summary))
    return EXIT_OK


def _wfs_source(cfg):
    from .grid import SampledSignal

    u = cfg.input_spec()
    if cfg.raw.get("path", "numeric") == "analytic" and not isinstance(u, SampledSignal):
        return u, {}
    return cfg.signal(), {}


def cmd_wfs(cfg, args):
    from .wavefront import wfs_cone, wfs_lattice, write_estimate_json, write_polar_csv

    method = args.method or "cone"
    u, kw = _wfs_source(cfg)
    phi, w, part, lam = cfg.window(), cfg.weight(), cfg.partition(), cfg.threshold()
    out = _out(args)
    ests = {}
    if method in ("cone", "both"):
        ests["cone"] = wfs_cone(u, phi, w, part, lam, threads=args.threads or cfg.threads, **kw)
    if method in ("lattice", "both"):
        lam_l = ests["cone"].threshold if "cone" in ests and lam is None else lam
        ests["lattice"] = wfs_lattice(u, phi, cfg.lattice(), w, part, lam_l, **kw)
    for name, e in ests.items():
        write_estimate_json(e, os.path.join(out, f"wfs_{name}.json"))
        write_polar_csv(e, os.path.join(out, f"polar_{name}.csv"))
    if method == "both":
        a, b = ests["cone"].as_set(), ests["lattice"].as_set()
        rep = {"symmetric_difference": len(a ^ b), "cone_only": sorted(a - b),
               "lattice_only": sorted(b - a), "threshold": ests["cone"].threshold}
        _write(os.path.join(out, "wfs_compare.json"), dumps(rep))
    return EXIT_OK


def cmd_frames(cfg, args):
    from .frames import (
        GaborSystem,
        Lattice,
        default_test_functions,
        dual_window,
        frame_bounds,
        reconstruction_error,
    )
    from .grid import write_signal_csv

    g = cfg.grid()
    phi = cfg.window()
    lat0 = cfg.lattice(required=True)
    try:
        lat = Lattice.for_grid(lat0.a0, lat0.b0, g, phi.sigma)
    except DomainError as exc:
        raise ConfigError(str(exc), "lattice")
    G = GaborSystem(phi, lat, g)
    fb = frame_bounds(G)
    psi = dual_window(G)
    out = _out(args)
    _write(os.path.join(out, "frame_bounds.json"),
           dumps({"lattice": lat.to_dict(), "grid": g.to_dict(), **fb.to_dict(),
                  "tight_value": 2 * np.pi * phi.norm2() / lat.density}))
    write_signal_csv(psi, os.path.join(out, "dual_window.csv"))
    errs = [reconstruction_error(G, psi, f) for f in default_test_functions(g)]
    _write(os.path.join(out, "reconstruction.json"),
           dumps({"relative_errors": errs, "max": max(errs),
                  "dual_cg_iterations": psi.meta["iterations"]}))
    return EXIT_OK


def cmd_op(cfg, args):
    from .grid import write_signal_csv
    from .operators import (
        _dilated_subset,
        kn_apply,
        localization_apply,
        poly_apply,
        symbol_from_dict,
        conesupp,
    )
    from .wavefront import wfs_cone

    op = cfg._need("operator")
    if not isinstance(op, dict):
        raise ConfigError("operator must be an object", "operator")
    kind = op.get("type", "kn")
    if "symbol" not in op:
        raise ConfigError("operator needs a symbol", "operator.symbol")
    sym = symbol_from_dict(op["symbol"])
    f = cfg.signal()
    threads = args.threads or cfg.threads
    phi, w, part, lam = cfg.window(), cfg.weight(), cfg.partition(), cfg.threshold()
    if kind == "kn":
        v = kn_apply(sym, f, threads=threads)
    elif kind == "poly":
        v = poly_apply(sym, f)
    elif kind == "localization":
        v = localization_apply(sym, phi, phi, f, w=w, tau=float(op.get("tau", 1.0)),
                               threads=threads)
    else:
        raise ConfigError(f"unknown operator type {kind!r}", "operator.type")
    est_u = wfs_cone(f, phi, w, part, lam, threads=threads)
    est_v = wfs_cone(v, phi, w, part, est_u.threshold if lam is None else lam, threads=threads)
    if kind == "kn":
        ref = conesupp(sym, part, grid=f.grid)
        ref_name = "conesupp"
    else:
        ref = set(est_u.singular_bins)
        ref_name = "wf_input"
    ok, off = _dilated_subset(est_v.singular_bins, ref, part)
    out = _out(args)
    write_signal_csv(v, os.path.join(out, "output.csv"))
    _write(os.path.join(out, "containment.json"),
           dumps({"operator": kind, "symbol": sym.to_dict(), "contained": ok,
                  "offending": sorted(off), "wf_output": sorted(est_v.singular_bins),
                  "wf_input": sorted(est_u.singular_bins), ref_name: sorted(ref),
                  "threshold": est_v.threshold}))
    return EXIT_OK


def cmd_selftest(cfg, args):
    from .acceptance import format_line, run_all

    keys = None
    if args.only:
        try:
            keys = [int(k) for k in args.only.split(",")]
        except ValueError:
            raise ConfigError("--only takes comma separated criterion numbers", "--only")
    results = run_all(keys)
    for r in results:
        print(format_line(r), flush=True)
    if args.out:
        rows = [{"criterion": r.criterion, "name": r.name, "passed": r.passed,
                 "detail": r.detail} for r in results]
        _write(os.path.join(_out(args), "selftest.json"), dumps(rows))
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


COMMANDS = {"stft": cmd_stft, "wfs": cmd_wfs, "frames": cmd_frames, "op": cmd_op,
            "selftest": cmd_selftest}


def build_parser():
    p = argparse.ArgumentParser(prog="gaborwf", description="STFT, Gabor frames and wave front sets")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", help="output directory")
    p.add_argument("--method", choices=("cone", "lattice", "both"), help="wfs estimator")
    p.add_argument("--threads", type=int, help="worker threads (overrides the config)")
    p.add_argument("--only", help="selftest: comma separated criteria")
    return p


def main(argv=None, environ=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive", "--threads")
        cfg = load_config(args.config, environ)
        if args.command in ("stft", "wfs", "op") and args.config is None:
            raise ConfigError("this command needs --config", "--config")
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, NotSampleableError) as exc:
        print(f"config error [input]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericGuardError as exc:
        print(f"numeric guard [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
