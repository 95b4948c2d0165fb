"""Batch front end: run check groups from a JSON config and write reports.

Usage::

    treekernels suite bergman-two-ray-a2 --out reports
    treekernels kernel --config my.json --depth 40 --seed 7

Every subcommand prints a JSON summary (or writes it under ``--out``) and
exits 0 exactly when every hard check in that summary passed.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import commutant as cm
from . import kernels as kl
from . import shifts as sh
from . import tree as tr
from . import vonneumann as vn

FAMILIES = ("bergman", "two_parameter")

DEFAULT_TOLERANCES = {
    "psd": 1e-10,
    "reproducing": 1e-8,
    "model_kernel": 1e-9,
    "eigenvector": 1e-6,
    "abelian": 1e-9,
    "commutator_witness": 0.1,
    "vn": 1e-3,
    "recovery": 1e-8,
    "wot": 1e-3,
    "contraction": 1e-12,
}

DEFAULT_GRID = {
    "boundary": 1024,
    "sweep_points": 100,
    "sweep_max": 0.99,
    "gram_points": 50,
    "vn_samples": 100,
    "matrix_vn_samples": 20,
    "recovery_samples": 5,
    "wot_n_max": 200,
    "commutant_depth": 20,
}

NAMED_SUITES = {
    "bergman-two-ray-a2": {
        "name": "bergman-two-ray-a2",
        "tree": {"kind": "two_ray", "depth": 60},
        "family": {"name": "bergman", "a": 2},
        "depth": 60,
    },
    "bergman-path-a2": {
        "name": "bergman-path-a2",
        "tree": {"kind": "path", "depth": 60},
        "family": {"name": "bergman", "a": 2},
        "depth": 60,
    },
    "tridiagonal-s0.707-t0.5": {
        "name": "tridiagonal-s0.707-t0.5",
        "tree": {"kind": "two_ray", "depth": 60},
        "family": {"name": "two_parameter", "s": 1 / math.sqrt(2), "t": 0.5},
        "depth": 60,
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class SuiteConfig:
    name: str
    tree: dict
    family: dict
    depth: int
    seed: int = 0
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out: str | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "SuiteConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        allowed = {"name", "tree", "family", "depth", "seed", "grid", "tolerances", "out"}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key in ("tree", "family", "depth"):
            if key not in doc:
                raise ConfigError(f"config requires {key!r}")
        grid = dict(DEFAULT_GRID)
        grid.update(doc.get("grid", {}))
        tols = dict(DEFAULT_TOLERANCES)
        tols.update(doc.get("tolerances", {}))
        cfg = cls(str(doc.get("name", "custom")), dict(doc["tree"]), dict(doc["family"]),
                  doc["depth"], doc.get("seed", 0), grid, tols, doc.get("out"))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not isinstance(self.depth, int) or isinstance(self.depth, bool) or self.depth < 8:
            raise ConfigError(f"depth must be an integer >= 8, got {self.depth!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or \
                not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerances: {sorted(unknown)}")
        for k, v in self.tolerances.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"tolerance {k!r} must be positive, got {v!r}")
        unknown = set(self.grid) - set(DEFAULT_GRID)
        if unknown:
            raise ConfigError(f"unknown grid settings: {sorted(unknown)}")
        if self.grid["boundary"] < 64:
            raise ConfigError("boundary grid needs at least 64 points")
        if not 0 < self.grid["sweep_max"] < 1:
            raise ConfigError("sweep_max must lie in (0, 1)")
        if self.grid["commutant_depth"] < 8:
            raise ConfigError("commutant_depth must be >= 8")
        name = self.family.get("name")
        if name not in FAMILIES:
            raise ConfigError(f"family name must be one of {FAMILIES}, got {name!r}")
        if name == "bergman":
            a = self.family.get("a")
            if not isinstance(a, int) or isinstance(a, bool) or a < 1:
                raise ConfigError(f"bergman family needs an integer a >= 1, got {a!r}")
        else:
            s, t = self.family.get("s"), self.family.get("t")
            if not all(isinstance(x, (int, float)) for x in (s, t)):
                raise ConfigError("two_parameter family needs numeric s and t")
            if not (0 < s <= 1 / math.sqrt(2) + 1e-15 and 0 < t < 1):
                raise ConfigError("two_parameter needs 0 < s <= 1/sqrt(2), 0 < t < 1; "
                                  f"got {s}, {t}")
            if self.tree.get("kind") != "two_ray":
                raise ConfigError("two_parameter family lives on the two_ray tree")
        spec = dict(self.tree)
        spec["depth"] = self.depth
        if spec.get("kind") == "generations":
            raise ConfigError("generations trees are set through the library API; "
                              "the CLI accepts path and two_ray")
        try:
            tr.parse_tree_spec(spec)
        except tr.TreeSpecError as exc:
            raise ConfigError(f"tree: {exc}") from exc

    def to_dict(self) -> dict:
        """Everything that determines the results (the output path does not)."""
        d = asdict(self)
        d.pop("out")
        return d


def load_config(args) -> SuiteConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    else:
        name = getattr(args, "suite", None) or "bergman-two-ray-a2"
        if name not in NAMED_SUITES:
            raise ConfigError(f"unknown suite {name!r}; choose from {sorted(NAMED_SUITES)}")
        doc = json.loads(json.dumps(NAMED_SUITES[name]))
    if args.depth is not None:
        doc["depth"] = args.depth
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out"] = args.out
    return SuiteConfig.from_dict(doc)


def build_kernel(cfg: SuiteConfig, depth: int | None = None) -> kl.KernelFamily:
    N = cfg.depth if depth is None else depth
    fam = cfg.family
    if fam["name"] == "bergman":
        tree = tr.build_from_spec({"kind": cfg.tree["kind"], "depth": N})
        return kl.BergmanTreeKernel(tree, fam["a"])
    return kl.TridiagonalKernel(fam["s"], fam["t"], depth=N)


def _num(x):
    if isinstance(x, (complex, np.complexfloating)):
        return {"real": float(x.real), "imag": float(x.imag)}
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_num(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _num(v) for k, v in x.items()}
    return x


class CheckRecorder:
    """Collects check results; a raised error becomes a failed check."""

    def __init__(self):
        self.checks: list[dict] = []

    def record(self, name: str, passed: bool, value, tolerance=None, hard: bool = True,
               params: dict | None = None, **extra) -> None:
        entry = {"check": name, "hard": hard, "passed": bool(passed), "value": _num(value),
                 "tolerance": tolerance, "params": _num(params or {})}
        entry.update({k: _num(v) for k, v in extra.items()})
        self.checks.append(entry)

    def run(self, name: str, params: dict, fn: Callable[[], None]) -> None:
        try:
            fn()
        except Exception as exc:  # surfaced as a failed hard check
            self.record(name, False, None, params=params,
                        error=f"{type(exc).__name__}: {exc}")

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks if c["hard"])


def check_tree(cfg: SuiteConfig, rec: CheckRecorder, files: dict) -> None:
    def body():
        spec = {"kind": cfg.tree["kind"], "depth": cfg.depth}
        tree = tr.build_from_spec(spec)
        canon = tr.spec_of(tree)
        again = tr.spec_of(tr.build_from_spec(canon))
        same = again == canon and tr.build_from_spec(canon).generation_sizes() == \
            tree.generation_sizes()
        rec.record("tree.spec_roundtrip", same, canon.to_dict(), params=spec)
        rec.record("tree.summary", True, {
            "n_vertices": tree.n_vertices,
            "generation_sizes": tree.generation_sizes(),
            "branching_index": tr.branching_index(tree),
        }, hard=False, params=spec)
    rec.run("tree", {"tree": cfg.tree, "depth": cfg.depth}, body)


def check_shift(cfg: SuiteConfig, rec: CheckRecorder, files: dict) -> None:
    params = {"family": cfg.family, "depth": cfg.depth}

    def body():
        K = build_kernel(cfg)
        S = K.shift
        tol = cfg.tolerances["contraction"]
        cb = sh.contraction_bound(S)
        rec.record("shift.contraction_bound", cb <= 1 + tol, cb, tol, hard=False, params=params)
        dual = sh.cauchy_dual(S)
        d = sh.cauchy_identity_defect(S, dual)
        rec.record("shift.cauchy_identity", d <= 1e-10, d, 1e-10, params=params)
        rec.record("shift.dual_spectral_radius", True, sh.spectral_radius(dual.matrix),
                   hard=False, params=params)
        rec.record("shift.hyponormality_defect", True, sh.hyponormality_defect(S),
                   hard=False, params=params)
        rec.record("shift.concavity_defect", True, sh.concavity_defect(S),
                   hard=False, params=params)
        files["shift_coo.txt"] = S.to_coo_text()
    rec.run("shift", params, body)


def _random_vector(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def _eigen_radius(K, start: float = 0.5) -> float:
    """Largest ``0.5 * 0.8^j`` whose truncation tail fits the eigenvector budget."""
    r = start
    for _ in range(40):
        try:
            for g in np.eye(K.dim):
                kl.eigenvector_defect(K, r, g)
            return r
        except kl.TruncationBudgetError:
            r *= 0.8
    return 0.0


def check_kernel(cfg: SuiteConfig, rec: CheckRecorder, files: dict) -> None:
    params = {"family": cfg.family, "depth": cfg.depth, "seed": cfg.seed}

    def body():
        K = build_kernel(cfg)
        rng = np.random.default_rng(cfg.seed)
        n = cfg.grid["gram_points"]
        pts = np.sqrt(rng.uniform(0, 0.9 ** 2, n)) * np.exp(2j * np.pi * rng.uniform(size=n))
        vecs = [_random_vector(rng, K.dim) for _ in range(n)]
        tol = cfg.tolerances["psd"]
        m = kl.gram_psd_check(K, pts, vecs)
        rec.record("kernel.gram_psd", m >= -tol, m, tol, params=params)

        tol = cfg.tolerances["reproducing"]
        worst = 0.0
        ws = 0.7 * np.sqrt(rng.uniform(size=10)) * np.exp(2j * np.pi * rng.uniform(size=10))
        for deg in range(0, 21, 4):
            for i in range(K.dim):
                g = np.eye(K.dim)[i]
                f = kl.FunctionVector.monomial(K, deg, g)
                for w in ws:
                    worst = max(worst, kl.reproducing_check(K, f, w, g).residual)
        rec.record("kernel.reproducing", worst < tol, worst, tol, params=params)

        tol = cfg.tolerances["model_kernel"]
        worst = 0.0
        for z, w in [(0.3, 0.2j), (-0.4 + 0.1j, 0.25), (0.1j, -0.3)]:
            worst = max(worst, float(np.abs(K.model.kernel(z, w) - K.eval(z, w)).max()))
        rec.record("kernel.model_vs_closed_form", worst <= tol, worst, tol, params=params)

        radii = np.linspace(0, cfg.grid["sweep_max"], cfg.grid["sweep_points"])
        rows = kl.condition_sweep(K, radii)
        files["condition_sweep.csv"] = kl.sweep_to_csv(rows)
        excess = max(r.ratio - r.bound for r in rows)
        rec.record("kernel.condition_ratio_bound", excess <= 1e-9, excess, 1e-9, params=params)

        tol = cfg.tolerances["eigenvector"]
        radius = _eigen_radius(K)
        worst, dims = 0.0, set()
        for w in radius * np.array([0.0, 0.6, 1j, -0.7 + 0.4j]):
            for g in np.eye(K.dim):
                rep = kl.eigenvector_defect(K, w, g)
                worst = max(worst, rep.residual)
                dims.add(rep.null_dim)
        eparams = dict(params, radius=radius)
        rec.record("kernel.eigenvector_residual", worst < tol, worst, tol, params=eparams)
        rec.record("kernel.eigenspace_dimension", dims == {K.dim}, sorted(dims),
                   params=eparams, expected=K.dim)
    rec.run("kernel", params, body)


def check_commutant(cfg: SuiteConfig, rec: CheckRecorder, files: dict) -> None:
    Nc = min(cfg.grid["commutant_depth"], cfg.depth)
    params = {"family": cfg.family, "depth": Nc}

    def body():
        K = build_kernel(cfg, Nc)
        rep = cm.abelian_and_irreducibility_test(K.shift, tol=cfg.tolerances["abelian"])
        files["commutant.json"] = rep.to_json()
        if K.dim == 1:
            rec.record("commutant.abelian", rep.abelian, rep.max_commutator,
                       cfg.tolerances["abelian"], params=params)
        else:
            tol = cfg.tolerances["commutator_witness"]
            val = rep.witness["commutator_norm"] if rep.witness else 0.0
            rec.record("commutant.nonabelian_witness", val > tol, val, tol, params=params)
            d = max(rep.witness["C1_shift_defect"], rep.witness["C2_shift_defect"]) \
                if rep.witness else math.inf
            rec.record("commutant.witness_commutes_with_shift", d <= 1e-9, d, 1e-9,
                       params=params)
        rec.record("commutant.dimension", True, rep.dim, hard=False, params=params,
                   star_commutant_dim=rep.star_commutant_dim)
    rec.run("commutant", params, body)


def check_vn(cfg: SuiteConfig, rec: CheckRecorder, files: dict) -> None:
    params = {"family": cfg.family, "depth": cfg.depth, "seed": cfg.seed,
              "grid": cfg.grid["boundary"]}

    def body():
        K = build_kernel(cfg)
        S = K.shift.dense()
        cb = sh.contraction_bound(K.shift)
        if cb > 1 + cfg.tolerances["contraction"]:
            rec.record("vn.skipped_not_contraction", True, cb, hard=False, params=params)
            return
        rng = np.random.default_rng(cfg.seed)
        tol = cfg.tolerances["vn"]
        grid = cfg.grid["boundary"]
        samples = [vn.random_polynomial(rng, int(rng.integers(0, 9)))
                   for _ in range(cfg.grid["vn_samples"])]
        defects = [vn.vn_defect(S, p, grid) for p in samples]
        rec.record("vn.scalar", max(defects) <= tol, max(defects), tol, params=params)
        rec.record("vn.empirical_constant", True, vn.empirical_vn_constant(S, samples),
                   hard=False, params=params)
        mdef = []
        for _ in range(cfg.grid["matrix_vn_samples"]):
            deg = int(rng.integers(0, 9))
            P = [[vn.random_polynomial(rng, deg).coeffs for _ in range(2)] for _ in range(2)]
            mdef.append(vn.matrix_vn_defect(S, P, grid).defect)
        rec.record("vn.matrix_2x2", max(mdef) <= tol, max(mdef), tol, params=params)
        files["vn_probe.json"] = vn.probe_report("vn_defect", params, defects, grid, cfg.seed)
    rec.run("vn", params, body)


def check_reflexivity(cfg: SuiteConfig, rec: CheckRecorder, files: dict) -> None:
    params = {"family": cfg.family, "depth": cfg.depth, "seed": cfg.seed}

    def body():
        K = build_kernel(cfg)
        S = K.shift.dense()
        N = K.shift.N
        rng = np.random.default_rng(cfg.seed)
        tol = cfg.tolerances["recovery"]
        worst, slack = 0.0, math.inf
        for _ in range(cfg.grid["recovery_samples"]):
            p = vn.random_polynomial(rng, int(rng.integers(0, N // 2 + 1)))
            r = vn.eigenline_multiplier_recovery(vn.polynomial_of_matrix(p.coeffs, S), K)
            if not r.in_class:
                worst = math.inf
                break
            c = np.zeros(len(r.coefficients), dtype=complex)
            c[: len(p.coeffs)] = p.coeffs
            worst = max(worst, float(np.abs(r.coefficients - c).max()))
            slack = min(slack, r.sup_bound_slack)
        rec.record("reflexivity.polynomial_recovery", worst <= tol, worst, tol, params=params)
        rec.record("reflexivity.sup_bound_slack", slack >= -1e-9, slack, 1e-9, params=params)

        n_max = cfg.grid["wot_n_max"]
        coeffs = vn.geometric_symbol(0.5, 2 * n_max)
        approx = vn.fejer_approximants(coeffs, n_max, sup=2.0)
        sups = approx.sup_norms(cfg.grid["boundary"])
        over = float(sups.max() - 2.0)
        rec.record("reflexivity.fejer_bound", over <= 1e-9, over, 1e-9, params=params)
        w = vn.wot_convergence_probe(S, coeffs, n_max=n_max, seed=cfg.seed, sup=2.0)
        tol = cfg.tolerances["wot"]
        rec.record("reflexivity.wot_residual", w.residuals[-1] < tol, w.residuals[-1], tol,
                   params=params)
        rec.record("reflexivity.uniform_bound", w.bound_ok, float(w.sigma_norms.max()),
                   w.phi_sup, params=params)
        files["wot_probe.json"] = vn.probe_report("wot_convergence", params, w.residuals,
                                                  cfg.grid["boundary"], cfg.seed)
    rec.run("reflexivity", params, body)


GROUPS = {
    "tree": [check_tree],
    "shift": [check_shift],
    "kernel": [check_kernel],
    "commutant": [check_commutant],
    "vn": [check_vn],
    "reflexivity": [check_reflexivity],
    "suite": [check_tree, check_shift, check_kernel, check_commutant, check_vn,
              check_reflexivity],
}


def run_suite(cfg: SuiteConfig, group: str = "suite") -> tuple[int, dict, dict]:
    """Run the checks of ``group``; return (exit status, summary, extra files)."""
    rec = CheckRecorder()
    files: dict[str, str] = {}
    for fn in GROUPS[group]:
        fn(cfg, rec, files)
    summary = {"suite": cfg.name, "group": group, "seed": cfg.seed, "config": cfg.to_dict(),
               "checks": rec.checks, "passed": rec.ok}
    return (0 if rec.ok else 1), summary, files


def emit_condition_sweep(cfg: SuiteConfig) -> str:
    """CSV of the condition-ratio sweep (columns ``|w|,mu_min,mu_max,ratio,bound``)."""
    K = build_kernel(cfg)
    radii = np.linspace(0, cfg.grid["sweep_max"], cfg.grid["sweep_points"])
    return kl.sweep_to_csv(kl.condition_sweep(K, radii))


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_reports(out: str, prefix: str, summary: dict, files: dict) -> list[str]:
    """Write all reports into ``out`` at once: staged in a temp dir, then moved."""
    os.makedirs(out, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".staging-", dir=out)
    written = []
    try:
        docs = {f"{prefix}_summary.json": dumps(summary)}
        docs.update({f"{prefix}_{k}": v for k, v in files.items()})
        for name, text in sorted(docs.items()):
            with open(os.path.join(stage, name), "w", newline="") as fh:
                fh.write(text)
        for name in sorted(docs):
            dest = os.path.join(out, name)
            os.replace(os.path.join(stage, name), dest)
            written.append(dest)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return written


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treekernels",
                                     description="Numerical checks for tree-shift kernels.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in GROUPS:
        p = sub.add_parser(name, help=f"run the {name} checks")
        if name == "suite":
            p.add_argument("suite", nargs="?", choices=sorted(NAMED_SUITES),
                           help="named suite (ignored when --config is given)")
        else:
            p.add_argument("--suite", choices=sorted(NAMED_SUITES),
                           help="take parameters from a named suite")
        p.add_argument("--config", help="JSON config document")
        p.add_argument("--out", help="directory for report files (default: stdout)")
        p.add_argument("--seed", type=int, help="seed, unsigned 64-bit")
        p.add_argument("--depth", type=int, help="truncation depth N (>= 8)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    status, summary, files = run_suite(cfg, args.command)
    if cfg.out:
        prefix = cfg.name if args.command == "suite" else f"{cfg.name}_{args.command}"
        for path in write_reports(cfg.out, prefix, summary, files):
            print(path)
    else:
        sys.stdout.write(dumps(summary))
    for c in summary["checks"]:
        if c["hard"] and not c["passed"]:
            print(f"FAILED {c['check']} value={c['value']} params={c['params']}"
                  + (f" error={c['error']}" if "error" in c else ""), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
