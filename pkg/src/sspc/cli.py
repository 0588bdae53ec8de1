"""Command-line front end: ``branches``, ``solve``, ``prepare`` and ``verify``.

A run is described by one JSON document (``--config``); flags override its
fields. Outputs are deterministic for a fixed configuration and seed, and
timing information goes to a separate ``*.timing.json`` sidecar.
"""

import argparse
import contextlib
import csv
import dataclasses
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy.linalg

from . import encodings as enc
from .effham import EffectiveEvaluator, eigenbranches, match_branches
from .errors import SSPCError, ValidationError
from .models import (
    HubbardSpec,
    build_hubbard,
    engineered_instance,
    model_space_from_h0,
    random_instance,
    read_dense,
    read_instance,
    toy_instance,
    write_dense,
)
from .numerics import opnorm
from .oracle import OracleConfig, eps_approx
from .partition import ModelSpace, decompose
from .polyinv import alpha_lambda, build_inverse_poly, select_parameters
from .solver import BisectionConfig, Oracle, cluster_representative, detect_degenerate, solve_window
from .stateprep import gram, lift, lowdin_orthonormalize, subspace_fidelities

BRANCHES_SCHEMA = "sspc-branches-v1"
MODES = {"exact": "exact", "poly": "poly", "noisy-bounded": "noisy_bounded",
         "noisy-sampled": "noisy_sampled"}

EXIT_OK, EXIT_FAIL, EXIT_PARTIAL = 0, 1, 2


@dataclasses.dataclass
class RunConfig:
    instance: dict = dataclasses.field(default_factory=lambda: {"kind": "toy"})
    model_space: dict = dataclasses.field(default_factory=dict)
    mode: str = "exact"
    eps_est: float = 1e-3
    eps_root: float = 1e-10
    eps_qsvt: float = 1e-4
    theta: float = 0.05
    g: float = None
    window: tuple = (-2.0, 3.0)
    grid: int = 101
    seed: int = 0
    out: str = "sspc-out"
    spectrum: str = None
    verify: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {sorted(MODES)}")
        a, b = (float(x) for x in self.window)
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ValidationError("window must be finite with a < b")
        self.window = (a, b)
        for name in ("eps_root", "eps_qsvt", "theta"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.mode.startswith("noisy") and not self.eps_est > 0:
            raise ValidationError("noisy modes need eps_est > 0")
        if int(self.grid) < 2:
            raise ValidationError("grid needs at least two points")


def load_config(path=None, overrides=None):
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path}: {exc.msg} at line {exc.lineno}") from None
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config fields: {sorted(unknown)}")
    return RunConfig(**data)


# -- pipeline assembly -------------------------------------------------------

def build_problem(cfg: RunConfig):
    """``(H, ModelSpace)`` as dense arrays from the instance and model-space rules."""
    spec = dict(cfg.instance)
    kind = spec.pop("kind", "toy")
    ms = None
    if kind == "toy":
        inst, ms = toy_instance()
    elif kind == "hubbard":
        manifolds = spec.pop("manifolds", 1)
        inst = build_hubbard(HubbardSpec(**spec))
        ms = model_space_from_h0(inst, manifolds)
    elif kind == "engineered":
        inst, ms, _ = engineered_instance(spec["n"], spec["d"], spec.get("m", 1), spec.get("gap", 0.5),
                                          spec.get("seed", cfg.seed))
    elif kind == "random":
        inst, ms = random_instance(spec["n"], spec["d"], spec.get("seed", cfg.seed))
    elif kind == "files":
        inst = read_instance(spec["dir"])
        if "basis" in spec:
            ms = ModelSpace.from_columns(read_dense(spec["basis"]))
    else:
        raise ValidationError(f"unknown instance kind {kind!r}")
    rule = cfg.model_space
    if "indices" in rule:
        ms = ModelSpace.from_indices(inst.dim, rule["indices"])
    elif "manifolds" in rule:
        ms = model_space_from_h0(inst, rule["manifolds"])
    if ms is None:
        raise ValidationError("no model space: give model_space.indices or model_space.manifolds")
    return np.asarray(inst.h, dtype=complex), ms


def build_evaluator(cfg: RunConfig, h, ms):
    blocks = decompose(h, ms)
    alpha = opnorm(h)
    if cfg.mode != "poly":
        return EffectiveEvaluator(blocks, alpha=alpha)
    a, b = cfg.window
    lam_near0 = 0.0 if a <= 0 <= b else min(abs(a), abs(b))
    al_min = alpha_lambda(alpha, lam_near0)
    al_max = alpha_lambda(alpha, max(abs(a), abs(b)))
    g = cfg.g if cfg.g is not None else 0.05 * alpha
    delta, eps_poly = select_parameters(g, cfg.eps_qsvt, al_min, al_max)
    return EffectiveEvaluator(blocks, mode=build_inverse_poly(delta, eps_poly), alpha=alpha)


def oracle_config(cfg: RunConfig):
    mode = MODES[cfg.mode]
    noisy = mode.startswith("noisy")
    return OracleConfig(mode=mode, eps_est=cfg.eps_est if noisy else 0.0, theta=cfg.theta,
                        rng_seed=cfg.seed)


def bisection_config(cfg: RunConfig, ev, ocfg):
    """Noise sets the sign slack ``eps_approx``; the polynomial error enters as ``eps_bias``."""
    a, b = cfg.window
    lams = (a, b, 0.0) if a <= 0 <= b else (a, b)
    bias = eps_approx(ev, dataclasses.replace(ocfg, mode="poly", eps_est=0.0), lams) if not ev.is_exact else 0.0
    if ocfg.eps_est > 0:
        eps = max(cfg.eps_root, ocfg.eps_est)
        return BisectionConfig(eps_root=eps, eps_approx=ocfg.eps_est, eps_bias=bias)
    return BisectionConfig(eps_root=cfg.eps_root, eps_approx=cfg.eps_root, eps_bias=bias)


def _setup(cfg):
    h, ms = build_problem(cfg)
    ev = build_evaluator(cfg, h, ms)
    ocfg = oracle_config(cfg)
    return h, ms, ev, ocfg, bisection_config(cfg, ev, ocfg)


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _sidecar(out, name, started):
    _write(Path(out) / f"{name}.timing.json",
           json.dumps({"seconds": round(time.perf_counter() - started, 6)}) + "\n")


def _json(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# -- subcommands -------------------------------------------------------------

def cmd_branches(cfg: RunConfig, stdout=None):
    """Branch-tracked ``xi``, ``mu`` and slopes on a uniform grid, pole rows flagged."""
    started = time.perf_counter()
    stdout = sys.stdout if stdout is None else stdout
    _, _, ev, _, _ = _setup(cfg)
    pinv = dataclasses.replace(ev, on_pole="pinv")
    d = ev.d
    header = (["lambda"] + [f"xi_{i + 1}" for i in range(d)] + [f"mu_{i + 1}" for i in range(d)]
              + [f"slope_{i + 1}" for i in range(d)] + ["in_pole_window"])
    buf = io.StringIO()
    buf.write(f"# {BRANCHES_SCHEMA}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    prev = None
    for lam in np.linspace(cfg.window[0], cfg.window[1], int(cfg.grid)):
        flag = ev.in_window(lam)
        s = eigenbranches(pinv, lam)
        if prev is not None:
            perm = match_branches(prev, s)
            s = s._replace(xi=s.xi[perm], mu=s.mu[perm], vectors=s.vectors[:, perm],
                           slopes=s.slopes[perm], overlaps=s.overlaps[perm])
        prev = s
        writer.writerow([repr(float(lam))] + [repr(float(x)) for x in np.concatenate([s.xi, s.mu, s.slopes])]
                        + [int(flag)])
    _write(Path(cfg.out) / "branches.csv", buf.getvalue())
    _sidecar(cfg.out, "branches", started)
    print(f"wrote {cfg.grid} rows to {Path(cfg.out) / 'branches.csv'}", file=stdout)
    return EXIT_OK


def _table(res):
    lines = [f"{'lambda_hat':>22} {'branch':>6} {'residual':>10} {'certificate':>11} {'gamma':>8} {'steps':>5}"]
    for r in res.roots:
        lines.append(f"{r.lambda_hat:22.15g} {r.branch_index:6d} {r.residual:10.3e} "
                     f"{r.certificate:11.3e} {r.gamma:8.4f} {r.bracket_steps:5d}")
    for c in res.clusters:
        if len(c) > 1:
            lines.append(f"cluster {c}: {len(c)}-fold level near {res.roots[c[0]].lambda_hat:.12g}")
    return "\n".join(lines)


def cmd_solve(cfg: RunConfig, stdout=None):
    """Run the certified solver on the window; exit 2 when some branch failed."""
    started = time.perf_counter()
    stdout = sys.stdout if stdout is None else stdout
    _, _, ev, ocfg, bcfg = _setup(cfg)
    res = solve_window(ev, cfg.window, bcfg, ocfg)
    doc = res.to_dict()
    oracle = Oracle(ev, ocfg)
    levels = []
    for c in res.clusters:
        lam = cluster_representative(oracle, res, c)
        found = detect_degenerate(oracle, lam, bcfg)
        members = sorted({res.roots[k].branch_index for k in c})
        levels.append({"lambda": lam, "members": list(map(int, c)),
                       "branches": found if set(members) <= set(found) else members})
    doc["levels"] = levels
    doc["eps_root"], doc["eps_approx"], doc["eps_bias"] = bcfg.eps_root, bcfg.eps_approx, bcfg.eps_bias
    doc["failures"] = [{"branch": i, "interval": list(iv), "error": msg} for i, iv, msg in res.failures]
    _write(Path(cfg.out) / "spectrum.json", _json(doc))
    _sidecar(cfg.out, "solve", started)
    print(_table(res), file=stdout)
    for f in doc["failures"]:
        print(f"branch {f['branch']} failed on {f['interval']}: {f['error']}", file=stdout)
    return EXIT_PARTIAL if res.failures else EXIT_OK


def _reference_states(h, lam, m):
    w, v = scipy.linalg.eigh(h)
    order = np.argsort(np.abs(w - lam))
    near, rest = order[:m], order[m:]
    gap = float(np.min(np.abs(w[rest] - lam))) if rest.size else math.inf
    return v[:, near], gap


def cmd_prepare(cfg: RunConfig, reference=False, stdout=None):
    """Lift every root (single) or cluster (Loewdin) from a ``solve`` output."""
    started = time.perf_counter()
    stdout = sys.stdout if stdout is None else stdout
    path = Path(cfg.spectrum) if cfg.spectrum else Path(cfg.out) / "spectrum.json"
    if not path.exists():
        raise ValidationError(f"spectrum file {path} not found; run solve first")
    spectrum = json.loads(path.read_text())
    h, _, ev, ocfg, _ = _setup(cfg)
    oracle = Oracle(ev, ocfg)
    entries, states = [], []
    for level in spectrum["levels"]:
        lam = float(level["lambda"])
        branches = list(level["branches"])
        _, vecs = oracle(lam)
        phi = vecs[:, branches]
        entry = {"lambda": lam, "branches": branches}
        if len(branches) == 1:
            st = lift(ev, lam, phi[:, 0])
            psi = st.psi[:, None]
            entry.update(gamma_tilde=st.gamma_tilde, residual_norm=st.residual_norm)
        else:
            g_exact = gram(ev, lam, phi)
            _, psi = lowdin_orthonormalize(ev, lam, phi, g_exact)
            entry["orthogonality_defect"] = float(np.abs(psi.conj().T @ psi - np.eye(len(branches))).max())
        if reference:
            ref, gap = _reference_states(h, lam, len(branches))
            rep = subspace_fidelities(psi, ref, h=h, lam=lam, delta_gap=gap)
            entry.update(f_min=rep.f_min, f_avg=rep.f_avg, infidelity=1.0 - rep.f_min,
                         external_gap=gap, infidelity_bound=rep.residual_bound)
        entries.append(entry)
        states.append(psi)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if states:
        write_dense(out / "states.sspc", np.hstack(states))
    _write(out / "prepare.json", _json({"states": entries}))
    _sidecar(cfg.out, "prepare", started)
    for e in entries:
        line = f"lambda={e['lambda']:.12g} branches={e['branches']}"
        if "infidelity" in e:
            line += f" 1-F={e['infidelity']:.3e} bound={e['infidelity_bound']:.3e}"
        print(line, file=stdout)
    return EXIT_OK


def verify_encodings(h, ms, lam, ps, alpha_scale=1.0):
    """Run every block-encoding check; returns a list of ``(name, deviation, tolerance, ok)``."""
    blocks = decompose(h, ms)
    ev = EffectiveEvaluator(blocks, mode=ps, on_pole="pinv")
    checks = []

    def record(name, dev, tol):
        checks.append((name, float(dev), tol, bool(dev <= tol)))

    try:
        enc.dilate(h, opnorm(h) * alpha_scale)
    except ValidationError as exc:
        checks.append((f"dilate U_H: {exc}", math.inf, 0.0, False))
        return checks
    u_h, u_v, u_h22, u_h12, p = enc.oracle_encodings(ev)
    bp, bq = blocks.basis, blocks.complement
    h22_full = bq @ blocks.h22 @ bq.conj().T
    h12_full = bp @ blocks.h12 @ bq.conj().T
    for name, be, target in (("U_H", u_h, h), ("U_H22", u_h22, h22_full), ("U_H12", u_h12, h12_full)):
        record(f"{name} unitary", be.unitarity_defect(), 1e-12)
        record(f"{name} block", np.abs(be.encoded() - target).max(), 1e-10)
    record("U_V unitary", u_v.unitarity_defect(), 1e-12)
    adj = enc.adjustable_be(u_h22, lam, u_h22.alpha)
    record("adjustable unitary", adj.unitarity_defect(), 1e-12)
    record("adjustable block", np.abs(adj.encoded() - (lam * np.eye(blocks.n) - h22_full)).max(), 1e-10)
    hd, omega, g = enc.target_operators(lam, ps, ev)
    dbe = enc.dressed_be(lam, ps, ev)
    record("dressed unitary", dbe.unitarity_defect(), 1e-12)
    record("dressed block", np.abs(dbe.encoded() - hd).max(), 1e-10)
    wbe, eta, kappa = enc.wave_be(lam, ps, ev)
    record("wave unitary", wbe.unitarity_defect(), 1e-12)
    record("wave block", np.abs(wbe.encoded() - omega).max(), 1e-10)
    psi = np.ones(blocks.n, dtype=complex) / math.sqrt(blocks.n)
    expected = float(np.real(psi.conj() @ omega.conj().T @ omega @ psi)) / kappa**2
    record("wave success probability", abs(enc.success_probability(wbe, psi) - expected), 1e-12)
    gbe = enc.gram_be(lam, ps, ev)
    record("gram unitary", gbe.unitarity_defect(), 1e-12)
    record("gram block", np.abs(gbe.encoded() - g).max(), 1e-10)
    return checks


def resource_tables(ev, cfg: RunConfig):
    rows = []
    for n in (2, 3, 4, 5, 8, 16):
        a = enc.pcnot_resources(n, option="range_comparator")
        b = enc.pcnot_resources(n, ev.d, option="pattern_list")
        rows.append({"n": n, "option_A_toffolis": a.toffolis, "option_B_toffolis": b.toffolis, "d": ev.d})
    g = cfg.g if cfg.g is not None else 0.05 * ev.alpha
    qr = {est: enc.query_report(ev.alpha, max(ev.alpha_tilde, 1e-12), ev.d, g, cfg.eps_est,
                                cfg.eps_qsvt, cfg.theta, 1.0, cfg.window[1] - cfg.window[0],
                                estimator=est).to_dict()
          for est in ("amplitude_estimation", "monte_carlo")}
    return {"pcnot": rows, "queries": qr, "givens": enc.basis_rotation_cost(ev.blocks.n)}


def cmd_verify(cfg: RunConfig, resources=False, stdout=None):
    """Block-encoding contract checks at ``lam = window midpoint``; exit 1 on any violation."""
    started = time.perf_counter()
    stdout = sys.stdout if stdout is None else stdout
    h, ms = build_problem(cfg)
    if h.shape[0] > 16:
        raise ValidationError("encoding checks need system dimension <= 16")
    lam = float(cfg.verify.get("lam", 0.5 * (cfg.window[0] + cfg.window[1])))
    alpha = opnorm(h)
    al = alpha_lambda(alpha, lam)
    g = cfg.g if cfg.g is not None else 0.05 * alpha
    delta, eps_poly = select_parameters(g, cfg.eps_qsvt, al, al)
    ps = build_inverse_poly(delta, eps_poly)
    checks = verify_encodings(h, ms, lam, ps, float(cfg.verify.get("alpha_scale", 1.0)))
    doc = {"lambda": lam, "checks": [{"name": n, "deviation": d, "tolerance": t, "ok": ok}
                                     for n, d, t, ok in checks]}
    for n, d, t, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {n:28s} {d:10.3e} (tol {t:.0e})", file=stdout)
    if resources:
        ev = EffectiveEvaluator(decompose(h, ms), alpha=alpha, on_pole="pinv")
        tables = resource_tables(ev, cfg)
        doc["resources"] = tables
        print(f"{'n':>4} {'A: 4n-1':>8} {'B: 2d(2n-3)':>12}", file=stdout)
        for r in tables["pcnot"]:
            print(f"{r['n']:4d} {r['option_A_toffolis']:8d} {r['option_B_toffolis']:12d}", file=stdout)
        for est, rep in tables["queries"].items():
            print(f"{est}: U_H {rep['queries_UH']}  U_V {rep['queries_UV']}  ancillas {rep['ancillas']}"
                  f"  steps {rep['bisection_steps']}", file=stdout)
    _write(Path(cfg.out) / "verify.json", _json(doc))
    _sidecar(cfg.out, "verify", started)
    bad = [c for c in checks if not c[3]]
    if bad:
        worst = max(bad, key=lambda c: c[1])
        print(f"worst violation: {worst[0]} ({worst[1]:.3e})", file=stdout)
        return EXIT_FAIL
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def _window(text):
    try:
        a, b = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("window must be A,B") from None
    return (a, b)


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--mode", choices=sorted(MODES))
    common.add_argument("--window", type=_window, help="search window A,B")
    common.add_argument("--grid", type=int)
    common.add_argument("--out", help="output directory")
    parser = argparse.ArgumentParser(prog="sspc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("branches", parents=[common], help="eigenbranch CSV on a grid")
    sub.add_parser("solve", parents=[common], help="certified roots in the window")
    p = sub.add_parser("prepare", parents=[common], help="lift roots to eigenstates")
    p.add_argument("--spectrum", help="spectrum.json from solve (default OUT/spectrum.json)")
    p.add_argument("--reference", action="store_true", help="compare with dense diagonalization")
    v = sub.add_parser("verify", parents=[common], help="block-encoding contracts")
    v.add_argument("--resources", action="store_true", help="also print resource tables")
    return parser


@contextlib.contextmanager
def _thread_cap():
    cap = os.environ.get("SSPC_THREADS")
    if not cap:
        yield
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=int(cap)):
        yield


def main(argv=None):
    args = make_parser().parse_args(argv)
    overrides = {"seed": args.seed, "mode": args.mode, "window": args.window, "grid": args.grid,
                 "out": args.out, "spectrum": getattr(args, "spectrum", None)}
    try:
        cfg = load_config(args.config, overrides)
        with _thread_cap():
            if args.command == "branches":
                return cmd_branches(cfg)
            if args.command == "solve":
                return cmd_solve(cfg)
            if args.command == "prepare":
                return cmd_prepare(cfg, reference=args.reference)
            return cmd_verify(cfg, resources=args.resources)
    except SSPCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
