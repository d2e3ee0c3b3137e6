"""Command-line harness: schedules, runs, figures and verification suites.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, analysis, affine, engine, operators, schedules, transport
from .engine import atomic_write
from .operators import NormKind, OperatorSpec
from .report import Check, Report, check_eq, check_le
from .schedules import ScheduleKind
from .svg import line_plot

AFFINE_OPERATORS = {"rotation", "cyclic", "l1shift", "affine"}
FIGURES = ("fig1", "fig2", "fig3-left", "fig3-right", "fig4-left", "fig4-right")
SUITES = ("schedules", "transport", "affine", "analysis", "engine")
PRNG_NAME = "Philox4x64"


class UsageError(ValueError):
    pass


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return ""
    return f"{v:.17g}"


# --- configuration ------------------------------------------------------------

def parse_kv(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"line {lineno}: expected key=value, got {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _floats(text: str) -> list:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


@dataclass
class ExperimentConfig:
    operator: str
    op_params: dict
    schedules: list
    x0: str
    seed: int | None
    n_max: int
    rho: float
    norm: NormKind
    outputs: list = field(default_factory=lambda: ["trace_csv", "bounds_csv"])
    betas: list | None = None

    @classmethod
    def from_mapping(cls, kv: dict) -> "ExperimentConfig":
        kv = dict(kv)
        try:
            operator = kv.pop("operator")
            rho = float(kv.pop("rho"))
        except KeyError as exc:
            raise UsageError(f"missing config key {exc.args[0]!r}") from None
        if operator not in OPERATOR_BUILDERS:
            raise UsageError(f"unknown operator {operator!r}; choose from {sorted(OPERATOR_BUILDERS)}")
        scheds = [s.strip() for s in kv.pop("schedule", "mopt").split(",") if s.strip()]
        for s in scheds:
            try:
                ScheduleKind(s)
            except ValueError:
                raise UsageError(f"unknown schedule {s!r}; choose from {[k.value for k in ScheduleKind]}") from None
        x0 = kv.pop("x0", "random")
        seed = kv.pop("seed", None)
        seed = int(seed) if seed is not None else None
        if x0 == "random" and seed is None:
            raise UsageError("a seed is required when x0 is random")
        norm = NormKind(kv.pop("norm", "linf"))
        n_max = int(kv.pop("n_max", "100"))
        outputs = [o.strip() for o in kv.pop("outputs", "trace_csv,bounds_csv").split(",") if o.strip()]
        for o in outputs:
            if o not in ("trace_csv", "bounds_csv", "svg"):
                raise UsageError(f"unknown output {o!r}")
        betas = _floats(kv.pop("betas")) if "betas" in kv else None
        if "fixed" in scheds and betas is None:
            raise UsageError("schedule 'fixed' needs betas=...")
        return cls(operator, kv, scheds, x0, seed, n_max, rho, norm, outputs, betas)


def _op_rotation(rho, p, norm):
    return operators.rotation_contraction(rho, float(p.get("theta", math.pi / 2)))


def _op_cyclic(rho, p, norm):
    return operators.cyclic_shift(rho, int(p.get("d", 100)), norm)


def _op_goebel(rho, p, norm):
    return operators.goebel_map(rho, int(p.get("grid", 101)))


def _op_l1shift(rho, p, norm):
    return operators.l1_right_shift(rho, int(p["trunc"]) if "trunc" in p else None)


def _op_affine(rho, p, norm):
    try:
        rows = [_floats(r) for r in p["matrix"].split(";")]
        b = _floats(p["offset"])
    except KeyError as exc:
        raise UsageError(f"affine operator needs {exc.args[0]!r}") from None
    return operators.affine_operator(np.array(rows), np.array(b), rho, norm)


OPERATOR_BUILDERS = {
    "rotation": _op_rotation,
    "cyclic": _op_cyclic,
    "goebel": _op_goebel,
    "l1shift": _op_l1shift,
    "affine": _op_affine,
}


def build_operator(cfg: ExperimentConfig) -> OperatorSpec:
    params = dict(cfg.op_params)
    if cfg.operator == "l1shift" and "trunc" not in params:
        params["trunc"] = cfg.n_max + 2
    return OPERATOR_BUILDERS[cfg.operator](cfg.rho, params, cfg.norm)


def build_x0(cfg: ExperimentConfig, op: OperatorSpec) -> tuple[np.ndarray, str]:
    spec = cfg.x0
    if spec == "random" and op.sampler is not None:
        # restricted domains draw from their own sampler, same generator
        x = op.sample(np.random.Generator(np.random.Philox(int(cfg.seed))))
        return x, f"x0: {PRNG_NAME} domain sample seed={cfg.seed}"
    if spec == "random":
        return operators.random_x0(op.dim, cfg.seed), f"x0: {PRNG_NAME} uniform[-1,1] seed={cfg.seed}"
    if spec == "e0":
        x = np.zeros(op.dim)
        x[0] = 1.0
        return x, "x0: e0"
    if spec == "ramp":
        return np.linspace(0.0, 1.0, op.dim), "x0: ramp"
    try:
        x = np.array(_floats(spec))
    except ValueError:
        raise UsageError(f"cannot parse x0 {spec!r}") from None
    if x.shape != (op.dim,):
        raise UsageError(f"x0 has {x.size} entries, operator needs {op.dim}")
    return x, f"x0: {spec}"


def _schedule_for(kind: str, cfg: ExperimentConfig):
    if kind == "fixed":
        return schedules.halpern_recursive_bounds(cfg.rho, cfg.betas)
    return schedules.make_schedule(kind, cfg.rho, cfg.n_max)


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run every requested schedule; returns {kind: (trace, bounds_csv_text or None, ok)}."""
    op = build_operator(cfg)
    x0, x0_note = build_x0(cfg, op)
    results = {}
    delta0 = op.norm(x0 - op.fixed_point) if op.fixed_point is not None else None
    for kind in cfg.schedules:
        header = [f"operator: {op.name}", x0_note, f"schedule: {kind}", f"n_max: {cfg.n_max}"]
        if kind == "ada":
            trace = engine.ada_halpern_run(op, x0, cfg.n_max)
            header.append("bound: kappa_hat_n * R_n (adaptive)")
            trace.header = header
            results[kind] = (trace, None, True)
            continue
        sched = _schedule_for(kind, cfg)
        trace = engine.halpern_run(op, x0, sched, min(cfg.n_max, sched.n_max), keep_iterates="all")
        scale, rule = None, None
        if kind == "flat":
            if delta0 is not None:
                scale, rule = delta0, "delta0 = ||x0 - x*||"
        elif kind == "affine":
            if delta0 is not None and cfg.operator in AFFINE_OPERATORS:
                scale, rule = delta0, "delta0 = ||x0 - x*||"
        elif delta0 is not None and cfg.rho <= 1.0:
            scale, rule = (1.0 + cfg.rho) * delta0, "kappa0 = (1+rho) * ||x0 - x*||"
        elif op.diameter is not None:
            scale, rule = op.diameter, "kappa = diam(C)"
        else:
            scale, rule = engine.orbit_kappa(trace, x0, op.norm), "kappa = observed orbit diameter max ||Tx^m - Tx^n||"
        bounds_text, ok = None, True
        if scale is not None:
            trace.bound = scale * sched.bounds[:len(trace)]
            header.append(f"bound rule: {rule}; scale = {_fmt(scale)}")
            rep = engine.check_bounds(trace, sched, scale)
            ok = rep.ok
            buf = io.StringIO()
            for h in header:
                buf.write(f"# {h}\n")
            buf.write("n,residual,bound,ok\n")
            for c in rep.checks:
                buf.write(f"{c.step},{_fmt(c.lhs)},{_fmt(c.rhs)},{int(c.ok)}\n")
            bounds_text = buf.getvalue()
        else:
            header.append("bound: unavailable (no a priori scale for this operator/schedule)")
        trace.images = None
        trace.iterates = None
        trace.header = header
        results[kind] = (trace, bounds_text, ok)
    return results


# --- commands ------------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        try:
            atomic_write(out, text)
        except OSError as exc:
            raise OSError(f"cannot write {out}: {exc.strerror}") from exc


def cmd_schedule(kind: str, rho: float, n_max: int, out: str | None = None, betas=None) -> str:
    kind = ScheduleKind(kind)
    if kind is ScheduleKind.ADA:
        raise UsageError("the adaptive schedule depends on the operator; use 'run' with schedule=ada")
    sched = schedules.make_schedule(kind, rho, n_max, betas)
    buf = io.StringIO()
    if kind is ScheduleKind.AFFINE:
        if sched.limit_case:
            buf.write("# limit case: rho = 1 uses n/(n+1) throughout\n")
        buf.write("n,beta,frozen,l_star\n")
        frozen = sched.frozen if sched.frozen is not None else np.zeros(len(sched), dtype=bool)
        for n in range(len(sched)):
            beta = "" if frozen[n] else _fmt(sched.betas[n])
            buf.write(f"{n},{beta},{int(frozen[n])},{_fmt(sched.bounds[n])}\n")
    else:
        buf.write("n,beta,bound\n")
        for n in range(len(sched)):
            buf.write(f"{n},{_fmt(sched.betas[n])},{_fmt(sched.bounds[n])}\n")
    text = buf.getvalue()
    _emit(text, out)
    return text


def cmd_run(cfg: ExperimentConfig, out_dir: str) -> tuple[list, bool]:
    """Write the requested outputs; the flag is False if any bound was violated."""
    os.makedirs(out_dir, exist_ok=True)
    results = run_experiment(cfg)
    written = []
    for kind, (trace, bounds_text, _) in results.items():
        if "trace_csv" in cfg.outputs:
            path = os.path.join(out_dir, f"{kind}.csv")
            trace.to_csv(path)
            written.append(path)
        if "bounds_csv" in cfg.outputs and bounds_text is not None:
            path = os.path.join(out_dir, f"{kind}_bounds.csv")
            atomic_write(path, bounds_text)
            written.append(path)
    if "svg" in cfg.outputs:
        series = {k: (np.arange(len(r[0])), r[0].residual) for k, r in results.items()}
        path = os.path.join(out_dir, "residuals.svg")
        atomic_write(path, line_plot(series, title=f"{cfg.operator}, rho={cfg.rho:g}", ylabel="residual"))
        written.append(path)
    return written, all(r[2] for r in results.values())


# --- figures -------------------------------------------------------------------

def _fig1(p: dict) -> tuple[str, str]:
    rhos = _floats(p.get("rhos", "0.75,1.5"))
    steps = int(p.get("n_max", 30))
    rs = np.linspace(0.0, 1.0, int(p.get("points", 201)))
    buf = io.StringIO()
    buf.write("series,rho,x,y\n")
    series, dashed = {}, []
    for rho in rhos:
        vs = [schedules.v_opt(rho, r) for r in rs]
        for r, v in zip(rs, vs):
            buf.write(f"curve,{_fmt(rho)},{_fmt(r)},{_fmt(v)}\n")
        r_prev = 1.0
        cx, cy = [1.0], [1.0]
        for _ in range(steps):
            r_next = schedules.v_opt(rho, r_prev)
            buf.write(f"cobweb,{_fmt(rho)},{_fmt(r_prev)},{_fmt(r_next)}\n")
            cx += [r_prev, r_next]
            cy += [r_next, r_next]
            r_prev = r_next
        fp = schedules.r_limit(rho)
        buf.write(f"fixed_point,{_fmt(rho)},{_fmt(fp)},{_fmt(fp)}\n")
        series[f"V rho={rho:g}"] = (rs, vs)
        series[f"iterates rho={rho:g}"] = (cx, cy)
        dashed.append(f"iterates rho={rho:g}")
    series["identity"] = (rs, rs)
    return buf.getvalue(), line_plot(series, title="r -> V(r)", xlabel="r", logy=False, dashed=dashed)


def _fig2(p: dict) -> tuple[str, str]:
    grid = analysis.fig2_grid(int(p.get("points", 500)), float(p.get("top", 0.9999)))
    ns = [int(v) for v in _floats(p["ns"])] if "ns" in p else list(analysis.FIG2_NS)
    buf = io.StringIO()
    buf.write("rho,n,q_n,q_inf\n")
    curves = {n: [] for n in ns}
    qinf = []
    for rho in grid:
        qs = analysis.q_n_array(rho, max(ns))
        qi = analysis.q_inf(rho)
        qinf.append(qi)
        for n in ns:
            curves[n].append(qs[n])
            buf.write(f"{_fmt(rho)},{n},{_fmt(qs[n])},{_fmt(qi)}\n")
    series = {f"n={n}": (grid, curves[n]) for n in ns}
    series["limit"] = (grid, qinf)
    return buf.getvalue(), line_plot(series, title="ratio to Hilbert bound", xlabel="rho", logy=False, dashed=["limit"])


def _residual_table(cols: dict) -> str:
    names = list(cols)
    size = len(next(iter(cols.values())))
    buf = io.StringIO()
    buf.write("n," + ",".join(names) + "\n")
    for n in range(size):
        buf.write(f"{n}," + ",".join(_fmt(cols[k][n]) for k in names) + "\n")
    return buf.getvalue()


def _fig3(p: dict, theta: float) -> tuple[str, str]:
    rho = float(p.get("rho", 0.98))
    n_max = int(p.get("n_max", 300))
    theta = float(p.get("theta", theta))
    x0 = np.array(_floats(p.get("x0", "1,0")))
    op = operators.rotation_contraction(rho, theta)
    cols = {
        "mopt": engine.halpern_run(op, x0, schedules.m_opt_schedule(rho, n_max)).residual,
        "ada": engine.ada_halpern_run(op, x0, n_max).residual,
        "bp": engine.banach_picard_run(op, x0, n_max).residual,
    }
    head = f"# rotation rho={rho!r} theta={theta!r} x0={','.join(_fmt(v) for v in x0)}\n"
    svg = line_plot({k: (np.arange(n_max + 1), v) for k, v in cols.items()}, title=f"rotation, theta={theta:.4g}", ylabel="residual")
    return head + _residual_table(cols), svg


def fig4_residuals(rho: float, d: int, n_max: int, seed: int) -> dict:
    op = operators.cyclic_shift(rho, d)
    x0 = operators.random_x0(d, seed)
    return {
        "aff": engine.halpern_run(op, x0, affine.aff_schedule(rho, n_max)).residual,
        "flat": engine.halpern_run(op, x0, schedules.flat_schedule(rho, n_max)).residual,
        "mopt": engine.halpern_run(op, x0, schedules.m_opt_schedule(rho, n_max)).residual,
        "bp": engine.banach_picard_run(op, x0, n_max).residual,
    }


def _fig4(p: dict, rho_default: float) -> tuple[str, str]:
    rho = float(p.get("rho", rho_default))
    n_max = int(p.get("n_max", 200))
    d = int(p.get("d", 100))
    seed = int(p.get("seed", 42))
    seeds = int(p.get("seeds", 1))
    runs = [fig4_residuals(rho, d, n_max, seed + k) for k in range(seeds)]
    cols = {k: np.mean([r[k] for r in runs], axis=0) for k in runs[0]}
    head = f"# cyclic shift rho={rho!r} d={d}; x0: {PRNG_NAME} uniform[-1,1] seeds={seed}..{seed + seeds - 1}; mean over seeds\n"
    svg = line_plot({k: (np.arange(n_max + 1), v) for k, v in cols.items()}, title=f"cyclic shift, rho={rho:g}", ylabel="residual")
    return head + _residual_table(cols), svg


def figure_data(fig_id: str, params: dict | None = None) -> tuple[str, str]:
    """CSV text and SVG text for a figure job."""
    p = dict(params or {})
    if fig_id == "fig1":
        return _fig1(p)
    if fig_id == "fig2":
        return _fig2(p)
    if fig_id == "fig3-left":
        return _fig3(p, math.pi / 2)
    if fig_id == "fig3-right":
        return _fig3(p, math.pi / 4)
    if fig_id == "fig4-left":
        return _fig4(p, 0.98)
    if fig_id == "fig4-right":
        return _fig4(p, 1.02)
    raise UsageError(f"unknown figure {fig_id!r}; choose from {FIGURES}")


def _figure_job(args: tuple) -> list:
    fig_id, params, out_dir, svg = args
    csv_text, svg_text = figure_data(fig_id, params)
    paths = [os.path.join(out_dir, f"{fig_id}.csv")]
    atomic_write(paths[0], csv_text)
    if svg:
        paths.append(os.path.join(out_dir, f"{fig_id}.svg"))
        atomic_write(paths[1], svg_text)
    return paths


def cmd_figure(fig_ids: list, params: dict, out_dir: str, svg: bool = True, jobs: int = 1) -> list:
    for f in fig_ids:
        if f not in FIGURES:
            raise UsageError(f"unknown figure {f!r}; choose from {FIGURES}")
    os.makedirs(out_dir, exist_ok=True)
    tasks = [(f, params, out_dir, svg) for f in fig_ids]
    return [p for paths in _map(_figure_job, tasks, jobs) for p in paths]


def _map(fn, items, jobs: int):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# --- verification suites -------------------------------------------------------

def _suite_schedules(opts: dict) -> Report:
    rep = Report()
    s = schedules.m_opt_schedule(1.0, 10_000)
    r = 1.0
    for n in range(1, 10_001):
        r = r - 0.25 * r * r
        if n <= 2 or n % 1000 == 0:
            rep.add(check_eq(f"mopt_rho1_R{n}", s.bounds[n], r, 1e-12, step=n))
    for rho in (0.6, 0.98, 1.0, 1.5, 2.4):
        gap = float(np.max(np.abs(schedules.m_opt_betas_closed(rho, 500) - schedules.m_opt_schedule(rho, 500).betas)))
        rep.add(check_eq(f"two_recursions(rho={rho:g})", gap, 0.0, 1e-12))
    for rho in np.linspace(0.015, 3.0, 200):
        rl = schedules.r_limit(rho)
        rep.add(check_eq(f"v_opt_fixed(rho={rho:.4g})", schedules.v_opt(rho, rl), rl, 1e-12))
        rf, _ = schedules.flat_limits(rho)
        rep.add(check_eq(f"v_flat_fixed(rho={rho:.4g})", schedules.v_flat(rho, rf), rf, 1e-10))
    f = schedules.flat_schedule(1.0, 200)
    m = schedules.m_opt_schedule(1.0, 200)
    rep.add(check_eq("flat_rho1_bounds", float(np.max(np.abs(f.bounds - 2 * m.bounds))), 0.0, 1e-12))
    rep.add(check_eq("flat_rho1_betas", float(np.max(np.abs(f.betas - m.betas))), 0.0, 1e-12))
    return rep


def _suite_transport(opts: dict) -> Report:
    rho = float(opts.get("rho", 1.0))
    N = int(opts.get("n", 10))
    rep = Report()
    betas = schedules.m_opt_schedule(rho, N).betas
    pi = engine.MannArray.halpern(betas)
    table = transport.ot_bounds(rho, pi, N)
    rec = schedules.halpern_recursive_bounds(rho, betas).bounds
    for n in range(N + 1):
        rep.add(check_eq(f"ot_vs_recursion({n})", table.R[n], rec[n], 1e-12, step=n))
    inst = transport.build_adversarial_instance(rho, 1.0, pi, N, table)
    rep.extend(transport.verify_tightness(inst, table).checks)
    rng = np.random.default_rng(int(opts.get("seed", 0)))
    for t in range(int(opts.get("budget", 5))):
        b = np.r_[0.0, rng.uniform(0.05, 1.0, N)]
        pi = engine.MannArray.halpern(b)
        tab = transport.ot_bounds(rho, pi, N)
        gap = float(np.max(np.abs(tab.R - schedules.halpern_recursive_bounds(rho, b).bounds)))
        rep.add(check_eq(f"ot_vs_recursion_random[{t}]", gap, 0.0, 1e-12))
        rep.extend(transport.verify_tightness(transport.build_adversarial_instance(rho, 1.0, pi, N, tab), tab).checks)
    return rep


def _affine_grid() -> list:
    return [round(0.05 * k, 2) for k in range(1, 20)] + [round(1.05 + 0.05 * k, 2) for k in range(40)]


def _suite_affine(opts: dict) -> Report:
    rep = Report()
    for rho in _affine_grid():
        n0 = affine.affine_n0(rho)
        real = affine.n0_lambert(rho)
        rep.add(Check(f"n0_scan_vs_lambert(rho={rho:g})", float(n0), real, n0 == math.floor(real), "floor=="))
        for n in range(31):
            rep.add(check_eq(f"l_star_vs_bruteforce(rho={rho:g})", affine.l_star(rho, n), affine.l_star_bruteforce(rho, n), 1e-12, step=n))
    rng = np.random.default_rng(int(opts.get("seed", 0)))
    for t in range(int(opts.get("budget", 10))):
        n = 30
        rho = float(rng.uniform(0.3, 1.8))
        b = np.r_[0.0, rng.uniform(0.0, 1.0, n)]
        op = operators.l1_right_shift(rho, n + 2)
        x0 = np.zeros(n + 2)
        x0[0] = 1.0
        tr = engine.halpern_run(op, x0, b)
        gap = float(np.max(np.abs(tr.residual - affine.affine_residual_bounds(rho, b))))
        rep.add(check_eq(f"l1_shift_exact[{t}]", gap, 0.0, 1e-12))
    return rep


def _suite_analysis(opts: dict) -> Report:
    rep = Report()
    worst = 0.0
    for rho in analysis.fig2_grid(500):
        qs = analysis.q_n_array(rho, 500)
        qi = analysis.q_inf(rho)
        worst = max(worst, float(qs.max()), qi)
        rep.add(check_le(f"q_n<=q_inf(rho={rho:.5g})", float(qs.max()), qi, rel=1e-12))
    rep.add(check_le("q_max<=e2", worst, analysis.E2 + 1e-9))
    rz = analysis.rho_z_sequences(30)
    for n in range(31):
        rep.add(check_eq(f"q_inf_identity({n})", analysis.q_inf(rz.rho[n]) * rz.rho[n] ** (n + 1), 1.0, 1e-12, step=n))
    analysis.logistic_sandwich(10_000)
    rep.add(Check("logistic_sandwich", 0.0, 0.0, True, "ok"))
    for rho in (1.5, 2.0, 2.4):
        rep.add(check_eq(f"logistic_identity(rho={rho:g})", analysis.logistic_identity_gap(rho, 10_000), 0.0, 1e-12))
    return rep


def _suite_engine(opts: dict) -> Report:
    rep = Report()
    cases = [
        ("rotation(pi/2)", operators.rotation_contraction(0.98, math.pi / 2), np.array([1.0, 0.0])),
        ("rotation(pi/4)", operators.rotation_contraction(0.98, math.pi / 4), np.array([1.0, 0.0])),
        ("cyclic(1.5,10)", operators.cyclic_shift(1.5, 10), operators.random_x0(10, int(opts.get("seed", 0)))),
    ]
    for name, op, x0 in cases:
        try:
            engine.ada_halpern_run(op, x0, 2000)
            rep.add(Check(f"ada_sandwich[{name}]", 0.0, 0.0, True, "ok"))
        except engine.AdaSandwichError as exc:
            rep.add(Check(f"ada_sandwich[{name}]", 1.0, 0.0, False, "ok", detail=str(exc)))
    op = operators.cyclic_shift(1.5, 10)
    x0 = operators.random_x0(10, 1)
    sched = schedules.m_opt_schedule(1.5, 300)
    tr = engine.halpern_run(op, x0, sched, keep_iterates="all")
    rep.extend(engine.check_bounds(tr, sched, engine.orbit_kappa(tr, x0, op.norm)).checks)
    op = operators.cyclic_shift(2.0, 5)
    rep.extend(engine.flat_convergence_check(op, operators.random_x0(5, 2), 500).checks)
    return rep


SUITE_FUNCS = {
    "schedules": _suite_schedules,
    "transport": _suite_transport,
    "affine": _suite_affine,
    "analysis": _suite_analysis,
    "engine": _suite_engine,
}


def _suite_job(args: tuple) -> tuple:
    name, opts = args
    try:
        rep = SUITE_FUNCS[name](opts)
    except Exception as exc:  # a crash is a failed check, not a usage error
        rep = Report([Check("suite_crashed", 1.0, 0.0, False, "ok", detail=f"{type(exc).__name__}: {exc}")])
    return name, rep


def cmd_verify(suite: str, opts: dict, out: str | None = None, jobs: int = 1) -> int:
    names = list(SUITES) if suite == "all" else [suite]
    for n in names:
        if n not in SUITE_FUNCS:
            raise UsageError(f"unknown suite {n!r}; choose from {SUITES + ('all',)}")
    results = _map(_suite_job, [(n, opts) for n in names], jobs)
    lines = [c.to_json(name) for name, rep in results for c in rep.checks]
    _emit("\n".join(lines) + ("\n" if lines else ""), out)
    ok = all(rep.ok for _, rep in results)
    for name, rep in results:
        print(f"{name}: {rep.summary()}", file=sys.stderr)
    return 0 if ok else 1


# --- entry point ---------------------------------------------------------------

def _overrides(items: list) -> dict:
    out = {}
    for it in items or []:
        if "=" not in it:
            raise UsageError(f"override must be key=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float)
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halpern", description="Optimal Halpern schedules: bounds, runs and checks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("schedule", help="write a schedule as CSV")
    p.add_argument("kind", choices=[k.value for k in ScheduleKind if k is not ScheduleKind.ADA])
    p.add_argument("--betas", help="comma-separated betas for kind 'fixed' (first entry 0)")
    _common_flags(p)

    p = sub.add_parser("run", help="run iterations from a key=value config")
    p.add_argument("--config")
    p.add_argument("overrides", nargs="*", help="key=value entries overriding the config")
    _common_flags(p)

    p = sub.add_parser("figure", help="reproduce a figure as CSV (+ SVG)")
    p.add_argument("ids", nargs="+", help=f"one of {', '.join(FIGURES)} or 'all'")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="figure parameter override")
    p.add_argument("--no-svg", action="store_true")
    _common_flags(p)

    p = sub.add_parser("verify", help="run a verification suite, JSON lines out")
    p.add_argument("suite", choices=list(SUITES) + ["all"])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--budget", type=int, default=5, help="random cases per suite")
    _common_flags(p)
    return ap


def main(argv: list | None = None) -> int:
    ap = build_parser()
    # key=value overrides may follow options, which plain nargs="*" rejects
    args, extra = ap.parse_known_args(argv)
    if extra:
        if args.cmd != "run" or any(e.startswith("-") or "=" not in e for e in extra):
            ap.error(f"unrecognized arguments: {' '.join(extra)}")
        args.overrides = list(args.overrides) + extra
    try:
        if args.cmd == "schedule":
            if args.rho is None or args.n_max is None:
                raise UsageError("schedule needs --rho and --n-max")
            betas = _floats(args.betas) if args.betas else None
            cmd_schedule(args.kind, args.rho, args.n_max, args.out, betas)
            return 0
        if args.cmd == "run":
            kv = {}
            if args.config:
                with open(args.config) as fh:
                    kv = parse_kv(fh.read())
            kv.update(_overrides(args.overrides))
            for flag, key in (("rho", "rho"), ("n_max", "n_max"), ("seed", "seed")):
                if getattr(args, flag) is not None:
                    kv[key] = str(getattr(args, flag))
            cfg = ExperimentConfig.from_mapping(kv)
            paths, ok = cmd_run(cfg, args.out or ".")
            for path in paths:
                print(path)
            if not ok:
                print("error: a bound was violated; see the *_bounds.csv files", file=sys.stderr)
            return 0 if ok else 1
        if args.cmd == "figure":
            ids = list(FIGURES) if args.ids == ["all"] else args.ids
            params = _overrides(args.set)
            for flag in ("rho", "n_max", "seed"):
                if getattr(args, flag) is not None:
                    params[flag] = str(getattr(args, flag))
            for path in cmd_figure(ids, params, args.out or ".", not args.no_svg, args.jobs):
                print(path)
            return 0
        if args.cmd == "verify":
            opts = {"n": args.n, "budget": args.budget}
            if args.rho is not None:
                opts["rho"] = args.rho
            if args.seed is not None:
                opts["seed"] = args.seed
            return cmd_verify(args.suite, opts, args.out, args.jobs)
    except (UsageError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
