"""Run orchestration behind the command-line interface.

Each ``run_*`` function writes its artifacts and a manifest into ``out_dir``
and returns a process exit code: 0 success, 1 validation, 2 numerics,
3 insufficient data.
"""

import glob
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..dynamics import integrate, lambda_sweep, reduction_oracle, symmetric_form_oracle
from ..errors import BlowUpError, ConfigError, FitError, InsufficientDataError, StabilityError
from ..spectral import (
    Lattice,
    SpectralField,
    apply_semigroup,
    bilinear_B,
    inner,
    project_leray,
    sobolev_norm_sq,
    stokes,
    transform_to_physical,
)
from ..statistics import (
    MomentObserver,
    StatsAccumulator,
    enstrophy_identity_check,
    measure_convergence_report,
    p_moment_identity_check,
    rescaling_check,
    scaling_fit,
    structure_functions,
    vorticity_moment_identity_check,
)
from . import checkpoint
from .config import from_dict
from .output import RunManifest, write_csv

log = logging.getLogger(__name__)

CHECK_COLUMNS = ("check", "value", "reference", "tolerance", "stderr", "pass")
IDENTITY_COLUMNS = ("name", "lhs", "rhs", "rel_err", "stderr", "pass", "rhs_ito", "note")
SUMMARY_COLUMNS = ("observable", "mean", "stderr", "count")


def _manifest(command, rc, threads):
    return RunManifest(command, rc.to_dict(), rc.simulation.seed, threads)


def _summary_rows(acc, n_batches):
    rows = []
    for name in acc.names:
        try:
            se = acc.batch_se(name, n_batches)
        except InsufficientDataError:
            se = math.nan
        rows.append((name, acc.mean(name), se, acc.count(name)))
    return rows


def _observer(rc, cfg, acc):
    st = rc.statistics
    return MomentObserver(
        acc,
        st.p_list,
        cfg.noise,
        cfg.noise2,
        lam=cfg.lam,
        track_transfer=st.track_transfer,
        s2_separations=st.s2_separations,
    )


# simulate ------------------------------------------------------------------


def run_simulate(rc, out_dir, threads=1, resume=None):
    out = Path(out_dir)
    ck_dir = out / "checkpoints"
    ck_dir.mkdir(parents=True, exist_ok=True)
    cfg = rc.simulation_config()
    manifest = _manifest("simulate", rc, threads)
    initial = None
    if resume is not None:
        initial, _ = checkpoint.load(resume, cfg)
    acc = StatsAccumulator()
    obs = _observer(rc, cfg, acc)
    times = []

    def record(state):
        times.append((state.step, state.t))
        obs(state)

    saved = []

    def on_ck(state):
        p = checkpoint.save(ck_dir / f"ckpt_{state.step:09d}.bin", state, cfg)
        saved.append(p)
        return p

    code = 0
    try:
        res = integrate(cfg, [record], initial=initial, on_checkpoint=on_ck)
        final = checkpoint.save(ck_dir / "final.bin", res.final, cfg)
        saved.append(final)
    except (BlowUpError, StabilityError) as exc:
        log.error("numerical failure: %s (t=%s, max|a|=%s, last checkpoint=%s)", exc,
                  getattr(exc, "t", None), getattr(exc, "max_abs", None), getattr(exc, "checkpoint", None))
        manifest.status = f"numerical failure: {exc}"
        code = 2
    names = acc.names
    rows = [(s, t) + tuple(acc.series(n)[i] for n in names) for i, (s, t) in enumerate(times)]
    ts = write_csv(out / "timeseries.csv", ("step", "t") + tuple(names), rows)
    summ = write_csv(out / "summary.csv", SUMMARY_COLUMNS, _summary_rows(acc, rc.statistics.n_batches))
    for p in [ts, summ] + [Path(p) for p in saved]:
        manifest.add(p, out)
    manifest.write(out)
    log.info("simulate: %d observations, %d checkpoints in %s", len(times), len(saved), out)
    return code


# verify --------------------------------------------------------------------


def _spectral_checks(rc, n_fields=50):
    rows = []
    rng = np.random.default_rng(rc.simulation.seed)
    for n in sorted({16, rc.simulation.N}):
        lat = Lattice(n, rc.simulation.L)
        worst = {"leray_idempotency": 0.0, "skew_symmetry": 0.0, "vorticity_identity": 0.0,
                 "parseval": 0.0, "semigroup_composition": 0.0}
        for _ in range(n_fields):
            u = SpectralField.random(lat, rng)
            v = SpectralField.random(lat, rng)
            raw = rng.standard_normal((2,) + lat.shape) + 1j * rng.standard_normal((2,) + lat.shape)
            once = project_leray(raw, lat)
            twice = project_leray(once.vector_coeffs(), lat)
            worst["leray_idempotency"] = max(worst["leray_idempotency"], float(np.max(np.abs(twice.coeffs - once.coeffs)) / max(1.0, float(np.max(np.abs(once.coeffs))))))
            b = bilinear_B(u, v)
            hb, hv = math.sqrt(sobolev_norm_sq(b, 0)), math.sqrt(sobolev_norm_sq(v, 0))
            worst["skew_symmetry"] = max(worst["skew_symmetry"], abs(inner(b, v)) / (hb * hv))
            bu, au = bilinear_B(u, u), stokes(u)
            den = math.sqrt(sobolev_norm_sq(bu, 0) * sobolev_norm_sq(au, 0))
            worst["vorticity_identity"] = max(worst["vorticity_identity"], abs(inner(bu, au)) / den)
            p = transform_to_physical(u)
            worst["parseval"] = max(worst["parseval"], abs(float(np.mean(p.u1**2 + p.u2**2)) / sobolev_norm_sq(u, 0) - 1))
            a = apply_semigroup(apply_semigroup(u, 0.013, 0.7), 0.029, 0.7)
            c = apply_semigroup(u, 0.042, 0.7)
            worst["semigroup_composition"] = max(worst["semigroup_composition"], float(np.max(np.abs(a.coeffs - c.coeffs)) / np.max(np.abs(u.coeffs))))
        tol = {"leray_idempotency": 1e-15, "skew_symmetry": 1e-12, "vorticity_identity": 1e-11,
               "parseval": 1e-12, "semigroup_composition": 1e-14}
        for k, v in worst.items():
            rows.append((f"{k}_N{n}", v, 0.0, tol[k], math.nan, v <= tol[k]))
    return rows


def _identity_rows(rc, cfg, acc):
    st = rc.statistics
    reps = [enstrophy_identity_check(acc, cfg.noise, cfg.nu, cfg.noise2, n_batches=st.n_batches)]
    for p in st.p_list:
        reps.append(p_moment_identity_check(acc, cfg.noise, cfg.nu, p, cfg.noise2, n_batches=st.n_batches))
        reps.append(vorticity_moment_identity_check(acc, cfg.noise, cfg.nu, p, cfg.noise2, n_batches=st.n_batches))
    return reps


def _ou_checks(rc, cfg):
    """Linear (B disabled) run against the exact OU stationary moments."""
    cfg = replace(cfg, nonlinear=False, checkpoint_every=0)
    acc = StatsAccumulator()
    integrate(cfg, [MomentObserver(acc, (2,), cfg.noise, cfg.noise2)])
    lat = cfg.lattice
    nb = rc.statistics.n_batches
    g = np.where(lat.gamma > 0, lat.gamma, 1.0)
    rows = []
    for comp, model in (("u", cfg.noise), ("w", cfg.noise2)):
        energy = float(np.sum(lat.weight * model.q / (2 * cfg.nu * g)))
        enst = model.trace_q / (2 * cfg.nu)
        for key, ref in ((f"{comp}_H", energy), (f"{comp}_V", enst)):
            mean, se = acc.mean(key), acc.batch_se(key, nb)
            rows.append((f"ou_{key}", mean, ref, 3.0, se, abs(mean - ref) <= 3 * se))
    return rows


def run_verify(rc, out_dir, suite, threads=1):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = rc.simulation_config(checkpoint_every=0)
    manifest = _manifest(f"verify {suite}", rc, threads)
    code = 0
    try:
        if suite == "spectral":
            rows = _spectral_checks(rc)
        elif suite == "reduction":
            d, qmax = reduction_oracle(cfg, cfg.n_steps)
            rows = [("reduction_max_distance", d, 0.0, 1e-11 * (1 + qmax), math.nan, d <= 1e-11 * (1 + qmax))]
            print(f"reduction: max |q - (u + lam w)|_H = {d:.3e} over {cfg.n_steps} steps (lam={cfg.lam})")
        elif suite == "symmetry":
            d, nmax = symmetric_form_oracle(cfg, cfg.n_steps)
            rows = [("symmetric_form_max_distance", d, 0.0, 1e-11 * (1 + nmax), math.nan, d <= 1e-11 * (1 + nmax))]
            print(f"symmetry: max distance = {d:.3e} over {cfg.n_steps} steps (lam={cfg.lam})")
        elif suite == "identities":
            acc = StatsAccumulator()
            integrate(cfg, [_observer(replace(rc, statistics=replace(rc.statistics, track_transfer=True)), cfg, acc)])
            reps = _identity_rows(rc, cfg, acc)
            rows = [(r.name, r.lhs, r.rhs, max(0.10, 3 * r.stderr / abs(r.rhs)) if r.rhs else 0.0, r.stderr, r.passed)
                    for r in reps]
            write_csv(out / "identities.csv", IDENTITY_COLUMNS,
                      [r.row() + (r.rhs_ito, r.note) for r in reps])
            manifest.add(out / "identities.csv", out)
        elif suite == "ou":
            rows = _ou_checks(rc, cfg)
        else:
            raise ConfigError(f"unknown suite {suite!r}")
    except InsufficientDataError as exc:
        print(f"verify {suite}: insufficient-data: {exc}")
        rows = [(f"{suite}_insufficient_data", math.nan, math.nan, math.nan, math.nan, False)]
        code = 3
    except (BlowUpError, StabilityError) as exc:
        print(f"verify {suite}: numerical failure: {exc}")
        rows = [(f"{suite}_numerics", math.nan, math.nan, math.nan, math.nan, False)]
        code = 2
    path = write_csv(out / f"verify_{suite}.csv", CHECK_COLUMNS, rows)
    manifest.add(path, out)
    n_pass = sum(bool(r[-1]) for r in rows)
    manifest.status = "ok" if code == 0 and n_pass == len(rows) else "failed"
    manifest.write(out)
    print(f"verify {suite}: {n_pass}/{len(rows)} checks passed")
    if code:
        return code
    return 0 if n_pass == len(rows) else 1


# sweep ---------------------------------------------------------------------


def _stationary_job(rc_dict, lam, replica, tag):
    rc = from_dict(rc_dict)
    cfg = rc.simulation_config(lam=lam, replica=replica, stream_tag=tag, checkpoint_every=0)
    acc = StatsAccumulator()
    try:
        integrate(cfg, [_observer(rc, cfg, acc)])
    except (BlowUpError, StabilityError) as exc:
        return lam, replica, None, str(exc)
    return lam, replica, {n: acc.series(n) for n in acc.names}, None


def run_sweep(rc, out_dir, threads=1):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sw = rc.sweep
    manifest = _manifest("sweep", rc, threads)
    cfg = rc.simulation_config(checkpoint_every=0)
    lambdas = [float(l) for l in sw.lambdas if float(l) != sw.lam0]
    failures = {}
    if sw.shared_noise and lambdas:
        res = lambda_sweep(cfg, lambdas, cfg.n_steps, lam0=sw.lam0)
        rows = []
        for lam in res.lambdas:
            failed = res.failed.get(lam, "")
            if failed:
                failures[lam] = failed
            d = abs(lam - sw.lam0)
            rows.append((lam, res.e_u[lam], res.e_w[lam], res.e_u[lam] / d, res.e_w[lam] / d, failed or "ok"))
        p = write_csv(out / "sweep_pathwise.csv", ("lam", "e_u", "e_w", "e_u_over_dlam", "e_w_over_dlam", "status"), rows)
        manifest.add(p, out)
    jobs = []
    all_l = [sw.lam0] + lambdas
    for i, lam in enumerate(all_l):
        for r in range(sw.replicas):
            jobs.append((rc.to_dict(), lam, r, 0 if sw.shared_noise else i))
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_stationary_job, *zip(*jobs)))
    else:
        results = [_stationary_job(*j) for j in jobs]
    accs = {}
    for lam, r, series, err in results:
        if err is not None:
            failures[lam] = err
            continue
        acc = StatsAccumulator.from_series(series)
        accs[lam] = accs[lam].merge(acc) if lam in accs else acc
    for lam, acc in accs.items():
        p = write_csv(out / f"stationary_lam{lam:+.6g}.csv", SUMMARY_COLUMNS, _summary_rows(acc, rc.statistics.n_batches))
        manifest.add(p, out)
    panel = list(sw.panel) + [f"S2_u_m{m}" for m in rc.statistics.s2_separations]
    conv_rows, summ_rows = [], []
    ok_runs = {l: a for l, a in accs.items() if l not in failures}
    code = 0
    if sw.lam0 in ok_runs and len(ok_runs) > 1:
        try:
            rep = measure_convergence_report(ok_runs, sw.lam0, panel, rc.statistics.n_batches)
        except InsufficientDataError as exc:
            print(f"sweep: insufficient-data: {exc}")
            rep = None
            code = 3
        if rep is not None:
            conv_rows = [(r.observable, r.lam, r.distance, r.stderr) for r in rep.rows]
            summ_rows = [(s.observable, " ".join(f"{l:g}" for l in s.lambdas), " ".join(repr(d) for d in s.distances),
                          s.monotone, s.endpoint_gap, s.endpoint_se, s.endpoint_pass) for s in rep.summaries]
    p1 = write_csv(out / "convergence.csv", ("observable", "lam", "distance", "stderr"), conv_rows)
    p2 = write_csv(out / "convergence_summary.csv",
                   ("observable", "lambdas", "distances", "monotone", "endpoint_gap", "endpoint_se", "endpoint_pass"),
                   summ_rows)
    manifest.add(p1, out)
    manifest.add(p2, out)
    if failures:
        manifest.status = "failed: " + "; ".join(f"lam={l}: {m}" for l, m in sorted(failures.items()))
        print(f"sweep: {len(failures)} coupling value(s) failed")
        code = 2
    manifest.write(out)
    return code


# structure -----------------------------------------------------------------


def run_structure(rc, out_dir, pattern, threads=1):
    paths = sorted(glob.glob(pattern))
    if not paths:
        raise ConfigError(f"no checkpoint matches {pattern!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest("structure", rc, threads)
    states, lam = [], None
    for p in paths:
        s, head = checkpoint.load(p)
        states.append(s)
        lam = head["lam"] if lam is None else lam
    st = rc.statistics
    tu, tw = structure_functions(states, st.structure_orders, st.directions)
    p = write_csv(out / "structure.csv", ("field", "p", "l", "signed_S", "abs_S", "count"), tu.rows("u") + tw.rows("w"))
    manifest.add(p, out)
    code = 0
    fit_rows = []
    for name, table in (("u", tu), ("w", tw)):
        try:
            fit = scaling_fit(table, tuple(st.fit_range) or None)
            fit_rows.extend(fit.rows(name))
        except FitError as exc:
            print(f"structure: fit refused for {name}: {exc}")
            code = 3
    p = write_csv(out / "fits.csv", ("field", "p", "zeta", "stderr", "intercept", "r2", "l_min", "l_max"), fit_rows,
                  notes=("zeta fitted on the absolute variant",))
    manifest.add(p, out)
    if lam:
        ok, worst = rescaling_check([s.w for s in states], tw, lam)
        p = write_csv(out / "rescaling.csv", ("lam", "worst_rel_dev", "pass"), [(lam, worst, ok)])
        manifest.add(p, out)
        print(f"structure: rescaling check lam={lam:g} {'pass' if ok else 'FAIL'} (worst {worst:.2e})")
        if not ok and code == 0:
            code = 1
    manifest.write(out)
    return code

