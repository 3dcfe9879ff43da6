//! Subcommand implementations. Each writes its files under an output
//! directory and returns what it wrote so callers can inspect results
//! without re-parsing.

use std::fs;
use std::path::Path;

use crate::analysis::{
    construct_peps, estimate_contraction, iss_gain_fit, iss_sweep, probe_delta0, probe_delta1,
    quadratic_constants, trajectory_alpha, BallEstimate, DirectionKind, ErrorNorm, Method,
};
use crate::error::LqrError;
use crate::inexact::{
    inexact_pi_run, inexact_vi_run, make_schedule, EstimateSequence, RobustTrace, Schedule,
};
use crate::lqr::{gain_l, Gain, Kernel, LqrProblem};
use crate::oracle::{solve_dare_bruteforce, CertifiedSolution};
use crate::sampling::rng;
use crate::solvers::{pi_run, vi_run, IterationTrace, PiInit, Reference, StopRule, Termination};

use super::config::{benchmark_system, Algorithm, DirectionMode, ExperimentConfig, Init};
use super::output::{fmt_matrix, save_manifest, save_trace_csv, ManifestEntry, Report};
use super::CliError;

fn oracle(prob: &LqrProblem) -> Result<CertifiedSolution, CliError> {
    solve_dare_bruteforce(prob).map_err(CliError::Solve)
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

/// Solves the DARE and writes `solve.txt`.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<(CertifiedSolution, Report), CliError> {
    let sol = oracle(&cfg.problem)?;
    let mut rep = Report::new();
    rep.push("n_states", cfg.problem.n_states());
    rep.push("n_inputs", cfg.problem.n_inputs());
    rep.push("p_star", fmt_matrix(sol.p_star.as_mat()));
    rep.push("k_star", fmt_matrix(sol.k_star.mat()));
    rep.float("residual", sol.residual);
    rep.push("iterations", sol.iterations_used);
    match construct_peps(&cfg.problem, &sol.p_star) {
        Ok(w) => rep.float("contraction_at_optimum", w.contraction_at_optimum),
        Err(e) => rep.push("contraction_at_optimum", format!("unavailable ({e})")),
    }
    ensure_dir(out)?;
    let path = out.join("solve.txt");
    rep.save(&path).map_err(io_err(&path))?;
    Ok((sol, rep))
}

fn estimate_sequence(cfg: &ExperimentConfig) -> Result<EstimateSequence, CliError> {
    let plant = cfg.problem.plant();
    let seq = match cfg.perturbation {
        DirectionMode::Identity => make_schedule(cfg.schedule.clone(), plant),
        DirectionMode::Random => {
            EstimateSequence::random_directions(cfg.schedule.clone(), plant, &mut rng(cfg.seed))
        }
    };
    seq.map_err(|e| CliError::Usage(e.to_string()))
}

/// Output of a single configured run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trace: IterationTrace,
    pub offsets: Option<(Vec<f64>, Vec<f64>)>,
}

/// Runs the configured algorithm; `P*` (when the oracle succeeds) fills the
/// error columns.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunResult, CliError> {
    let prob = &cfg.problem;
    let p_star = match solve_dare_bruteforce(prob) {
        Ok(sol) => Some(sol.p_star),
        Err(e) if cfg.init.needs_pstar() => return Err(CliError::Solve(e)),
        Err(_) => None,
    };
    let reference = p_star.as_ref().map(|p| Reference::new(prob, p.clone()));
    let stop = StopRule::new(cfg.tol, cfg.max_iter).map_err(|e| CliError::Usage(e.to_string()))?;
    let usage = |e: super::config::ConfigError| CliError::Usage(e.to_string());
    let pi_init = || -> Result<PiInit, CliError> {
        Ok(match &cfg.init {
            Init::Kernel(k) => PiInit::Kernel(k.resolve(prob.n_states(), p_star.as_ref()).map_err(usage)?),
            Init::Gain(g) => PiInit::Gain(g.resolve(prob, p_star.as_ref()).map_err(usage)?),
        })
    };
    let kernel_init = || -> Result<Kernel, CliError> {
        match &cfg.init {
            Init::Kernel(k) => k.resolve(prob.n_states(), p_star.as_ref()).map_err(usage),
            Init::Gain(_) => Err(CliError::Usage("value iteration needs a kernel init".into())),
        }
    };
    let robust = |r: RobustTrace| RunResult {
        trace: r.trace,
        offsets: Some((r.a, r.b)),
    };
    Ok(match cfg.algorithm {
        Algorithm::Vi => RunResult {
            trace: vi_run(prob, kernel_init()?, stop, reference.as_ref()),
            offsets: None,
        },
        Algorithm::Pi => RunResult {
            trace: pi_run(prob, pi_init()?, stop, reference.as_ref()),
            offsets: None,
        },
        Algorithm::InexactVi => robust(
            inexact_vi_run(prob, kernel_init()?, &estimate_sequence(cfg)?, stop, reference.as_ref())
                .map_err(CliError::Solve)?,
        ),
        Algorithm::InexactPi => robust(
            inexact_pi_run(prob, pi_init()?, &estimate_sequence(cfg)?, stop, reference.as_ref())
                .map_err(CliError::Solve)?,
        ),
    })
}

fn save_run(path: &Path, run: &RunResult) -> Result<(), CliError> {
    let offsets = run.offsets.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()));
    save_trace_csv(path, &run.trace, offsets).map_err(io_err(path))
}

/// Runs the configured algorithm and writes `trace.csv`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<RunResult, CliError> {
    let run = execute(cfg)?;
    ensure_dir(out)?;
    save_run(&out.join("trace.csv"), &run)?;
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
        }
    }
}

/// Iteration cap for reproduced curves.
pub const REPRODUCE_MAX_ITER: usize = 1000;

/// Figure 2 curves stop on the step rule; figure 3 curves run the full
/// horizon unless an exact fixed point is reached.
pub fn reproduce_stop(figure: Figure, max_iter: Option<usize>) -> Result<StopRule, CliError> {
    let tol = match figure {
        Figure::Fig2 => 1e-12,
        Figure::Fig3 => f64::MIN_POSITIVE,
    };
    StopRule::new(tol, max_iter.unwrap_or(REPRODUCE_MAX_ITER))
        .map_err(|e| CliError::Usage(e.to_string()))
}

/// One reproduced curve. `run` is `Err` when the run could not start.
#[derive(Debug, Clone)]
pub struct Curve {
    pub id: &'static str,
    pub run: Result<RunResult, String>,
}

fn exact_curve(id: &'static str, trace: IterationTrace) -> Curve {
    Curve {
        id,
        run: Ok(RunResult {
            trace,
            offsets: None,
        }),
    }
}

/// The six convergence curves on the benchmark plant.
pub fn fig2_curves(stop: StopRule) -> Result<(Reference, Vec<Curve>), CliError> {
    let prob = benchmark_system();
    let ps = oracle(&prob)?.p_star;
    let reference = Reference::new(&prob, ps.clone());
    let r = Some(&reference);
    let pi = |c: f64| pi_run(&prob, PiInit::Kernel(ps.scale(c)), stop, r);
    let curves = vec![
        exact_curve("vi-2pstar", vi_run(&prob, ps.scale(2.0), stop, r)),
        exact_curve("pi-2pstar", pi(2.0)),
        exact_curve("vi-zero", vi_run(&prob, Kernel::zeros(3), stop, r)),
        exact_curve("pi-zero", pi_run(&prob, PiInit::Kernel(Kernel::zeros(3)), stop, r)),
        exact_curve("pi-0.5pstar", pi(0.5)),
        exact_curve("pi-0.7pstar", pi(0.7)),
    ];
    Ok((reference, curves))
}

pub fn vanishing_schedule() -> Schedule {
    Schedule::GeometricVanishing {
        rho: 0.01,
        gamma: 0.9,
    }
}

pub fn floor_schedule() -> Schedule {
    Schedule::GeometricPlusFloor {
        rho: 0.01,
        gamma: 0.6,
        phi: 0.1,
    }
}

/// Inexact VI from `2P*` and inexact PI from the gain `-L(2P*)` under the
/// vanishing and the floor schedule.
pub fn fig3_curves(stop: StopRule) -> Result<(Reference, Vec<Curve>), CliError> {
    let prob = benchmark_system();
    let ps = oracle(&prob)?.p_star;
    let reference = Reference::new(&prob, ps.clone());
    let p0 = ps.scale(2.0);
    let k0 = Gain::new(gain_l(&prob, &p0).map_err(CliError::Solve)?.scale(-1.0));
    let mut curves = Vec::new();
    for (tag, schedule) in [("vanishing", vanishing_schedule()), ("floor", floor_schedule())] {
        let seq = make_schedule(schedule, prob.plant()).map_err(CliError::Solve)?;
        let vi = inexact_vi_run(&prob, p0.clone(), &seq, stop, Some(&reference));
        let pi = inexact_pi_run(&prob, PiInit::Gain(k0.clone()), &seq, stop, Some(&reference));
        let wrap = |r: crate::error::Result<RobustTrace>| {
            r.map(|r| RunResult {
                trace: r.trace,
                offsets: Some((r.a, r.b)),
            })
            .map_err(|e| e.to_string())
        };
        let (vi_id, pi_id) = match tag {
            "vanishing" => ("vi-vanishing", "pi-vanishing"),
            _ => ("vi-floor", "pi-floor"),
        };
        curves.push(Curve { id: vi_id, run: wrap(vi) });
        curves.push(Curve { id: pi_id, run: wrap(pi) });
    }
    Ok((reference, curves))
}

pub const PLATEAU_WINDOW: usize = 20;

/// Last [`PLATEAU_WINDOW`] errors agree to 1e-10 while staying above 1e-8.
pub fn plateau_detected(errors: &[f64]) -> bool {
    if errors.len() < PLATEAU_WINDOW {
        return false;
    }
    let tail = &errors[errors.len() - PLATEAU_WINDOW..];
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo <= 1e-10 && lo > 1e-8
}

fn curve_summary(rep: &mut Report, curve: &Curve) {
    let id = curve.id;
    let run = match &curve.run {
        Ok(run) => run,
        Err(e) => {
            rep.push(format!("{id}.error"), e);
            return;
        }
    };
    let t = &run.trace;
    rep.push(format!("{id}.termination"), t.termination);
    rep.push(format!("{id}.records"), t.len());
    let errors = t.frob_errors().unwrap_or_default();
    if let Some(e) = errors.last() {
        rep.float(format!("{id}.final_frob_error"), *e);
    }
    if let Some(e) = errors.iter().take(201).copied().reduce(f64::min) {
        rep.float(format!("{id}.min_frob_error_first_200"), e);
    }
    if let Some(d) = t.records.iter().take(61).filter_map(|r| r.dare_residual).reduce(f64::min) {
        rep.float(format!("{id}.min_dare_residual_first_60"), d);
    }
    rep.push(format!("{id}.plateau"), plateau_detected(&errors));
}

/// Writes one CSV per curve, a manifest and a summary report.
pub fn cmd_reproduce(
    figure: Figure,
    out: &Path,
    max_iter: Option<usize>,
) -> Result<Vec<ManifestEntry>, CliError> {
    let stop = reproduce_stop(figure, max_iter)?;
    let (reference, curves) = match figure {
        Figure::Fig2 => fig2_curves(stop)?,
        Figure::Fig3 => fig3_curves(stop)?,
    };
    ensure_dir(out)?;
    let fig = figure.name();
    let mut manifest = Vec::new();
    let mut rep = Report::new();
    rep.push("figure", fig);
    rep.push("p_star", fmt_matrix(reference.p_star.as_mat()));
    rep.push("max_iter", stop.max_iter);
    for c in &curves {
        let file = format!("{fig}-{}.csv", c.id);
        let reason = match &c.run {
            Ok(run) => {
                save_run(&out.join(&file), run)?;
                run.trace.termination.as_str().to_string()
            }
            Err(e) => format!("error: {e}"),
        };
        manifest.push(ManifestEntry {
            curve_id: c.id.to_string(),
            file,
            reason,
        });
        curve_summary(&mut rep, c);
    }
    let path = out.join(format!("{fig}-manifest.csv"));
    save_manifest(&path, &manifest).map_err(io_err(&path))?;
    let path = out.join(format!("{fig}-report.txt"));
    rep.save(&path).map_err(io_err(&path))?;
    Ok(manifest)
}

fn ball(rep: &mut Report, key: &str, est: &BallEstimate, cap: f64) {
    rep.float(format!("{key}.radius"), est.radius);
    rep.push(format!("{key}.directions"), est.directions_tested);
    rep.float(format!("{key}.cap"), cap);
    rep.push(format!("{key}.cap_reached"), est.failure_direction.is_none());
}

/// Runs the analysis instruments and writes `analyze.txt`.
pub fn cmd_analyze(cfg: &ExperimentConfig, out: &Path) -> Result<Report, CliError> {
    let prob = &cfg.problem;
    let ctx = |what: &str| {
        let what = what.to_string();
        move |e: LqrError| CliError::Analysis(format!("{what}: {e}"))
    };
    let sol = oracle(prob)?;
    let ps = sol.p_star;
    let w = construct_peps(prob, &ps).map_err(ctx("P_eps construction"))?;
    let reference = Reference {
        p_star: ps.clone(),
        peps: Some(w.clone()),
    };
    let mut rep = Report::new();
    rep.push("n_states", prob.n_states());
    rep.push("n_inputs", prob.n_inputs());
    rep.push("seed", cfg.seed);
    rep.float("dare_residual", sol.residual);
    rep.float("contraction_at_optimum", w.contraction_at_optimum);

    let stop = StopRule::new(cfg.tol, cfg.max_iter).map_err(|e| CliError::Usage(e.to_string()))?;
    let vi = vi_run(prob, ps.scale(2.0), stop, Some(&reference));
    rep.push("vi_2pstar.termination", vi.termination);
    match estimate_contraction(&vi, &ps, ErrorNorm::Frobenius) {
        Ok(c) => rep.float("vi_2pstar.contraction_frobenius", c),
        Err(e) => rep.push("vi_2pstar.contraction_frobenius", format!("unavailable ({e})")),
    }
    match estimate_contraction(&vi, &ps, ErrorNorm::Peps(&w.peps)) {
        Ok(c) => rep.float("vi_2pstar.contraction_peps", c),
        Err(e) => rep.push("vi_2pstar.contraction_peps", format!("unavailable ({e})")),
    }
    rep.float(
        "vi_2pstar.trajectory_alpha",
        trajectory_alpha(prob, &vi, &w.peps).map_err(ctx("trajectory alpha"))?,
    );

    let cap = cfg.radius_cap.unwrap_or((10.0 * ps.frob_norm()).max(1.0));
    let mut r = rng(cfg.seed);
    let n_dirs = cfg.probe_directions;
    let d0 = probe_delta0(prob, &ps, n_dirs, cap, DirectionKind::Symmetric, &mut r);
    ball(&mut rep, "delta0", &d0, cap);
    let d0_psd = probe_delta0(prob, &ps, n_dirs, cap, DirectionKind::Psd, &mut r);
    ball(&mut rep, "delta0_psd", &d0_psd, cap);
    let d1 = probe_delta1(prob, &ps, d0.radius, n_dirs, &mut r);
    ball(&mut rep, "delta1", &d1, d0.radius);

    let (a0, a1) = quadratic_constants(prob, &ps, &ps).map_err(ctx("quadratic constants"))?;
    rep.float("quadratic.a0", a0);
    rep.float("quadratic.a1_at_pstar", a1);

    let p0 = ps.scale(2.0);
    for method in [Method::Vi, Method::Pi] {
        let m = method.as_str();
        let pts = iss_sweep(prob, &reference, method, &p0, &cfg.iss_rhos)
            .map_err(ctx(&format!("{m} ISS sweep")))?;
        let (slope, r2) = iss_gain_fit(&pts).map_err(ctx(&format!("{m} ISS fit")))?;
        let listing = pts
            .iter()
            .map(|(rho, e)| format!("{rho:e}:{e:.16e}"))
            .collect::<Vec<_>>()
            .join(" ");
        rep.push(format!("iss.{m}.points"), listing);
        rep.push(
            format!("iss.{m}.monotone"),
            pts.windows(2).all(|w| w[1].1 >= w[0].1),
        );
        rep.float(format!("iss.{m}.slope"), slope);
        rep.float(format!("iss.{m}.r_squared"), r2);
    }

    ensure_dir(out)?;
    let path = out.join("analyze.txt");
    rep.save(&path).map_err(io_err(&path))?;
    Ok(rep)
}

/// Process exit code for a finished run.
pub fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::Converged => 0,
        Termination::UnstablePolicy => 3,
        Termination::MaxIter => 4,
        Termination::Singularity => 5,
    }
}
