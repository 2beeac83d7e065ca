//! `singular-arc <construct|diagnose|regularize|certify>`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arm2dof::Arm2Dof;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::integrate::{
    hamiltonian_trace, hamiltonian_variation, integrate_extremal, resimulate, ControlSignal, FlagKind, RunFlag, Trajectory,
};
use crate::io;
use crate::liegeom::{alpha_coefficients, b_set_certificate, frame_rank};
use crate::linalg::norm;
use crate::model::MechModel;
use crate::pmp::{lemma1_certificate, switching, SingularRegion};
use crate::regularize::{
    costate_ratio_trace, detect_singular_arcs, pmp_audit, regularize_u1, Audit, Classification, RegularizationReport,
    SingularInterval,
};

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success = 0,
    Failure = 1,
    Usage = 2,
    Schema = 3,
    RkViolation = 4,
    CostateDegenerate = 5,
    PartialRegularization = 6,
    ViolationRemaining = 7,
    OutOfBounds = 8,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Schema(_) | Error::Monotonicity { .. } | Error::NaN { .. } | Error::Csv(_) => ExitStatus::Schema,
            Error::RkViolation { .. } => ExitStatus::RkViolation,
            Error::CostateDegenerate { .. } | Error::MissingCostates => ExitStatus::CostateDegenerate,
            Error::OutOfBounds { .. } => ExitStatus::OutOfBounds,
            Error::Config(_) => ExitStatus::Usage,
            _ => ExitStatus::Failure,
        }
    }

    fn from_flag(kind: FlagKind) -> Self {
        match kind {
            FlagKind::RkViolation | FlagKind::RkVelocityBand => ExitStatus::RkViolation,
            FlagKind::CostateDegenerate | FlagKind::MissingCostates => ExitStatus::CostateDegenerate,
            FlagKind::OutOfBounds => ExitStatus::OutOfBounds,
            FlagKind::NonFinite => ExitStatus::Failure,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "singular-arc", version, about = "Singular-arc extremals and control regularization for a 2-DOF arm")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the u1-singular extremal and write it as a trajectory file.
    Construct(CommonArgs),
    /// Switching functions, Hamiltonian, R_k membership and PMP audit of a trajectory.
    Diagnose(CommonArgs),
    /// Detect singular arcs and replace u1 on them by the closed-form law.
    Regularize(CommonArgs),
    /// Sampled evidence for the bracket identities and the frame conditions.
    Certify(CommonArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Input trajectory (diagnose, regularize).
    pub trajectory: Option<PathBuf>,
    /// TOML configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Primary output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of sampled states (certify).
    #[arg(long)]
    pub samples: Option<usize>,
    /// RNG seed (certify).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Integration step [s].
    #[arg(long)]
    pub step: Option<f64>,
    /// Singular band factor for |φ|.
    #[arg(long = "tol-phi")]
    pub tol_phi: Option<f64>,
    /// Worker threads (certify); results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Per-sample classification CSV (diagnose, regularize).
    #[arg(long)]
    pub classification: Option<PathBuf>,
}

impl CommonArgs {
    /// Config file (or defaults) with command-line overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.step {
            cfg.integrator.step = s;
        }
        if let Some(e) = self.tol_phi {
            cfg.tolerances.pmp.phi = e;
        }
        if let Some(n) = self.samples {
            cfg.certify.samples = n;
        }
        if let Some(s) = self.seed {
            cfg.certify.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.certify.workers = w;
        }
        if self.trajectory.is_some() {
            cfg.paths.trajectory = self.trajectory.clone();
        }
        if self.out.is_some() {
            cfg.paths.out = self.out.clone();
        }
        if self.classification.is_some() {
            cfg.paths.classification = self.classification.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Usage.code() } else { 0 };
        }
    };
    let outcome = match &cli.command {
        Command::Construct(a) => a.resolve().and_then(|c| cmd_construct(&c)),
        Command::Diagnose(a) => a.resolve().and_then(|c| cmd_diagnose(&c)),
        Command::Regularize(a) => a.resolve().and_then(|c| cmd_regularize(&c)),
        Command::Certify(a) => a.resolve().and_then(|c| cmd_certify(&c).map(|_| ExitStatus::Success)),
    };
    match outcome {
        Ok(status) => status.code(),
        Err(e) => {
            let status = ExitStatus::from_error(&e);
            eprintln!("error ({status:?}): {e}");
            status.code()
        }
    }
}

fn out_path(cfg: &RunConfig, default: &str) -> PathBuf {
    cfg.paths.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn input_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.paths
        .trajectory
        .as_deref()
        .ok_or_else(|| Error::Config("no input trajectory given (positional argument or paths.trajectory)".into()))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.9}")).collect();
    format!("[{}]", parts.join(", "))
}

#[derive(Debug, Serialize)]
pub struct ConstructSummary {
    pub samples: usize,
    pub max_abs_phi1: f64,
    pub max_abs_phi1_dot: f64,
    /// Same maxima divided by `‖λ(t)‖` sample-wise.
    pub max_rel_phi1: f64,
    pub max_rel_phi1_dot: f64,
    pub hamiltonian_variation: f64,
    pub endpoint: Vec<f64>,
    pub flags: Vec<RunFlag>,
    pub aborted: Option<FlagKind>,
}

pub fn construct_summary<M: MechModel>(model: &M, traj: &Trajectory) -> Result<ConstructSummary> {
    let (mut a, mut ad, mut r, mut rd) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for s in &traj.samples {
        let l = s.lambda.as_ref().ok_or(Error::MissingCostates)?;
        let sw = switching(model, &s.x, l)?;
        let n = norm(l);
        a = a.max(sw.phi[0].abs());
        ad = ad.max(sw.phi_dot[0].abs());
        r = r.max(sw.phi[0].abs() / n);
        rd = rd.max(sw.phi_dot[0].abs() / n);
    }
    Ok(ConstructSummary {
        samples: traj.len(),
        max_abs_phi1: a,
        max_abs_phi1_dot: ad,
        max_rel_phi1: r,
        max_rel_phi1_dot: rd,
        hamiltonian_variation: hamiltonian_variation(&hamiltonian_trace(model, traj)?),
        endpoint: traj.final_state().map(<[f64]>::to_vec).unwrap_or_default(),
        flags: traj.meta.flags.clone(),
        aborted: traj.meta.aborted,
    })
}

pub fn cmd_construct(cfg: &RunConfig) -> Result<ExitStatus> {
    let arm = cfg.arm()?;
    let bounds = cfg.bounds()?;
    let l0 = cfg.lambda0(&arm)?;
    let mut traj = integrate_extremal(
        &arm,
        &cfg.initial.x0,
        &l0,
        &cfg.integrator,
        cfg.initial.u2,
        &bounds,
        &cfg.tolerances.pmp,
    )?;
    traj.meta.config = serde_json::json!({ "run": cfg, "integration": traj.meta.config });
    let out = out_path(cfg, "extremal.csv");
    io::write_trajectory(&traj, &out)?;
    let summary = construct_summary(&arm, &traj)?;
    println!("wrote {} ({} samples)", out.display(), summary.samples);
    println!("max|phi1|  = {:.3e} (relative {:.3e})", summary.max_abs_phi1, summary.max_rel_phi1);
    println!("max|phi1'| = {:.3e} (relative {:.3e})", summary.max_abs_phi1_dot, summary.max_rel_phi1_dot);
    println!("H variation = {:.3e}", summary.hamiltonian_variation);
    println!("x(T) = {}", fmt_vec(&summary.endpoint));
    for f in &summary.flags {
        println!("flag {:?} at t = {}: {}", f.kind, f.t, f.detail);
    }
    Ok(match traj.meta.aborted {
        Some(kind) => {
            eprintln!("integration aborted: {kind:?}");
            ExitStatus::from_flag(kind)
        }
        None => ExitStatus::Success,
    })
}

#[derive(Debug, Serialize)]
pub struct ClassCounts {
    pub upper_bang: usize,
    pub lower_bang: usize,
    pub singular: usize,
    pub violation: usize,
}

impl ClassCounts {
    fn of(audit: &Audit, channel: usize) -> Self {
        Self {
            upper_bang: audit.count(channel, Classification::UpperBang),
            lower_bang: audit.count(channel, Classification::LowerBang),
            singular: audit.count(channel, Classification::Singular),
            violation: audit.count(channel, Classification::Violation),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DiagnoseReport {
    pub samples: usize,
    pub missing_costates: bool,
    /// Final state of a resimulation under the recorded control.
    pub resimulated_endpoint: Vec<f64>,
    pub recorded_endpoint: Vec<f64>,
    pub endpoint_error: f64,
    pub max_abs_phi: Option<Vec<f64>>,
    pub max_abs_phi_dot: Option<Vec<f64>>,
    pub hamiltonian_variation: Option<f64>,
    pub samples_in_rk: usize,
    pub intervals: Vec<SingularInterval>,
    pub classification: Option<Vec<ClassCounts>>,
    pub series: Option<PathBuf>,
}

fn write_classification(path: &Path, traj: &Trajectory, audit: &Audit) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=audit.channels.len()).map(|i| format!("u{i}_class")));
    w.write_record(&header)?;
    for (k, s) in traj.samples.iter().enumerate() {
        let mut row = vec![io::fmt_f64(s.t)];
        row.extend(audit.channels.iter().map(|c| c[k].as_str().to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn resimulated_endpoint<M: MechModel>(model: &M, traj: &Trajectory, cfg: &RunConfig) -> Result<(Vec<f64>, f64)> {
    let sig = ControlSignal::from_trajectory(traj, cfg.integrator.interpolation);
    let resim = resimulate(model, &traj.samples[0].x, &sig, cfg.integrator.step)?;
    let end = resim.final_state().expect("non-empty").to_vec();
    let rec = traj.final_state().expect("non-empty");
    let err = norm(&end.iter().zip(rec).map(|(a, b)| a - b).collect::<Vec<_>>());
    Ok((end, err))
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<ExitStatus> {
    let arm = cfg.arm()?;
    let bounds = cfg.bounds()?;
    let traj = io::ingest(input_path(cfg)?)?;
    let out = out_path(cfg, "diagnose.json");
    let (resim_end, endpoint_error) = resimulated_endpoint(&arm, &traj, cfg)?;
    let tol = &cfg.tolerances.pmp;
    let samples_in_rk = traj.samples.iter().filter(|s| arm.rk_check(&s.x, tol).contains()).count();

    if !traj.has_costates() {
        println!("MissingCostates: trajectory has no costate columns; only resimulation diagnostics are available");
        let report = DiagnoseReport {
            samples: traj.len(),
            missing_costates: true,
            resimulated_endpoint: resim_end,
            recorded_endpoint: traj.final_state().unwrap_or_default().to_vec(),
            endpoint_error,
            max_abs_phi: None,
            max_abs_phi_dot: None,
            hamiltonian_variation: None,
            samples_in_rk,
            intervals: Vec::new(),
            classification: None,
            series: None,
        };
        io::write_json(&report, &out)?;
        println!("resimulated endpoint error = {endpoint_error:.3e}");
        return Ok(ExitStatus::Success);
    }

    let sw = crate::regularize::switching_trace(&arm, &traj)?;
    let h = hamiltonian_trace(&arm, &traj)?;
    let ratio = costate_ratio_trace(&traj, tol).ok();
    let audit = pmp_audit(&arm, &traj, &bounds, tol, &cfg.tolerances.detection)?;
    let intervals = detect_singular_arcs(&arm, &traj, &bounds, &cfg.tolerances.detection)?;

    let series_path = io::with_suffix(&out, ".series.csv");
    let mut w = csv::Writer::from_path(&series_path)?;
    w.write_record(["t", "phi1", "phi2", "phi1_dot", "phi2_dot", "H", "in_rk", "l2_over_l4", "u1_class", "u2_class"])?;
    for (k, s) in traj.samples.iter().enumerate() {
        let r = &sw[k];
        w.write_record([
            io::fmt_f64(s.t),
            io::fmt_f64(r.phi[0]),
            io::fmt_f64(r.phi[1]),
            io::fmt_f64(r.phi_dot[0]),
            io::fmt_f64(r.phi_dot[1]),
            io::fmt_f64(h[k]),
            (arm.rk_check(&s.x, tol).contains() as u8).to_string(),
            ratio.as_ref().map(|r| io::fmt_f64(r[k])).unwrap_or_default(),
            audit.channels[0][k].as_str().to_string(),
            audit.channels[1][k].as_str().to_string(),
        ])?;
    }
    w.flush()?;
    if let Some(p) = &cfg.paths.classification {
        write_classification(p, &traj, &audit)?;
    }

    let colmax = |f: &dyn Fn(&crate::pmp::SwitchingRecord<f64>) -> &Vec<f64>| {
        (0..2)
            .map(|i| sw.iter().map(|r| f(r)[i].abs()).fold(0.0, f64::max))
            .collect::<Vec<_>>()
    };
    let report = DiagnoseReport {
        samples: traj.len(),
        missing_costates: false,
        resimulated_endpoint: resim_end,
        recorded_endpoint: traj.final_state().unwrap_or_default().to_vec(),
        endpoint_error,
        max_abs_phi: Some(colmax(&|r| &r.phi)),
        max_abs_phi_dot: Some(colmax(&|r| &r.phi_dot)),
        hamiltonian_variation: Some(hamiltonian_variation(&h)),
        samples_in_rk,
        intervals,
        classification: Some((0..2).map(|i| ClassCounts::of(&audit, i)).collect()),
        series: Some(series_path.clone()),
    };
    io::write_json(&report, &out)?;
    println!("wrote {} and {}", out.display(), series_path.display());
    for (i, c) in report.classification.as_ref().unwrap().iter().enumerate() {
        println!(
            "u{}: upper_bang {} lower_bang {} singular {} violation {}",
            i + 1,
            c.upper_bang,
            c.lower_bang,
            c.singular,
            c.violation
        );
    }
    println!("singular intervals: {}", report.intervals.len());
    Ok(ExitStatus::Success)
}

#[derive(Debug, Serialize)]
pub struct RegularizeOutput {
    pub report: RegularizationReport,
    pub classification_after: Vec<ClassCounts>,
    pub violations_remaining: usize,
    pub exit: ExitStatus,
}

pub fn cmd_regularize(cfg: &RunConfig) -> Result<ExitStatus> {
    let arm = cfg.arm()?;
    let bounds = cfg.bounds()?;
    let traj = io::ingest(input_path(cfg)?)?;
    let rcfg = cfg.regularize_config();
    let intervals = detect_singular_arcs(&arm, &traj, &bounds, &rcfg.detection)?;
    let (out_traj, report) = regularize_u1(&arm, &traj, &intervals, &bounds, &rcfg)?;
    let audit = pmp_audit(&arm, &out_traj, &bounds, &rcfg.pmp, &rcfg.detection)?;
    let violations = audit.violations();
    let exit = if report.partial {
        ExitStatus::PartialRegularization
    } else if violations > 0 {
        ExitStatus::ViolationRemaining
    } else {
        ExitStatus::Success
    };

    let out = out_path(cfg, "regularized.csv");
    io::write_trajectory(&out_traj, &out)?;
    let report_path = io::with_suffix(&out, ".report.json");
    if let Some(p) = &cfg.paths.classification {
        write_classification(p, &out_traj, &audit)?;
    }
    println!("intervals: {}", report.intervals.len());
    for r in &report.intervals {
        println!(
            "  u{} on [{:.6}, {:.6}] ({} samples), max deviation {:.3e}",
            r.interval.channel + 1,
            r.interval.t_start,
            r.interval.t_end,
            r.interval.samples(),
            r.max_deviation
        );
    }
    println!("modified samples: {}", report.modifications.len());
    println!(
        "endpoint error = {:.3e} (relative {:.3e})",
        report.endpoint_error, report.endpoint_error_relative
    );
    println!("violations remaining: {violations}");
    let output = RegularizeOutput {
        classification_after: (0..2).map(|i| ClassCounts::of(&audit, i)).collect(),
        report,
        violations_remaining: violations,
        exit,
    };
    io::write_json(&output, &report_path)?;
    println!("wrote {} and {}", out.display(), report_path.display());
    Ok(exit)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyReport {
    pub samples: usize,
    pub seed: u64,
    pub q_max: f64,
    pub qd_max: f64,
    pub min_frame_rank: f64,
    pub max_abs_alpha_ij1: f64,
    pub max_alpha_residual: f64,
    pub lemma1_passed: usize,
    /// `[c = lower1, c = upper1]`.
    pub b_set_c: [f64; 2],
    pub b_set_passed: [usize; 2],
    pub b_set_pass_rate: [f64; 2],
    /// Failures with `|θ̇1 + θ̇2|` below `0.05·qd_max`.
    pub b_set_failures_near_degenerate_velocity: [usize; 2],
    /// Largest `|⟨dp1, v⟩| / (‖dp1‖‖v‖)` over all four B vectors and samples.
    pub max_momentum_annihilation: f64,
}

struct SampleEval {
    frame_rank: f64,
    alpha_ij1: f64,
    alpha_residual: f64,
    lemma1: bool,
    b_set: [bool; 2],
    annihilation: f64,
    velocity_sum: f64,
}

fn eval_sample(arm: &Arm2Dof, x: &[f64], lambda: &[f64], cs: [f64; 2]) -> Result<SampleEval> {
    let alpha = alpha_coefficients(arm, x)?;
    let mut a1 = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            a1 = a1.max(alpha.get(i, j, 0).abs());
        }
    }
    let b0 = b_set_certificate(arm, x, cs[0])?;
    let b1 = b_set_certificate(arm, x, cs[1])?;
    Ok(SampleEval {
        frame_rank: frame_rank(arm, x)?,
        alpha_ij1: a1,
        alpha_residual: alpha.max_residual,
        lemma1: lemma1_certificate(arm, x, lambda)?,
        b_set: [b0.independent, b1.independent],
        annihilation: b0.momentum_annihilation.max(b1.momentum_annihilation),
        velocity_sum: x[2] + x[3],
    })
}

/// Uniform samples from the configured box, evaluated in parallel and
/// reduced in sample order; the report does not depend on the worker count.
pub fn certify(cfg: &RunConfig) -> Result<CertifyReport> {
    let arm = cfg.arm()?;
    let bounds = cfg.bounds()?;
    let c = &cfg.certify;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let draws: Vec<(Vec<f64>, Vec<f64>)> = (0..c.samples)
        .map(|_| {
            let x: Vec<f64> = (0..4)
                .map(|i| {
                    let h = if i < 2 { c.q_max } else { c.qd_max };
                    rng.random_range(-h..=h)
                })
                .collect();
            let mut l: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if norm(&l) == 0.0 {
                l[0] = 1.0;
            }
            (x, l)
        })
        .collect();
    let cs = [bounds.lower[0], bounds.upper[0]];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let evals: Vec<SampleEval> = pool.install(|| {
        draws
            .par_iter()
            .map(|(x, l)| eval_sample(&arm, x, l, cs))
            .collect::<Result<Vec<_>>>()
    })?;

    let near = 0.05 * c.qd_max;
    let mut report = CertifyReport {
        samples: c.samples,
        seed: c.seed,
        q_max: c.q_max,
        qd_max: c.qd_max,
        min_frame_rank: f64::INFINITY,
        max_abs_alpha_ij1: 0.0,
        max_alpha_residual: 0.0,
        lemma1_passed: 0,
        b_set_c: cs,
        b_set_passed: [0, 0],
        b_set_pass_rate: [0.0, 0.0],
        b_set_failures_near_degenerate_velocity: [0, 0],
        max_momentum_annihilation: 0.0,
    };
    for e in &evals {
        report.min_frame_rank = report.min_frame_rank.min(e.frame_rank);
        report.max_abs_alpha_ij1 = report.max_abs_alpha_ij1.max(e.alpha_ij1);
        report.max_alpha_residual = report.max_alpha_residual.max(e.alpha_residual);
        report.lemma1_passed += e.lemma1 as usize;
        report.max_momentum_annihilation = report.max_momentum_annihilation.max(e.annihilation);
        for j in 0..2 {
            if e.b_set[j] {
                report.b_set_passed[j] += 1;
            } else if e.velocity_sum.abs() < near {
                report.b_set_failures_near_degenerate_velocity[j] += 1;
            }
        }
    }
    if c.samples > 0 {
        for j in 0..2 {
            report.b_set_pass_rate[j] = report.b_set_passed[j] as f64 / c.samples as f64;
        }
    } else {
        report.min_frame_rank = 0.0;
    }
    Ok(report)
}

pub fn cmd_certify(cfg: &RunConfig) -> Result<CertifyReport> {
    let report = certify(cfg)?;
    let out = out_path(cfg, "certificate.json");
    io::write_json(&report, &out)?;
    println!("samples: {} (seed {})", report.samples, report.seed);
    println!("min frame rank: {:.3e}", report.min_frame_rank);
    println!("max |alpha_ij1|: {:.3e}", report.max_abs_alpha_ij1);
    println!("lemma 1 certificates: {}/{}", report.lemma1_passed, report.samples);
    for j in 0..2 {
        println!(
            "set B, c = {}: {}/{} independent",
            report.b_set_c[j], report.b_set_passed[j], report.samples
        );
    }
    println!("max momentum annihilation: {:.3e}", report.max_momentum_annihilation);
    println!("wrote {}", out.display());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply_on_top_of_defaults() {
        let args = CommonArgs {
            step: Some(1e-3),
            tol_phi: Some(1e-7),
            samples: Some(12),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.integrator.step, 1e-3);
        assert_eq!(cfg.tolerances.pmp.phi, 1e-7);
        assert_eq!((cfg.certify.samples, cfg.certify.seed), (12, 9));
    }

    #[test]
    fn invalid_override_is_a_usage_error() {
        let args = CommonArgs {
            step: Some(-1.0),
            ..Default::default()
        };
        let err = args.resolve().unwrap_err();
        assert_eq!(ExitStatus::from_error(&err), ExitStatus::Usage);
    }

    #[test]
    fn exit_codes_are_distinct() {
        let all = [
            ExitStatus::Success,
            ExitStatus::Failure,
            ExitStatus::Usage,
            ExitStatus::Schema,
            ExitStatus::RkViolation,
            ExitStatus::CostateDegenerate,
            ExitStatus::PartialRegularization,
            ExitStatus::ViolationRemaining,
            ExitStatus::OutOfBounds,
        ];
        let mut codes: Vec<i32> = all.iter().map(|s| s.code()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), all.len());
    }

    #[test]
    fn certify_is_worker_independent() {
        let mut cfg = RunConfig::default();
        cfg.certify.samples = 40;
        cfg.certify.seed = 3;
        cfg.certify.workers = 1;
        let a = certify(&cfg).unwrap();
        cfg.certify.workers = 3;
        let b = certify(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lemma1_passed, 40);
        assert!(a.max_abs_alpha_ij1 <= 1e-9);
    }
}
