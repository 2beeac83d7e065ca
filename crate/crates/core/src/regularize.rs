//! Detection of singular arcs in recorded trajectories and replacement of
//! `u1` on them by the closed-form law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{resimulate, ControlSignal, Interpolation, Source, Trajectory};
use crate::liegeom::{iterated_bracket, Letter};
use crate::linalg::norm;
use crate::model::{ControlBounds, MechModel};
use crate::pmp::{singular_band, singular_u1, switching, PmpTolerances, SingularRegion, SwitchingRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionConfig {
    /// Band factor: `|φ_k| ≤ rel · max_t‖λ‖ · max_t‖g_k‖`, and the same for
    /// `φ_k′` with `fg_k`.
    pub band_rel: f64,
    /// Shortest interval kept, in samples.
    pub min_samples: usize,
    /// Gaps of at most this many samples between two runs are bridged.
    pub gap_merge: usize,
    /// `|u − bound| ≤ bound_tol` counts as saturated.
    pub bound_tol: f64,
    /// Agreement required between a recorded singular control and the law.
    pub law_tol: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            band_rel: 1e-3,
            min_samples: 10,
            gap_merge: 3,
            bound_tol: 1e-9,
            law_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularInterval {
    /// 0-based channel.
    pub channel: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Sample indices, inclusive.
    pub first: usize,
    pub last: usize,
    pub max_abs_phi: f64,
    pub max_abs_phi_dot: f64,
    /// Bound nearest to the median recorded value of the other channel.
    pub u2_bang_value: f64,
}

impl SingularInterval {
    pub fn contains(&self, k: usize) -> bool {
        (self.first..=self.last).contains(&k)
    }

    pub fn samples(&self) -> usize {
        self.last - self.first + 1
    }
}

/// `φ`, `φ′` at every sample.
pub fn switching_trace<M: MechModel>(model: &M, traj: &Trajectory) -> Result<Vec<SwitchingRecord<f64>>> {
    traj.samples
        .iter()
        .map(|s| switching(model, &s.x, s.lambda.as_ref().ok_or(Error::MissingCostates)?))
        .collect()
}

struct Bands {
    phi: Vec<f64>,
    phi_dot: Vec<f64>,
}

fn detection_bands<M: MechModel>(model: &M, traj: &Trajectory, cfg: &DetectionConfig) -> Result<Bands> {
    let n = model.dof();
    let mut lam_max = 0.0_f64;
    let mut g_max = vec![0.0_f64; n];
    let mut fg_max = vec![0.0_f64; n];
    for s in &traj.samples {
        lam_max = lam_max.max(norm(s.lambda.as_ref().ok_or(Error::MissingCostates)?));
        for i in 0..n {
            g_max[i] = g_max[i].max(norm(&model.input_column(&s.x, i)?));
            fg_max[i] = fg_max[i].max(norm(&iterated_bracket(model, &[Letter::Drift, Letter::Input(i)], &s.x)?));
        }
    }
    Ok(Bands {
        phi: g_max.iter().map(|g| cfg.band_rel * lam_max * g).collect(),
        phi_dot: fg_max.iter().map(|g| cfg.band_rel * lam_max * g).collect(),
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn at_bound(bounds: &ControlBounds, i: usize, u: f64, tol: f64) -> Option<f64> {
    [bounds.lower[i], bounds.upper[i]].into_iter().find(|b| (u - b).abs() <= tol)
}

/// Maximal runs where `|φ_k|` and `|φ_k′|` stay in band, for every channel.
///
/// Runs separated by at most `gap_merge` samples are merged. Samples at either
/// end of a run whose recorded control already sits on the bound selected by
/// `sign(φ_k)` are bang-consistent and trimmed off, so junctions with
/// saturated arcs are not swallowed by the band. Runs shorter than
/// `min_samples` are dropped.
pub fn detect_singular_arcs<M: MechModel>(
    model: &M,
    traj: &Trajectory,
    bounds: &ControlBounds,
    cfg: &DetectionConfig,
) -> Result<Vec<SingularInterval>> {
    if !traj.has_costates() {
        return Err(Error::MissingCostates);
    }
    let n = model.dof();
    let sw = switching_trace(model, traj)?;
    let bands = detection_bands(model, traj, cfg)?;
    let mut out = Vec::new();
    for k in 0..n {
        let inside: Vec<bool> = sw
            .iter()
            .map(|r| r.phi[k].abs() <= bands.phi[k] && r.phi_dot[k].abs() <= bands.phi_dot[k])
            .collect();
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut start = None;
        for (i, &b) in inside.iter().enumerate() {
            match (b, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((s, i - 1));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((s, inside.len() - 1));
        }
        let mut merged: Vec<(usize, usize)> = Vec::new();
        for r in runs {
            match merged.last_mut() {
                Some(last) if r.0 - last.1 - 1 <= cfg.gap_merge => last.1 = r.1,
                _ => merged.push(r),
            }
        }
        let bang_consistent = |i: usize| {
            let u = traj.samples[i].u[k];
            let p = sw[i].phi[k];
            let target = if p > 0.0 {
                bounds.upper[k]
            } else if p < 0.0 {
                bounds.lower[k]
            } else {
                return false;
            };
            (u - target).abs() <= cfg.bound_tol
        };
        for (mut a, mut b) in merged {
            while a <= b && bang_consistent(a) {
                a += 1;
            }
            while b > a && bang_consistent(b) {
                b -= 1;
            }
            if a > b || b - a + 1 < cfg.min_samples {
                continue;
            }
            let other = if n == 2 { 1 - k } else { (k + 1) % n };
            let u_other = median(traj.samples[a..=b].iter().map(|s| s.u[other]).collect());
            out.push(SingularInterval {
                channel: k,
                t_start: traj.samples[a].t,
                t_end: traj.samples[b].t,
                first: a,
                last: b,
                max_abs_phi: sw[a..=b].iter().map(|r| r.phi[k].abs()).fold(0.0, f64::max),
                max_abs_phi_dot: sw[a..=b].iter().map(|r| r.phi_dot[k].abs()).fold(0.0, f64::max),
                u2_bang_value: bounds.nearest_bound(other, u_other),
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModificationReason {
    /// Closed-form singular law inside a detected interval.
    SingularLaw,
    /// Bound selected by `sign(φ1)` outside every interval.
    BangRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Modification {
    pub index: usize,
    pub t: f64,
    pub before: f64,
    pub after: f64,
    pub reason: ModificationReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum IntervalOutcome {
    Regularized,
    /// Law left the bounds; the listed samples were left untouched and the
    /// interval split around them.
    Split {
        out_of_bounds: Vec<usize>,
        /// Law value furthest outside the bounds.
        worst_value: f64,
        pieces: Vec<(usize, usize)>,
    },
    Rejected { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub interval: SingularInterval,
    pub outcome: IntervalOutcome,
    /// `max |u1_recorded − u1_closed_form|` over regularized samples.
    pub max_deviation: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PmpConsistency {
    /// Samples outside intervals where the sign rule decided `u1`.
    pub bang_samples: usize,
    /// Of those, samples whose recorded `u1` already matched.
    pub bang_agreeing: usize,
    /// Samples outside intervals with `φ1` in the band; left untouched.
    pub undetermined: usize,
    /// Samples where recorded `u2` sits on the bound selected by `sign(φ2)`.
    pub u2_agreeing: usize,
    pub u2_disagreeing: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationReport {
    pub intervals: Vec<IntervalReport>,
    pub modifications: Vec<Modification>,
    /// `‖x_resim(T) − x_target‖` with `x_target` the input's final state.
    pub endpoint_error: f64,
    pub endpoint_error_relative: f64,
    pub pmp_consistency: PmpConsistency,
    /// Some interval was rejected or split.
    pub partial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegularizeConfig {
    pub detection: DetectionConfig,
    pub pmp: PmpTolerances,
    /// Resimulation step [s].
    pub step: f64,
    pub interpolation: Interpolation,
}

impl Default for RegularizeConfig {
    fn default() -> Self {
        Self {
            detection: DetectionConfig::default(),
            pmp: PmpTolerances::default(),
            step: 1e-4,
            interpolation: Interpolation::ZeroOrderHold,
        }
    }
}

enum LawSample {
    Value(f64),
    OutOfBounds(f64),
}

fn interval_law<M: MechModel + SingularRegion>(
    model: &M,
    traj: &Trajectory,
    iv: &SingularInterval,
    bounds: &ControlBounds,
    tol: &PmpTolerances,
) -> Result<Vec<LawSample>> {
    (iv.first..=iv.last)
        .map(|k| {
            let s = &traj.samples[k];
            let lambda = s.lambda.as_ref().ok_or(Error::MissingCostates)?;
            if !model.rk_check(&s.x, tol).configuration {
                return Err(Error::RkViolation {
                    reason: format!("sample {k} (t = {}) outside the configuration part of R_k", s.t),
                });
            }
            let u = singular_u1(model, &s.x, lambda, iv.u2_bang_value, tol)?;
            Ok(if bounds.contains(0, u, tol.bounds_slack) {
                LawSample::Value(u)
            } else {
                LawSample::OutOfBounds(u)
            })
        })
        .collect()
}

/// Replaces `u1` on channel-0 intervals by the closed form, and by the
/// `sign(φ1)` bound elsewhere. `u2` is never touched.
///
/// Intervals are evaluated independently (in parallel); the report is
/// assembled in interval order.
pub fn regularize_u1<M: MechModel + SingularRegion>(
    model: &M,
    traj: &Trajectory,
    intervals: &[SingularInterval],
    bounds: &ControlBounds,
    cfg: &RegularizeConfig,
) -> Result<(Trajectory, RegularizationReport)> {
    if !traj.has_costates() {
        return Err(Error::MissingCostates);
    }
    let ivs: Vec<&SingularInterval> = intervals.iter().filter(|iv| iv.channel == 0).collect();
    let laws: Vec<Result<Vec<LawSample>>> = ivs
        .par_iter()
        .map(|iv| interval_law(model, traj, iv, bounds, &cfg.pmp))
        .collect();

    let mut out = traj.clone();
    out.meta.source = Source::Regularized;
    let mut modifications = Vec::new();
    let mut reports = Vec::new();
    let mut partial = false;
    let mut covered = vec![false; traj.len()];
    let mut record = |out: &mut Trajectory, k: usize, value: f64, reason| {
        let before = out.samples[k].u[0];
        if before != value {
            modifications.push(Modification {
                index: k,
                t: out.samples[k].t,
                before,
                after: value,
                reason,
            });
            out.samples[k].u[0] = value;
        }
    };

    for (iv, law) in ivs.iter().zip(laws) {
        for k in iv.first..=iv.last {
            covered[k] = true;
        }
        let law = match law {
            Ok(l) => l,
            Err(e @ (Error::RkViolation { .. } | Error::CostateDegenerate { .. } | Error::DegenerateSystem { .. })) => {
                partial = true;
                reports.push(IntervalReport {
                    interval: (*iv).clone(),
                    outcome: IntervalOutcome::Rejected { reason: e.to_string() },
                    max_deviation: 0.0,
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut max_dev = 0.0_f64;
        let mut oob = Vec::new();
        let mut worst = 0.0_f64;
        let mut pieces: Vec<(usize, usize)> = Vec::new();
        for (j, ls) in law.iter().enumerate() {
            let k = iv.first + j;
            match ls {
                LawSample::Value(u) => {
                    max_dev = max_dev.max((traj.samples[k].u[0] - u).abs());
                    record(&mut out, k, *u, ModificationReason::SingularLaw);
                    match pieces.last_mut() {
                        Some(p) if p.1 + 1 == k => p.1 = k,
                        _ => pieces.push((k, k)),
                    }
                }
                LawSample::OutOfBounds(u) => {
                    oob.push(k);
                    if u.abs() > worst.abs() {
                        worst = *u;
                    }
                }
            }
        }
        let outcome = if oob.is_empty() {
            IntervalOutcome::Regularized
        } else {
            partial = true;
            IntervalOutcome::Split {
                out_of_bounds: oob,
                worst_value: worst,
                pieces,
            }
        };
        reports.push(IntervalReport {
            interval: (*iv).clone(),
            outcome,
            max_deviation: max_dev,
        });
    }

    let mut consistency = PmpConsistency::default();
    for (k, s) in traj.samples.iter().enumerate() {
        let lambda = s.lambda.as_ref().expect("checked");
        let sw = switching(model, &s.x, lambda)?;
        let band = singular_band(&cfg.pmp, lambda);
        if model.dof() > 1 {
            let p2 = sw.phi[1];
            let target = if p2 > band {
                Some(bounds.upper[1])
            } else if p2 < -band {
                Some(bounds.lower[1])
            } else {
                None
            };
            match target {
                Some(b) if (s.u[1] - b).abs() <= cfg.detection.bound_tol => consistency.u2_agreeing += 1,
                Some(_) => consistency.u2_disagreeing += 1,
                None => {}
            }
        }
        if covered[k] {
            continue;
        }
        let p1 = sw.phi[0];
        if p1.abs() <= band {
            consistency.undetermined += 1;
            continue;
        }
        let target = if p1 > 0.0 { bounds.upper[0] } else { bounds.lower[0] };
        consistency.bang_samples += 1;
        if s.u[0] == target {
            consistency.bang_agreeing += 1;
        }
        record(&mut out, k, target, ModificationReason::BangRule);
    }

    let x0 = &traj.samples[0].x;
    let resim = resimulate(model, x0, &ControlSignal::from_trajectory(&out, cfg.interpolation), cfg.step)?;
    let target = traj.final_state().expect("non-empty");
    let reached = resim.final_state().expect("non-empty");
    let diff: Vec<f64> = reached.iter().zip(target).map(|(a, b)| a - b).collect();
    let endpoint_error = if resim.len() == traj.len() { norm(&diff) } else { f64::INFINITY };
    let scale = norm(target);
    let report = RegularizationReport {
        intervals: reports,
        modifications,
        endpoint_error,
        endpoint_error_relative: if scale > 0.0 { endpoint_error / scale } else { endpoint_error },
        pmp_consistency: consistency,
        partial,
    };
    Ok((out, report))
}

/// Detect, regularize and resimulate in one call.
pub fn regularize_pipeline<M: MechModel + SingularRegion>(
    model: &M,
    traj: &Trajectory,
    bounds: &ControlBounds,
    cfg: &RegularizeConfig,
) -> Result<(Trajectory, RegularizationReport)> {
    let intervals = detect_singular_arcs(model, traj, bounds, &cfg.detection)?;
    regularize_u1(model, traj, &intervals, bounds, cfg)
}

/// `λ2/λ4` at every sample.
pub fn costate_ratio_trace(traj: &Trajectory, tol: &PmpTolerances) -> Result<Vec<f64>> {
    traj.samples
        .iter()
        .map(|s| {
            let l = s.lambda.as_ref().ok_or(Error::MissingCostates)?;
            if !(l[3].abs() > tol.costate * norm(l)) {
                return Err(Error::CostateDegenerate {
                    reason: format!("λ4 = {:e} at t = {}", l[3], s.t),
                });
            }
            Ok(l[1] / l[3])
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    UpperBang,
    LowerBang,
    Singular,
    Violation,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::UpperBang => "upper_bang",
            Classification::LowerBang => "lower_bang",
            Classification::Singular => "singular",
            Classification::Violation => "violation",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    /// `channels[i][k]`: channel `i`, sample `k`.
    pub channels: Vec<Vec<Classification>>,
    /// Samples whose costate is zero.
    pub lambda_degenerate: Vec<bool>,
}

impl Audit {
    pub fn count(&self, channel: usize, class: Classification) -> usize {
        self.channels[channel].iter().filter(|c| **c == class).count()
    }

    pub fn violations(&self) -> usize {
        self.channels.iter().flatten().filter(|c| **c == Classification::Violation).count()
    }
}

/// Per-sample PMP classification.
///
/// With `|φ_i|` outside the singular band, the recorded control must sit on
/// the bound selected by the sign of `φ_i`. Inside the band, channel 0 is
/// singular when it matches the closed-form law (with the recorded `u2`),
/// and any channel at a bound counts as that bang. Everything else, and every
/// sample with `λ = 0`, is a violation.
pub fn pmp_audit<M: MechModel + SingularRegion>(
    model: &M,
    traj: &Trajectory,
    bounds: &ControlBounds,
    tol: &PmpTolerances,
    cfg: &DetectionConfig,
) -> Result<Audit> {
    if !traj.has_costates() {
        return Err(Error::MissingCostates);
    }
    let n = model.dof();
    let mut channels = vec![Vec::with_capacity(traj.len()); n];
    let mut degenerate = Vec::with_capacity(traj.len());
    for s in &traj.samples {
        let lambda = s.lambda.as_ref().expect("checked");
        let zero = norm(lambda) == 0.0;
        degenerate.push(zero);
        if zero {
            for ch in channels.iter_mut() {
                ch.push(Classification::Violation);
            }
            continue;
        }
        let sw = switching(model, &s.x, lambda)?;
        let band = singular_band(tol, lambda);
        for i in 0..n {
            let u = s.u[i];
            let p = sw.phi[i];
            let bang = |b: f64| {
                if b == bounds.upper[i] {
                    Classification::UpperBang
                } else {
                    Classification::LowerBang
                }
            };
            let class = if p > band {
                if (u - bounds.upper[i]).abs() <= cfg.bound_tol {
                    Classification::UpperBang
                } else {
                    Classification::Violation
                }
            } else if p < -band {
                if (u - bounds.lower[i]).abs() <= cfg.bound_tol {
                    Classification::LowerBang
                } else {
                    Classification::Violation
                }
            } else {
                let law_ok = i == 0
                    && n == 2
                    && singular_u1(model, &s.x, lambda, s.u[1], tol)
                        .map(|v| (v - u).abs() <= cfg.law_tol * v.abs().max(1.0))
                        .unwrap_or(false);
                if law_ok {
                    Classification::Singular
                } else if let Some(b) = at_bound(bounds, i, u, cfg.bound_tol) {
                    bang(b)
                } else {
                    Classification::Violation
                }
            };
            channels[i].push(class);
        }
    }
    Ok(Audit {
        channels,
        lambda_degenerate: degenerate,
    })
}
