#![allow(dead_code)]

use std::f64::consts::PI;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use singular_arc::arm2dof::default_bounds;
use singular_arc::integrate::{integrate_extremal, rk4_step, IntegratorConfig, Sample, Source, Trajectory, TrajectoryMeta};
use singular_arc::pmp::{adjoint_rhs, singular_surface_costate, switching, PmpTolerances};
use singular_arc::{Arm2Dof, MechModel};

pub const X0: [f64; 4] = [PI / 20.0, PI / 20.0, 0.30, 0.5];
pub const U2: f64 = -10.0;

pub fn reference_lambda(arm: &Arm2Dof) -> Vec<f64> {
    singular_surface_costate(arm, &X0, -3.0, -6.0).unwrap()
}

pub fn extremal(step: f64, horizon: f64) -> Trajectory {
    let arm = Arm2Dof::default();
    let cfg = IntegratorConfig {
        step,
        horizon,
        ..Default::default()
    };
    integrate_extremal(&arm, &X0, &reference_lambda(&arm), &cfg, U2, &default_bounds(), &PmpTolerances::default()).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
    vec![
        rng.random_range(-PI..=PI),
        rng.random_range(-PI..=PI),
        rng.random_range(-2.0..=2.0),
        rng.random_range(-2.0..=2.0),
    ]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

/// Vector field evaluated in plain `f64`.
pub type Field = Rc<dyn Fn(&[f64]) -> Vec<f64>>;

pub fn drift_field(arm: &Arm2Dof) -> Field {
    let arm = arm.clone();
    Rc::new(move |x| arm.drift(x).unwrap())
}

pub fn input_field(arm: &Arm2Dof, i: usize) -> Field {
    let arm = arm.clone();
    Rc::new(move |x| arm.input_column(x, i).unwrap())
}

/// Fourth-order central difference of `field` along `dir`.
fn fd_directional(field: &Field, x: &[f64], dir: &[f64], h: f64) -> Vec<f64> {
    let at = |s: f64| {
        let p: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + s * h * d).collect();
        field(&p)
    };
    let (m2, m1, p1, p2) = (at(-2.0), at(-1.0), at(1.0), at(2.0));
    (0..m1.len())
        .map(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h))
        .collect()
}

/// `[a, b](x) = Db(x)·a(x) − Da(x)·b(x)` by finite differences.
pub fn fd_bracket(a: Field, b: Field, h: f64) -> Field {
    Rc::new(move |x| {
        let av = a(x);
        let bv = b(x);
        let db = fd_directional(&b, x, &av, h);
        let da = fd_directional(&a, x, &bv, h);
        db.iter().zip(&da).map(|(p, q)| p - q).collect()
    })
}

/// Right-nested word over `f` (`None`) and `g_i` (`Some(i)`).
pub fn fd_word(arm: &Arm2Dof, word: &[Option<usize>], h: f64) -> Field {
    let leaf = |l: &Option<usize>| match l {
        None => drift_field(arm),
        Some(i) => input_field(arm, *i),
    };
    let mut acc = leaf(word.last().unwrap());
    for l in word[..word.len() - 1].iter().rev() {
        acc = fd_bracket(leaf(l), acc, h);
    }
    acc
}

pub fn word_name(word: &[Option<usize>]) -> String {
    word.iter()
        .map(|l| match l {
            None => "f".to_string(),
            Some(i) => format!("g{}", i + 1),
        })
        .collect()
}

/// Every right-nested word of length `2..=max_len` over `{f, g1, g2}`.
pub fn all_words(max_len: usize) -> Vec<Vec<Option<usize>>> {
    let letters = [None, Some(0), Some(1)];
    let mut out = Vec::new();
    let mut level: Vec<Vec<Option<usize>>> = letters.iter().map(|l| vec![*l]).collect();
    for _ in 1..max_len {
        let mut next = Vec::new();
        for w in &level {
            for l in letters {
                let mut v = vec![l];
                v.extend(w);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// Coupled state/costate flow under a fixed control, forward (`h > 0`) or
/// backward (`h < 0`), recording every step.
pub fn flow_with_control(arm: &Arm2Dof, x: &[f64], lambda: &[f64], u: [f64; 2], h: f64, steps: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut y: Vec<f64> = x.iter().chain(lambda).copied().collect();
    let mut out = vec![(x.to_vec(), lambda.to_vec())];
    for _ in 0..steps {
        y = rk4_step(0.0, &y, h, |_, yy| {
            let mut d = arm.controlled_field(&yy[..4], &u)?;
            d.extend(adjoint_rhs(arm, &yy[..4], &u, &yy[4..])?);
            Ok(d)
        })
        .unwrap();
        out.push((y[..4].to_vec(), y[4..].to_vec()));
    }
    out
}

/// Saturated / singular / saturated extremal with `u1 = +20` on both
/// flanks, glued from the reference singular arc on `[t1, t2]`.
pub struct SatSingSat {
    pub traj: Trajectory,
    pub first_singular: usize,
    pub last_singular: usize,
}

pub fn sat_sing_sat(step: f64, t1: f64, t2: f64, tail: f64) -> SatSingSat {
    let arm = Arm2Dof::default();
    let core = extremal(step, t2);
    let i1 = (t1 / step).round() as usize;
    let i2 = core.len() - 1;
    let head = i1;
    let tail_steps = (tail / step).round() as usize;
    let s1 = &core.samples[i1];
    let back = flow_with_control(&arm, &s1.x, s1.lambda.as_ref().unwrap(), [20.0, U2], -step, head);
    let s2 = &core.samples[i2];
    let fwd = flow_with_control(&arm, &s2.x, s2.lambda.as_ref().unwrap(), [20.0, U2], step, tail_steps);

    let mut samples = Vec::new();
    for (k, (x, l)) in back.iter().enumerate().skip(1).rev() {
        samples.push(Sample {
            t: (head - k) as f64 * step,
            x: x.clone(),
            u: vec![20.0, U2],
            lambda: Some(l.clone()),
        });
    }
    let first_singular = samples.len();
    for (j, s) in core.samples[i1..=i2].iter().enumerate() {
        samples.push(Sample {
            t: (head + j) as f64 * step,
            ..s.clone()
        });
    }
    let last_singular = samples.len() - 1;
    for (k, (x, l)) in fwd.iter().enumerate().skip(1) {
        samples.push(Sample {
            t: (i2 + k) as f64 * step,
            x: x.clone(),
            u: vec![20.0, U2],
            lambda: Some(l.clone()),
        });
    }
    SatSingSat {
        traj: Trajectory {
            samples,
            meta: TrajectoryMeta::new(Source::Ingested, arm.fingerprint()),
        },
        first_singular,
        last_singular,
    }
}

/// Bang-bang extremal whose `φ1` crosses zero transversally near `t_cross`.
///
/// `λ0` is the reference costate shifted within `span{g1, fg1}` so that
/// `φ1(0) = −t_cross·rate` and `φ1′(0) = rate`.
pub fn bang_bang(step: f64, horizon: f64, t_cross: f64, rate: f64) -> Trajectory {
    let arm = Arm2Dof::default();
    let g1 = arm.input_column(&X0, 0).unwrap();
    let fg1 = singular_arc::liegeom::iterated_bracket(
        &arm,
        &[singular_arc::liegeom::Letter::Drift, singular_arc::liegeom::Letter::Input(0)],
        &X0,
    )
    .unwrap();
    let lam_ref = reference_lambda(&arm);
    let want = [-t_cross * rate, rate];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let (a11, a12, a21, a22) = (dot(&g1, &g1), dot(&g1, &fg1), dot(&fg1, &g1), dot(&fg1, &fg1));
    let det = a11 * a22 - a12 * a21;
    let a = (want[0] * a22 - a12 * want[1]) / det;
    let b = (a11 * want[1] - a21 * want[0]) / det;
    let lambda0: Vec<f64> = (0..4).map(|i| lam_ref[i] + a * g1[i] + b * fg1[i]).collect();

    let bounds = default_bounds();
    let steps = (horizon / step).round() as usize;
    let mut y: Vec<f64> = X0.iter().chain(&lambda0).copied().collect();
    let control = |x: &[f64], l: &[f64]| {
        let sw = switching(&arm, x, l).unwrap();
        let pick = |i: usize| if sw.phi[i] > 0.0 { bounds.upper[i] } else { bounds.lower[i] };
        [pick(0), pick(1)]
    };
    let mut samples = Vec::new();
    for k in 0..=steps {
        let u = control(&y[..4], &y[4..]);
        samples.push(Sample {
            t: k as f64 * step,
            x: y[..4].to_vec(),
            u: u.to_vec(),
            lambda: Some(y[4..].to_vec()),
        });
        if k == steps {
            break;
        }
        // control held over the step, as a direct method would export it
        y = rk4_step(0.0, &y, step, |_, yy| {
            let mut d = arm.controlled_field(&yy[..4], &u)?;
            d.extend(adjoint_rhs(&arm, &yy[..4], &u, &yy[4..])?);
            Ok(d)
        })
        .unwrap();
    }
    Trajectory {
        samples,
        meta: TrajectoryMeta::new(Source::Ingested, arm.fingerprint()),
    }
}

/// `±amp` on a seeded `fraction` of the samples, on channel 0.
pub fn spike(traj: &Trajectory, fraction: f64, amp: f64, seed: u64) -> (Trajectory, Vec<usize>) {
    let mut r = rng(seed);
    let n = traj.len();
    let count = ((n as f64 * fraction).round() as usize).max(1);
    let mut idx: Vec<usize> = Vec::new();
    while idx.len() < count {
        let k = r.random_range(0..n);
        if !idx.contains(&k) {
            idx.push(k);
        }
    }
    idx.sort();
    let mut out = traj.clone();
    for (j, k) in idx.iter().enumerate() {
        out.samples[*k].u[0] += if j % 2 == 0 { amp } else { -amp };
    }
    (out, idx)
}
