//! Grid sizing from the second moments a run will pass through.
//!
//! Every kick is linear in the six canonical variables, so the mean and
//! spread of each variable after any stage follow from the initial moments.
//! Each axis gets the length that maximizes the number of standard
//! deviations covered simultaneously by its position-like grid and by the
//! conjugate grid.

use std::f64::consts::PI;

use super::grid::{Axis, Grid1D};
use crate::error::{Error, Result};
use crate::moments::{Ordering, Scenario};

/// Default number of points per axis.
pub const DEFAULT_N: usize = 128;
/// Default half-width of every grid in standard deviations.
pub const DEFAULT_EXTENT_SIGMAS: f64 = 8.0;

/// One interaction step, in the order it acts on the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// `exp(iXΦ_X)`
    KickX,
    /// `exp(iKΦ_K)`
    KickK,
    /// `exp(iΦ_XΦ_K/2)`
    Central,
}

/// Stages of a full measurement with the given ordering.
pub fn stages(ordering: Ordering) -> Vec<Stage> {
    match ordering {
        Ordering::XthenK => vec![Stage::KickX, Stage::KickK],
        Ordering::KthenX => vec![Stage::KickK, Stage::KickX],
        Ordering::Joint => vec![Stage::Central, Stage::KickK, Stage::KickX],
    }
}

// variable order: X, K, Φ_X, J_X, Φ_K, J_K
const X: usize = 0;
const K: usize = 1;
const PX: usize = 2;
const JX: usize = 3;
const PK: usize = 4;
const JK: usize = 5;

type Coeffs = [[f64; 6]; 6];

fn identity() -> Coeffs {
    let mut c = [[0.0; 6]; 6];
    (0..6).for_each(|i| c[i][i] = 1.0);
    c
}

fn add(c: &mut Coeffs, target: usize, source: usize, factor: f64) {
    let src = c[source];
    (0..6).for_each(|i| c[target][i] += factor * src[i]);
}

/// Schrödinger-picture moments after a stage: the new value of each
/// variable as a combination of the initial ones.
fn step(c: &mut Coeffs, stage: Stage) {
    match stage {
        Stage::KickX => {
            add(c, JX, X, 1.0);
            add(c, K, PX, 1.0);
        }
        Stage::KickK => {
            add(c, JK, K, 1.0);
            add(c, X, PK, -1.0);
        }
        Stage::Central => {
            add(c, JX, PK, 0.5);
            add(c, JK, PX, 0.5);
        }
    }
}

/// Initial means and covariance of the six variables.
pub(crate) fn initial_moments(s: &Scenario) -> ([f64; 6], [[f64; 6]; 6]) {
    let (sy, px, pk) = (&s.system, &s.probe_x, &s.probe_k);
    let mean = [sy.mean_x, sy.mean_k, px.mean_phi, px.mean_j, pk.mean_phi, pk.mean_j];
    let mut cov = [[0.0; 6]; 6];
    let var = [sy.sigma_x, sy.sigma_k, px.delta_tilde, px.delta, pk.delta_tilde, pk.delta];
    (0..6).for_each(|i| cov[i][i] = var[i] * var[i]);
    cov[PX][JK] = s.cross.kappa;
    cov[JK][PX] = s.cross.kappa;
    cov[PK][JX] = s.cross.xi;
    cov[JX][PK] = s.cross.xi;
    (mean, cov)
}

/// Per-variable envelope: extreme means and largest spread over all stages.
#[derive(Debug, Clone, Copy)]
struct Envelope {
    lo: f64,
    hi: f64,
    sd: f64,
}

#[cfg(test)]
fn envelopes(s: &Scenario, runs: &[Vec<Stage>]) -> [Envelope; 6] {
    let mut env = [Envelope { lo: f64::INFINITY, hi: f64::NEG_INFINITY, sd: 0.0 }; 6];
    extend_envelopes(&mut env, s, runs);
    env
}

fn extend_envelopes(env: &mut [Envelope; 6], s: &Scenario, runs: &[Vec<Stage>]) {
    let (mean, cov) = initial_moments(s);
    let mut record = |c: &Coeffs| {
        for (v, e) in env.iter_mut().enumerate() {
            let m: f64 = (0..6).map(|i| c[v][i] * mean[i]).sum();
            let var: f64 = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| c[v][i] * cov[i][j] * c[v][j]).sum();
            e.lo = e.lo.min(m);
            e.hi = e.hi.max(m);
            e.sd = e.sd.max(var.max(0.0).sqrt());
        }
    };
    for run in runs {
        let mut c = identity();
        record(&c);
        for &st in run {
            step(&mut c, st);
            record(&c);
        }
    }
}

/// Sizing of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisPlan {
    pub axis: Axis,
    /// Standard deviations covered on both grids.
    pub coverage: f64,
}

/// Picks the length of an `n`-point axis that maximizes the covered number
/// of standard deviations of both the position-like and conjugate
/// envelopes. The half-widths counted are those of the short side.
fn plan_axis(n: usize, pos: Envelope, conj: Envelope) -> Result<AxisPlan> {
    let (cp, cc) = (0.5 * (pos.lo + pos.hi), 0.5 * (conj.lo + conj.hi));
    let (hp, hc) = (0.5 * (pos.hi - pos.lo), 0.5 * (conj.hi - conj.lo));
    let (sp, sc) = (pos.sd, conj.sd);
    if !(sp > 0.0 && sc > 0.0) {
        return Err(Error::Resolution("an axis has zero spread".into()));
    }
    let nf = n as f64;
    // position half-width L(1/2 − 1/n), conjugate half-width π(n − 2)/L
    let a = 0.5 - 1.0 / nf;
    let b = PI * (nf - 2.0);
    let qa = sc * a;
    let qb = sp * hc - sc * hp;
    let qc = -sp * b;
    let length = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
    let coverage = ((length * a - hp) / sp).min((b / length - hc) / sc);
    let grid = Grid1D::new(n, length, cp)?;
    Ok(AxisPlan { axis: Axis::new(grid, cc), coverage })
}

/// Axes for a canonical scenario run through each of the stage sequences in
/// `runs`, all sharing the same grids. Fails with a resolution error when
/// `n` points cannot cover `extent_sigmas` standard deviations on every
/// grid.
pub fn plan_axes(s: &Scenario, runs: &[Vec<Stage>], n: usize, extent_sigmas: f64) -> Result<[AxisPlan; 3]> {
    plan_axes_for(&[(s, runs)], n, extent_sigmas)
}

/// Shared axes for several scenarios, each with its own stage sequences.
pub fn plan_axes_for(cases: &[(&Scenario, &[Vec<Stage>])], n: usize, extent_sigmas: f64) -> Result<[AxisPlan; 3]> {
    if !(extent_sigmas > 0.0) {
        return Err(crate::error::invalid("grid extent must be positive"));
    }
    let mut env = [Envelope { lo: f64::INFINITY, hi: f64::NEG_INFINITY, sd: 0.0 }; 6];
    for (s, runs) in cases {
        extend_envelopes(&mut env, s, runs);
    }
    let names = ["system", "probe_x", "probe_k"];
    let pairs = [(X, K), (PX, JX), (PK, JK)];
    let mut plans = Vec::with_capacity(3);
    for (name, (p, c)) in names.iter().zip(pairs) {
        let plan = plan_axis(n, env[p], env[c])?;
        if plan.coverage < extent_sigmas {
            return Err(Error::Resolution(format!(
                "{name} axis: {n} points cover only {:.2} standard deviations, {extent_sigmas} required \
                 (spreads {:.4} and {:.4}); increase grid.n",
                plan.coverage, env[p].sd, env[c].sd
            )));
        }
        plans.push(plan);
    }
    Ok([plans[0], plans[1], plans[2]])
}
