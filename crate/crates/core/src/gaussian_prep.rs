//! Correlated pure-Gaussian preparation of the two probes.
//!
//! The state is real in the `(J_K, Φ_X)` representation,
//!
//! ```text
//! ⟨J_K, Φ_X|ψ⟩ ∝ exp[−¼ (J_K, Φ_X) C⁻¹ (J_K, Φ_X)ᵀ],   C = [[δ_K², κ], [κ, δ̃_X²]],
//! ```
//!
//! so `(J_K, Φ_X)` has covariance `C` and the conjugate pair `(Φ_K, J_X)` has
//! covariance `¼ C⁻¹` up to the sign of its off-diagonal entry. With the
//! transform conventions of the oracle that entry is `ξ = +κ/(4Δ⁴)`, where
//! `Δ⁴ = det C`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::moments::{Couplings, CrossCovariances, ProbeMoments, Scenario, Status, SystemMoments, Variable, SLACK};
use crate::oracle::Grid1D;

/// Closest approach to `|r| = 1` accepted by [`ProbePairPreparation::new`].
pub const SINGULARITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePairPreparation {
    delta_k: f64,
    delta_tilde_x: f64,
    r: f64,
    kappa: f64,
    det4: f64,
}

/// Moments of the conjugate pair `(J_X, Φ_K)` implied by the pure state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedMoments {
    pub delta_x2: f64,
    pub delta_tilde_k2: f64,
    pub xi: f64,
}

impl ProbePairPreparation {
    pub fn new(delta_k: f64, delta_tilde_x: f64, r: f64) -> Result<Self> {
        if !(delta_k > 0.0 && delta_k.is_finite() && delta_tilde_x > 0.0 && delta_tilde_x.is_finite()) {
            return Err(invalid(format!(
                "preparation spreads must be positive, got delta_k={delta_k}, delta_tilde_x={delta_tilde_x}"
            )));
        }
        if !r.is_finite() || r.abs() >= 1.0 - SINGULARITY_MARGIN {
            return Err(Error::SingularPreparation { r });
        }
        let kappa = r * delta_k * delta_tilde_x;
        let det4 = delta_k * delta_k * delta_tilde_x * delta_tilde_x * (1.0 - r * r);
        Ok(Self { delta_k, delta_tilde_x, r, kappa, det4 })
    }

    pub fn delta_k(&self) -> f64 {
        self.delta_k
    }

    pub fn delta_tilde_x(&self) -> f64 {
        self.delta_tilde_x
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn det4(&self) -> f64 {
        self.det4
    }

    /// The same state in canonical units: `J_K` divided by `λ_K`, `Φ_X`
    /// multiplied by `λ_X`. The correlator `r` is scale free.
    pub fn canonicalize(&self, lambda_x: f64, lambda_k: f64) -> Result<Self> {
        if !(lambda_x > 0.0 && lambda_k > 0.0) {
            return Err(invalid("couplings must be positive"));
        }
        Self::new(self.delta_k / lambda_k, self.delta_tilde_x * lambda_x, self.r)
    }

    pub fn reduced_probe_moments(&self) -> ReducedMoments {
        let q = 4.0 * self.det4;
        ReducedMoments {
            delta_x2: self.delta_k * self.delta_k / q,
            delta_tilde_k2: self.delta_tilde_x * self.delta_tilde_x / q,
            xi: self.kappa / q,
        }
    }

    /// Scenario whose probe moments come from this preparation. The result
    /// is canonical when both couplings are 1; otherwise pass it through
    /// [`canonicalize`](crate::moments::canonicalize).
    pub fn to_scenario(&self, system: SystemMoments, resolutions: (f64, f64), couplings: Couplings) -> Result<Scenario> {
        let m = self.reduced_probe_moments();
        let px = ProbeMoments::new(Variable::X, m.delta_x2.sqrt(), self.delta_tilde_x).with_resolution(resolutions.0);
        let pk = ProbeMoments::new(Variable::K, self.delta_k, m.delta_tilde_k2.sqrt()).with_resolution(resolutions.1);
        let cross = CrossCovariances::new(self.kappa, m.xi);
        let mut s = Scenario::new(system, px, pk, cross, couplings);
        s.canonical = couplings.lambda_x == 1.0 && couplings.lambda_k == 1.0;
        Ok(s)
    }

    /// `ε_X²·η²_{K|X}` for an X-then-K measurement with ideal readout,
    /// `(1 + 2r·δ_K/δ̃_X) / (4(1 − r²))`.
    pub fn violation_product(&self) -> f64 {
        self.epsilon2() * self.eta2()
    }

    fn epsilon2(&self) -> f64 {
        self.reduced_probe_moments().delta_x2
    }

    fn eta2(&self) -> f64 {
        self.delta_tilde_x * self.delta_tilde_x + 2.0 * self.kappa
    }
}

/// One point of the violation scan, at `δ_K = 1`, `δ̃_X = t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub t: f64,
    pub r: f64,
    pub epsilon2: f64,
    pub eta2: f64,
    pub product: f64,
    pub classification: Status,
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect()
}

fn check_range(name: &str, (lo, hi): (f64, f64), steps: usize) -> Result<()> {
    if steps == 0 || !(lo <= hi) || (steps > 1 && lo == hi) {
        return Err(invalid(format!("empty {name} range [{lo}, {hi}] with {steps} steps")));
    }
    Ok(())
}

/// Classifies `(t, r)` over a grid of ratios `t = δ̃_X/δ_K` and
/// correlators, row-major in `t`. Reduction means `η² ≤ 0`.
pub fn violation_scan(t_range: (f64, f64), r_range: (f64, f64), steps: (usize, usize)) -> Result<Vec<ScanRow>> {
    violation_scan_with(t_range, r_range, steps, Exec::default())
}

pub fn violation_scan_with(t_range: (f64, f64), r_range: (f64, f64), steps: (usize, usize), exec: Exec) -> Result<Vec<ScanRow>> {
    check_range("t", t_range, steps.0)?;
    check_range("r", r_range, steps.1)?;
    if !(t_range.0 > 0.0) || !t_range.1.is_finite() {
        return Err(invalid("t must be positive and finite"));
    }
    if r_range.0.abs() >= 1.0 - SINGULARITY_MARGIN || r_range.1.abs() >= 1.0 - SINGULARITY_MARGIN {
        return Err(Error::SingularPreparation { r: if r_range.0.abs() > r_range.1.abs() { r_range.0 } else { r_range.1 } });
    }
    let ts = linspace(t_range.0, t_range.1, steps.0);
    let rs = linspace(r_range.0, r_range.1, steps.1);
    let nr = rs.len();
    let rows = exec.map_range(ts.len() * nr, |idx| {
        let (t, r) = (ts[idx / nr], rs[idx % nr]);
        let p = ProbePairPreparation::new(1.0, t, r).expect("range checked");
        let (epsilon2, eta2) = (p.epsilon2(), p.eta2());
        let product = epsilon2 * eta2;
        let classification = if eta2 <= 0.0 {
            Status::Reduction
        } else if product < 0.25 - SLACK {
            Status::Violated
        } else {
            Status::Holds
        };
        ScanRow { t, r, epsilon2, eta2, product, classification }
    });
    Ok(rows)
}

fn check_extent(what: &str, half_width: f64, spread: f64) -> Result<()> {
    let need = MIN_EXTENT_SIGMAS * spread;
    if half_width < need {
        return Err(Error::Resolution(format!(
            "{what} grid half-width {half_width:.4} is below {MIN_EXTENT_SIGMAS} standard deviations ({need:.4})"
        )));
    }
    Ok(())
}

/// Smallest half-width, in standard deviations, accepted for the grids of
/// [`preparation_wavefunction`] and for their conjugate grids.
pub const MIN_EXTENT_SIGMAS: f64 = 8.0;

/// Samples the preparation on a `Φ_X` grid and a `J_K` grid. The result is
/// indexed `[Φ_X, J_K]` and normalized so that `Σ|a|² = 1`. Both grids and
/// their conjugates (`J_X`, `Φ_K`) must reach 8 standard deviations from
/// the origin.
pub fn preparation_wavefunction(p: &ProbePairPreparation, grid_jk: &Grid1D, grid_phix: &Grid1D) -> Result<Array2<Complex64>> {
    let m = p.reduced_probe_moments();
    let reach = |g: &Grid1D| g.half_width() - g.center().abs();
    check_extent("J_K", reach(grid_jk), p.delta_k)?;
    check_extent("Phi_X", reach(grid_phix), p.delta_tilde_x)?;
    check_extent("Phi_K (conjugate of J_K)", grid_jk.conjugate(0.0).half_width(), m.delta_tilde_k2.sqrt())?;
    check_extent("J_X (conjugate of Phi_X)", grid_phix.conjugate(0.0).half_width(), m.delta_x2.sqrt())?;

    let (dk2, dx2) = (p.delta_k * p.delta_k, p.delta_tilde_x * p.delta_tilde_x);
    // C⁻¹ = [[δ̃_X², −κ], [−κ, δ_K²]] / Δ⁴
    let (a, b, c) = (dx2 / p.det4, -p.kappa / p.det4, dk2 / p.det4);
    let js = grid_jk.points();
    let phis = grid_phix.points();
    let mut amps = Array2::from_shape_fn((phis.len(), js.len()), |(i, j)| {
        let (u, v) = (js[j], phis[i]);
        Complex64::new((-0.25 * (a * u * u + 2.0 * b * u * v + c * v * v)).exp(), 0.0)
    });
    let norm2: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    let s = 1.0 / norm2.sqrt();
    amps.mapv_inplace(|z| z * s);
    Ok(amps)
}
