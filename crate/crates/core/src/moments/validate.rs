use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;

use super::{Scenario, SLACK};

/// One failed invariant, named as in configuration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub name: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.name).collect()
    }

    fn push(&mut self, name: &'static str, detail: String) {
        self.violations.push(Violation { name, detail });
    }
}

/// Checks positivity, the Kennard inequalities of the system and of each
/// probe, the two Cauchy–Schwarz bounds and the Robertson–Schrödinger
/// condition `V + iΩ/2 ⪰ 0` on the probe covariance matrix
/// (`probe_uncertainty`). The checks are invariant under `canonicalize`.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let positive = [
        ("sigma_x", s.system.sigma_x),
        ("sigma_k", s.system.sigma_k),
        ("probe_x.delta", s.probe_x.delta),
        ("probe_x.delta_tilde", s.probe_x.delta_tilde),
        ("probe_k.delta", s.probe_k.delta),
        ("probe_k.delta_tilde", s.probe_k.delta_tilde),
        ("lambda_x", s.couplings.lambda_x),
        ("lambda_k", s.couplings.lambda_k),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            report.push("positivity", format!("{name} = {v} must be positive"));
        }
    }
    for (name, v) in [("probe_x.resolution", s.probe_x.resolution), ("probe_k.resolution", s.probe_k.resolution)] {
        if !(v >= 0.0 && v.is_finite()) {
            report.push("positivity", format!("{name} = {v} must be nonnegative"));
        }
    }
    if !report.passed() {
        return report;
    }

    let kennard = s.system.sigma_x * s.system.sigma_k;
    if kennard < 0.5 - SLACK {
        report.push("kennard_system", format!("sigma_x*sigma_k = {kennard} < 0.5"));
    }
    for (name, p) in [("kennard_probe_x", &s.probe_x), ("kennard_probe_k", &s.probe_k)] {
        let prod = p.delta * p.delta_tilde;
        if prod < 0.5 - SLACK {
            report.push(name, format!("delta*delta_tilde = {prod} < 0.5"));
        }
    }
    let kappa_max = s.probe_x.delta_tilde * s.probe_k.delta;
    if s.cross.kappa.abs() > kappa_max + SLACK {
        report.push("cauchy_schwarz_kappa", format!("|kappa| = {} > {kappa_max}", s.cross.kappa.abs()));
    }
    let xi_max = s.probe_k.delta_tilde * s.probe_x.delta;
    if s.cross.xi.abs() > xi_max + SLACK {
        report.push("cauchy_schwarz_xi", format!("|xi| = {} > {xi_max}", s.cross.xi.abs()));
    }
    if report.passed() {
        let min_eig = probe_covariance_min_eigenvalue(s);
        let scale = 1.0 + probe_covariance_trace(s);
        if min_eig < -SLACK * scale {
            report.push(
                "probe_uncertainty",
                format!("V + iΩ/2 has eigenvalue {min_eig:e}; no quantum state of the probes has these moments"),
            );
        }
    }
    report
}

fn probe_covariance_trace(s: &Scenario) -> f64 {
    let (px, pk) = (&s.probe_x, &s.probe_k);
    px.delta_tilde.powi(2) + px.delta.powi(2) + pk.delta_tilde.powi(2) + pk.delta.powi(2)
}

/// Smallest eigenvalue of `V + iΩ/2` over `(Φ_X, J_X, Φ_K, J_K)`, with the
/// covariances the scenario does not specify set to zero.
pub fn probe_covariance_min_eigenvalue(s: &Scenario) -> f64 {
    let (px, pk, c) = (&s.probe_x, &s.probe_k, &s.cross);
    let re = |v: f64| Complex64::new(v, 0.0);
    let half_i = Complex64::new(0.0, 0.5);
    let zero = Complex64::new(0.0, 0.0);
    #[rustfmt::skip]
    let m = Matrix4::new(
        re(px.delta_tilde.powi(2)), half_i,                zero,                       re(c.kappa),
        -half_i,                    re(px.delta.powi(2)),  re(c.xi),                   zero,
        zero,                       re(c.xi),              re(pk.delta_tilde.powi(2)), half_i,
        re(c.kappa),                zero,                  -half_i,                    re(pk.delta.powi(2)),
    );
    SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{CrossCovariances, Ordering, ProbeMoments, SystemMoments, Variable};

    fn base() -> Scenario {
        let h = 0.5f64.sqrt();
        Scenario::canonical(
            SystemMoments::new(h, h),
            ProbeMoments::new(Variable::X, h, h),
            ProbeMoments::new(Variable::K, h, h),
            CrossCovariances::default(),
            Ordering::XthenK,
        )
    }

    #[test]
    fn minimal_saturation_passes() {
        assert!(validate_scenario(&base()).passed());
    }

    #[test]
    fn kennard_system_fails() {
        let mut s = base();
        s.system = SystemMoments::new(0.5, 0.5);
        assert_eq!(validate_scenario(&s).names(), vec!["kennard_system"]);
    }

    #[test]
    fn cauchy_schwarz_kappa_fails() {
        let mut s = base();
        s.probe_x.delta_tilde = 1.0;
        s.probe_k.delta = 0.5;
        s.probe_k.delta_tilde = 1.0;
        s.cross.kappa = -0.6;
        assert!(validate_scenario(&s).names().contains(&"cauchy_schwarz_kappa"));
    }

    #[test]
    fn anti_aligned_correlations_are_unphysical() {
        // Kennard and Cauchy–Schwarz both pass, yet Var(u_X)Var(u_K) = 1/64.
        let mut s = base();
        s.cross = CrossCovariances::new(-0.5, 0.5);
        assert_eq!(validate_scenario(&s).names(), vec!["probe_uncertainty"]);
    }

    #[test]
    fn nonpositive_spread_reported() {
        let mut s = base();
        s.probe_k.delta = 0.0;
        assert_eq!(validate_scenario(&s).names(), vec!["positivity"]);
    }
}
