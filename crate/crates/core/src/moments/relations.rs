use super::formulas::{joint_noise_disturbance_unchecked, joint_variances_unchecked, noise_disturbance};
use super::{Ordering, Scenario, Variable, SLACK};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    /// `ε·η ≥ 1/2` for the first variable's noise and the disturbance it causes.
    HeisenbergProduct,
    /// `εη + εσ' + ση ≥ 1/2` with the operational (statistical) disturbance.
    OzawaOperational,
    /// The same left side with Ozawa's disturbance `η̃² = ⟨Φ²⟩` of the first probe.
    OzawaDefinition,
    /// `Var(u_X)·Var(u_K) ≥ 1/4`.
    UProduct,
    /// `ε_X² ε_K² ≥ 1/4` for the joint measurement.
    JointNoiseProduct,
    /// `Δ_X Δ_K ≥ 1` for the joint measurement.
    ArthursKelly,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::HeisenbergProduct,
        Relation::OzawaOperational,
        Relation::OzawaDefinition,
        Relation::UProduct,
        Relation::JointNoiseProduct,
        Relation::ArthursKelly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::HeisenbergProduct => "heisenberg_product",
            Relation::OzawaOperational => "ozawa_operational",
            Relation::OzawaDefinition => "ozawa_definition",
            Relation::UProduct => "u_product",
            Relation::JointNoiseProduct => "joint_noise_product",
            Relation::ArthursKelly => "arthurs_kelly",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Holds,
    Violated,
    /// `η² < 0`: the left side has no real value and the relation is
    /// trivially violated.
    Reduction,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Holds => "holds",
            Status::Violated => "violated",
            Status::Reduction => "reduction",
        }
    }

    fn compare(lhs: f64, bound: f64) -> Status {
        if lhs >= bound - SLACK {
            Status::Holds
        } else {
            Status::Violated
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationCheck {
    pub relation: Relation,
    /// Evaluated left side. Under [`Status::Reduction`] the imaginary
    /// disturbance `i|η|` is carried as `−|η|`, so the value is negative.
    pub lhs: f64,
    pub bound: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationReport {
    pub first: Variable,
    pub checks: Vec<RelationCheck>,
}

impl RelationReport {
    pub fn get(&self, relation: Relation) -> &RelationCheck {
        self.checks.iter().find(|c| c.relation == relation).expect("every relation is evaluated")
    }
}

/// Evaluates the six inequalities. The Heisenberg and Ozawa checks follow
/// the scenario's ordering; the u-operator, joint-noise and Arthurs–Kelly
/// checks always use the joint (midpoint) prescription, including any
/// readout resolution present in the scenario.
pub fn check_relations(s: &Scenario) -> Result<RelationReport> {
    let nd = noise_disturbance(s)?;
    let first = nd.first;
    let eps = nd.epsilon();
    let eta_abs = nd.eta2_signed.abs().sqrt();
    let reduced = nd.noise_reduction();
    let signed_eta = if reduced { -eta_abs } else { eta_abs };
    let sigma_first = s.system.sigma(first);
    let sigma_second = s.system.sigma(first.other());

    let mut checks = Vec::with_capacity(6);

    let heis = eps * signed_eta;
    checks.push(RelationCheck {
        relation: Relation::HeisenbergProduct,
        lhs: heis,
        bound: 0.5,
        status: if reduced { Status::Reduction } else { Status::compare(heis, 0.5) },
    });

    let ozawa = |eta: f64| eps * eta + eps * sigma_second + sigma_first * eta;
    let op = ozawa(signed_eta);
    checks.push(RelationCheck {
        relation: Relation::OzawaOperational,
        lhs: op,
        bound: 0.5,
        status: if reduced { Status::Reduction } else { Status::compare(op, 0.5) },
    });

    // Ozawa's disturbance of the second variable is the kick Φ of the first
    // probe, taken as a raw second moment (statistical plus systematic).
    let kicker = s.probe(first);
    let eta_tilde = (kicker.delta_tilde * kicker.delta_tilde + kicker.mean_phi * kicker.mean_phi).sqrt();
    let od = ozawa(eta_tilde);
    checks.push(RelationCheck { relation: Relation::OzawaDefinition, lhs: od, bound: 0.5, status: Status::compare(od, 0.5) });

    let (px, pk, c) = (&s.probe_x, &s.probe_k, &s.cross);
    let var_ux = px.delta * px.delta + pk.delta_tilde * pk.delta_tilde / 4.0 - c.xi;
    let var_uk = pk.delta * pk.delta + px.delta_tilde * px.delta_tilde / 4.0 + c.kappa;
    let u = var_ux * var_uk;
    checks.push(RelationCheck { relation: Relation::UProduct, lhs: u, bound: 0.25, status: Status::compare(u, 0.25) });

    let [jx, jk] = joint_noise_disturbance_unchecked(s);
    let jn = jx.epsilon2 * jk.epsilon2;
    checks.push(RelationCheck { relation: Relation::JointNoiseProduct, lhs: jn, bound: 0.25, status: Status::compare(jn, 0.25) });

    let jv = joint_variances_unchecked(s);
    let ak = (jv.delta2_first * jv.delta2_second_given_first).sqrt();
    checks.push(RelationCheck { relation: Relation::ArthursKelly, lhs: ak, bound: 1.0, status: Status::compare(ak, 1.0) });

    debug_assert!(s.ordering() != Ordering::Joint || first == Variable::X);
    Ok(RelationReport { first, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{CrossCovariances, ProbeMoments, SystemMoments};

    /// δ̃_X = δ_K = 2, κ = −2 with the pure-preparation noise δ_X² = 1/12.
    fn ozawa_counterexample() -> Scenario {
        Scenario::canonical(
            SystemMoments::new(0.5, 1.0),
            ProbeMoments::new(Variable::X, (1.0f64 / 12.0).sqrt(), 2.0),
            ProbeMoments::new(Variable::K, 2.0, (1.0f64 / 12.0).sqrt()),
            CrossCovariances::new(-2.0, -1.0 / 24.0),
            Ordering::XthenK,
        )
    }

    #[test]
    fn operational_ozawa_violated_definition_holds() {
        let r = check_relations(&ozawa_counterexample()).unwrap();
        let op = r.get(Relation::OzawaOperational);
        assert!((op.lhs - 1.0 / 12f64.sqrt()).abs() < 1e-12);
        assert_eq!(op.status, Status::Violated);
        let od = r.get(Relation::OzawaDefinition);
        let expected = 2.0 / 12f64.sqrt() + 1.0 / 12f64.sqrt() + 1.0;
        assert!((od.lhs - expected).abs() < 1e-12);
        assert!((od.lhs - 1.866).abs() < 1e-3);
        assert_eq!(od.status, Status::Holds);
        // η = 0 exactly: Heisenberg product is zero, not a reduction
        assert_eq!(r.get(Relation::HeisenbergProduct).status, Status::Violated);
    }

    #[test]
    fn reduction_is_flagged() {
        let mut s = ozawa_counterexample();
        s.cross.kappa = -2.5;
        let r = check_relations(&s).unwrap();
        assert_eq!(r.get(Relation::HeisenbergProduct).status, Status::Reduction);
        assert_eq!(r.get(Relation::OzawaOperational).status, Status::Reduction);
        assert!(r.get(Relation::HeisenbergProduct).lhs < 0.0);
    }

    #[test]
    fn uncorrelated_minimal_saturates() {
        let s = Scenario::canonical(
            SystemMoments::new(0.5f64.sqrt(), 0.5f64.sqrt()),
            ProbeMoments::new(Variable::X, 0.5, 1.0),
            ProbeMoments::new(Variable::K, 0.5, 1.0),
            CrossCovariances::default(),
            Ordering::Joint,
        );
        let r = check_relations(&s).unwrap();
        for rel in [Relation::UProduct, Relation::JointNoiseProduct, Relation::ArthursKelly] {
            assert_eq!(r.get(rel).status, Status::Holds);
        }
        // midpoint noise δ_X² + δ̃_K²/4 = 1/2 and disturbance δ̃_X²/4 = 1/4
        assert!((r.get(Relation::HeisenbergProduct).lhs - 0.5f64.sqrt() * 0.5).abs() < 1e-15);
        assert!((r.get(Relation::ArthursKelly).lhs - 1.0).abs() < 1e-12);
        let seq = check_relations(&s.with_ordering(Ordering::XthenK)).unwrap();
        assert!((seq.get(Relation::HeisenbergProduct).lhs - 0.5).abs() < 1e-15);
        assert!(seq.checks.iter().all(|c| c.status == Status::Holds));
    }

    #[test]
    fn k_first_uses_k_noise() {
        let s = ozawa_counterexample().exchanged();
        assert_eq!(s.ordering(), Ordering::KthenX);
        let r = check_relations(&s).unwrap();
        assert_eq!(r.first, Variable::K);
        let op = r.get(Relation::OzawaOperational);
        assert!((op.lhs - 1.0 / 12f64.sqrt()).abs() < 1e-12);
    }
}
