use super::{Ordering, ProbeMoments, Scenario, Variable};
use crate::error::{invalid, Error, Result};

/// Readout variances of one experiment.
///
/// Sequential orderings: `delta2_first` is the first probe's readout,
/// `delta2_second_given_first` the second probe's readout with the first
/// interaction present, `delta2_second_alone` the same readout with the
/// first interaction switched off. For the joint ordering the X readout is
/// reported as "first" and the K readout as "second".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport {
    pub delta2_first: f64,
    pub delta2_second_given_first: f64,
    pub delta2_second_alone: f64,
}

/// Noise of the variable measured `first` and the disturbance it causes on
/// the other one. `eta2_signed` may be negative (noise reduction).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseDisturbanceReport {
    pub first: Variable,
    pub epsilon2: f64,
    pub eta2_signed: f64,
    pub d_sys_error: f64,
    pub d_sys_disturbance: f64,
    pub total_error2: f64,
    pub total_disturbance2: f64,
}

impl NoiseDisturbanceReport {
    fn new(first: Variable, epsilon2: f64, eta2: f64, d_err: f64, d_dist: f64) -> Self {
        Self {
            first,
            epsilon2,
            eta2_signed: eta2,
            d_sys_error: d_err,
            d_sys_disturbance: d_dist,
            total_error2: d_err * d_err + epsilon2,
            total_disturbance2: eta2 + d_dist * d_dist,
        }
    }

    /// The earlier measurement narrowed the later readout.
    pub fn noise_reduction(&self) -> bool {
        self.eta2_signed < 0.0
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon2.sqrt()
    }
}

/// Absorbs the couplings: `Φ_A → λ_A Φ_A`, `J_A → J_A / λ_A`.
pub fn canonicalize(s: &Scenario) -> Result<Scenario> {
    if s.canonical {
        return Err(Error::AlreadyCanonical);
    }
    let (lx, lk) = (s.couplings.lambda_x, s.couplings.lambda_k);
    if !(lx > 0.0 && lx.is_finite()) || !(lk > 0.0 && lk.is_finite()) {
        return Err(invalid(format!("couplings must be positive, got lambda_x={lx}, lambda_k={lk}")));
    }
    let scale = |p: &ProbeMoments, l: f64| ProbeMoments {
        label: p.label,
        delta: p.delta / l,
        delta_tilde: p.delta_tilde * l,
        mean_j: p.mean_j / l,
        mean_phi: p.mean_phi * l,
        resolution: p.resolution / l,
    };
    let mut out = *s;
    out.probe_x = scale(&s.probe_x, lx);
    out.probe_k = scale(&s.probe_k, lk);
    out.cross.kappa = s.cross.kappa * lx / lk;
    out.cross.xi = s.cross.xi * lk / lx;
    out.couplings.lambda_x = 1.0;
    out.couplings.lambda_k = 1.0;
    out.canonical = true;
    Ok(out)
}

fn require_canonical(s: &Scenario) -> Result<()> {
    if s.canonical {
        Ok(())
    } else {
        Err(Error::NotCanonical)
    }
}

fn sq(v: f64) -> f64 {
    v * v
}

pub fn sequential_variances(s: &Scenario) -> Result<VarianceReport> {
    require_canonical(s)?;
    let (sys, px, pk, c) = (&s.system, &s.probe_x, &s.probe_k, &s.cross);
    let x_alone = sq(sys.sigma_x) + sq(px.delta) + sq(px.resolution);
    let k_alone = sq(sys.sigma_k) + sq(pk.delta) + sq(pk.resolution);
    match s.ordering() {
        Ordering::XthenK => Ok(VarianceReport {
            delta2_first: x_alone,
            delta2_second_given_first: k_alone + sq(px.delta_tilde) + 2.0 * c.kappa,
            delta2_second_alone: k_alone,
        }),
        Ordering::KthenX => Ok(VarianceReport {
            delta2_first: k_alone,
            delta2_second_given_first: x_alone + sq(pk.delta_tilde) - 2.0 * c.xi,
            delta2_second_alone: x_alone,
        }),
        Ordering::Joint => Err(invalid("joint ordering: use joint_variances")),
    }
}

pub fn joint_variances(s: &Scenario) -> Result<VarianceReport> {
    require_canonical(s)?;
    if s.ordering() != Ordering::Joint {
        return Err(invalid("sequential ordering: use sequential_variances"));
    }
    Ok(joint_variances_unchecked(s))
}

/// Midpoint-prescription variances, evaluated regardless of the ordering tag.
pub(crate) fn joint_variances_unchecked(s: &Scenario) -> VarianceReport {
    let (sys, px, pk, c) = (&s.system, &s.probe_x, &s.probe_k, &s.cross);
    let k_alone = sq(sys.sigma_k) + sq(pk.delta) + sq(pk.resolution);
    VarianceReport {
        delta2_first: sq(sys.sigma_x) + sq(px.delta) + sq(px.resolution) + sq(pk.delta_tilde) / 4.0 - c.xi,
        delta2_second_given_first: k_alone + sq(px.delta_tilde) / 4.0 + c.kappa,
        delta2_second_alone: k_alone,
    }
}

/// Dispatches on the ordering.
pub fn variances(s: &Scenario) -> Result<VarianceReport> {
    match s.ordering() {
        Ordering::Joint => joint_variances(s),
        _ => sequential_variances(s),
    }
}

pub fn noise_disturbance(s: &Scenario) -> Result<NoiseDisturbanceReport> {
    require_canonical(s)?;
    let (px, pk, c) = (&s.probe_x, &s.probe_k, &s.cross);
    Ok(match s.ordering() {
        Ordering::XthenK => NoiseDisturbanceReport::new(
            Variable::X,
            sq(px.delta) + sq(px.resolution),
            sq(px.delta_tilde) + 2.0 * c.kappa,
            px.mean_j,
            px.mean_phi,
        ),
        Ordering::KthenX => NoiseDisturbanceReport::new(
            Variable::K,
            sq(pk.delta) + sq(pk.resolution),
            sq(pk.delta_tilde) - 2.0 * c.xi,
            pk.mean_j,
            -pk.mean_phi,
        ),
        Ordering::Joint => joint_noise_disturbance_unchecked(s)[0],
    })
}

/// Both directions of a joint measurement: `[X noise with K|X disturbance,
/// K noise with X|K disturbance]`.
pub fn joint_noise_disturbance(s: &Scenario) -> Result<[NoiseDisturbanceReport; 2]> {
    require_canonical(s)?;
    if s.ordering() != Ordering::Joint {
        return Err(invalid("joint_noise_disturbance requires the joint ordering"));
    }
    Ok(joint_noise_disturbance_unchecked(s))
}

pub(crate) fn joint_noise_disturbance_unchecked(s: &Scenario) -> [NoiseDisturbanceReport; 2] {
    let (px, pk, c) = (&s.probe_x, &s.probe_k, &s.cross);
    [
        NoiseDisturbanceReport::new(
            Variable::X,
            sq(px.delta) + sq(px.resolution) + sq(pk.delta_tilde) / 4.0 - c.xi,
            sq(px.delta_tilde) / 4.0 + c.kappa,
            px.mean_j - pk.mean_phi / 2.0,
            px.mean_phi / 2.0,
        ),
        NoiseDisturbanceReport::new(
            Variable::K,
            sq(pk.delta) + sq(pk.resolution) + sq(px.delta_tilde) / 4.0 + c.kappa,
            sq(pk.delta_tilde) / 4.0 - c.xi,
            pk.mean_j + px.mean_phi / 2.0,
            -pk.mean_phi / 2.0,
        ),
    ]
}

/// K coupling that makes the canonical spreads `δ_K/λ_K` and `λ_X δ̃_X`
/// equal, given physical (unscaled) probe spreads.
pub fn cancellation_coupling(delta_k_physical: f64, delta_tilde_x_physical: f64, lambda_x: f64) -> Result<f64> {
    for (name, v) in [("delta_k", delta_k_physical), ("delta_tilde_x", delta_tilde_x_physical), ("lambda_x", lambda_x)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(delta_k_physical / (lambda_x * delta_tilde_x_physical))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{Couplings, CrossCovariances, SystemMoments};

    fn scenario(sigma_k2: f64, delta_k: f64, delta_tilde_x: f64, kappa: f64) -> Scenario {
        Scenario::canonical(
            SystemMoments::new(0.5f64.sqrt(), sigma_k2.sqrt()),
            ProbeMoments::new(Variable::X, 0.5, delta_tilde_x),
            ProbeMoments::new(Variable::K, delta_k, 1.0),
            CrossCovariances::new(kappa, 0.0),
            Ordering::XthenK,
        )
    }

    #[test]
    fn conditional_k_variance_examples() {
        let v = sequential_variances(&scenario(0.5, 0.5, 1.0, 0.0)).unwrap();
        assert!((v.delta2_second_given_first - 1.75).abs() < 1e-15);
        let v = sequential_variances(&scenario(0.5, 0.5, 1.0, -0.4)).unwrap();
        assert!((v.delta2_second_given_first - 0.95).abs() < 1e-15);
        // perfect anticorrelation with equal spreads leaves only the system
        let v = sequential_variances(&scenario(0.5, 1.0, 1.0, -1.0)).unwrap();
        assert!((v.delta2_second_given_first - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sequential_rejects_joint_and_non_canonical() {
        let s = scenario(0.5, 0.5, 1.0, 0.0);
        assert!(sequential_variances(&s.with_ordering(Ordering::Joint)).is_err());
        assert!(joint_variances(&s).is_err());
        let mut raw = s;
        raw.canonical = false;
        assert_eq!(sequential_variances(&raw), Err(Error::NotCanonical));
    }

    fn joint_minimal(kappa: f64) -> Scenario {
        Scenario::canonical(
            SystemMoments::new(0.5f64.sqrt(), 0.5f64.sqrt()),
            ProbeMoments::new(Variable::X, 0.5, 1.0),
            ProbeMoments::new(Variable::K, 0.5, 1.0),
            CrossCovariances::new(kappa, 0.0),
            Ordering::Joint,
        )
    }

    #[test]
    fn joint_saturation_and_kappa_shift() {
        let v = joint_variances(&joint_minimal(0.0)).unwrap();
        assert!((v.delta2_first - 1.0).abs() < 1e-15);
        assert!((v.delta2_second_given_first - 1.0).abs() < 1e-15);
        let v = joint_variances(&joint_minimal(0.5)).unwrap();
        assert!((v.delta2_first - 1.0).abs() < 1e-15);
        assert!((v.delta2_second_given_first - 1.5).abs() < 1e-15);
    }

    #[test]
    fn noise_disturbance_examples() {
        let s = scenario(0.5, 0.5, 1.0, 0.0);
        let nd = noise_disturbance(&s).unwrap();
        assert!((nd.epsilon() - 0.5).abs() < 1e-15);
        assert!((nd.eta2_signed - 1.0).abs() < 1e-15);
        assert!((nd.epsilon() * nd.eta2_signed.sqrt() - 0.5).abs() < 1e-15);

        let nd = noise_disturbance(&scenario(0.5, 1.0, 2.0, -2.0)).unwrap();
        assert_eq!(nd.eta2_signed, 0.0);
        assert!(!nd.noise_reduction());

        let nd = noise_disturbance(&scenario(0.5, 1.0, 1.0, -1.0)).unwrap();
        assert_eq!(nd.eta2_signed, -1.0);
        assert!(nd.noise_reduction());
    }

    #[test]
    fn totals_and_biases() {
        let mut s = scenario(0.5, 0.5, 1.0, 0.0);
        s.probe_x = s.probe_x.with_biases(0.7, -0.3);
        let nd = noise_disturbance(&s).unwrap();
        assert_eq!(nd.d_sys_error, 0.7);
        assert_eq!(nd.d_sys_disturbance, -0.3);
        assert!((nd.total_error2 - (0.49 + 0.25)).abs() < 1e-15);
        assert!((nd.total_disturbance2 - (1.0 + 0.09)).abs() < 1e-15);
    }

    #[test]
    fn canonicalize_examples() {
        let mut s = scenario(0.5, 0.5, 1.0, 0.0);
        s.canonical = false;
        s.couplings = Couplings::new(2.0, 1.0, Ordering::XthenK);
        let c = canonicalize(&s).unwrap();
        assert_eq!(c.probe_x.delta_tilde, 2.0);
        assert_eq!(c.probe_x.delta, 0.25);
        assert!(c.canonical);
        assert_eq!(canonicalize(&c), Err(Error::AlreadyCanonical));

        let mut unit = scenario(0.5, 0.5, 1.0, -0.3);
        unit.canonical = false;
        let c = canonicalize(&unit).unwrap();
        assert_eq!(c.probe_x, unit.probe_x);
        assert_eq!(c.probe_k, unit.probe_k);
        assert_eq!(c.cross, unit.cross);

        let mut bad = unit;
        bad.couplings.lambda_k = 0.0;
        assert!(matches!(canonicalize(&bad), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn cancellation_coupling_examples() {
        assert_eq!(cancellation_coupling(2.0, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(cancellation_coupling(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(cancellation_coupling(0.0, 1.0, 1.0).is_err());
        assert!(cancellation_coupling(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn cancellation_restores_system_variance() {
        let (dk, dtx, lx) = (3.0, 0.8, 1.7);
        let lk = cancellation_coupling(dk, dtx, lx).unwrap();
        let raw = Scenario::new(
            SystemMoments::new(0.9, 0.6),
            ProbeMoments::new(Variable::X, 0.7, dtx),
            ProbeMoments::new(Variable::K, dk, 0.5).with_resolution(0.2),
            CrossCovariances::new(-dtx * dk, 0.0),
            Couplings::new(lx, lk, Ordering::XthenK),
        );
        let v = sequential_variances(&canonicalize(&raw).unwrap()).unwrap();
        let resolution = 0.2 / lk;
        assert!((v.delta2_second_given_first - (0.36 + resolution * resolution)).abs() < 1e-12);
    }
}
