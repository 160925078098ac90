//! Second-moment description of a nondemolition position/momentum experiment
//! and the closed-form variances, noise and disturbance it implies.
//!
//! Units: ħ = 1 and momentum is carried as the wave number `K = P/ħ`.
//! Probe `A ∈ {X, K}` has pointer `J_A` and kick variable `Φ_A` with
//! `[Φ_A, J_A] = i`. The X probe shifts `J_X` by `X` and kicks `K` by `Φ_X`;
//! the K probe shifts `J_K` by `K` and kicks `X` by `−Φ_K`.
//!
//! | ordering | interaction times (τ → 0⁺)       |
//! |----------|-----------------------------------|
//! | `XthenK` | X probe at `−τ`, K probe at `+τ`  |
//! | `KthenX` | K probe at `−τ`, X probe at `+τ`  |
//! | `Joint`  | both at `t = 0`                   |

mod formulas;
mod relations;
mod validate;

pub use formulas::{
    cancellation_coupling, canonicalize, joint_noise_disturbance, joint_variances, noise_disturbance, sequential_variances,
    variances, NoiseDisturbanceReport, VarianceReport,
};
pub use relations::{check_relations, Relation, RelationCheck, RelationReport, Status};
pub use validate::{probe_covariance_min_eigenvalue, validate_scenario, ValidationReport, Violation};

/// Absolute slack used by every inequality check.
pub const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    X,
    K,
}

impl Variable {
    pub fn other(self) -> Variable {
        match self {
            Variable::X => Variable::K,
            Variable::K => Variable::X,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::X => "x",
            Variable::K => "k",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ordering {
    XthenK,
    KthenX,
    Joint,
}

impl Ordering {
    /// The variable whose probe interacts first (X for the joint ordering).
    pub fn first(self) -> Variable {
        match self {
            Ordering::KthenX => Variable::K,
            _ => Variable::X,
        }
    }

    pub fn is_sequential(self) -> bool {
        self != Ordering::Joint
    }

    pub fn exchanged(self) -> Ordering {
        match self {
            Ordering::XthenK => Ordering::KthenX,
            Ordering::KthenX => Ordering::XthenK,
            Ordering::Joint => Ordering::Joint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemMoments {
    pub mean_x: f64,
    pub mean_k: f64,
    pub sigma_x: f64,
    pub sigma_k: f64,
}

impl SystemMoments {
    pub fn new(sigma_x: f64, sigma_k: f64) -> Self {
        Self { mean_x: 0.0, mean_k: 0.0, sigma_x, sigma_k }
    }

    /// Minimal-uncertainty state with `σ_X σ_K = 1/2`.
    pub fn minimal(sigma_x: f64) -> Self {
        Self::new(sigma_x, 0.5 / sigma_x)
    }

    pub fn with_means(mut self, mean_x: f64, mean_k: f64) -> Self {
        self.mean_x = mean_x;
        self.mean_k = mean_k;
        self
    }

    pub fn sigma(&self, v: Variable) -> f64 {
        match v {
            Variable::X => self.sigma_x,
            Variable::K => self.sigma_k,
        }
    }
}

/// Moments of one probe: pointer `J` spread `delta`, kick `Φ` spread
/// `delta_tilde`, the two biases and the readout resolution `δ'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeMoments {
    pub label: Variable,
    pub delta: f64,
    pub delta_tilde: f64,
    pub mean_j: f64,
    pub mean_phi: f64,
    pub resolution: f64,
}

impl ProbeMoments {
    pub fn new(label: Variable, delta: f64, delta_tilde: f64) -> Self {
        Self { label, delta, delta_tilde, mean_j: 0.0, mean_phi: 0.0, resolution: 0.0 }
    }

    pub fn minimal(label: Variable, delta: f64) -> Self {
        Self::new(label, delta, 0.5 / delta)
    }

    pub fn with_biases(mut self, mean_j: f64, mean_phi: f64) -> Self {
        self.mean_j = mean_j;
        self.mean_phi = mean_phi;
        self
    }

    pub fn with_resolution(mut self, resolution: f64) -> Self {
        self.resolution = resolution;
        self
    }
}

/// `kappa = cov(Φ_X, J_K)`, `xi = cov(Φ_K, J_X)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CrossCovariances {
    pub kappa: f64,
    pub xi: f64,
}

impl CrossCovariances {
    pub fn new(kappa: f64, xi: f64) -> Self {
        Self { kappa, xi }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub lambda_x: f64,
    pub lambda_k: f64,
    pub ordering: Ordering,
}

impl Couplings {
    pub fn unit(ordering: Ordering) -> Self {
        Self { lambda_x: 1.0, lambda_k: 1.0, ordering }
    }

    pub fn new(lambda_x: f64, lambda_k: f64, ordering: Ordering) -> Self {
        Self { lambda_x, lambda_k, ordering }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub system: SystemMoments,
    pub probe_x: ProbeMoments,
    pub probe_k: ProbeMoments,
    pub cross: CrossCovariances,
    pub couplings: Couplings,
    /// Set once the couplings have been absorbed into the probe variables.
    pub canonical: bool,
}

impl Scenario {
    pub fn new(
        system: SystemMoments,
        probe_x: ProbeMoments,
        probe_k: ProbeMoments,
        cross: CrossCovariances,
        couplings: Couplings,
    ) -> Self {
        Self { system, probe_x, probe_k, cross, couplings, canonical: false }
    }

    /// A scenario that is canonical from the outset (unit couplings).
    pub fn canonical(
        system: SystemMoments,
        probe_x: ProbeMoments,
        probe_k: ProbeMoments,
        cross: CrossCovariances,
        ordering: Ordering,
    ) -> Self {
        Self { system, probe_x, probe_k, cross, couplings: Couplings::unit(ordering), canonical: true }
    }

    pub fn ordering(&self) -> Ordering {
        self.couplings.ordering
    }

    pub fn with_ordering(mut self, ordering: Ordering) -> Self {
        self.couplings.ordering = ordering;
        self
    }

    pub fn probe(&self, v: Variable) -> &ProbeMoments {
        match v {
            Variable::X => &self.probe_x,
            Variable::K => &self.probe_k,
        }
    }

    /// Mirror image under `X → K`, `K → −X`: probes swap roles with
    /// `Φ_A → −Φ_other`, so `κ → −ξ`, `ξ → −κ`, and the sequential orderings
    /// swap. Every formula of this module maps onto its mirror.
    pub fn exchanged(&self) -> Scenario {
        let s = &self.system;
        let swap = |p: &ProbeMoments, label| ProbeMoments {
            label,
            delta: p.delta,
            delta_tilde: p.delta_tilde,
            mean_j: p.mean_j,
            mean_phi: -p.mean_phi,
            resolution: p.resolution,
        };
        Scenario {
            system: SystemMoments { mean_x: s.mean_k, mean_k: -s.mean_x, sigma_x: s.sigma_k, sigma_k: s.sigma_x },
            probe_x: swap(&self.probe_k, Variable::X),
            probe_k: swap(&self.probe_x, Variable::K),
            cross: CrossCovariances { kappa: -self.cross.xi, xi: -self.cross.kappa },
            couplings: Couplings {
                lambda_x: self.couplings.lambda_k,
                lambda_k: self.couplings.lambda_x,
                ordering: self.couplings.ordering.exchanged(),
            },
            canonical: self.canonical,
        }
    }
}
