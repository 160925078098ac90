use super::grid::{Axis, Rep};
use super::plan::{plan_axes, stages, AxisPlan, Stage, DEFAULT_EXTENT_SIGMAS, DEFAULT_N};
use super::readout::{
    joint_readout_distribution, measure_moments, readout_distribution, JointTable, ProbabilityTable, ReadoutModel,
};
use super::state::{init_state, AxisId, AxisWave, ProbeWave, WaveState};
use super::wavefn::gaussian_amplitudes;
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::gaussian_prep::{preparation_wavefunction, ProbePairPreparation};
use crate::moments::{joint_noise_disturbance, noise_disturbance, variances, Ordering, Scenario, Variable};

/// Default tolerance on oracle/analytic deviations.
pub const DEFAULT_TOLERANCE: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub n: usize,
    pub extent_sigmas: f64,
    pub exec: Exec,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { n: DEFAULT_N, extent_sigmas: DEFAULT_EXTENT_SIGMAS, exec: Exec::default() }
    }
}

/// Grids and initial state of one canonical scenario, shared by every run
/// that will be compared.
#[derive(Debug, Clone)]
pub struct OracleSetup {
    scenario: Scenario,
    prep: Option<ProbePairPreparation>,
    axes: [Axis; 3],
    coverage: [f64; 3],
    exec: Exec,
}

impl OracleSetup {
    /// Plans grids wide enough for every stage sequence in `runs`. Probe
    /// states are independent Gaussians unless `prep` is given, in which
    /// case it must be the canonical preparation behind the scenario's
    /// probe moments. Correlated scenarios need a preparation.
    pub fn new(s: &Scenario, prep: Option<ProbePairPreparation>, runs: &[Vec<Stage>], options: OracleOptions) -> Result<Self> {
        Self::check_source(s, prep)?;
        let plans = plan_axes(s, runs, options.n, options.extent_sigmas)?;
        Self::with_plans(s, prep, plans, options.exec)
    }

    /// Uses grids planned elsewhere, e.g. shared with another scenario.
    pub fn with_plans(s: &Scenario, prep: Option<ProbePairPreparation>, plans: [AxisPlan; 3], exec: Exec) -> Result<Self> {
        Self::check_source(s, prep)?;
        Ok(Self {
            scenario: *s,
            prep,
            axes: [plans[0].axis, plans[1].axis, plans[2].axis],
            coverage: [plans[0].coverage, plans[1].coverage, plans[2].coverage],
            exec,
        })
    }

    fn check_source(s: &Scenario, prep: Option<ProbePairPreparation>) -> Result<()> {
        if !s.canonical {
            return Err(Error::NotCanonical);
        }
        match prep {
            None if s.cross.kappa != 0.0 || s.cross.xi != 0.0 => {
                return Err(invalid(
                    "correlated probes need a Gaussian preparation; independent Gaussian probes cannot carry kappa or xi",
                ))
            }
            Some(p) => {
                let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
                if !(close(p.delta_k(), s.probe_k.delta)
                    && close(p.delta_tilde_x(), s.probe_x.delta_tilde)
                    && close(p.kappa(), s.cross.kappa))
                {
                    return Err(invalid("preparation does not match the scenario's probe moments"));
                }
                if [s.probe_x.mean_j, s.probe_x.mean_phi, s.probe_k.mean_j, s.probe_k.mean_phi].iter().any(|&m| m != 0.0) {
                    return Err(invalid("the Gaussian preparation has no probe biases"));
                }
            }
            None => {}
        }
        Ok(())
    }

    pub fn axes(&self) -> &[Axis; 3] {
        &self.axes
    }

    /// Standard deviations covered on each axis.
    pub fn coverage(&self) -> [f64; 3] {
        self.coverage
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn initial_state(&self) -> Result<WaveState> {
        let (sy, px, pk) = (&self.scenario.system, &self.scenario.probe_x, &self.scenario.probe_k);
        let a = &self.axes;
        let system =
            AxisWave::new(gaussian_amplitudes(&a[0].position, sy.mean_x, sy.sigma_x, sy.mean_k, sy.sigma_k)?, Rep::PositionLike);
        let probes = match &self.prep {
            None => ProbeWave::Product {
                x: AxisWave::new(
                    gaussian_amplitudes(&a[1].position, px.mean_phi, px.delta_tilde, px.mean_j, px.delta)?,
                    Rep::PositionLike,
                ),
                k: AxisWave::new(
                    gaussian_amplitudes(&a[2].position, pk.mean_phi, pk.delta_tilde, pk.mean_j, pk.delta)?,
                    Rep::PositionLike,
                ),
            },
            Some(p) => ProbeWave::Entangled {
                amplitudes: preparation_wavefunction(p, &a[2].conjugate, &a[1].position)?,
                x_rep: Rep::PositionLike,
                k_rep: Rep::Conjugate,
            },
        };
        Ok(init_state(self.axes, system, probes)?.with_exec(self.exec))
    }

    /// Evolves the initial state through `stages` in order.
    pub fn run(&self, stages: &[Stage]) -> Result<WaveState> {
        let mut st = self.initial_state()?;
        let joint = [Stage::Central, Stage::KickK, Stage::KickX];
        if stages == joint {
            st.apply_joint()?;
        } else {
            for s in stages {
                match s {
                    Stage::KickX => st.kick_x(1.0)?,
                    Stage::KickK => st.kick_k(1.0)?,
                    Stage::Central => return Err(invalid("the central phase only appears inside the joint unitary")),
                }
            }
        }
        let norm = st.norm_sqr();
        if (norm - 1.0).abs() > super::state::NORM_TOLERANCE {
            return Err(Error::Resolution(format!("norm drifted to {norm} during evolution")));
        }
        Ok(st)
    }

    fn model(&self, v: Variable) -> Result<ReadoutModel> {
        ReadoutModel::from_resolution(self.scenario.probe(v).resolution)
    }

    /// Readout distributions of both probes after `stages`.
    pub fn readouts(&self, stages: &[Stage]) -> Result<[ProbabilityTable; 2]> {
        let mut st = self.run(stages)?;
        Ok([
            readout_distribution(&mut st, Variable::X, &self.model(Variable::X)?)?,
            readout_distribution(&mut st, Variable::K, &self.model(Variable::K)?)?,
        ])
    }

    /// Joint distribution of both readouts after `stages`.
    pub fn joint_readout(&self, stages: &[Stage]) -> Result<JointTable> {
        let mut st = self.run(stages)?;
        joint_readout_distribution(&mut st, &self.model(Variable::X)?, &self.model(Variable::K)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviationKind {
    Relative,
    Absolute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub quantity: &'static str,
    pub analytic: f64,
    pub oracle: f64,
    pub kind: DeviationKind,
}

impl ComparisonRow {
    fn relative(quantity: &'static str, analytic: f64, oracle: f64) -> Self {
        Self { quantity, analytic, oracle, kind: DeviationKind::Relative }
    }

    fn absolute(quantity: &'static str, analytic: f64, oracle: f64) -> Self {
        Self { quantity, analytic, oracle, kind: DeviationKind::Absolute }
    }

    pub fn deviation(&self) -> f64 {
        let d = (self.oracle - self.analytic).abs();
        match self.kind {
            DeviationKind::Relative => d / self.analytic.abs(),
            DeviationKind::Absolute => d,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub ordering: Option<Ordering>,
    pub rows: Vec<ComparisonRow>,
    pub coverage: [f64; 3],
}

impl OracleReport {
    pub fn get(&self, quantity: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().map(ComparisonRow::deviation).fold(0.0, f64::max)
    }

    pub fn within(&self, tolerance: f64) -> bool {
        self.rows.iter().all(|r| r.deviation() <= tolerance)
    }
}

fn moments_of(t: &ProbabilityTable) -> (f64, f64) {
    let m = measure_moments(t);
    (m.mean, m.variance)
}

fn single_kick(v: Variable) -> Vec<Stage> {
    match v {
        Variable::X => vec![Stage::KickX],
        Variable::K => vec![Stage::KickK],
    }
}

fn index(v: Variable) -> usize {
    match v {
        Variable::X => 0,
        Variable::K => 1,
    }
}

/// Mean and variance of a variable of the initial state.
fn state_moments(st: &mut WaveState, id: AxisId, rep: Rep) -> (f64, f64) {
    st.to_rep(id, rep);
    let p = st.marginal(id);
    let pts = st.current_grid(id).points();
    let mean: f64 = p.iter().zip(&pts).map(|(p, x)| p * x).sum();
    let var = p.iter().zip(&pts).map(|(p, x)| p * (x - mean) * (x - mean)).sum();
    (mean, var)
}

fn state_covariance(st: &mut WaveState, (a, ra): (AxisId, Rep), (b, rb): (AxisId, Rep)) -> f64 {
    let (ma, _) = state_moments(st, a, ra);
    let (mb, _) = state_moments(st, b, rb);
    let pa = st.current_grid(a).points();
    let pb = st.current_grid(b).points();
    let joint = st.marginal_pair(a, b);
    joint.indexed_iter().map(|((i, j), p)| p * (pa[i] - ma) * (pb[j] - mb)).sum()
}

/// Runs the scenario's measurement on the grid oracle and compares readout
/// variances, noise, disturbance and systematic shifts with the moment
/// formulas. Disturbances come from paired runs with the other interaction
/// switched off; noise is measured against the oracle's own initial system
/// spread.
pub fn compare(s: &Scenario, prep: Option<ProbePairPreparation>, options: OracleOptions) -> Result<OracleReport> {
    let ordering = s.ordering();
    let full = stages(ordering);
    let runs: Vec<Vec<Stage>> = match ordering {
        Ordering::Joint => vec![full.clone(), single_kick(Variable::X), single_kick(Variable::K)],
        _ => vec![full.clone(), single_kick(ordering.first().other())],
    };
    let setup = OracleSetup::new(s, prep, &runs, options)?;
    let mut init = setup.initial_state()?;
    let sys =
        [state_moments(&mut init, AxisId::System, Rep::PositionLike), state_moments(&mut init, AxisId::System, Rep::Conjugate)];
    drop(init);
    let tables: Vec<[ProbabilityTable; 2]> = runs.iter().map(|r| setup.readouts(r)).collect::<Result<_>>()?;
    let f = |run: usize, v: Variable| moments_of(&tables[run][index(v)]);

    let mut rows = Vec::new();
    match ordering {
        Ordering::Joint => {
            let jv = variances(s)?;
            let nd = joint_noise_disturbance(s)?;
            for (v, report) in [(Variable::X, nd[0]), (Variable::K, nd[1])] {
                let (mean, var) = f(0, v);
                let (mean_alone, var_alone) = f(if v == Variable::X { 2 } else { 1 }, v.other());
                let (mean_j, var_j) = f(0, v.other());
                let analytic_var = if v == Variable::X { jv.delta2_first } else { jv.delta2_second_given_first };
                let (names, sys_m) = match v {
                    Variable::X => (["delta2_x", "epsilon2_x", "eta2_k_given_x", "d_x", "d_k_given_x"], sys[0]),
                    Variable::K => (["delta2_k", "epsilon2_k", "eta2_x_given_k", "d_k", "d_x_given_k"], sys[1]),
                };
                rows.push(ComparisonRow::relative(names[0], analytic_var, var));
                rows.push(ComparisonRow::relative(names[1], report.epsilon2, var - sys_m.1));
                rows.push(ComparisonRow::absolute(names[2], report.eta2_signed, var_j - var_alone));
                rows.push(ComparisonRow::absolute(names[3], report.d_sys_error, mean - sys_m.0));
                rows.push(ComparisonRow::absolute(names[4], report.d_sys_disturbance, mean_j - mean_alone));
            }
        }
        _ => {
            let first = ordering.first();
            let second = first.other();
            let v = variances(s)?;
            let nd = noise_disturbance(s)?;
            let sys_m = sys[index(first)];
            let (mean_first, var_first) = f(0, first);
            let (mean_second, var_second) = f(0, second);
            let (mean_alone, var_alone) = f(1, second);
            let names = match first {
                Variable::X => ["delta2_x", "delta2_k_given_x", "delta2_k", "epsilon2_x", "eta2_k_given_x", "d_x", "d_k_given_x"],
                Variable::K => ["delta2_k", "delta2_x_given_k", "delta2_x", "epsilon2_k", "eta2_x_given_k", "d_k", "d_x_given_k"],
            };
            rows.push(ComparisonRow::relative(names[0], v.delta2_first, var_first));
            rows.push(ComparisonRow::relative(names[1], v.delta2_second_given_first, var_second));
            rows.push(ComparisonRow::relative(names[2], v.delta2_second_alone, var_alone));
            rows.push(ComparisonRow::relative(names[3], nd.epsilon2, var_first - sys_m.1));
            rows.push(ComparisonRow::absolute(names[4], nd.eta2_signed, var_second - var_alone));
            rows.push(ComparisonRow::absolute(names[5], nd.d_sys_error, mean_first - sys_m.0));
            rows.push(ComparisonRow::absolute(names[6], nd.d_sys_disturbance, mean_second - mean_alone));
        }
    }
    Ok(OracleReport { ordering: Some(ordering), rows, coverage: setup.coverage() })
}

/// With every interaction switched off: the sampled initial state against
/// the scenario's input moments.
pub fn compare_initial(s: &Scenario, prep: Option<ProbePairPreparation>, options: OracleOptions) -> Result<OracleReport> {
    let setup = OracleSetup::new(s, prep, &[vec![]], options)?;
    let mut st = setup.initial_state()?;
    let (sy, px, pk, c) = (&s.system, &s.probe_x, &s.probe_k, &s.cross);
    let mut rows = Vec::new();
    let vars = [
        ("x", AxisId::System, Rep::PositionLike, sy.mean_x, sy.sigma_x),
        ("k", AxisId::System, Rep::Conjugate, sy.mean_k, sy.sigma_k),
        ("phi_x", AxisId::ProbeX, Rep::PositionLike, px.mean_phi, px.delta_tilde),
        ("j_x", AxisId::ProbeX, Rep::Conjugate, px.mean_j, px.delta),
        ("phi_k", AxisId::ProbeK, Rep::PositionLike, pk.mean_phi, pk.delta_tilde),
        ("j_k", AxisId::ProbeK, Rep::Conjugate, pk.mean_j, pk.delta),
    ];
    const MEAN: [&str; 6] = ["mean_x", "mean_k", "mean_phi_x", "mean_j_x", "mean_phi_k", "mean_j_k"];
    const VAR: [&str; 6] = ["var_x", "var_k", "var_phi_x", "var_j_x", "var_phi_k", "var_j_k"];
    for (i, (_, id, rep, mean, sd)) in vars.into_iter().enumerate() {
        let (m, v) = state_moments(&mut st, id, rep);
        rows.push(ComparisonRow::absolute(MEAN[i], mean, m));
        rows.push(ComparisonRow::relative(VAR[i], sd * sd, v));
    }
    let kappa = state_covariance(&mut st, (AxisId::ProbeX, Rep::PositionLike), (AxisId::ProbeK, Rep::Conjugate));
    let xi = state_covariance(&mut st, (AxisId::ProbeK, Rep::PositionLike), (AxisId::ProbeX, Rep::Conjugate));
    rows.push(ComparisonRow::absolute("kappa", c.kappa, kappa));
    rows.push(ComparisonRow::absolute("xi", c.xi, xi));
    Ok(OracleReport { ordering: None, rows, coverage: setup.coverage() })
}
