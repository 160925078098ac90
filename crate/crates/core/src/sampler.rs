//! Monte Carlo version of the calibration protocol.
//!
//! Outcomes are drawn from oracle readout tables by inverse-transform
//! sampling with uniform jitter inside each bin. A batch is split into
//! blocks; block `b` draws from ChaCha8 stream `b` of the batch seed, so
//! the output does not depend on how blocks are scheduled. The same blocks
//! are the jackknife blocks for standard errors.

use std::io::{self, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::gaussian_prep::ProbePairPreparation;
use crate::moments::{noise_disturbance, CrossCovariances, NoiseDisturbanceReport, Ordering, ProbeMoments, Scenario, Variable};
use crate::oracle::plan::{plan_axes_for, stages, Stage};
use crate::oracle::{JointTable, OracleOptions, OracleSetup, ProbabilityTable};

pub const DEFAULT_BLOCKS: usize = 100;

/// Sampled readouts. Unsampled columns are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeBatch {
    pub mu_x: Vec<f64>,
    pub mu_k: Vec<f64>,
    pub seed: u64,
    pub scenario_id: String,
    blocks: usize,
}

impl OutcomeBatch {
    pub fn len(&self) -> usize {
        self.mu_x.len().max(self.mu_k.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn column(&self, v: Variable) -> &[f64] {
        match v {
            Variable::X => &self.mu_x,
            Variable::K => &self.mu_k,
        }
    }

    /// Writes `index,mu_x,mu_k` rows; a missing column is left blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,mu_x,mu_k")?;
        let cell = |c: &[f64], i: usize| c.get(i).map(|v| v.to_string()).unwrap_or_default();
        for i in 0..self.len() {
            writeln!(w, "{i},{},{}", cell(&self.mu_x, i), cell(&self.mu_k, i))?;
        }
        Ok(())
    }
}

/// What to sample from.
#[derive(Debug, Clone, Copy)]
pub enum Distribution<'a> {
    Single(Variable, &'a ProbabilityTable),
    Joint(&'a JointTable),
}

fn block_ranges(n: usize, blocks: usize) -> Vec<Range<usize>> {
    let (q, r) = (n / blocks, n % blocks);
    let mut start = 0;
    (0..blocks)
        .map(|b| {
            let len = q + usize::from(b < r);
            let range = start..start + len;
            start += len;
            range
        })
        .collect()
}

fn cdf(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

/// Index of the bin containing `u·total`.
fn invert(cdf: &[f64], u: f64) -> usize {
    let target = u * cdf[cdf.len() - 1];
    cdf.partition_point(|&c| c <= target).min(cdf.len() - 1)
}

/// Draws `n` outcomes from `dist` with seed `seed`, using
/// `min(100, n)` blocks.
pub fn sample_outcomes(dist: Distribution<'_>, n: usize, seed: u64, scenario_id: &str) -> Result<OutcomeBatch> {
    sample_outcomes_with(dist, n, seed, scenario_id, Exec::default())
}

pub fn sample_outcomes_with(dist: Distribution<'_>, n: usize, seed: u64, scenario_id: &str, exec: Exec) -> Result<OutcomeBatch> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let blocks = DEFAULT_BLOCKS.min(n);
    let ranges = block_ranges(n, blocks);
    let draw_block = |b: usize, f: &dyn Fn(&mut ChaCha8Rng) -> (f64, f64)| -> Vec<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        ranges[b].clone().map(|_| f(&mut rng)).collect()
    };
    let jitter = |rng: &mut ChaCha8Rng, w: f64| if w > 0.0 { (rng.random::<f64>() - 0.5) * w } else { 0.0 };
    let pairs: Vec<Vec<(f64, f64)>> = match dist {
        Distribution::Single(_, t) => {
            let c = cdf(t.probs().iter().copied());
            let f = |rng: &mut ChaCha8Rng| {
                let i = invert(&c, rng.random::<f64>());
                (t.values()[i] + jitter(rng, t.bin_width()), 0.0)
            };
            exec.map_range(blocks, |b| draw_block(b, &f))
        }
        Distribution::Joint(t) => {
            let c = cdf(t.probs().iter().copied());
            let nk = t.values_k().len();
            let [wx, wk] = t.bin_widths();
            let f = |rng: &mut ChaCha8Rng| {
                let idx = invert(&c, rng.random::<f64>());
                let (i, j) = (idx / nk, idx % nk);
                let x = t.values_x()[i] + jitter(rng, wx);
                (x, t.values_k()[j] + jitter(rng, wk))
            };
            exec.map_range(blocks, |b| draw_block(b, &f))
        }
    };
    let flat = pairs.into_iter().flatten();
    let (mu_x, mu_k) = match dist {
        Distribution::Single(Variable::X, _) => (flat.map(|p| p.0).collect(), Vec::new()),
        Distribution::Single(Variable::K, _) => (Vec::new(), flat.map(|p| p.0).collect()),
        Distribution::Joint(_) => flat.unzip(),
    };
    Ok(OutcomeBatch { mu_x, mu_k, seed, scenario_id: scenario_id.to_string(), blocks })
}

/// Value with a jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value − target|` in units of the standard error.
    pub fn z(&self, target: f64) -> f64 {
        (self.value - target).abs() / self.se
    }
}

/// Sample mean and (unbiased) variance of one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: f64,
    s1: f64,
    s2: f64,
}

impl Sums {
    fn minus(self, o: Sums) -> Sums {
        Sums { n: self.n - o.n, s1: self.s1 - o.s1, s2: self.s2 - o.s2 }
    }

    fn plus(self, o: Sums) -> Sums {
        Sums { n: self.n + o.n, s1: self.s1 + o.s1, s2: self.s2 + o.s2 }
    }

    fn summary(self, shift: f64) -> Summary {
        let m = self.s1 / self.n;
        Summary { mean: shift + m, variance: (self.s2 - self.n * m * m) / (self.n - 1.0) }
    }
}

/// Per-block sums of one column, shifted to reduce cancellation.
struct Column {
    shift: f64,
    blocks: Vec<Sums>,
    total: Sums,
}

impl Column {
    fn new(values: &[f64], nblocks: usize) -> Result<Self> {
        if values.len() < 2 * nblocks.max(1) {
            return Err(invalid("a column needs at least two samples per block"));
        }
        let shift = values[0];
        let blocks: Vec<Sums> = block_ranges(values.len(), nblocks)
            .into_iter()
            .map(|r| {
                values[r].iter().fold(Sums::default(), |s, &v| {
                    let d = v - shift;
                    Sums { n: s.n + 1.0, s1: s.s1 + d, s2: s.s2 + d * d }
                })
            })
            .collect();
        let total = blocks.iter().fold(Sums::default(), |a, &b| a.plus(b));
        Ok(Self { shift, blocks, total })
    }
}

/// Delete-one-block jackknife of `stat` over several columns that share
/// block indices.
pub fn jackknife<F>(columns: &[&[f64]], blocks: usize, stat: F) -> Result<Estimate>
where
    F: Fn(&[Summary]) -> f64,
{
    if blocks < 2 {
        return Err(invalid("the jackknife needs at least two blocks"));
    }
    let cols: Vec<Column> = columns.iter().map(|c| Column::new(c, blocks)).collect::<Result<_>>()?;
    let full: Vec<Summary> = cols.iter().map(|c| c.total.summary(c.shift)).collect();
    let value = stat(&full);
    let leave: Vec<f64> = (0..blocks)
        .map(|b| {
            let s: Vec<Summary> = cols.iter().map(|c| c.total.minus(c.blocks[b]).summary(c.shift)).collect();
            stat(&s)
        })
        .collect();
    let bf = blocks as f64;
    let mean = leave.iter().sum::<f64>() / bf;
    let var = leave.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * (bf - 1.0) / bf;
    Ok(Estimate { value, se: var.sqrt() })
}

fn shared_blocks(a: &OutcomeBatch, b: &OutcomeBatch) -> Result<usize> {
    if a.blocks != b.blocks {
        return Err(invalid(format!("batches have {} and {} blocks", a.blocks, b.blocks)));
    }
    Ok(a.blocks)
}

fn column(b: &OutcomeBatch, v: Variable) -> Result<&[f64]> {
    let c = b.column(v);
    if c.is_empty() {
        return Err(invalid(format!("batch '{}' has no mu_{} column", b.scenario_id, v.as_str())));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub sigma2_hat: Estimate,
    pub epsilon2_hat: Estimate,
    pub d_hat: Estimate,
}

/// Calibration against a bias-free reference probe of known noise
/// `epsilon0`: `σ̂² = Var(ref) − ε₀²`, `ε̂² = Var(test) − σ̂²`,
/// `D̂ = mean(test) − mean(ref)`.
pub fn calibrate_noise(reference: &OutcomeBatch, epsilon0: f64, test: &OutcomeBatch, v: Variable) -> Result<Calibration> {
    let blocks = shared_blocks(reference, test)?;
    let cols = [column(reference, v)?, column(test, v)?];
    let e0 = epsilon0 * epsilon0;
    let sigma2_hat = jackknife(&cols[..1], blocks, |s| s[0].variance - e0)?;
    if sigma2_hat.value < -3.0 * sigma2_hat.se {
        return Err(Error::Calibration(format!(
            "system variance estimate {:.6} is negative beyond 3 standard errors ({:.6}); is the reference noise too large?",
            sigma2_hat.value, sigma2_hat.se
        )));
    }
    Ok(Calibration {
        sigma2_hat,
        epsilon2_hat: jackknife(&cols, blocks, |s| s[1].variance - (s[0].variance - e0))?,
        d_hat: jackknife(&cols, blocks, |s| s[1].mean - s[0].mean)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceEstimate {
    pub eta2_hat: Estimate,
    pub d_dist_hat: Estimate,
}

/// `η̂² = Var(with) − Var(without)` (signed) and the mean shift, for the
/// readout of `v`.
pub fn estimate_disturbance(with_first: &OutcomeBatch, without_first: &OutcomeBatch, v: Variable) -> Result<DisturbanceEstimate> {
    let blocks = shared_blocks(with_first, without_first)?;
    let cols = [column(with_first, v)?, column(without_first, v)?];
    Ok(DisturbanceEstimate {
        eta2_hat: jackknife(&cols, blocks, |s| s[0].variance - s[1].variance)?,
        d_dist_hat: jackknife(&cols, blocks, |s| s[0].mean - s[1].mean)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOptions {
    pub samples: usize,
    pub seed: u64,
    pub oracle: OracleOptions,
    /// Pointer spread of the reference probe; defaults to half the spread
    /// of the probe being calibrated.
    pub reference_delta: Option<f64>,
}

impl ProtocolOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed, oracle: OracleOptions::default(), reference_delta: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolReport {
    pub first: Variable,
    pub samples: usize,
    pub seed: u64,
    pub reference_epsilon: f64,
    pub calibration: Calibration,
    pub disturbance: DisturbanceEstimate,
    /// `ε̂²·η̂²` with its own jackknife error.
    pub product: Estimate,
    pub analytic: NoiseDisturbanceReport,
    /// Batches in the order reference, test, without-first.
    pub batches: [OutcomeBatch; 3],
}

fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn single(v: Variable) -> Vec<Stage> {
    match v {
        Variable::X => vec![Stage::KickX],
        Variable::K => vec![Stage::KickK],
    }
}

/// Runs the operational protocol for the scenario's first-measured
/// variable (X for the joint ordering):
///
/// 1. calibrate the first probe against an uncorrelated reference probe
///    measured alone on the same system preparation;
/// 2. estimate the disturbance of the other readout from runs with and
///    without the first interaction.
///
/// All oracle runs share one set of grids so bin-jitter contributions
/// cancel in the differences.
pub fn run_protocol(s: &Scenario, prep: Option<ProbePairPreparation>, options: ProtocolOptions) -> Result<ProtocolReport> {
    let ordering = s.ordering();
    let first = ordering.first();
    let second = first.other();
    let probe = *s.probe(first);
    let delta_ref = options.reference_delta.unwrap_or(probe.delta / 2.0);
    if !(delta_ref > 0.0) {
        return Err(invalid("reference probe spread must be positive"));
    }
    let mut reference = *s;
    reference.cross = CrossCovariances::default();
    let ref_probe = ProbeMoments::minimal(first, delta_ref);
    let other = ProbeMoments::minimal(second, s.probe(second).delta);
    match first {
        Variable::X => (reference.probe_x, reference.probe_k) = (ref_probe, other),
        Variable::K => (reference.probe_k, reference.probe_x) = (ref_probe, other),
    }
    reference.couplings.ordering = Ordering::Joint;

    let test_runs = [stages(ordering), single(second)];
    let ref_runs = [single(first)];
    let plans =
        plan_axes_for(&[(s, &test_runs[..]), (&reference, &ref_runs[..])], options.oracle.n, options.oracle.extent_sigmas)?;
    let test_setup = OracleSetup::with_plans(s, prep, plans, options.oracle.exec)?;
    let ref_setup = OracleSetup::with_plans(&reference, None, plans, options.oracle.exec)?;

    let exec = options.oracle.exec;
    let n = options.samples;
    let ref_table = ref_setup.readouts(&ref_runs[0])?;
    let test_table = test_setup.joint_readout(&test_runs[0])?;
    let without_table = test_setup.readouts(&test_runs[1])?;
    let idx = |v: Variable| if v == Variable::X { 0 } else { 1 };
    let ref_batch = sample_outcomes_with(
        Distribution::Single(first, &ref_table[idx(first)]),
        n,
        derive_seed(options.seed, 1),
        "reference",
        exec,
    )?;
    let test_batch = sample_outcomes_with(Distribution::Joint(&test_table), n, derive_seed(options.seed, 2), "test", exec)?;
    let without_batch = sample_outcomes_with(
        Distribution::Single(second, &without_table[idx(second)]),
        n,
        derive_seed(options.seed, 3),
        "without_first",
        exec,
    )?;

    let calibration = calibrate_noise(&ref_batch, delta_ref, &test_batch, first)?;
    let disturbance = estimate_disturbance(&test_batch, &without_batch, second)?;
    let e0 = delta_ref * delta_ref;
    let cols =
        [column(&ref_batch, first)?, column(&test_batch, first)?, column(&test_batch, second)?, column(&without_batch, second)?];
    let product =
        jackknife(&cols, test_batch.blocks(), |m| (m[1].variance - (m[0].variance - e0)) * (m[2].variance - m[3].variance))?;
    Ok(ProtocolReport {
        first,
        samples: n,
        seed: options.seed,
        reference_epsilon: delta_ref,
        calibration,
        disturbance,
        product,
        analytic: noise_disturbance(s)?,
        batches: [ref_batch, test_batch, without_batch],
    })
}
