use std::io::{self, Write};

use ndarray::Array2;

use super::grid::Rep;
use super::state::{AxisId, WaveState};
use crate::error::{invalid, Result};
use crate::moments::Variable;

/// Tolerance on the total probability of a table.
pub const TABLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutFamily {
    Ideal,
    Gaussian,
}

/// Classical readout `p(μ|J) = f(μ − J)` with `f` a point mass or a
/// Gaussian of standard deviation `resolution`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutModel {
    resolution: f64,
    family: ReadoutFamily,
}

impl ReadoutModel {
    pub fn ideal() -> Self {
        Self { resolution: 0.0, family: ReadoutFamily::Ideal }
    }

    pub fn gaussian(resolution: f64) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(invalid(format!("gaussian readout needs resolution > 0, got {resolution}")));
        }
        Ok(Self { resolution, family: ReadoutFamily::Gaussian })
    }

    /// Ideal for zero resolution, Gaussian otherwise.
    pub fn from_resolution(resolution: f64) -> Result<Self> {
        if resolution == 0.0 {
            Ok(Self::ideal())
        } else {
            Self::gaussian(resolution)
        }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn family(&self) -> ReadoutFamily {
        self.family
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

/// Discrete distribution on the uniformly spaced `values`. `bin_width` is
/// the spacing (0 for a point mass).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    values: Vec<f64>,
    probs: Vec<f64>,
    bin_width: f64,
}

impl ProbabilityTable {
    pub fn new(values: Vec<f64>, probs: Vec<f64>, bin_width: f64) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(invalid("probability table needs matching, nonempty columns"));
        }
        if !(bin_width >= 0.0) {
            return Err(invalid("bin width must be nonnegative"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > TABLE_TOLERANCE {
            return Err(invalid(format!("probability table sums to {total}, not 1")));
        }
        Ok(Self { values, probs, bin_width })
    }

    pub fn point_mass(value: f64) -> Self {
        Self { values: vec![value], probs: vec![1.0], bin_width: 0.0 }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `value,probability` rows under a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "value,probability")?;
        for (v, p) in self.values.iter().zip(&self.probs) {
            writeln!(w, "{v},{p}")?;
        }
        Ok(())
    }
}

/// Discrete joint distribution of `(μ_X, μ_K)`, indexed `[x, k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    values_x: Vec<f64>,
    values_k: Vec<f64>,
    probs: Array2<f64>,
    bin_widths: [f64; 2],
}

impl JointTable {
    pub fn new(values_x: Vec<f64>, values_k: Vec<f64>, probs: Array2<f64>, bin_widths: [f64; 2]) -> Result<Self> {
        if probs.shape() != [values_x.len(), values_k.len()] {
            return Err(invalid("joint table shape does not match its value columns"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(invalid("probabilities must be finite and nonnegative"));
        }
        let total: f64 = probs.sum();
        if (total - 1.0).abs() > TABLE_TOLERANCE {
            return Err(invalid(format!("joint table sums to {total}, not 1")));
        }
        Ok(Self { values_x, values_k, probs, bin_widths })
    }

    pub fn values_x(&self) -> &[f64] {
        &self.values_x
    }

    pub fn values_k(&self) -> &[f64] {
        &self.values_k
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    pub fn bin_widths(&self) -> [f64; 2] {
        self.bin_widths
    }

    pub fn marginal(&self, v: Variable) -> ProbabilityTable {
        let (values, probs, w) = match v {
            Variable::X => (self.values_x.clone(), self.probs.rows().into_iter().map(|r| r.sum()).collect(), self.bin_widths[0]),
            Variable::K => {
                (self.values_k.clone(), self.probs.columns().into_iter().map(|c| c.sum()).collect(), self.bin_widths[1])
            }
        };
        ProbabilityTable { values, probs, bin_width: w }
    }

    pub fn covariance(&self) -> f64 {
        let mx = measure_moments(&self.marginal(Variable::X)).mean;
        let mk = measure_moments(&self.marginal(Variable::K)).mean;
        let mut c = 0.0;
        for ((i, j), p) in self.probs.indexed_iter() {
            c += p * (self.values_x[i] - mx) * (self.values_k[j] - mk);
        }
        c
    }
}

/// Mean and variance of the table treated as point masses at `values`.
pub fn measure_moments(table: &ProbabilityTable) -> Moments {
    let mean: f64 = table.values.iter().zip(&table.probs).map(|(v, p)| v * p).sum();
    let variance = table.values.iter().zip(&table.probs).map(|(v, p)| p * (v - mean) * (v - mean)).sum();
    Moments { mean, variance }
}

/// Convolution kernel of a readout on a grid of spacing `w`, as
/// `(offsets, weights)` with offsets in bins from `−m` to `m`.
///
/// Below the spacing a sampled Gaussian would lose variance, so a
/// three-point kernel with exactly the right variance is used instead.
fn kernel(model: &ReadoutModel, w: f64) -> (usize, Vec<f64>) {
    let d = model.resolution;
    match model.family {
        ReadoutFamily::Ideal => (0, vec![1.0]),
        ReadoutFamily::Gaussian if d < w => {
            let q = d * d / (2.0 * w * w);
            (1, vec![q, 1.0 - 2.0 * q, q])
        }
        ReadoutFamily::Gaussian => {
            let m = (8.0 * d / w).ceil() as usize;
            let raw: Vec<f64> = (0..=2 * m)
                .map(|i| {
                    let u = (i as f64 - m as f64) * w / d;
                    (-0.5 * u * u).exp()
                })
                .collect();
            let s: f64 = raw.iter().sum();
            let k: Vec<f64> = raw.into_iter().map(|k| k / s).collect();
            // lattice sampling loses a sliver of variance; put it back
            let var: f64 = k.iter().enumerate().map(|(i, p)| p * ((i as f64 - m as f64) * w).powi(2)).sum();
            let missing = d * d - var;
            if missing > 0.0 {
                let q = missing / (2.0 * w * w);
                (m + 1, convolve(&k, &[q, 1.0 - 2.0 * q, q]))
            } else {
                (m, k)
            }
        }
    }
}

fn convolve(probs: &[f64], kernel: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; probs.len() + kernel.len() - 1];
    for (i, p) in probs.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        for (j, k) in kernel.iter().enumerate() {
            out[i + j] += p * k;
        }
    }
    out
}

fn extended_values(first: f64, w: f64, len: usize, m: usize) -> Vec<f64> {
    (0..len + 2 * m).map(|i| first + (i as f64 - m as f64) * w).collect()
}

fn probe_axis(probe: Variable) -> AxisId {
    match probe {
        Variable::X => AxisId::ProbeX,
        Variable::K => AxisId::ProbeK,
    }
}

/// Distribution of the readout `μ` of one probe: the `J` marginal of the
/// state convolved with the readout kernel. The output grid is extended on
/// both sides by the kernel half-width so no weight is lost.
pub fn readout_distribution(state: &mut WaveState, probe: Variable, model: &ReadoutModel) -> Result<ProbabilityTable> {
    let id = probe_axis(probe);
    state.to_rep(id, Rep::Conjugate);
    let grid = *state.current_grid(id);
    let w = grid.spacing();
    let (m, k) = kernel(model, w);
    let probs = convolve(&state.marginal(id), &k);
    let values = extended_values(grid.start(), w, grid.n(), m);
    ProbabilityTable::new(values, renormalize(probs)?, w)
}

/// Joint distribution of `(μ_X, μ_K)` with independent readout kernels.
pub fn joint_readout_distribution(state: &mut WaveState, model_x: &ReadoutModel, model_k: &ReadoutModel) -> Result<JointTable> {
    state.to_rep(AxisId::ProbeX, Rep::Conjugate);
    state.to_rep(AxisId::ProbeK, Rep::Conjugate);
    let gx = *state.current_grid(AxisId::ProbeX);
    let gk = *state.current_grid(AxisId::ProbeK);
    let (wx, wk) = (gx.spacing(), gk.spacing());
    let (mx, kx) = kernel(model_x, wx);
    let (mk, kk) = kernel(model_k, wk);
    let raw = state.marginal_pair(AxisId::ProbeX, AxisId::ProbeK);
    let rows: Vec<Vec<f64>> = raw.rows().into_iter().map(|r| convolve(&r.to_vec(), &kk)).collect();
    let nk = rows[0].len();
    let nx = rows.len() + kx.len() - 1;
    let mut out = Array2::<f64>::zeros((nx, nk));
    for j in 0..nk {
        let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        for (i, v) in convolve(&col, &kx).into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    let total = out.sum();
    check_total(total)?;
    out.mapv_inplace(|p| p / total);
    JointTable::new(extended_values(gx.start(), wx, gx.n(), mx), extended_values(gk.start(), wk, gk.n(), mk), out, [wx, wk])
}

fn check_total(total: f64) -> Result<()> {
    if (total - 1.0).abs() > TABLE_TOLERANCE {
        return Err(invalid(format!("state marginal sums to {total}, not 1")));
    }
    Ok(())
}

/// Removes round-off drift after convolution; the total is checked first.
fn renormalize(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = probs.iter().sum();
    check_total(total)?;
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_table(sd: f64, w: f64, n: usize) -> ProbabilityTable {
        let values: Vec<f64> = (0..n).map(|i| (i as f64 - (n / 2) as f64) * w).collect();
        let raw: Vec<f64> = values.iter().map(|v| (-0.5 * v * v / (sd * sd)).exp()).collect();
        let s: f64 = raw.iter().sum();
        ProbabilityTable::new(values, raw.into_iter().map(|p| p / s).collect(), w).unwrap()
    }

    #[test]
    fn moments_of_simple_tables() {
        let t = ProbabilityTable::new(vec![-1.0, 0.0, 1.0], vec![0.25, 0.5, 0.25], 1.0).unwrap();
        let m = measure_moments(&t);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.variance, 0.5);
        let p = measure_moments(&ProbabilityTable::point_mass(3.0));
        assert_eq!((p.mean, p.variance), (3.0, 0.0));
        let g = measure_moments(&gaussian_table(1.0, 0.1, 256));
        assert!((g.variance - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_unnormalized() {
        assert!(ProbabilityTable::new(vec![0.0, 1.0], vec![0.5, 0.6], 1.0).is_err());
        assert!(ProbabilityTable::new(vec![0.0], vec![1.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn kernels_add_their_variance() {
        for (res, w) in [(0.3f64.sqrt(), 0.1), (0.05, 0.1), (0.1, 0.1)] {
            let (m, k) = kernel(&ReadoutModel::gaussian(res).unwrap(), w);
            let var: f64 = k.iter().enumerate().map(|(i, p)| p * ((i as f64 - m as f64) * w).powi(2)).sum();
            assert!((var - res * res).abs() < 1e-14, "res {res}: {var}");
        }
        let t = gaussian_table(1.0, 0.1, 256);
        let before = measure_moments(&t).variance;
        let (m, k) = kernel(&ReadoutModel::gaussian(0.3f64.sqrt()).unwrap(), 0.1);
        let conv = ProbabilityTable::new(extended_values(t.values[0], 0.1, 256, m), convolve(&t.probs, &k), 0.1).unwrap();
        assert!((measure_moments(&conv).variance - before - 0.3).abs() < 1e-6);
    }

    #[test]
    fn gaussian_model_requires_resolution() {
        assert!(ReadoutModel::gaussian(0.0).is_err());
        assert_eq!(ReadoutModel::from_resolution(0.0).unwrap().family(), ReadoutFamily::Ideal);
    }
}
