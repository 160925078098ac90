use num_complex::Complex64;

use super::grid::Grid1D;
use crate::error::{invalid, Result};

/// Samples the pure Gaussian with the given spreads in this representation
/// and in the conjugate one. When `spread·conj_spread > 1/2` the excess
/// conjugate width is produced by a quadratic phase (chirp). The result is
/// normalized so that `Σ|a_j|² = 1`.
pub fn gaussian_amplitudes(grid: &Grid1D, mean: f64, spread: f64, conj_mean: f64, conj_spread: f64) -> Result<Vec<Complex64>> {
    if !(spread > 0.0) || !(conj_spread > 0.0) {
        return Err(invalid("Gaussian spreads must be positive"));
    }
    let excess = conj_spread * conj_spread - 0.25 / (spread * spread);
    if excess < -1e-12 * conj_spread * conj_spread {
        return Err(invalid(format!("spreads {spread} and {conj_spread} violate the Kennard inequality")));
    }
    let chirp = excess.max(0.0).sqrt() / (2.0 * spread);
    let width = 0.25 / (spread * spread);
    let mut amps: Vec<Complex64> = grid
        .points()
        .iter()
        .map(|&x| {
            let d = x - mean;
            Complex64::from_polar((-width * d * d).exp(), chirp * d * d + conj_mean * x)
        })
        .collect();
    normalize(&mut amps)?;
    Ok(amps)
}

pub(crate) fn normalize(amps: &mut [Complex64]) -> Result<()> {
    let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
    if !(norm2 > 0.0 && norm2.is_finite()) {
        return Err(invalid("amplitude array has zero or non-finite norm"));
    }
    let s = 1.0 / norm2.sqrt();
    amps.iter_mut().for_each(|a| *a *= s);
    Ok(())
}
