use std::sync::Arc;

use ndarray::{Array3, ArrayViewMut2, Axis as NdAxis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::grid::Axis;
use crate::exec::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Direction {
    /// position-like → conjugate
    Forward,
    /// conjugate → position-like
    Inverse,
}

/// Unitary discrete transform between the two grids of an [`Axis`]:
/// `ψ̃(k_m) = n^{-1/2} Σ_j ψ(x_j) e^{−i k_m x_j}`, which makes the conjugate
/// variable act as `−i ∂/∂x`.
#[derive(Clone)]
pub(crate) struct AxisTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pre_forward: Vec<Complex64>,
    post_forward: Vec<Complex64>,
    pre_inverse: Vec<Complex64>,
    post_inverse: Vec<Complex64>,
}

impl AxisTransform {
    pub(crate) fn new(axis: &Axis) -> Self {
        let n = axis.n();
        let mut planner = FftPlanner::new();
        let x0 = axis.position.start();
        let dx = axis.position.spacing();
        let k0 = axis.conjugate.start();
        let dk = axis.conjugate.spacing();
        let norm = 1.0 / (n as f64).sqrt();
        let global = Complex64::from_polar(1.0, -k0 * x0);
        let idx = |i: usize| i as f64;
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            pre_forward: (0..n).map(|j| Complex64::from_polar(1.0, -k0 * idx(j) * dx)).collect(),
            post_forward: (0..n).map(|m| Complex64::from_polar(norm, -idx(m) * dk * x0) * global).collect(),
            pre_inverse: (0..n).map(|m| Complex64::from_polar(1.0, idx(m) * dk * x0)).collect(),
            post_inverse: (0..n).map(|j| Complex64::from_polar(norm, k0 * idx(j) * dx) * global.conj()).collect(),
        }
    }

    pub(crate) fn apply_lane(&self, lane: &mut [Complex64], scratch: &mut [Complex64], dir: Direction) {
        let (pre, fft, post) = match dir {
            Direction::Forward => (&self.pre_forward, &self.forward, &self.post_forward),
            Direction::Inverse => (&self.pre_inverse, &self.inverse, &self.post_inverse),
        };
        for (a, p) in lane.iter_mut().zip(pre) {
            *a *= p;
        }
        fft.process_with_scratch(lane, scratch);
        for (a, p) in lane.iter_mut().zip(post) {
            *a *= p;
        }
    }

    fn scratch_len(&self) -> usize {
        self.forward.get_inplace_scratch_len().max(self.inverse.get_inplace_scratch_len())
    }

    /// Transforms every lane of `amps` along `axis`.
    pub(crate) fn apply(&self, amps: &mut Array3<Complex64>, axis: usize, dir: Direction, exec: Exec) {
        debug_assert_eq!(amps.shape()[axis], self.n);
        let outer = if axis == 0 { 1 } else { 0 };
        let lane_axis = if axis < outer { axis } else { axis - 1 };
        let work = |mut slab: ArrayViewMut2<Complex64>, buf: &mut Vec<Complex64>, scratch: &mut Vec<Complex64>| {
            for mut lane in slab.lanes_mut(NdAxis(lane_axis)) {
                buf.clear();
                buf.extend(lane.iter().copied());
                self.apply_lane(buf, scratch, dir);
                lane.iter_mut().zip(buf.iter()).for_each(|(a, b)| *a = *b);
            }
        };
        let init = || (Vec::with_capacity(self.n), vec![Complex64::default(); self.scratch_len()]);
        match exec {
            #[cfg(feature = "parallel")]
            Exec::Parallel => amps
                .axis_iter_mut(NdAxis(outer))
                .into_par_iter()
                .for_each_init(init, |(buf, scratch), slab| work(slab, buf, scratch)),
            _ => {
                let (mut buf, mut scratch) = init();
                for slab in amps.axis_iter_mut(NdAxis(outer)) {
                    work(slab, &mut buf, &mut scratch);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::grid::Grid1D;

    #[test]
    fn plane_wave_maps_to_its_wavenumber() {
        let axis = Axis::new(Grid1D::new(64, 20.0, 0.7).unwrap(), 0.0);
        let tf = AxisTransform::new(&axis);
        // k = 5 dk is a grid point of the conjugate grid
        let m0 = 32 + 5;
        let k = axis.conjugate.point(m0);
        let mut lane: Vec<Complex64> = axis.position.points().iter().map(|&x| Complex64::from_polar(1.0 / 8.0, k * x)).collect();
        let mut scratch = vec![Complex64::default(); 64];
        tf.apply_lane(&mut lane, &mut scratch, Direction::Forward);
        for (m, a) in lane.iter().enumerate() {
            let expected = if m == m0 { 1.0 } else { 0.0 };
            assert!((a.norm() - expected).abs() < 1e-12, "m={m} {a}");
        }
    }
}
