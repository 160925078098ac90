use ndarray::{Array2, Array3, ArrayViewMut2, Axis as NdAxis};
use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::grid::{Axis, Rep};
use super::transform::{AxisTransform, Direction};
use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::moments::Ordering;

/// Tolerance on the discrete squared norm of inputs and evolved states.
pub const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisId {
    System = 0,
    ProbeX = 1,
    ProbeK = 2,
}

impl AxisId {
    pub const ALL: [AxisId; 3] = [AxisId::System, AxisId::ProbeX, AxisId::ProbeK];

    pub fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            AxisId::System => "system",
            AxisId::ProbeX => "probe_x",
            AxisId::ProbeK => "probe_k",
        }
    }
}

/// One-axis amplitudes tagged with the representation they are sampled in.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisWave {
    pub amplitudes: Vec<Complex64>,
    pub rep: Rep,
}

impl AxisWave {
    pub fn new(amplitudes: Vec<Complex64>, rep: Rep) -> Self {
        Self { amplitudes, rep }
    }
}

/// Initial state of the two probes.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbeWave {
    Product {
        x: AxisWave,
        k: AxisWave,
    },
    /// Amplitudes indexed `[probe X, probe K]`.
    Entangled {
        amplitudes: Array2<Complex64>,
        x_rep: Rep,
        k_rep: Rep,
    },
}

/// Discretized amplitude of system ⊗ probe X ⊗ probe K, indexed
/// `[system, probe X, probe K]`, with `Σ|a|² = 1`.
#[derive(Clone)]
pub struct WaveState {
    axes: [Axis; 3],
    reps: [Rep; 3],
    amps: Array3<Complex64>,
    transforms: [AxisTransform; 3],
    exec: Exec,
}

impl std::fmt::Debug for WaveState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveState")
            .field("axes", &self.axes)
            .field("reps", &self.reps)
            .field("shape", &self.amps.shape())
            .finish()
    }
}

fn check_norm(what: &str, norm2: f64) -> Result<()> {
    if (norm2 - 1.0).abs() > NORM_TOLERANCE {
        return Err(invalid(format!("{what} is not normalized: squared norm {norm2}")));
    }
    Ok(())
}

/// Tensor product `ρ_pr ⊗ ρ_sys` of a system wave and a probe wave; the
/// system is uncorrelated with the probes by construction.
pub fn init_state(axes: [Axis; 3], system: AxisWave, probes: ProbeWave) -> Result<WaveState> {
    let n = [axes[0].n(), axes[1].n(), axes[2].n()];
    if system.amplitudes.len() != n[0] {
        return Err(invalid(format!("system wave has {} points, axis has {}", system.amplitudes.len(), n[0])));
    }
    check_norm("system wave", system.amplitudes.iter().map(|a| a.norm_sqr()).sum())?;
    let (probe, x_rep, k_rep) = match probes {
        ProbeWave::Product { x, k } => {
            if x.amplitudes.len() != n[1] || k.amplitudes.len() != n[2] {
                return Err(invalid("probe wave lengths do not match the probe axes"));
            }
            check_norm("probe X wave", x.amplitudes.iter().map(|a| a.norm_sqr()).sum())?;
            check_norm("probe K wave", k.amplitudes.iter().map(|a| a.norm_sqr()).sum())?;
            let table = Array2::from_shape_fn((n[1], n[2]), |(i, j)| x.amplitudes[i] * k.amplitudes[j]);
            (table, x.rep, k.rep)
        }
        ProbeWave::Entangled { amplitudes, x_rep, k_rep } => {
            if amplitudes.shape() != [n[1], n[2]] {
                return Err(invalid(format!("probe wave has shape {:?}, axes need [{}, {}]", amplitudes.shape(), n[1], n[2])));
            }
            check_norm("probe wave", amplitudes.iter().map(|a| a.norm_sqr()).sum())?;
            (amplitudes, x_rep, k_rep)
        }
    };
    let amps = Array3::from_shape_fn((n[0], n[1], n[2]), |(i, j, k)| system.amplitudes[i] * probe[[j, k]]);
    Ok(WaveState {
        transforms: [AxisTransform::new(&axes[0]), AxisTransform::new(&axes[1]), AxisTransform::new(&axes[2])],
        axes,
        reps: [system.rep, x_rep, k_rep],
        amps,
        exec: Exec::default(),
    })
}

impl WaveState {
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn axis(&self, id: AxisId) -> &Axis {
        &self.axes[id.index()]
    }

    pub fn representation(&self, id: AxisId) -> Rep {
        self.reps[id.index()]
    }

    pub fn amplitudes(&self) -> &Array3<Complex64> {
        &self.amps
    }

    /// Grid of `id` in the representation the amplitudes are stored in.
    pub fn current_grid(&self, id: AxisId) -> &super::grid::Grid1D {
        self.axes[id.index()].grid(self.reps[id.index()])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.exec
            .map_range(self.amps.shape()[0], |i| self.amps.index_axis(NdAxis(0), i).iter().map(|a| a.norm_sqr()).sum::<f64>())
            .into_iter()
            .sum()
    }

    /// Changes the representation of one axis (no-op if already there).
    pub fn to_rep(&mut self, id: AxisId, rep: Rep) {
        let i = id.index();
        if self.reps[i] == rep {
            return;
        }
        let dir = match rep {
            Rep::Conjugate => Direction::Forward,
            Rep::PositionLike => Direction::Inverse,
        };
        self.transforms[i].apply(&mut self.amps, i, dir, self.exec);
        self.reps[i] = rep;
    }

    fn expect_rep(&self, id: AxisId, rep: Rep) -> Result<()> {
        if self.reps[id.index()] != rep {
            return Err(Error::Representation(format!(
                "{} axis is in {:?}, expected {:?}",
                id.name(),
                self.reps[id.index()],
                rep
            )));
        }
        Ok(())
    }

    fn for_each_system_slab<F>(&mut self, f: F)
    where
        F: Fn(usize, ArrayViewMut2<Complex64>) + Sync + Send,
    {
        match self.exec {
            #[cfg(feature = "parallel")]
            Exec::Parallel => self.amps.axis_iter_mut(NdAxis(0)).into_par_iter().enumerate().for_each(|(i, slab)| f(i, slab)),
            _ => self.amps.axis_iter_mut(NdAxis(0)).enumerate().for_each(|(i, slab)| f(i, slab)),
        }
    }

    /// `exp(i·scale·X·Φ_X)`: shifts `J_X` by `scale·X` and `K` by `scale·Φ_X`.
    pub fn kick_x(&mut self, scale: f64) -> Result<()> {
        self.to_rep(AxisId::System, Rep::PositionLike);
        self.to_rep(AxisId::ProbeX, Rep::PositionLike);
        self.expect_rep(AxisId::System, Rep::PositionLike)?;
        let xs = self.axes[0].position.points();
        let phis = self.axes[1].position.points();
        self.for_each_system_slab(|i, mut slab| {
            for (j, mut row) in slab.axis_iter_mut(NdAxis(0)).enumerate() {
                let p = Complex64::from_polar(1.0, scale * xs[i] * phis[j]);
                row.iter_mut().for_each(|a| *a *= p);
            }
        });
        Ok(())
    }

    /// `exp(i·scale·K·Φ_K)`: shifts `J_K` by `scale·K` and `X` by `−scale·Φ_K`.
    pub fn kick_k(&mut self, scale: f64) -> Result<()> {
        self.to_rep(AxisId::System, Rep::Conjugate);
        self.to_rep(AxisId::ProbeK, Rep::PositionLike);
        self.expect_rep(AxisId::ProbeK, Rep::PositionLike)?;
        let ks = self.axes[0].conjugate.points();
        let phis = self.axes[2].position.points();
        self.for_each_system_slab(|i, mut slab| {
            let phases: Vec<Complex64> = phis.iter().map(|&p| Complex64::from_polar(1.0, scale * ks[i] * p)).collect();
            for mut row in slab.axis_iter_mut(NdAxis(0)) {
                row.iter_mut().zip(&phases).for_each(|(a, p)| *a *= p);
            }
        });
        Ok(())
    }

    /// `exp(i·Φ_X·Φ_K/2)`, the central factor of the joint unitary.
    fn central_phase(&mut self) {
        self.to_rep(AxisId::ProbeX, Rep::PositionLike);
        self.to_rep(AxisId::ProbeK, Rep::PositionLike);
        let px = self.axes[1].position.points();
        let pk = self.axes[2].position.points();
        let table = Array2::from_shape_fn((px.len(), pk.len()), |(j, k)| Complex64::from_polar(1.0, 0.5 * px[j] * pk[k]));
        self.for_each_system_slab(|_, mut slab| {
            slab.zip_mut_with(&table, |a, p| *a *= p);
        });
    }

    /// Impulsive sequential measurement (τ → 0⁺, no free evolution between
    /// the kicks).
    pub fn apply_sequential(&mut self, ordering: Ordering) -> Result<()> {
        match ordering {
            Ordering::XthenK => {
                self.kick_x(1.0)?;
                self.kick_k(1.0)
            }
            Ordering::KthenX => {
                self.kick_k(1.0)?;
                self.kick_x(1.0)
            }
            Ordering::Joint => Err(invalid("joint ordering: use apply_joint")),
        }
    }

    /// `exp[i(Φ_X X + Φ_K K)] = exp(iΦ_X X)·exp(iΦ_K K)·exp(iΦ_XΦ_K/2)`, exact
    /// because the commutator of the two exponents, `−iΦ_XΦ_K`, commutes
    /// with both of them.
    pub fn apply_joint(&mut self) -> Result<()> {
        self.central_phase();
        self.kick_k(1.0)?;
        self.kick_x(1.0)
    }

    /// Symmetric split-step approximation of the joint unitary with
    /// `substeps` Strang steps. Used to cross-check [`apply_joint`](Self::apply_joint).
    pub fn apply_joint_split_step(&mut self, substeps: usize) -> Result<()> {
        if substeps == 0 {
            return Err(invalid("split-step needs at least one substep"));
        }
        let h = 1.0 / substeps as f64;
        self.kick_x(h / 2.0)?;
        for step in 0..substeps {
            self.kick_k(h)?;
            let last = step + 1 == substeps;
            self.kick_x(if last { h / 2.0 } else { h })?;
        }
        Ok(())
    }

    /// Probability over one axis in its current representation.
    pub fn marginal(&self, id: AxisId) -> Vec<f64> {
        let a = id.index();
        self.exec
            .map_range(self.amps.shape()[a], |i| self.amps.index_axis(NdAxis(a), i).iter().map(|v| v.norm_sqr()).sum::<f64>())
    }

    /// Joint probability over two distinct axes, indexed `[first, second]`.
    pub fn marginal_pair(&self, first: AxisId, second: AxisId) -> Array2<f64> {
        assert_ne!(first, second, "marginal_pair needs two distinct axes");
        let (a, b) = (first.index(), second.index());
        let shape = self.amps.shape();
        let (na, nb) = (shape[a], shape[b]);
        let rows = self.exec.map_range(na, |i| {
            let slab = self.amps.index_axis(NdAxis(a), i);
            // `slab` has lost axis `a`, so `b` may have moved down by one
            let b_in = if b > a { b - 1 } else { b };
            let mut row = vec![0.0; nb];
            for (j, lane) in slab.axis_iter(NdAxis(b_in)).enumerate() {
                row[j] = lane.iter().map(|v| v.norm_sqr()).sum();
            }
            row
        });
        Array2::from_shape_fn((na, nb), |(i, j)| rows[i][j])
    }

    /// `Σ ⟨ψ|φ⟩`-based distance `‖ψ − φ‖₂` between two states on the same grid,
    /// compared in the representation of `self`.
    pub fn distance(&self, other: &WaveState) -> Result<f64> {
        if self.axes != other.axes {
            return Err(invalid("states live on different grids"));
        }
        let mut other = other.clone();
        for id in AxisId::ALL {
            other.to_rep(id, self.reps[id.index()]);
        }
        let d: f64 = self.amps.iter().zip(other.amps.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok(d.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::grid::Grid1D;
    use crate::oracle::wavefn::gaussian_amplitudes;

    fn axis(n: usize, len: f64) -> Axis {
        Axis::new(Grid1D::new(n, len, 0.0).unwrap(), 0.0)
    }

    fn gaussian_state(n: usize) -> WaveState {
        let axes = [axis(n, 12.0), axis(n, 12.0), axis(n, 12.0)];
        let g = |ax: &Axis, s: f64| gaussian_amplitudes(&ax.position, 0.0, s, 0.0, 0.5 / s).unwrap();
        init_state(
            axes,
            AxisWave::new(g(&axes[0], 0.8), Rep::PositionLike),
            ProbeWave::Product {
                x: AxisWave::new(g(&axes[1], 0.7), Rep::PositionLike),
                k: AxisWave::new(g(&axes[2], 0.9), Rep::PositionLike),
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let s0 = gaussian_state(32);
        let mut s = s0.clone();
        for id in AxisId::ALL {
            s.to_rep(id, Rep::Conjugate);
        }
        for id in AxisId::ALL {
            s.to_rep(id, Rep::PositionLike);
        }
        let d: f64 = s.amps.iter().zip(s0.amps.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn kicks_preserve_norm() {
        let mut s = gaussian_state(32);
        s.apply_sequential(Ordering::XthenK).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < NORM_TOLERANCE);
        s.apply_joint().unwrap();
        s.to_rep(AxisId::ProbeK, Rep::Conjugate);
        assert!((s.norm_sqr() - 1.0).abs() < NORM_TOLERANCE);
    }

    #[test]
    fn rejects_unnormalized_and_mismatched_inputs() {
        let axes = [axis(16, 8.0), axis(16, 8.0), axis(16, 8.0)];
        let ok = gaussian_amplitudes(&axes[0].position, 0.0, 1.0, 0.0, 0.5).unwrap();
        let mut bad = ok.clone();
        bad[3] *= 2.0;
        let probes = || ProbeWave::Product {
            x: AxisWave::new(ok.clone(), Rep::PositionLike),
            k: AxisWave::new(ok.clone(), Rep::PositionLike),
        };
        assert!(init_state(axes, AxisWave::new(bad, Rep::PositionLike), probes()).is_err());
        assert!(init_state(axes, AxisWave::new(ok[..8].to_vec(), Rep::PositionLike), probes()).is_err());
        assert!(init_state(axes, AxisWave::new(ok.clone(), Rep::PositionLike), probes()).is_ok());
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let mut a = gaussian_state(32).with_exec(Exec::Sequential);
        let mut b = gaussian_state(32).with_exec(Exec::Parallel);
        a.apply_joint().unwrap();
        b.apply_joint().unwrap();
        a.to_rep(AxisId::ProbeX, Rep::Conjugate);
        b.to_rep(AxisId::ProbeX, Rep::Conjugate);
        assert!(a.amps.iter().zip(b.amps.iter()).all(|(x, y)| x == y));
    }
}
