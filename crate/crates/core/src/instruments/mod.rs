//! Finite-dimensional measurement theory: Born probabilities for a probe
//! coupled to a system, conditional states, instruments built from
//! generalized operations, and the two-probe chain in which initial probe
//! correlations prevent the joint instrument from factorizing.
//!
//! Operators on probe ⊗ system are ordered with the probe as the leftmost
//! factor. For two probes the order is A ⊗ B ⊗ system.

mod chain;
pub mod linalg;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use linalg::{
    hermitian_eigen, hermiticity_error, kron, max_abs, partial_trace, probe_block, psd_sqrt, trace, unitarity_error, CMatrix,
    CVector,
};

pub use chain::{
    bell_state, controlled_shift, demo, sequential_factorization_check, swapped_correlation, uniform_superposition, DemoReport,
    FactorizationReport, MAX_FACTOR_DIM,
};

/// Tolerance of every exactness check in this module.
pub const TOLERANCE: f64 = 1e-12;

/// Weights below this are dropped when building operations.
const NEGLIGIBLE: f64 = 1e-15;

/// Density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteState {
    matrix: CMatrix,
}

impl FiniteState {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch("a state must be a nonempty square matrix".into()));
        }
        let herm = hermiticity_error(&matrix);
        if herm > TOLERANCE {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = trace(&matrix);
        if (tr.re - 1.0).abs() > TOLERANCE || tr.im.abs() > TOLERANCE {
            return Err(Error::InvalidState(format!("trace is {tr}, not 1")));
        }
        let min = hermitian_eigen(&matrix).0[0];
        if min < -TOLERANCE {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn pure(psi: &CVector) -> Result<Self> {
        Self::new(psi * psi.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: CMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn tensor(&self, other: &FiniteState) -> FiniteState {
        FiniteState { matrix: kron(&self.matrix, &other.matrix) }
    }

    /// Reduced state on the subsystems `keep` of a product space with
    /// factor dimensions `dims`.
    pub fn reduce(&self, dims: &[usize], keep: &[usize]) -> Result<FiniteState> {
        if dims.iter().product::<usize>() != self.dim() {
            return Err(Error::DimensionMismatch(format!("dimensions {dims:?} do not multiply to {}", self.dim())));
        }
        Ok(FiniteState { matrix: partial_trace(&self.matrix, dims, keep) })
    }
}

/// Positive operators `F(μ)` on the probe space summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutFamily {
    labels: Vec<f64>,
    operators: Vec<CMatrix>,
}

impl ReadoutFamily {
    pub fn new(labels: Vec<f64>, operators: Vec<CMatrix>) -> Result<Self> {
        if labels.len() != operators.len() || operators.is_empty() {
            return Err(Error::DimensionMismatch("one label per readout operator is required".into()));
        }
        let d = operators[0].nrows();
        let mut sum = CMatrix::zeros(d, d);
        for (mu, f) in operators.iter().enumerate() {
            if f.nrows() != d || f.ncols() != d {
                return Err(Error::DimensionMismatch(format!("readout operator {mu} is not {d}x{d}")));
            }
            if hermiticity_error(f) > TOLERANCE || hermitian_eigen(f).0[0] < -TOLERANCE {
                return Err(crate::error::invalid(format!("readout operator {mu} is not positive semidefinite")));
            }
            sum += f;
        }
        let dev = max_abs(&(sum - CMatrix::identity(d, d)));
        if dev > TOLERANCE {
            return Err(crate::error::invalid(format!("readout operators sum to the identity only within {dev:e}")));
        }
        Ok(Self { labels, operators })
    }

    /// Projectors on the computational basis, labeled `0..dim`.
    pub fn projective(dim: usize) -> Self {
        let operators = (0..dim)
            .map(|j| {
                let mut p = CMatrix::zeros(dim, dim);
                p[(j, j)] = Complex64::new(1.0, 0.0);
                p
            })
            .collect();
        Self { labels: (0..dim).map(|j| j as f64).collect(), operators }
    }

    /// Readout of two probes, `F_A(μ_A) ⊗ F_B(μ_B)`, outcome index
    /// `μ_A·n_B + μ_B`.
    pub fn product(a: &ReadoutFamily, b: &ReadoutFamily) -> Self {
        let mut labels = Vec::new();
        let mut operators = Vec::new();
        for (la, fa) in a.labels.iter().zip(&a.operators) {
            for (lb, fb) in b.labels.iter().zip(&b.operators) {
                labels.push(la * 1e6 + lb);
                operators.push(kron(fa, fb));
            }
        }
        Self { labels, operators }
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.operators[0].nrows()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn operator(&self, mu: usize) -> &CMatrix {
        &self.operators[mu]
    }

    /// Prior weight `Tr F(μ)`.
    pub fn prior(&self, mu: usize) -> f64 {
        trace(&self.operators[mu]).re
    }

    /// All operators commute pairwise.
    pub fn is_classical(&self) -> bool {
        let ops = &self.operators;
        (0..ops.len()).all(|a| (a + 1..ops.len()).all(|b| max_abs(&(&ops[a] * &ops[b] - &ops[b] * &ops[a])) <= TOLERANCE))
    }

    /// A basis diagonalizing every operator, when the family is classical.
    fn common_basis(&self) -> Option<CMatrix> {
        if !self.is_classical() {
            return None;
        }
        let d = self.dim();
        // a generic real combination separates the joint eigenspaces
        let mut mix = CMatrix::zeros(d, d);
        for (mu, f) in self.operators.iter().enumerate() {
            let c = 1.0 + ((mu as f64 + 1.0) * std::f64::consts::SQRT_2).fract();
            mix += f * Complex64::new(c, 0.0);
        }
        let (_, v) = hermitian_eigen(&mix);
        let diagonal = self.operators.iter().all(|f| {
            let g = v.adjoint() * f * &v;
            (0..d).all(|i| (0..d).all(|j| i == j || g[(i, j)].norm() <= 1e-10))
        });
        diagonal.then_some(v)
    }
}

fn check_unitary(u: &CMatrix) -> Result<()> {
    let deviation = unitarity_error(u);
    if deviation > TOLERANCE {
        return Err(Error::NonUnitary { deviation });
    }
    Ok(())
}

fn system_dim(readout: &ReadoutFamily, u: &CMatrix, rho_det: &FiniteState) -> Result<usize> {
    let dp = readout.dim();
    if rho_det.dim() != dp {
        return Err(Error::DimensionMismatch(format!("probe state is {}-dimensional, readout acts on {dp}", rho_det.dim())));
    }
    if !u.is_square() || !u.nrows().is_multiple_of(dp) {
        return Err(Error::DimensionMismatch(format!(
            "unitary of size {} does not factor over a {dp}-dimensional probe",
            u.nrows()
        )));
    }
    Ok(u.nrows() / dp)
}

fn evolved(readout: &ReadoutFamily, u: &CMatrix, rho_det: &FiniteState, rho_sys: &FiniteState) -> Result<(CMatrix, usize)> {
    let ds = system_dim(readout, u, rho_det)?;
    if rho_sys.dim() != ds {
        return Err(Error::DimensionMismatch(format!("system state is {}-dimensional, unitary needs {ds}", rho_sys.dim())));
    }
    check_unitary(u)?;
    Ok((u * kron(rho_det.matrix(), rho_sys.matrix()) * u.adjoint(), ds))
}

/// `P(μ) = Tr[(F(μ) ⊗ 1) U (ρ_det ⊗ ρ_sys) U†]`.
pub fn born_probability(readout: &ReadoutFamily, u: &CMatrix, rho_det: &FiniteState, rho_sys: &FiniteState) -> Result<Vec<f64>> {
    let (rho, ds) = evolved(readout, u, rho_det, rho_sys)?;
    let id = CMatrix::identity(ds, ds);
    Ok(readout.operators.iter().map(|f| trace(&(kron(f, &id) * &rho)).re).collect())
}

/// `ρ_{sys|μ} = Tr_det[(F(μ) ⊗ 1) U (ρ_det ⊗ ρ_sys) U†] / P(μ)`.
pub fn conditional_state(
    readout: &ReadoutFamily,
    u: &CMatrix,
    rho_det: &FiniteState,
    rho_sys: &FiniteState,
    mu: usize,
) -> Result<FiniteState> {
    if mu >= readout.len() {
        return Err(crate::error::invalid(format!("outcome {mu} out of range")));
    }
    let (rho, ds) = evolved(readout, u, rho_det, rho_sys)?;
    let root = kron(&psd_sqrt(&readout.operators[mu]), &CMatrix::identity(ds, ds));
    let unnorm = partial_trace(&(&root * rho * &root), &[readout.dim(), ds], &[1]);
    let p = trace(&unnorm).re;
    if p <= NEGLIGIBLE {
        return Err(Error::UndefinedConditional { outcome: mu, probability: p });
    }
    FiniteState::new(hermitize(unnorm / Complex64::new(p, 0.0)))
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Per outcome, the operators `M` of `ρ ↦ Σ M ρ M†` on the system.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    dim: usize,
    operations: Vec<Vec<CMatrix>>,
}

/// How the probe basis of the operations was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutBasis {
    /// One basis `|J⟩` diagonalizes every readout operator.
    Shared,
    /// Noncommuting readout: each outcome uses the eigenbasis `|μ:J⟩` of
    /// its own operator.
    PerOutcome,
}

/// Builds `M_{J,I}(μ) = √(p(μ|J) w(I)) ⟨J|U|I⟩` from the eigen-decomposition
/// `ρ_det = Σ w(I)|I⟩⟨I|`. Terms of zero weight are omitted, so a pure probe
/// with a projective readout gives one operation per outcome.
pub fn build_instrument(readout: &ReadoutFamily, u: &CMatrix, rho_det: &FiniteState) -> Result<(Instrument, ReadoutBasis)> {
    let ds = system_dim(readout, u, rho_det)?;
    check_unitary(u)?;
    let dp = readout.dim();
    let (w, iv) = hermitian_eigen(rho_det.matrix());
    let (basis_kind, shared) = match readout.common_basis() {
        Some(v) => (ReadoutBasis::Shared, Some(v)),
        None => (ReadoutBasis::PerOutcome, None),
    };
    let mut operations = Vec::with_capacity(readout.len());
    for f in &readout.operators {
        let (p, jv): (Vec<f64>, CMatrix) = match &shared {
            Some(v) => ((0..dp).map(|j| (v.column(j).adjoint() * f * v.column(j))[(0, 0)].re).collect(), v.clone()),
            None => hermitian_eigen(f),
        };
        let mut ops = Vec::new();
        for (j, &pj) in p.iter().enumerate() {
            for (i, &wi) in w.iter().enumerate() {
                let weight = pj * wi;
                if weight <= NEGLIGIBLE {
                    continue;
                }
                let block = probe_block(u, &jv.column(j).into_owned(), &iv.column(i).into_owned(), ds);
                ops.push(block * Complex64::new(weight.sqrt(), 0.0));
            }
        }
        operations.push(ops);
    }
    Ok((Instrument { dim: ds, operations }, basis_kind))
}

/// Largest deviation from each of the three instrument axioms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxiomReport {
    /// `‖I_∅(ρ)‖`
    pub empty: f64,
    /// `‖I_{D₁∪D₂}(ρ) − I_{D₁}(ρ) − I_{D₂}(ρ)‖` over disjoint splits.
    pub additivity: f64,
    /// `|Tr I_Ω(ρ) − 1|`
    pub normalization: f64,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.empty <= TOLERANCE && self.additivity <= TOLERANCE && self.normalization <= TOLERANCE
    }
}

impl Instrument {
    /// Assembles an instrument from explicit operations.
    pub fn from_operations(dim: usize, operations: Vec<Vec<CMatrix>>) -> Result<Self> {
        if operations.iter().flatten().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(Error::DimensionMismatch(format!("operations must be {dim}x{dim}")));
        }
        Ok(Self { dim, operations })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn outcomes(&self) -> usize {
        self.operations.len()
    }

    pub fn operations(&self, mu: usize) -> &[CMatrix] {
        &self.operations[mu]
    }

    /// `I_D(ρ) = Σ_{μ∈D} Σ M ρ M†`.
    pub fn apply(&self, outcomes: &[usize], rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for &mu in outcomes {
            for m in &self.operations[mu] {
                out += m * rho * m.adjoint();
            }
        }
        out
    }

    pub fn all_outcomes(&self) -> Vec<usize> {
        (0..self.outcomes()).collect()
    }

    /// `Tr I_{μ}(ρ)`.
    pub fn probability(&self, mu: usize, rho: &CMatrix) -> f64 {
        trace(&self.apply(&[mu], rho)).re
    }

    /// `E(D) = I*_D(1) = Σ_{μ∈D} Σ M†M`.
    pub fn effect(&self, outcomes: &[usize]) -> CMatrix {
        let mut e = CMatrix::zeros(self.dim, self.dim);
        for &mu in outcomes {
            for m in &self.operations[mu] {
                e += m.adjoint() * m;
            }
        }
        e
    }

    /// `I_D(ρ) / Tr I_D(ρ)`.
    pub fn conditional(&self, outcomes: &[usize], rho: &FiniteState) -> Result<FiniteState> {
        let out = self.apply(outcomes, rho.matrix());
        let p = trace(&out).re;
        if p <= NEGLIGIBLE {
            return Err(Error::UndefinedConditional { outcome: outcomes.first().copied().unwrap_or(0), probability: p });
        }
        FiniteState::new(hermitize(out / Complex64::new(p, 0.0)))
    }

    /// Checks the axioms on each state, splitting the outcome set at every
    /// position for additivity.
    pub fn check_axioms(&self, states: &[FiniteState]) -> AxiomReport {
        let all = self.all_outcomes();
        let mut r = AxiomReport { empty: 0.0, additivity: 0.0, normalization: 0.0 };
        for s in states {
            let rho = s.matrix();
            r.empty = r.empty.max(max_abs(&self.apply(&[], rho)));
            let whole = self.apply(&all, rho);
            for cut in 1..all.len() {
                let parts = self.apply(&all[..cut], rho) + self.apply(&all[cut..], rho);
                r.additivity = r.additivity.max(max_abs(&(&whole - parts)));
            }
            r.normalization = r.normalization.max((trace(&whole).re - 1.0).abs());
        }
        r
    }

    /// Polar-decomposition diagnostic `M = V·E^{1/2}` with `E = M†M`:
    /// the largest `‖M − E^{1/2}‖` over all operations. Zero means no
    /// operation carries a feedback unitary `V ≠ 1` (on its support).
    pub fn feedback_deviation(&self) -> f64 {
        self.operations.iter().flatten().map(|m| max_abs(&(m - psd_sqrt(&(m.adjoint() * m))))).fold(0.0, f64::max)
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Full-rank random state `G G† / Tr(G G†)` with Ginibre `G`.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> FiniteState {
    let g = gaussian_matrix(dim, dim, rng);
    let m = &g * g.adjoint();
    let tr = trace(&m);
    FiniteState { matrix: hermitize(m / tr) }
}

pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> FiniteState {
    let g = gaussian_matrix(dim, 1, rng);
    let psi: CVector = DVector::from_column_slice(g.as_slice()) / Complex64::new(g.norm(), 0.0);
    FiniteState { matrix: &psi * psi.adjoint() }
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix, with
/// the phases of `R`'s diagonal moved into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let qr = gaussian_matrix(dim, dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn state_validation() {
        assert!(FiniteState::new(CMatrix::identity(2, 2)).is_err());
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.5), c(0.0), c(0.0), c(-0.5)]);
        assert!(matches!(FiniteState::new(bad), Err(Error::InvalidState(_))));
        assert!(FiniteState::new(CMatrix::identity(2, 2) * c(0.5)).is_ok());
    }

    #[test]
    fn identity_coupling_ignores_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let det = random_state(2, &mut rng);
        let u = CMatrix::identity(4, 4);
        let f = ReadoutFamily::projective(2);
        let p1 = born_probability(&f, &u, &det, &random_state(2, &mut rng)).unwrap();
        let p2 = born_probability(&f, &u, &det, &random_state(2, &mut rng)).unwrap();
        assert!((p1[0] - det.matrix()[(0, 0)].re).abs() < 1e-15 && (p1[0] - p2[0]).abs() < 1e-15);
        let sys = random_state(2, &mut rng);
        let cond = conditional_state(&f, &u, &det, &sys, 1).unwrap();
        assert!(max_abs(&(cond.matrix() - sys.matrix())) < 1e-12);
    }

    #[test]
    fn projective_qnd_gives_luders_instrument() {
        let det = FiniteState::pure(&CVector::from_vec(vec![c(1.0), c(0.0)])).unwrap();
        let u = controlled_shift(2, 2);
        let f = ReadoutFamily::projective(2);
        let (inst, basis) = build_instrument(&f, &u, &det).unwrap();
        assert_eq!(basis, ReadoutBasis::Shared);
        assert!((0..2).all(|mu| inst.operations(mu).len() == 1));
        let sys = FiniteState::pure(&uniform_superposition(2)).unwrap();
        let cond = conditional_state(&f, &u, &det, &sys, 1).unwrap();
        assert!((cond.matrix()[(1, 1)].re - 1.0).abs() < 1e-12);
        assert!(inst.feedback_deviation() < 1e-12);
    }

    #[test]
    fn noncommuting_readout_falls_back() {
        let h = 0.5f64.sqrt();
        let plus = CVector::from_vec(vec![c(h), c(h)]);
        let minus = CVector::from_vec(vec![c(h), c(-h)]);
        let e0 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
        let e1 = CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
        // trine-like: half of Z basis, half of X basis
        let ops = vec![e0 * c(0.5), e1 * c(0.5), &plus * plus.adjoint() * c(0.5), &minus * minus.adjoint() * c(0.5)];
        let f = ReadoutFamily::new(vec![0.0, 1.0, 2.0, 3.0], ops).unwrap();
        assert!(!f.is_classical());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(4, &mut rng);
        let det = random_state(2, &mut rng);
        let (inst, basis) = build_instrument(&f, &u, &det).unwrap();
        assert_eq!(basis, ReadoutBasis::PerOutcome);
        let sys = random_state(2, &mut rng);
        let p = born_probability(&f, &u, &det, &sys).unwrap();
        for (mu, pm) in p.iter().enumerate() {
            assert!((inst.probability(mu, sys.matrix()) - pm).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = ReadoutFamily::projective(2);
        let det = FiniteState::maximally_mixed(2);
        let sys = FiniteState::maximally_mixed(3);
        let u = CMatrix::identity(4, 4);
        assert!(matches!(born_probability(&f, &u, &det, &sys), Err(Error::DimensionMismatch(_))));
        let nonunitary = CMatrix::identity(4, 4) * c(1.1);
        assert!(matches!(
            born_probability(&f, &nonunitary, &det, &FiniteState::maximally_mixed(2)),
            Err(Error::NonUnitary { .. })
        ));
        let pure0 = FiniteState::pure(&CVector::from_vec(vec![c(1.0), c(0.0)])).unwrap();
        assert!(matches!(
            conditional_state(&f, &u, &pure0, &FiniteState::maximally_mixed(2), 1),
            Err(Error::UndefinedConditional { .. })
        ));
        assert!(ReadoutFamily::new(vec![0.0], vec![CMatrix::identity(2, 2) * c(0.9)]).is_err());
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(unitarity_error(&random_unitary(8, &mut rng)) < 1e-12);
    }
}
