//! Two probes measuring one system in sequence, A first, then B.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::linalg::{embed, kron, partial_trace, trace, trace_norm, CMatrix, CVector};
use super::{build_instrument, check_unitary, random_state, AxiomReport, FiniteState, Instrument, ReadoutFamily};
use crate::error::{Error, Result};

/// Largest probe or system dimension accepted by [`demo`].
pub const MAX_FACTOR_DIM: usize = 4;

/// `|p⟩|s⟩ ↦ |p + s mod d_p⟩|s⟩` on probe ⊗ system: the probe pointer is
/// shifted by the system's computational-basis value, which is left intact.
pub fn controlled_shift(dp: usize, ds: usize) -> CMatrix {
    let mut u = CMatrix::zeros(dp * ds, dp * ds);
    for p in 0..dp {
        for s in 0..ds {
            u[(((p + s) % dp) * ds + s, p * ds + s)] = Complex64::new(1.0, 0.0);
        }
    }
    u
}

/// `Σ_j |jj⟩ / √d`.
pub fn bell_state(d: usize) -> CVector {
    let mut v = CVector::zeros(d * d);
    let amp = Complex64::new((d as f64).sqrt().recip(), 0.0);
    (0..d).for_each(|j| v[j * d + j] = amp);
    v
}

/// `Σ_j |j⟩ / √d`.
pub fn uniform_superposition(d: usize) -> CVector {
    CVector::from_element(d, Complex64::new((d as f64).sqrt().recip(), 0.0))
}

fn chain_dims(rho_det: &FiniteState, da: usize, db: usize, u_a: &CMatrix, rho_sys: &FiniteState) -> Result<[usize; 3]> {
    let ds = rho_sys.dim();
    if rho_det.dim() != da * db {
        return Err(Error::DimensionMismatch(format!("probe state is {}-dimensional, expected {da}x{db}", rho_det.dim())));
    }
    if u_a.nrows() != da * ds || u_a.ncols() != da * ds {
        return Err(Error::DimensionMismatch(format!("first unitary must act on {da}x{ds}")));
    }
    check_unitary(u_a)?;
    Ok([da, db, ds])
}

/// Trace-norm distance between `ρ_{sys,B} = Tr_A[U_A(ρ_det ⊗ ρ_sys)U_A†]`
/// and the product of its marginals. Zero exactly when the first
/// interaction leaves the system uncorrelated with probe B.
pub fn swapped_correlation(rho_det: &FiniteState, da: usize, db: usize, u_a: &CMatrix, rho_sys: &FiniteState) -> Result<f64> {
    let dims = chain_dims(rho_det, da, db, u_a, rho_sys)?;
    let ua = embed(u_a, &dims, &[0, 2]);
    let rho = &ua * kron(rho_det.matrix(), rho_sys.matrix()) * ua.adjoint();
    let sys_b = partial_trace(&rho, &dims, &[2, 1]);
    let sys = partial_trace(&sys_b, &[dims[2], db], &[0]);
    let b = partial_trace(&sys_b, &[dims[2], db], &[1]);
    Ok(trace_norm(&(sys_b - kron(&sys, &b))))
}

/// Joint outcome probabilities of the full chain against those of the two
/// instruments built from the marginal probe states and composed.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    /// `joint[μ_A][μ_B]` from the exact chain.
    pub joint: Vec<Vec<f64>>,
    /// `Tr[I^B_{μ_B}(I^A_{μ_A}(ρ_sys))]`.
    pub composed: Vec<Vec<f64>>,
    pub max_discrepancy: f64,
    /// Largest difference between the first-probe marginals of the two.
    pub marginal_discrepancy: f64,
}

pub fn sequential_factorization_check(
    rho_det: &FiniteState,
    u_a: &CMatrix,
    u_b: &CMatrix,
    readout_a: &ReadoutFamily,
    readout_b: &ReadoutFamily,
    rho_sys: &FiniteState,
) -> Result<FactorizationReport> {
    let (da, db) = (readout_a.dim(), readout_b.dim());
    let dims = chain_dims(rho_det, da, db, u_a, rho_sys)?;
    let ds = dims[2];
    if u_b.nrows() != db * ds || u_b.ncols() != db * ds {
        return Err(Error::DimensionMismatch(format!("second unitary must act on {db}x{ds}")));
    }
    check_unitary(u_b)?;

    let chain = embed(u_b, &dims, &[1, 2]) * embed(u_a, &dims, &[0, 2]);
    let rho = &chain * kron(rho_det.matrix(), rho_sys.matrix()) * chain.adjoint();
    let id = CMatrix::identity(ds, ds);
    let joint: Vec<Vec<f64>> = (0..readout_a.len())
        .map(|ma| {
            (0..readout_b.len())
                .map(|mb| {
                    let f = kron(&kron(readout_a.operator(ma), readout_b.operator(mb)), &id);
                    trace(&(f * &rho)).re
                })
                .collect()
        })
        .collect();

    let rho_a = rho_det.reduce(&[da, db], &[0])?;
    let rho_b = rho_det.reduce(&[da, db], &[1])?;
    let (inst_a, _) = build_instrument(readout_a, u_a, &rho_a)?;
    let (inst_b, _) = build_instrument(readout_b, u_b, &rho_b)?;
    let composed: Vec<Vec<f64>> = (0..readout_a.len())
        .map(|ma| {
            let after_a = inst_a.apply(&[ma], rho_sys.matrix());
            (0..readout_b.len()).map(|mb| trace(&inst_b.apply(&[mb], &after_a)).re).collect()
        })
        .collect();

    let max_discrepancy = joint.iter().flatten().zip(composed.iter().flatten()).map(|(j, c)| (j - c).abs()).fold(0.0, f64::max);
    let marginal_discrepancy =
        joint.iter().zip(&composed).map(|(j, c)| (j.iter().sum::<f64>() - c.iter().sum::<f64>()).abs()).fold(0.0, f64::max);
    Ok(FactorizationReport { joint, composed, max_discrepancy, marginal_discrepancy })
}

/// Outcome of [`demo`].
#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub dim: usize,
    pub seed: u64,
    pub product_discrepancy: f64,
    pub product_swapped: f64,
    pub bell_discrepancy: f64,
    pub bell_swapped: f64,
    /// First-probe marginals, joint vs composed, worst of both cases.
    pub marginal_discrepancy: f64,
    pub axiom_states: usize,
    /// Worst axiom deviations over every instrument built.
    pub axioms: AxiomReport,
    /// Largest `|Tr[E(μ)ρ] − P(μ)|` over the same instruments and states.
    pub effect_deviation: f64,
}

/// Controlled-shift interactions and projective readouts on `d ⊗ d ⊗ d`,
/// once with independent random probes and once with Bell-correlated
/// probes, measuring a system in uniform superposition. The instruments
/// are also checked against the axioms on 100 random states.
pub fn demo(dim: usize, seed: u64) -> Result<DemoReport> {
    if !(2..=MAX_FACTOR_DIM).contains(&dim) {
        return Err(crate::error::invalid(format!("dimension must lie in 2..={MAX_FACTOR_DIM}, got {dim}")));
    }
    const STATES: usize = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = controlled_shift(dim, dim);
    let readout = ReadoutFamily::projective(dim);
    let sys = FiniteState::pure(&uniform_superposition(dim))?;

    let product = random_state(dim, &mut rng).tensor(&random_state(dim, &mut rng));
    let bell = FiniteState::pure(&bell_state(dim))?;
    let p = sequential_factorization_check(&product, &u, &u, &readout, &readout, &sys)?;
    let b = sequential_factorization_check(&bell, &u, &u, &readout, &readout, &sys)?;

    let states: Vec<FiniteState> = (0..STATES).map(|_| random_state(dim, &mut rng)).collect();
    let mut instruments: Vec<Instrument> = Vec::new();
    for det in [&product, &bell] {
        for k in 0..2 {
            let marginal = det.reduce(&[dim, dim], &[k])?;
            instruments.push(build_instrument(&readout, &u, &marginal)?.0);
        }
    }
    let mut axioms = AxiomReport { empty: 0.0, additivity: 0.0, normalization: 0.0 };
    let mut effect_deviation: f64 = 0.0;
    for inst in &instruments {
        let r = inst.check_axioms(&states);
        axioms.empty = axioms.empty.max(r.empty);
        axioms.additivity = axioms.additivity.max(r.additivity);
        axioms.normalization = axioms.normalization.max(r.normalization);
        for s in &states {
            for mu in 0..inst.outcomes() {
                let via_effect = trace(&(inst.effect(&[mu]) * s.matrix())).re;
                effect_deviation = effect_deviation.max((via_effect - inst.probability(mu, s.matrix())).abs());
            }
        }
    }

    Ok(DemoReport {
        dim,
        seed,
        product_discrepancy: p.max_discrepancy,
        product_swapped: swapped_correlation(&product, dim, dim, &u, &sys)?,
        bell_discrepancy: b.max_discrepancy,
        bell_swapped: swapped_correlation(&bell, dim, dim, &u, &sys)?,
        marginal_discrepancy: p.marginal_discrepancy.max(b.marginal_discrepancy),
        axiom_states: STATES,
        axioms,
        effect_deviation,
    })
}
