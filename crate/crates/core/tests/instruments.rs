use nalgebra::DMatrix;
use num_complex::Complex64;
use qnd_core::instruments::linalg::{max_abs, CMatrix};
use qnd_core::instruments::{
    bell_state, born_probability, build_instrument, conditional_state, controlled_shift, random_pure_state, random_state,
    random_unitary, sequential_factorization_check, swapped_correlation, FiniteState, ReadoutFamily,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Index-loop evaluation of U(ρ_det ⊗ ρ_sys)U†, no matrix products.
fn evolve_by_loops(u: &CMatrix, det: &CMatrix, sys: &CMatrix) -> CMatrix {
    let (dp, ds) = (det.nrows(), sys.nrows());
    let n = dp * ds;
    let rho = DMatrix::from_fn(n, n, |i, j| det[(i / ds, j / ds)] * sys[(i % ds, j % ds)]);
    let mut out = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    acc += u[(a, i)] * rho[(i, j)] * u[(b, j)].conj();
                }
            }
            out[(a, b)] = acc;
        }
    }
    out
}

// Σ_{p,p'} F[p',p] ρ[(p s),(p' t)]
fn contract_probe(f: &CMatrix, rho: &CMatrix, ds: usize) -> CMatrix {
    let dp = f.nrows();
    CMatrix::from_fn(ds, ds, |s, t| {
        let mut acc = Complex64::new(0.0, 0.0);
        for p in 0..dp {
            for q in 0..dp {
                acc += f[(q, p)] * rho[(p * ds + s, q * ds + t)];
            }
        }
        acc
    })
}

fn random_povm(d: usize, outcomes: usize, rng: &mut ChaCha8Rng) -> ReadoutFamily {
    // G_μ = S^{-1/2} A_μ S^{-1/2} with S = Σ A_μ
    let parts: Vec<CMatrix> = (0..outcomes).map(|_| random_state(d, rng).matrix().clone()).collect();
    let s: CMatrix = parts.iter().fold(CMatrix::zeros(d, d), |acc, p| acc + p);
    let eig = s.clone().symmetric_eigen();
    let inv_root = &eig.eigenvectors
        * CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.sqrt().recip(), 0.0)))
        * eig.eigenvectors.adjoint();
    let ops: Vec<CMatrix> = parts
        .iter()
        .map(|p| {
            let g = &inv_root * p * &inv_root;
            (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
        })
        .collect();
    ReadoutFamily::new((0..outcomes).map(|m| m as f64).collect(), ops).unwrap()
}

#[test]
fn born_rule_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let f = random_povm(2, 3, &mut rng);
        let u = random_unitary(4, &mut rng);
        let det = random_state(2, &mut rng);
        let sys = random_state(2, &mut rng);
        let p = born_probability(&f, &u, &det, &sys).unwrap();
        let rho = evolve_by_loops(&u, det.matrix(), sys.matrix());
        for (mu, pm) in p.iter().enumerate() {
            let oracle: Complex64 = (0..2).map(|s| contract_probe(f.operator(mu), &rho, 2)[(s, s)]).sum();
            assert!((pm - oracle.re).abs() < 1e-12 && oracle.im.abs() < 1e-12);
            assert!(*pm >= -1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn instruments_reproduce_conditional_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for trial in 0..20 {
        let f = if trial % 2 == 0 { ReadoutFamily::projective(3) } else { random_povm(3, 4, &mut rng) };
        let u = random_unitary(6, &mut rng);
        let det = if trial % 3 == 0 { random_pure_state(3, &mut rng) } else { random_state(3, &mut rng) };
        let sys = random_state(2, &mut rng);
        let (inst, _) = build_instrument(&f, &u, &det).unwrap();
        let rho = evolve_by_loops(&u, det.matrix(), sys.matrix());
        for mu in 0..f.len() {
            let unnorm = contract_probe(f.operator(mu), &rho, 2);
            let applied = inst.apply(&[mu], sys.matrix());
            assert!(max_abs(&(&applied - &unnorm)) < 1e-12, "trial {trial}, outcome {mu}");
            let cond = conditional_state(&f, &u, &det, &sys, mu).unwrap();
            let p = unnorm.trace().re;
            assert!(max_abs(&(cond.matrix() - unnorm / Complex64::new(p, 0.0))) < 1e-10);
        }
    }
}

#[test]
fn axioms_and_effects_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let f = random_povm(2, 3, &mut rng);
    let u = random_unitary(8, &mut rng);
    let det = random_state(2, &mut rng);
    let (inst, _) = build_instrument(&f, &u, &det).unwrap();
    let states: Vec<FiniteState> = (0..100).map(|_| random_state(4, &mut rng)).collect();
    assert!(inst.check_axioms(&states).passed());
    for s in &states {
        let p = born_probability(&f, &u, &det, s).unwrap();
        let d = [0, 2];
        let via_effect = (inst.effect(&d) * s.matrix()).trace().re;
        assert!((via_effect - p[0] - p[2]).abs() < 1e-12);
    }
}

// Probes cos θ|00⟩ + sin θ|11⟩: correlated for every θ strictly between 0
// and π/2, and both diagnostics vanish exactly at the ends.
#[test]
fn swapped_correlation_tracks_factorization() {
    let u = controlled_shift(2, 2);
    let f = ReadoutFamily::projective(2);
    let sys = FiniteState::pure(&qnd_core::instruments::uniform_superposition(2)).unwrap();
    for k in 0..=8 {
        let theta = k as f64 * std::f64::consts::FRAC_PI_2 / 8.0;
        let mut psi = nalgebra::DVector::zeros(4);
        psi[0] = Complex64::new(theta.cos(), 0.0);
        psi[3] = Complex64::new(theta.sin(), 0.0);
        let det = FiniteState::pure(&psi).unwrap();
        let swapped = swapped_correlation(&det, 2, 2, &u, &sys).unwrap();
        let report = sequential_factorization_check(&det, &u, &u, &f, &f, &sys).unwrap();
        let ends = k == 0 || k == 8;
        assert_eq!(swapped < 1e-12, ends, "theta index {k}: swapped {swapped}");
        assert_eq!(report.max_discrepancy < 1e-12, ends, "theta index {k}: discrepancy {}", report.max_discrepancy);
        assert!(report.marginal_discrepancy < 1e-12);
    }
}

#[test]
fn bell_probes_break_factorization() {
    let u = controlled_shift(2, 2);
    let f = ReadoutFamily::projective(2);
    let sys = FiniteState::pure(&qnd_core::instruments::uniform_superposition(2)).unwrap();
    let bell = FiniteState::pure(&bell_state(2)).unwrap();
    let report = sequential_factorization_check(&bell, &u, &u, &f, &f, &sys).unwrap();
    // outcomes always agree in the chain; the composed prediction is uniform
    assert!((report.joint[0][0] - 0.5).abs() < 1e-12 && report.joint[0][1].abs() < 1e-12);
    assert!(report.composed.iter().flatten().all(|p| (p - 0.25).abs() < 1e-12));
    assert!((report.max_discrepancy - 0.25).abs() < 1e-12);
    assert!((swapped_correlation(&bell, 2, 2, &u, &sys).unwrap() - 1.0).abs() < 1e-12);
}
