use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rbcert::estimators::{proposed_estimate, random_vectors, randomized_estimate, residual_estimate, ErrorSpace, RandomizedState};
use rbcert::linalg::{orth, CMat, ComplexMatrix};
use rbcert::rom::ReducedModel;
use rbcert::system::{AffineSystem, Coefficient, MatrixTerm, ParameterDomain, ParameterPoint, RhsTerm};

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
}

fn system(seed: u64, n: usize, ports: usize) -> AffineSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a0 = gaussian(&mut rng, n, n);
    for i in 0..n {
        a0[(i, i)] += C64::new(2.0 * (n as f64).sqrt(), 0.0);
    }
    let a1 = gaussian(&mut rng, n, n) * C64::new(0.2, 0.0);
    AffineSystem::new(
        vec![
            MatrixTerm::new("A0", Coefficient::constant(1.0), ComplexMatrix::Dense(a0)),
            MatrixTerm::new("A1", Coefficient::s_power(1), ComplexMatrix::Dense(a1)),
        ],
        vec![RhsTerm::new("Q", Coefficient::constant(1.0), gaussian(&mut rng, n, ports))],
        ParameterDomain::band(0.05, 0.5),
        Some(1.0),
    )
    .unwrap()
}

fn exact_error(sys: &AffineSystem, rm: &ReducedModel, mu: &ParameterPoint) -> CMat {
    let a: DMatrix<C64> = sys.assemble(mu).to_dense();
    let x = a.lu().solve(&sys.assemble_rhs(mu)).unwrap();
    x - rm.rom_solve(mu).unwrap().1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn proposed_is_exact_when_the_error_lies_in_the_error_space(
        seed in 0u64..1000, n in 6usize..30, r in 1usize..4, f in 0.05f64..0.5,
    ) {
        let sys = system(seed, n, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let v = orth(&gaussian(&mut rng, n, r)).unwrap();
        let rm = ReducedModel::project(&sys, &v).unwrap();
        let mu = ParameterPoint::new(f);
        let e = exact_error(&sys, &rm, &mu);
        let v_r = orth(&e).unwrap();
        let space = ErrorSpace::build(&sys, &v, &v_r).unwrap();
        let (cert, e_tilde) = proposed_estimate(&sys, &rm, &space, &mu, 0).unwrap();
        let en = e.column(0).norm();
        prop_assert!((e.column(0) - &e_tilde).norm() <= 1e-9 * en);
        prop_assert!((cert.estimate - en).abs() <= 1e-9 * en);
    }

    #[test]
    fn estimates_scale_linearly_with_the_right_hand_side(
        seed in 0u64..1000, n in 6usize..30, f in 0.05f64..0.5, exp in -3i32..4,
    ) {
        let sys = system(seed, n, 2);
        let c = 2f64.powi(exp * 5);
        let scaled = AffineSystem::new(
            sys.matrix_terms().to_vec(),
            sys.rhs_terms().iter().map(|t| RhsTerm::new(t.name.clone(), t.coefficient, &t.matrix * C64::new(c, 0.0))).collect(),
            sys.domain().clone(),
            Some(sys.scale()),
        ).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = orth(&gaussian(&mut rng, n, 2)).unwrap();
        let v_r = orth(&gaussian(&mut rng, n, 2)).unwrap();
        let mu = ParameterPoint::new(f);
        for p in 0..2 {
            let [a, b] = [&sys, &scaled].map(|s| {
                let rm = ReducedModel::project(s, &v).unwrap();
                let space = ErrorSpace::build(s, &v, &v_r).unwrap();
                (residual_estimate(s, &rm, &mu, p).unwrap().estimate, proposed_estimate(s, &rm, &space, &mu, p).unwrap().0.estimate)
            });
            prop_assert!((b.0 - c * a.0).abs() <= 1e-12 * c * a.0);
            prop_assert!((b.1 - c * a.1).abs() <= 1e-12 * c * a.1);
        }
    }

    #[test]
    fn randomized_estimate_is_nonnegative_and_zero_at_exact_roms(
        seed in 0u64..1000, n in 6usize..25, k in 1usize..8, f in 0.05f64..0.5,
    ) {
        let sys = system(seed, n, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        let v_rd = orth(&gaussian(&mut rng, n, 3)).unwrap();
        let z = random_vectors(n, k, seed);
        let mu = ParameterPoint::new(f);

        let v = orth(&gaussian(&mut rng, n, 2)).unwrap();
        let rm = ReducedModel::project(&sys, &v).unwrap();
        let state = RandomizedState::new(&sys, &v, &v_rd, z.clone()).unwrap();
        prop_assert!(randomized_estimate(&sys, &rm, &state, &mu, 0).unwrap().estimate >= 0.0);

        // A full basis reproduces x exactly, so the residual and the estimate vanish.
        let full = orth(&CMat::identity(n, n)).unwrap();
        let rm = ReducedModel::project(&sys, &full).unwrap();
        let state = RandomizedState::new(&sys, &full, &v_rd, z).unwrap();
        let b = sys.assemble_rhs(&mu).column(0).norm();
        prop_assert!(randomized_estimate(&sys, &rm, &state, &mu, 0).unwrap().estimate <= 1e-10 * b);
    }
}
