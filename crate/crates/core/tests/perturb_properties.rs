use proptest::prelude::*;
use tracepert::algebra::{generate_algebra, is_irreducible, is_masa};
use tracepert::ensemble::{block_reducible, gaussian, hermitian, normal_matrix, rng, unitary};
use tracepert::matrix::{hermitian_eig, schatten_norm};
use tracepert::perturb::{
    diag_distinct, irreducible_pipeline, isolated_simple_eigenvalue, PerturbationRequest, Witness,
};
use tracepert::verify::{brute_force_commutant_dim, verify_perturbation};
use tracepert::{ComplexMatrix, HermitianMatrix, Tolerances};

fn eps_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1e-1), Just(1e-3)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn pipeline_is_sound(n in 1usize..9, eps in eps_strategy(), kind in 0u8..3, seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = match kind {
            0 => gaussian(n, &mut r),
            1 => normal_matrix(n, &mut r),
            _ => block_reducible(n, &mut r),
        };
        let req = PerturbationRequest::new(eps).unwrap().with_seed(seed);
        let out = irreducible_pipeline(&t, &req).unwrap();
        prop_assert!(out.trace_norm < eps);
        prop_assert!(schatten_norm(&out.k, 1.0).unwrap() < eps);
        prop_assert!(out.certificate.irreducible);
        let report = verify_perturbation(&t, &out, &req.tolerances).unwrap();
        prop_assert!(report.passed(), "{:?}", report.details);
        let used: f64 = out.log.iter().map(|e| e.used).sum();
        prop_assert!(used < eps);
    }

    #[test]
    fn pipeline_on_its_own_output(n in 2usize..7, seed in any::<u64>()) {
        let t = gaussian(n, &mut rng(seed));
        let first = irreducible_pipeline(&t, &PerturbationRequest::new(0.1).unwrap()).unwrap();
        let t1 = &t + &first.k;
        let second = irreducible_pipeline(&t1, &PerturbationRequest::new(0.01).unwrap()).unwrap();
        prop_assert!(second.certificate.irreducible && second.trace_norm < 0.01);
    }

    #[test]
    fn pipeline_certificates_survive_conjugation(n in 2usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let t = block_reducible(n, &mut r);
        let u = unitary(n, &mut r);
        let req = PerturbationRequest::new(0.1).unwrap();
        let a = irreducible_pipeline(&t, &req).unwrap();
        let b = irreducible_pipeline(&t.conjugate_by(&u), &req).unwrap();
        prop_assert_eq!(a.certificate.irreducible, b.certificate.irreducible);
        prop_assert!(b.certificate.irreducible);
    }

    #[test]
    fn diag_distinct_postconditions(
        values in prop::collection::vec(-3i32..4, 1..8),
        forbidden in prop::collection::vec(-30i32..40, 0..20),
        eps in 0.01f64..1.0,
    ) {
        let tol = Tolerances::default();
        let d: Vec<f64> = values.iter().map(|&v| v as f64 * 0.5).collect();
        let sigma: Vec<f64> = forbidden.iter().map(|&v| v as f64 * 0.05).collect();
        let dm = HermitianMatrix::from_real_diagonal(&d).unwrap();
        let out = diag_distinct(&dm, &sigma, &PerturbationRequest::new(eps).unwrap()).unwrap();
        prop_assert!(out.trace_norm < eps);
        let moved: Vec<f64> = (0..d.len()).map(|j| d[j] + out.k.get(j, j).re).collect();
        for j in 0..d.len() {
            let delta = out.k.get(j, j).re;
            prop_assert!(delta > 0.0 && delta < eps / 2f64.powi(j as i32 + 1));
            prop_assert!(sigma.iter().all(|&s| (moved[j] - s).abs() > 1e-10));
            prop_assert!(moved[j + 1..].iter().all(|&w| (moved[j] - w).abs() > 1e-10));
        }
        prop_assert!(out.k.is_diagonal(0.0));
        let alg = generate_algebra(d.len(), &[&dm.clone().into_matrix() + &out.k], &tol).unwrap();
        prop_assert!(is_masa(&alg, &tol).unwrap());
    }

    #[test]
    fn isolated_eigenvalue_matches_compression(n in 1usize..9, big in any::<bool>(), seed in any::<u64>()) {
        let tol = Tolerances::default();
        let eps = if big { 0.8 } else { 0.1 };
        let a = hermitian(n, &mut rng(seed));
        let (out, lambda) = isolated_simple_eigenvalue(&a, &PerturbationRequest::new(eps).unwrap()).unwrap();
        prop_assert!(out.trace_norm <= eps + 1e-12);
        let Some(Witness::Isolated { scale, gap, .. }) = out.witness else { panic!("missing witness") };
        let spectrum = hermitian_eig(&HermitianMatrix::new(a.as_matrix() + &out.k, &tol).unwrap(), &tol).unwrap().eigenvalues;
        prop_assert!((spectrum[n - 1] - lambda).abs() < 1e-9 * scale.max(1.0));
        if let Some(g) = gap {
            prop_assert!(g / scale >= eps / scale / 4.0 - 1e-9);
        }
        // The remaining eigenvalues are those of (I−F)A(I−F) on ξ⊥, which
        // for an eigenvector ξ are the other eigenvalues of A.
        let base = hermitian_eig(&a, &tol).unwrap().eigenvalues;
        for k in 0..n - 1 {
            prop_assert!((spectrum[k] - base[k]).abs() < 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn oracle_matches_algebra_commutant(n in 1usize..6, reducible in any::<bool>(), seed in any::<u64>()) {
        let tol = Tolerances::default();
        let mut r = rng(seed);
        let t = if reducible { block_reducible(n, &mut r) } else { gaussian(n, &mut r) };
        let oracle = brute_force_commutant_dim(&t, &tol).unwrap();
        prop_assert_eq!(oracle.dim, is_irreducible(&t, &tol).unwrap().commutant_dim);
    }
}

#[test]
fn reducible_blocks_are_never_certified_without_perturbation() {
    let tol = Tolerances::default();
    for seed in 0..40 {
        let n = 2 + (seed as usize % 6);
        let t = block_reducible(n, &mut rng(seed));
        assert!(!is_irreducible(&t, &tol).unwrap().irreducible);
        assert!(brute_force_commutant_dim(&t, &tol).unwrap().dim >= 2);
    }
}

#[test]
fn scalar_input_still_gets_certified() {
    let t = ComplexMatrix::identity(5);
    let out = irreducible_pipeline(&t, &PerturbationRequest::new(1e-3).unwrap()).unwrap();
    assert!(out.certificate.irreducible && out.trace_norm < 1e-3);
}
