use proptest::prelude::*;
use tracepert::ensemble::{gaussian, hermitian, rng, unitary};
use tracepert::matrix::{hermitian_eig, rank_one, schatten_norm, spectral_projection};
use tracepert::{ComplexMatrix, ComplexVector, Tolerances};

fn random_vector(n: usize, seed: u64) -> ComplexVector {
    let g = gaussian(n, &mut rng(seed));
    ComplexVector::new((0..n).map(|i| g.get(i, 0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schatten_norms_are_unitarily_invariant(n in 1usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = gaussian(n, &mut r);
        let u = unitary(n, &mut r);
        let v = unitary(n, &mut r);
        let moved = &(&u * &m) * &v;
        for p in [1.0, 2.0, f64::INFINITY] {
            let a = schatten_norm(&m, p).unwrap();
            let b = schatten_norm(&moved, p).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn trace_norm_triangle_inequality(n in 1usize..7, seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = gaussian(n, &mut r);
        let k = gaussian(n, &mut r);
        let lhs = schatten_norm(&(&m + &k), 1.0).unwrap();
        let rhs = schatten_norm(&m, 1.0).unwrap() + schatten_norm(&k, 1.0).unwrap();
        prop_assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn rank_one_adjoint_is_exact(n in 1usize..8, seed in any::<u64>()) {
        let e = random_vector(n, seed);
        let f = random_vector(n, seed.wrapping_add(1));
        prop_assert_eq!(rank_one(&e, &f).unwrap().adjoint(), rank_one(&f, &e).unwrap());
    }

    #[test]
    fn spectral_projection_of_whole_spectrum_is_identity(n in 1usize..8, seed in any::<u64>()) {
        let tol = Tolerances::default();
        let a = hermitian(n, &mut rng(seed));
        let eig = hermitian_eig(&a, &tol).unwrap();
        let lo = eig.eigenvalues[0] - 1.0;
        let hi = eig.eigenvalues[n - 1] + 1.0;
        let p = spectral_projection(&a, lo, hi, &tol).unwrap();
        prop_assert!((p.as_matrix() - &ComplexMatrix::identity(n)).max_abs() < 1e-9);
    }

    #[test]
    fn disjoint_spectral_projections_partition_identity(n in 2usize..8, seed in any::<u64>()) {
        let tol = Tolerances::default();
        let a = hermitian(n, &mut rng(seed));
        let ev = hermitian_eig(&a, &tol).unwrap().eigenvalues;
        // Cut at the widest interior gap.
        let (cut, _) = (0..n - 1)
            .map(|i| (0.5 * (ev[i] + ev[i + 1]), ev[i + 1] - ev[i]))
            .fold((0.0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        let width = ev.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let eps = 0.25 * width;
        let low = spectral_projection(&a, ev[0] - 1.0, cut - eps, &tol).unwrap();
        let high = spectral_projection(&a, cut + eps, ev[n - 1] + 1.0, &tol).unwrap();
        let sum = low.as_matrix() + high.as_matrix();
        prop_assert!((&sum - &ComplexMatrix::identity(n)).max_abs() < 1e-9);
        prop_assert!((low.as_matrix() * high.as_matrix()).max_abs() < 1e-9);
        prop_assert_eq!(low.rank() + high.rank(), n);
    }
}
