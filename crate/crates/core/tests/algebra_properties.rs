use proptest::prelude::*;
use tracepert::algebra::{
    atomic_support, commutant, generate_algebra, is_irreducible, minimal_central_projections,
    vector_report, wedderburn_decompose, StarAlgebra,
};
use tracepert::ensemble::{
    block_algebra_element, block_reducible, gaussian, normal_matrix, random_block_pattern, rng,
    unitary,
};
use tracepert::{ComplexMatrix, ComplexVector, Tolerances};

fn same_span(a: &StarAlgebra, b: &StarAlgebra, tol: f64) -> bool {
    a.dim() == b.dim() && b.basis().iter().all(|m| a.membership_residual(m) < tol)
}

fn sorted(mut blocks: Vec<(usize, usize)>) -> Vec<(usize, usize)> {
    blocks.sort_unstable();
    blocks
}

fn block_algebra(max_dim: usize, seed: u64) -> (Vec<(usize, usize)>, StarAlgebra) {
    let tol = Tolerances::default();
    let mut r = rng(seed);
    let blocks = random_block_pattern(max_dim, &mut r);
    let n: usize = blocks.iter().map(|(s, m)| s * m).sum();
    let u = unitary(n, &mut r);
    let gens: Vec<ComplexMatrix> = (0..2)
        .map(|_| block_algebra_element(&blocks, &u, &mut r))
        .collect();
    (blocks, generate_algebra(n, &gens, &tol).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bicommutant_equals_generated_algebra(n in 1usize..7, count in 1usize..3, seed in any::<u64>()) {
        let tol = Tolerances::default();
        let mut r = rng(seed);
        let gens: Vec<ComplexMatrix> = (0..count)
            .map(|k| if k % 2 == 0 { block_reducible(n, &mut r) } else { normal_matrix(n, &mut r) })
            .collect();
        let generated = generate_algebra(n, &gens, &tol).unwrap();
        let first = commutant(&gens, &tol).unwrap();
        let second = commutant(first.basis(), &tol).unwrap();
        prop_assert!(same_span(&generated, &second, 1e-6));
    }

    #[test]
    fn block_dimensions_match_structure(seed in any::<u64>()) {
        let tol = Tolerances::default();
        let (blocks, alg) = block_algebra(9, seed);
        let algebra_dim: usize = blocks.iter().map(|(s, _)| s * s).sum();
        let commutant_dim: usize = blocks.iter().map(|(_, m)| m * m).sum();
        prop_assert_eq!(alg.dim(), algebra_dim);
        prop_assert_eq!(alg.commutant(&tol).unwrap().dim(), commutant_dim);
        let dec = wedderburn_decompose(&alg, &tol, seed).unwrap();
        prop_assert_eq!(sorted(dec.blocks.clone()), sorted(blocks));
    }

    #[test]
    fn central_projections_partition_and_ignore_seed(seed in any::<u64>(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let tol = Tolerances::default();
        let (_, alg) = block_algebra(8, seed);
        let n = alg.n();
        let a = minimal_central_projections(&alg, &tol, s1).unwrap();
        let b = minimal_central_projections(&alg, &tol, s2).unwrap();
        let mut sum = ComplexMatrix::zeros(n);
        for (i, p) in a.iter().enumerate() {
            sum = &sum + p.as_matrix();
            for q in &a[i + 1..] {
                prop_assert!((p.as_matrix() * q.as_matrix()).max_abs() < 1e-9);
            }
        }
        prop_assert!((&sum - &ComplexMatrix::identity(n)).max_abs() < 1e-9);
        prop_assert_eq!(a.len(), b.len());
        for p in &a {
            prop_assert!(b.iter().any(|q| (p.as_matrix() - q.as_matrix()).max_abs() < 1e-6));
        }
    }

    #[test]
    fn separating_means_cyclic_for_commutant(seed in any::<u64>(), basis_vector in any::<bool>()) {
        let tol = Tolerances::default();
        let (_, alg) = block_algebra(6, seed);
        let n = alg.n();
        let xi = if basis_vector {
            ComplexVector::basis(n, (seed as usize) % n)
        } else {
            let g = gaussian(n, &mut rng(seed ^ 1));
            ComplexVector::new((0..n).map(|i| g.get(i, 0)).collect()).unwrap()
        };
        let report = vector_report(&alg, &xi, &tol).unwrap();
        let comm = alg.commutant(&tol).unwrap();
        let dual = vector_report(&comm, &xi, &tol).unwrap();
        prop_assert_eq!(report.is_separating, dual.is_cyclic);
        prop_assert_eq!(report.is_cyclic, dual.is_separating);
    }

    #[test]
    fn abelian_algebras_are_atomic(n in 1usize..8, seed in any::<u64>()) {
        let tol = Tolerances::default();
        let t = normal_matrix(n, &mut rng(seed));
        let alg = generate_algebra(n, &[t], &tol).unwrap();
        let p = atomic_support(&alg, &tol, seed).unwrap();
        prop_assert!((p.as_matrix() - &ComplexMatrix::identity(n)).max_abs() < 1e-9);
    }

    #[test]
    fn irreducibility_routes_agree(n in 1usize..6, reducible in any::<bool>(), seed in any::<u64>()) {
        let tol = Tolerances::default();
        let mut r = rng(seed);
        let t = if reducible { block_reducible(n, &mut r) } else { gaussian(n, &mut r) };
        let cert = is_irreducible(&t, &tol).unwrap();
        let alg = generate_algebra(n, std::slice::from_ref(&t), &tol).unwrap();
        let dec = wedderburn_decompose(&alg, &tol, seed).unwrap();
        let comm_dim = commutant(std::slice::from_ref(&t), &tol).unwrap().dim();
        prop_assert_eq!(cert.irreducible, dec.blocks == vec![(n, 1)]);
        prop_assert_eq!(cert.irreducible, comm_dim == 1);
        prop_assert_eq!(cert.commutant_dim, comm_dim);
    }
}

#[test]
fn diagonal_with_repeats_decomposes_by_multiplicity() {
    let tol = Tolerances::default();
    let d = ComplexMatrix::from_real_diagonal(&[2.0, 1.0, 2.0, 3.0, 1.0, 2.0]).unwrap();
    let alg = generate_algebra(6, &[d], &tol).unwrap();
    let dec = wedderburn_decompose(&alg, &tol, 1).unwrap();
    assert_eq!(sorted(dec.blocks), vec![(1, 1), (1, 2), (1, 3)]);
    assert_eq!(alg.commutant(&tol).unwrap().dim(), 1 + 4 + 9);
}
