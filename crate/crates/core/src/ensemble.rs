//! Seeded random matrix ensembles for tests, benchmarks and fuzzing.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::matrix::{ComplexMatrix, HermitianMatrix, C64};

/// The generator behind every ensemble; one seed, one stream.
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut SeededRng) -> f64 {
    StandardNormal.sample(rng)
}

fn complex_normal(rng: &mut SeededRng) -> C64 {
    C64::new(normal(rng), normal(rng)) / std::f64::consts::SQRT_2
}

/// Ginibre matrix: i.i.d. standard complex Gaussian entries.
pub fn gaussian(n: usize, rng: &mut SeededRng) -> ComplexMatrix {
    ComplexMatrix::from_inner(DMatrix::from_fn(n, n, |_, _| complex_normal(rng)))
}

/// GUE-like Hermitian matrix.
pub fn hermitian(n: usize, rng: &mut SeededRng) -> HermitianMatrix {
    gaussian(n, rng).real_part()
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phases of
/// `diag R` removed).
pub fn unitary(n: usize, rng: &mut SeededRng) -> ComplexMatrix {
    let g = gaussian(n, rng).into_inner();
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    ComplexMatrix::from_inner(q)
}

/// `U diag(λ) U*` with complex Gaussian eigenvalues.
pub fn normal_matrix(n: usize, rng: &mut SeededRng) -> ComplexMatrix {
    let lambdas: Vec<C64> = (0..n).map(|_| complex_normal(rng)).collect();
    let u = unitary(n, rng);
    let d = ComplexMatrix::from_inner(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
        lambdas,
    )));
    d.conjugate_by(&u.adjoint())
}

/// A reducible matrix `U (X ⊕ Y) U*` with a random split point (`n ≥ 2`),
/// or a Ginibre matrix for `n = 1`.
pub fn block_reducible(n: usize, rng: &mut SeededRng) -> ComplexMatrix {
    if n < 2 {
        return gaussian(n, rng);
    }
    let split = rng.random_range(1..n);
    let x = gaussian(split, rng);
    let y = gaussian(n - split, rng);
    let mut m = DMatrix::<C64>::zeros(n, n);
    m.view_mut((0, 0), (split, split)).copy_from(x.inner());
    m.view_mut((split, split), (n - split, n - split))
        .copy_from(y.inner());
    let u = unitary(n, rng);
    ComplexMatrix::from_inner(m).conjugate_by(&u.adjoint())
}

/// A random element of `U (⊕ᵢ M_{nᵢ} ⊗ I_{mᵢ}) U*`.
pub fn block_algebra_element(
    blocks: &[(usize, usize)],
    u: &ComplexMatrix,
    rng: &mut SeededRng,
) -> ComplexMatrix {
    let n: usize = blocks.iter().map(|(s, m)| s * m).sum();
    let mut out = DMatrix::<C64>::zeros(n, n);
    let mut off = 0;
    for &(size, mult) in blocks {
        let x = gaussian(size, rng);
        for i in 0..size * mult {
            for j in 0..size * mult {
                if i % mult == j % mult {
                    out[(off + i, off + j)] = x.get(i / mult, j / mult);
                }
            }
        }
        off += size * mult;
    }
    ComplexMatrix::from_inner(out).conjugate_by(&u.adjoint())
}

/// Random block pattern `(nᵢ, mᵢ)` with `Σ nᵢ mᵢ ≤ max_dim` and at least one
/// block.
pub fn random_block_pattern(max_dim: usize, rng: &mut SeededRng) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut used = 0;
    loop {
        let room = max_dim - used;
        if room == 0 {
            break;
        }
        let size = rng.random_range(1..=room.min(4));
        let mult = rng.random_range(1..=(room / size).min(3));
        blocks.push((size, mult));
        used += size * mult;
        if rng.random_bool(0.4) {
            break;
        }
    }
    blocks
}

/// Ensembles exposed to the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ensemble {
    Generic,
    Normal,
    Block,
}

impl Ensemble {
    pub fn sample(self, n: usize, rng: &mut SeededRng) -> ComplexMatrix {
        match self {
            Ensemble::Generic => gaussian(n, rng),
            Ensemble::Normal => normal_matrix(n, rng),
            Ensemble::Block => block_reducible(n, rng),
        }
    }
}
