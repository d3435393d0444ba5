//! Finite-dimensional von Neumann algebras as HS-orthonormal bases of
//! unital *-subalgebras of `Mₙ(ℂ)`.
//!
//! Membership and intersection reduce to least-squares residuals against
//! the stored basis. Commutants are nullspaces of the commutation map,
//! solved in Hermitian coordinates: a commutant of a *-closed set is itself
//! *-closed, so it is spanned by Hermitian matrices and the real-linear
//! system on `Herm(n) ≅ ℝ^{n²}` has exactly the singular values of the
//! complex one.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{
    cluster_sorted, hermitian_eig, singular_values_of, ComplexMatrix, ComplexVector,
    HermitianMatrix, Projection, Tolerances, C64,
};

const SVD_MAX_ITER: usize = 10_000;
const CENTRAL_RETRIES: usize = 32;
const CYCLIC_RETRIES: usize = 64;
const PROBE_RETRIES: u64 = 3;
/// Principal-angle threshold for subspace intersection: `cos θ > 1 − 1e-8`.
const INTERSECTION_COS: f64 = 1.0 - 1e-8;

/// A unital *-subalgebra of `Mₙ(ℂ)` given by an HS-orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StarAlgebra {
    n: usize,
    basis: Vec<ComplexMatrix>,
}

/// Witness for the irreducibility predicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IrreducibilityCertificate {
    pub irreducible: bool,
    pub commutant_dim: usize,
    /// Smallest singular value of the commutation system above the cutoff;
    /// `None` when every singular value is below it.
    pub margin: Option<f64>,
    pub cutoff: f64,
}

/// Unitary `U` and blocks `(nᵢ, mᵢ)` with `U* 𝒜 U = ⊕ᵢ M_{nᵢ} ⊗ I_{mᵢ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockDecomposition {
    pub unitary: ComplexMatrix,
    pub blocks: Vec<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VectorReport {
    pub is_cyclic: bool,
    pub is_separating: bool,
    /// `dim 𝒜ξ`.
    pub algebra_orbit_rank: usize,
    /// `dim 𝒜′ξ`.
    pub commutant_orbit_rank: usize,
}

/// Incrementally built HS-orthonormal family of `n×n` matrices, stored as
/// column-major vectors of length `n²`.
#[derive(Clone, Debug)]
struct OrthoFamily {
    n: usize,
    vecs: Vec<DVector<C64>>,
}

impl OrthoFamily {
    fn new(n: usize) -> Self {
        Self {
            n,
            vecs: Vec::new(),
        }
    }

    fn len(&self) -> usize {
        self.vecs.len()
    }

    fn residual(&self, v: &DVector<C64>) -> DVector<C64> {
        let mut r = v.clone();
        // Two passes of classical Gram–Schmidt.
        for _ in 0..2 {
            for q in &self.vecs {
                let c = q.dotc(&r);
                r.axpy(-c, q, C64::new(1.0, 0.0));
            }
        }
        r
    }

    /// Appends the normalized residual of `m` when its norm exceeds `cutoff`.
    fn try_push(&mut self, m: &DMatrix<C64>, cutoff: f64) -> Option<usize> {
        let v = DVector::from_column_slice(m.as_slice());
        let r = self.residual(&v);
        let norm = r.norm();
        if norm > cutoff && norm > 0.0 {
            self.vecs.push(r / C64::new(norm, 0.0));
            Some(self.vecs.len() - 1)
        } else {
            None
        }
    }

    fn matrix(&self, k: usize) -> DMatrix<C64> {
        DMatrix::from_column_slice(self.n, self.n, self.vecs[k].as_slice())
    }

    fn into_algebra(self) -> StarAlgebra {
        let n = self.n;
        let basis = (0..self.len())
            .map(|k| ComplexMatrix::from_inner(self.matrix(k)))
            .collect();
        StarAlgebra { n, basis }
    }
}

impl StarAlgebra {
    /// Builds an algebra from a spanning family (re-orthonormalized) and
    /// checks unitality and closure.
    pub fn from_spanning(n: usize, family: &[ComplexMatrix], tol: &Tolerances) -> Result<Self> {
        let mut fam = OrthoFamily::new(n);
        for m in family {
            if m.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: m.dim(),
                });
            }
            fam.try_push(m.inner(), tol.nullspace * m.frobenius_norm().max(1.0));
        }
        let alg = fam.into_algebra();
        alg.validate(tol)?;
        if alg.membership_residual(&ComplexMatrix::identity(n)) > tol.nullspace * (n as f64).sqrt()
        {
            return Err(Error::Inconsistent(
                "algebra does not contain the identity".into(),
            ));
        }
        Ok(alg)
    }

    pub fn scalars(n: usize) -> Self {
        let s = 1.0 / (n as f64).sqrt();
        Self {
            n,
            basis: vec![ComplexMatrix::identity(n).scale_real(s)],
        }
    }

    pub fn full(n: usize) -> Self {
        let basis = (0..n)
            .flat_map(|j| (0..n).map(move |i| (i, j)))
            .map(|(i, j)| matrix_unit(n, i, j))
            .collect();
        Self { n, basis }
    }

    /// The algebra of diagonal matrices, the standard masa.
    pub fn diagonal(n: usize) -> Self {
        Self {
            n,
            basis: (0..n).map(|i| matrix_unit(n, i, i)).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    fn coefficients(&self, m: &ComplexMatrix) -> Vec<C64> {
        self.basis.iter().map(|b| m.hs_inner(b)).collect()
    }

    /// Orthogonal projection of `m` onto the span of the basis.
    pub fn project(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = DMatrix::<C64>::zeros(self.n, self.n);
        for (c, b) in self.coefficients(m).into_iter().zip(&self.basis) {
            out += b.inner() * c;
        }
        ComplexMatrix::from_inner(out)
    }

    /// `‖m − proj(m)‖_F`.
    pub fn membership_residual(&self, m: &ComplexMatrix) -> f64 {
        (m - &self.project(m)).frobenius_norm()
    }

    pub fn contains(&self, m: &ComplexMatrix, tol: &Tolerances) -> bool {
        self.membership_residual(m) <= tol.nullspace * m.frobenius_norm().max(1.0)
    }

    /// Largest `‖[Bᵢ, Bⱼ]‖_F` over basis pairs.
    pub fn max_commutator(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, a) in self.basis.iter().enumerate() {
            for b in &self.basis[i + 1..] {
                worst = worst.max(a.commutator(b).frobenius_norm());
            }
        }
        worst
    }

    pub fn is_abelian(&self, tol: &Tolerances) -> bool {
        self.max_commutator() <= tol.nullspace
    }

    /// Checks orthonormality, adjoint closure and multiplicative closure.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        if self.basis.is_empty() || self.dim() > self.n * self.n {
            return Err(Error::Inconsistent(format!(
                "dimension {} out of range",
                self.dim()
            )));
        }
        for (i, a) in self.basis.iter().enumerate() {
            for (j, b) in self.basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                let dev = (a.hs_inner(b) - C64::new(want, 0.0)).norm();
                if dev > tol.ortho_for(1.0) {
                    return Err(Error::Inconsistent(format!(
                        "basis not orthonormal ({dev:e})"
                    )));
                }
            }
        }
        for a in &self.basis {
            let r = self.membership_residual(&a.adjoint());
            if r > tol.nullspace {
                return Err(Error::Inconsistent(format!("not adjoint-closed ({r:e})")));
            }
            for b in &self.basis {
                let p = a * b;
                let r = self.membership_residual(&p);
                if r > tol.nullspace * p.frobenius_norm().max(1.0) {
                    return Err(Error::Inconsistent(format!(
                        "not multiplication-closed ({r:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Commutant `𝒜′`.
    ///
    /// Uses the two Hermitian parts of a random element of the algebra as
    /// generators (a generic element generates `𝒜`), verifies the result
    /// against the whole basis and falls back to the full basis otherwise.
    pub fn commutant(&self, tol: &Tolerances) -> Result<StarAlgebra> {
        if self.dim() <= 2 {
            return commutant(&self.basis, tol);
        }
        let check = tol.nullspace * 100.0;
        for attempt in 0..PROBE_RETRIES {
            let mut rng = ChaCha8Rng::seed_from_u64(0x636f_6d6d ^ attempt);
            let probe = self.random_element(&mut rng, true);
            let candidate = commutant(&[probe], tol)?;
            let ok = candidate.basis.iter().all(|x| {
                self.basis
                    .iter()
                    .all(|b| x.commutator(b).frobenius_norm() <= check)
            });
            if ok {
                return Ok(candidate);
            }
        }
        commutant(&self.basis, tol)
    }

    fn random_element(&self, rng: &mut ChaCha8Rng, complex: bool) -> ComplexMatrix {
        let mut out = DMatrix::<C64>::zeros(self.n, self.n);
        for b in &self.basis {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = if complex {
                StandardNormal.sample(rng)
            } else {
                0.0
            };
            out += b.inner() * C64::new(re, im);
        }
        ComplexMatrix::from_inner(out)
    }

    fn random_hermitian_element(&self, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        self.random_element(rng, false).real_part()
    }
}

fn matrix_unit(n: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = DMatrix::<C64>::zeros(n, n);
    m[(i, j)] = C64::new(1.0, 0.0);
    ComplexMatrix::from_inner(m)
}

/// The unital *-algebra generated by `generators`, i.e. the span of all
/// words in the generators and their adjoints.
///
/// Each accepted (orthonormalized) element is multiplied by every generator
/// and adjoint; the span is closed once no product leaves it. This is the
/// Arnoldi process on the left-regular action, which keeps the basis well
/// conditioned even when the generators have clustered spectra.
pub fn generate_algebra(
    n: usize,
    generators: &[ComplexMatrix],
    tol: &Tolerances,
) -> Result<StarAlgebra> {
    let mut letters: Vec<(DMatrix<C64>, f64)> = Vec::new();
    for g in generators {
        if g.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: g.dim(),
            });
        }
        let norm = g.frobenius_norm();
        if norm == 0.0 {
            continue;
        }
        letters.push((g.inner().clone(), norm));
        let adj = g.adjoint();
        if (&adj - g).max_abs() > 0.0 {
            letters.push((adj.into_inner(), norm));
        }
    }

    let mut fam = OrthoFamily::new(n);
    fam.try_push(&DMatrix::identity(n, n), 0.0);
    let mut next = 0;
    while next < fam.len() && fam.len() < n * n {
        let b = fam.matrix(next);
        next += 1;
        for (g, norm) in &letters {
            let product = g * &b;
            fam.try_push(&product, tol.nullspace * norm);
            if fam.len() == n * n {
                break;
            }
        }
    }
    Ok(fam.into_algebra())
}

/// Hermitian coordinates: diagonal entries, then `√2·Re`, `√2·Im` of each
/// strictly upper entry. Orthonormal for the real HS inner product.
fn hermitian_coords(y: &DMatrix<C64>, out: &mut [f64]) {
    let n = y.nrows();
    for j in 0..n {
        out[j] = y[(j, j)].re;
    }
    let mut idx = n;
    for j in 0..n {
        for k in j + 1..n {
            let z = y[(j, k)];
            out[idx] = SQRT_2 * z.re;
            out[idx + 1] = SQRT_2 * z.im;
            idx += 2;
        }
    }
}

fn hermitian_from_coords(n: usize, c: &[f64]) -> DMatrix<C64> {
    let mut y = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        y[(j, j)] = C64::new(c[j], 0.0);
    }
    let mut idx = n;
    for j in 0..n {
        for k in j + 1..n {
            let z = C64::new(c[idx], c[idx + 1]) / SQRT_2;
            y[(j, k)] = z;
            y[(k, j)] = z.conj();
            idx += 2;
        }
    }
    y
}

/// Sparse entries `(row, col, value)` of the `idx`-th Hermitian basis element.
fn hermitian_basis_entries(n: usize, idx: usize) -> Vec<(usize, usize, C64)> {
    if idx < n {
        return vec![(idx, idx, C64::new(1.0, 0.0))];
    }
    let mut rest = idx - n;
    for j in 0..n {
        let span = 2 * (n - j - 1);
        if rest < span {
            let k = j + 1 + rest / 2;
            let s = 1.0 / SQRT_2;
            return if rest.is_multiple_of(2) {
                vec![(j, k, C64::new(s, 0.0)), (k, j, C64::new(s, 0.0))]
            } else {
                vec![(j, k, C64::new(0.0, s)), (k, j, C64::new(0.0, -s))]
            };
        }
        rest -= span;
    }
    unreachable!("hermitian basis index out of range")
}

/// Real matrix of `X ↦ (i[H₁,X], …, i[H_k,X])` on `Herm(n)`.
fn commutation_system(n: usize, hermitians: &[DMatrix<C64>]) -> DMatrix<f64> {
    let d = n * n;
    let mut sys = DMatrix::<f64>::zeros(d * hermitians.len(), d);
    let mut work = DMatrix::<C64>::zeros(n, n);
    let mut coords = vec![0.0; d];
    let i_unit = C64::new(0.0, 1.0);
    for col in 0..d {
        let entries = hermitian_basis_entries(n, col);
        for (h_idx, h) in hermitians.iter().enumerate() {
            work.fill(C64::new(0.0, 0.0));
            for &(r, c, v) in &entries {
                // H·E: column c gains H[:, r]·v; E·H: row r loses v·H[c, :].
                let iv = i_unit * v;
                for x in 0..n {
                    work[(x, c)] += h[(x, r)] * iv;
                    work[(r, x)] -= h[(c, x)] * iv;
                }
            }
            hermitian_coords(&work, &mut coords);
            let mut column = sys.column_mut(col);
            for (k, &val) in coords.iter().enumerate() {
                column[h_idx * d + k] = val;
            }
        }
    }
    sys
}

/// Traceless Hermitian parts of the generators, and the largest entry of
/// the untouched parts (the scale against which the system is judged).
fn hermitian_parts(generators: &[ComplexMatrix]) -> (Vec<DMatrix<C64>>, f64) {
    let mut out = Vec::with_capacity(2 * generators.len());
    let mut scale = 0.0_f64;
    for g in generators {
        for part in [g.real_part(), g.imag_part()] {
            scale = scale.max(part.as_matrix().max_abs());
            // The scalar component commutes with everything.
            let mut h = part.into_matrix().into_inner();
            let n = h.nrows();
            let mean = h.trace() / C64::new(n as f64, 0.0);
            for i in 0..n {
                h[(i, i)] -= mean;
            }
            if h.camax() > 0.0 {
                out.push(h);
            }
        }
    }
    (out, scale)
}

struct NullspaceSplit {
    null_dim: usize,
    margin: Option<f64>,
    cutoff: f64,
}

fn split_spectrum(sv: &[f64], unknowns: usize, scale: f64, tol: &Tolerances) -> NullspaceSplit {
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = tol.nullspace_cutoff(smax.max(scale));
    let above: Vec<f64> = sv.iter().copied().filter(|&s| s > cutoff).collect();
    NullspaceSplit {
        null_dim: unknowns - above.len(),
        margin: above.iter().copied().reduce(f64::min),
        cutoff,
    }
}

/// `{X : XG = GX and XG* = G*X for every generator G}`.
pub fn commutant(generators: &[ComplexMatrix], tol: &Tolerances) -> Result<StarAlgebra> {
    let n = match generators.first() {
        Some(g) => g.dim(),
        None => {
            return Err(Error::Precondition(
                "commutant needs at least one generator to fix n".into(),
            ))
        }
    };
    commutant_in(n, generators, tol)
}

/// Like [`commutant`], with the ambient dimension given explicitly so an
/// empty generator list yields the full matrix algebra.
pub fn commutant_in(
    n: usize,
    generators: &[ComplexMatrix],
    tol: &Tolerances,
) -> Result<StarAlgebra> {
    if let Some(g) = generators.iter().find(|g| g.dim() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: g.dim(),
        });
    }
    let (parts, scale) = hermitian_parts(generators);
    if parts.is_empty() {
        return Ok(StarAlgebra::full(n));
    }
    let d = n * n;
    let sys = commutation_system(n, &parts);
    if sys.amax() == 0.0 {
        return Ok(StarAlgebra::full(n));
    }
    let svd =
        SVD::try_new(sys, false, true, f64::EPSILON, SVD_MAX_ITER).ok_or(Error::Numerical {
            context: "commutant SVD",
            residual: f64::NAN,
        })?;
    if svd.singular_values.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical {
            context: "commutant SVD",
            residual: f64::NAN,
        });
    }
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = tol.nullspace_cutoff(smax.max(scale));
    let mut basis = Vec::new();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff {
            let coords: Vec<f64> = v_t.row(k).iter().copied().collect();
            basis.push(ComplexMatrix::from_inner(hermitian_from_coords(n, &coords)));
        }
    }
    debug_assert!(basis.len() <= d);
    if basis.is_empty() {
        return Err(Error::Numerical {
            context: "commutant lost the identity",
            residual: cutoff,
        });
    }
    Ok(StarAlgebra { n, basis })
}

/// Irreducibility of `T`: the commutant of `{T, T*}` is one-dimensional.
pub fn is_irreducible(t: &ComplexMatrix, tol: &Tolerances) -> Result<IrreducibilityCertificate> {
    let n = t.dim();
    let (parts, scale) = hermitian_parts(std::slice::from_ref(t));
    if parts.is_empty() {
        let dim = n * n;
        return Ok(IrreducibilityCertificate {
            irreducible: dim == 1,
            commutant_dim: dim,
            margin: None,
            cutoff: 0.0,
        });
    }
    let sys = commutation_system(n, &parts);
    if sys.amax() == 0.0 {
        let dim = n * n;
        return Ok(IrreducibilityCertificate {
            irreducible: dim == 1,
            commutant_dim: dim,
            margin: None,
            cutoff: 0.0,
        });
    }
    let svd =
        SVD::try_new(sys, false, false, f64::EPSILON, SVD_MAX_ITER).ok_or(Error::Numerical {
            context: "commutation SVD",
            residual: f64::NAN,
        })?;
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical {
            context: "commutation SVD",
            residual: f64::NAN,
        });
    }
    let split = split_spectrum(&sv, n * n, scale, tol);
    Ok(IrreducibilityCertificate {
        irreducible: split.null_dim == 1,
        commutant_dim: split.null_dim,
        margin: split.margin,
        cutoff: split.cutoff,
    })
}

/// `𝒜 ∩ 𝒜′`, via principal angles between the two spans.
pub fn center(a: &StarAlgebra, tol: &Tolerances) -> Result<StarAlgebra> {
    let comm = a.commutant(tol)?;
    // cross[j, i] = ⟨Aᵢ, Cⱼ⟩, so cross · α gives the commutant coordinates
    // of Σ αᵢ Aᵢ.
    let cross = DMatrix::from_fn(comm.dim(), a.dim(), |j, i| {
        a.basis[i].hs_inner(&comm.basis[j])
    });
    let svd =
        SVD::try_new(cross, false, true, f64::EPSILON, SVD_MAX_ITER).ok_or(Error::Numerical {
            context: "principal angles",
            residual: f64::NAN,
        })?;
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut fam = OrthoFamily::new(a.n);
    for (k, &cos) in svd.singular_values.iter().enumerate() {
        if cos > INTERSECTION_COS {
            let mut z = DMatrix::<C64>::zeros(a.n, a.n);
            for (i, b) in a.basis.iter().enumerate() {
                z += b.inner() * v_t[(k, i)].conj();
            }
            fam.try_push(&z, tol.nullspace);
        }
    }
    if fam.len() == 0 {
        return Err(Error::Numerical {
            context: "center lost the identity",
            residual: 0.0,
        });
    }
    Ok(fam.into_algebra())
}

fn canonical_order(projections: &mut [Projection]) {
    projections.sort_by(|p, q| {
        let n = p.dim();
        for i in 0..n {
            let (x, y) = (p.as_matrix().get(i, i).re, q.as_matrix().get(i, i).re);
            if (x - y).abs() > 1e-9 {
                return y.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Equal);
            }
        }
        std::cmp::Ordering::Equal
    });
}

/// Spectral projections of a random Hermitian element of an abelian algebra
/// `z`, retried until the number of eigenvalue clusters equals `dim z`.
fn atoms_of_abelian(z: &StarAlgebra, tol: &Tolerances, seed: u64) -> Result<Vec<Projection>> {
    let n = z.n;
    if z.dim() == 1 {
        return Ok(vec![Projection::identity(n)]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..CENTRAL_RETRIES {
        let h = z.random_hermitian_element(&mut rng);
        let eig = hermitian_eig(&h, tol)?;
        let clusters = eig.clusters(tol.cluster_for(h.as_matrix().max_abs()));
        if clusters.len() == z.dim() {
            let mut out: Vec<Projection> = clusters
                .into_iter()
                .map(|c| eig.projection_onto(c))
                .collect();
            canonical_order(&mut out);
            return Ok(out);
        }
    }
    Err(Error::RetryExhausted {
        what: "separating central element",
        attempts: CENTRAL_RETRIES,
    })
}

/// Minimal projections of the center; they are orthogonal and sum to `I`.
pub fn minimal_central_projections(
    a: &StarAlgebra,
    tol: &Tolerances,
    seed: u64,
) -> Result<Vec<Projection>> {
    let z = center(a, tol)?;
    atoms_of_abelian(&z, tol, seed)
}

/// Unitary block form `U* 𝒜 U = ⊕ᵢ M_{nᵢ} ⊗ I_{mᵢ}`.
pub fn wedderburn_decompose(
    a: &StarAlgebra,
    tol: &Tolerances,
    seed: u64,
) -> Result<BlockDecomposition> {
    let n = a.n;
    let central = minimal_central_projections(a, tol, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let mut columns: Vec<DVector<C64>> = Vec::with_capacity(n);
    let mut blocks = Vec::with_capacity(central.len());

    for z in &central {
        let mut fam = OrthoFamily::new(n);
        for b in &a.basis {
            fam.try_push(&(b.inner() * z.as_matrix().inner()), tol.nullspace);
        }
        let block_dim = fam.len();
        let size = (block_dim as f64).sqrt().round() as usize;
        if size * size != block_dim {
            return Err(Error::Inconsistent(format!(
                "central block of dimension {block_dim} is not a full matrix algebra"
            )));
        }
        let rank = z.rank();
        if size == 0 || rank % size != 0 {
            return Err(Error::Inconsistent(format!(
                "block size {size} does not divide rank {rank}"
            )));
        }
        let mult = rank / size;
        let block = fam.into_algebra();
        let range = z.range_basis(tol)?;
        let cols = block_columns(&block, &range, size, mult, tol, &mut rng)?;
        columns.extend(cols);
        blocks.push((size, mult));
    }
    if columns.len() != n {
        return Err(Error::Inconsistent(format!(
            "blocks cover {} of {} dimensions",
            columns.len(),
            n
        )));
    }
    let unitary = ComplexMatrix::from_inner(DMatrix::from_columns(&columns));
    let dec = BlockDecomposition { unitary, blocks };
    dec.check(a, tol)?;
    Ok(dec)
}

/// Columns `u_{k,s}` (matrix index `k`, multiplicity index `s`, ordered
/// `k·m + s`) adapted to a block `≅ M_size ⊗ I_mult` acting on `ran Z`.
fn block_columns(
    block: &StarAlgebra,
    range: &DMatrix<C64>,
    size: usize,
    mult: usize,
    tol: &Tolerances,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DVector<C64>>> {
    let n = block.n;
    for _ in 0..CENTRAL_RETRIES {
        // Minimal projections: spectral subspaces of a generic Hermitian
        // element, each of dimension `mult`.
        let h = block.random_hermitian_element(rng);
        let compressed = HermitianMatrix::symmetrized(ComplexMatrix::from_inner(
            range.adjoint() * h.as_matrix().inner() * range,
        ));
        let eig = hermitian_eig(&compressed, tol)?;
        let clusters = cluster_sorted(
            &eig.eigenvalues,
            tol.cluster_for(compressed.as_matrix().max_abs()),
        );
        if clusters.len() != size || clusters.iter().any(|c| c.len() != mult) {
            continue;
        }
        let spaces: Vec<DMatrix<C64>> = clusters
            .iter()
            .map(|c| range * eig.unitary.inner().columns(c.start, c.len()))
            .collect();

        // Partial isometries from the first subspace to the others:
        // E_k x E_1 is a multiple of one for any x in the block.
        let x = block.random_element(rng, true);
        let mut cols = Vec::with_capacity(size * mult);
        let mut ok = true;
        for (k, vk) in spaces.iter().enumerate() {
            let link = if k == 0 {
                DMatrix::<C64>::identity(mult, mult)
            } else {
                let y = vk.adjoint() * x.inner() * &spaces[0];
                let c = y.norm() / (mult as f64).sqrt();
                if c <= 1e-6 * x.frobenius_norm() {
                    ok = false;
                    break;
                }
                y / C64::new(c, 0.0)
            };
            let mapped = vk * link;
            for s in 0..mult {
                cols.push(mapped.column(s).into_owned());
            }
        }
        if ok {
            debug_assert_eq!(cols.len(), size * mult);
            debug_assert!(cols.iter().all(|c| c.len() == n));
            return Ok(cols);
        }
    }
    Err(Error::RetryExhausted {
        what: "matrix units for a Wedderburn block",
        attempts: CENTRAL_RETRIES,
    })
}

impl BlockDecomposition {
    /// Largest deviation of `U*BU` from the block/tensor pattern over the
    /// basis of `a`; errors if it exceeds `nullspace_tol` or the dimension
    /// count `Σ nᵢ²` disagrees.
    pub fn check(&self, a: &StarAlgebra, tol: &Tolerances) -> Result<f64> {
        let n = a.n;
        let total: usize = self.blocks.iter().map(|(s, m)| s * m).sum();
        if total != n || self.unitary.dim() != n {
            return Err(Error::Inconsistent(format!(
                "blocks cover {total} of {n} dimensions"
            )));
        }
        let dims: usize = self.blocks.iter().map(|(s, _)| s * s).sum();
        if dims != a.dim() {
            return Err(Error::Inconsistent(format!(
                "Σ nᵢ² = {dims} but dim 𝒜 = {}",
                a.dim()
            )));
        }
        let u = self.unitary.inner();
        let unitarity = (u.adjoint() * u - DMatrix::<C64>::identity(n, n))
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()));
        let mut worst = unitarity;
        for b in &a.basis {
            let y = b.conjugate_by(&self.unitary);
            worst = worst.max(tensor_pattern_deviation(y.inner(), &self.blocks));
        }
        if worst > tol.nullspace_cutoff(1.0).max(tol.ortho_for(1.0)) {
            return Err(Error::Inconsistent(format!(
                "block structure deviates by {worst:e}"
            )));
        }
        Ok(worst)
    }
}

fn tensor_pattern_deviation(y: &DMatrix<C64>, blocks: &[(usize, usize)]) -> f64 {
    let n = y.nrows();
    let mut owner = vec![0usize; n];
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut off = 0;
    for (bi, &(s, m)) in blocks.iter().enumerate() {
        offsets.push(off);
        owner[off..off + s * m].fill(bi);
        off += s * m;
    }
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let z = y[(i, j)];
            if owner[i] != owner[j] {
                worst = worst.max(z.norm());
                continue;
            }
            let b = owner[i];
            let (_, m) = blocks[b];
            let (li, lj) = (i - offsets[b], j - offsets[b]);
            let (ki, si) = (li / m, li % m);
            let (kj, sj) = (lj / m, lj % m);
            if si != sj {
                worst = worst.max(z.norm());
            } else {
                // Must equal the (ki, kj) entry of the first copy.
                let reference = y[(offsets[b] + ki * m, offsets[b] + kj * m)];
                worst = worst.max((z - reference).norm());
            }
        }
    }
    worst
}

/// Sum of the minimal projections of an abelian algebra.
pub fn atomic_support(a: &StarAlgebra, tol: &Tolerances, seed: u64) -> Result<Projection> {
    let worst = a.max_commutator();
    if worst > tol.nullspace {
        return Err(Error::NotAbelian(worst));
    }
    let atoms = atoms_of_abelian(a, tol, seed)?;
    let mut sum = ComplexMatrix::zeros(a.n);
    for p in &atoms {
        sum = &sum + p.as_matrix();
    }
    Projection::new(HermitianMatrix::symmetrized(sum), tol)
}

/// Smallest central projection `Z` of `a` with `ZP = P`.
pub fn central_support(
    p: &Projection,
    a: &StarAlgebra,
    tol: &Tolerances,
    seed: u64,
) -> Result<Projection> {
    let residual = a.membership_residual(p.as_matrix());
    if residual > tol.nullspace * p.as_matrix().frobenius_norm().max(1.0) {
        return Err(Error::NotInAlgebra(residual));
    }
    let n = a.n;
    if p.rank() == 0 {
        return Ok(Projection::zero(n));
    }
    let mut sum = ComplexMatrix::zeros(n);
    for z in minimal_central_projections(a, tol, seed)? {
        if (z.as_matrix() * p.as_matrix()).frobenius_norm()
            > tol.projection_for(1.0).max(tol.nullspace)
        {
            sum = &sum + z.as_matrix();
        }
    }
    Projection::new(HermitianMatrix::symmetrized(sum), tol)
}

fn orbit_rank(basis: &[ComplexMatrix], xi: &ComplexVector, tol: &Tolerances) -> Result<usize> {
    let n = xi.dim();
    let cols: Vec<DVector<C64>> = basis.iter().map(|b| b.inner() * xi.inner()).collect();
    let m = DMatrix::from_columns(&cols);
    let sv = singular_values_of(&m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let cutoff = tol.rank_cutoff(smax);
    Ok(sv.iter().filter(|&&s| s > cutoff).count().min(n))
}

/// Cyclicity of `ξ` for `𝒜` (and for `𝒜′`, i.e. separation for `𝒜`).
pub fn vector_report(
    a: &StarAlgebra,
    xi: &ComplexVector,
    tol: &Tolerances,
) -> Result<VectorReport> {
    if xi.dim() != a.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: xi.dim(),
        });
    }
    if xi.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let algebra_orbit_rank = orbit_rank(&a.basis, xi, tol)?;
    let comm = a.commutant(tol)?;
    let commutant_orbit_rank = orbit_rank(&comm.basis, xi, tol)?;
    Ok(VectorReport {
        is_cyclic: algebra_orbit_rank == a.n,
        is_separating: commutant_orbit_rank == a.n,
        algebra_orbit_rank,
        commutant_orbit_rank,
    })
}

fn is_cyclic(a: &StarAlgebra, xi: &ComplexVector, tol: &Tolerances) -> Result<bool> {
    Ok(xi.norm() > 0.0 && orbit_rank(&a.basis, xi, tol)? == a.n)
}

/// First Wedderburn block whose multiplicity exceeds its size; cyclic
/// vectors exist iff there is none.
pub fn cyclicity_obstruction(dec: &BlockDecomposition) -> Option<(usize, usize)> {
    dec.blocks.iter().copied().find(|&(size, mult)| mult > size)
}

/// A cyclic vector within `radius` of `target`, or `None` when the algebra
/// has no cyclic vector at all.
pub fn find_cyclic_vector(
    a: &StarAlgebra,
    target: &ComplexVector,
    radius: f64,
    tol: &Tolerances,
    seed: u64,
) -> Result<Option<ComplexVector>> {
    if target.dim() != a.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: target.dim(),
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Precondition(format!(
            "radius must be positive (got {radius})"
        )));
    }
    let dec = wedderburn_decompose(a, tol, seed)?;
    if cyclicity_obstruction(&dec).is_some() {
        return Ok(None);
    }
    if is_cyclic(a, target, tol)? {
        return Ok(Some(target.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6379_636c_6963);
    for _ in 0..CYCLIC_RETRIES {
        let dir: Vec<C64> = (0..a.n)
            .map(|_| {
                C64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect();
        let dir = ComplexVector::new(dir)?.normalized()?;
        let candidate = target.add(&dir.scale(C64::new(0.5 * radius, 0.0)));
        if is_cyclic(a, &candidate, tol)? {
            return Ok(Some(candidate));
        }
    }
    Err(Error::RetryExhausted {
        what: "cyclic vector search",
        attempts: CYCLIC_RETRIES,
    })
}

/// Maximal abelian: abelian and equal to its own commutant.
pub fn is_masa(a: &StarAlgebra, tol: &Tolerances) -> Result<bool> {
    if !a.is_abelian(tol) {
        return Ok(false);
    }
    Ok(a.commutant(tol)?.dim() == a.dim())
}
