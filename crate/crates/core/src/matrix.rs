//! Dense complex matrices, Hermitian spectral calculus and Schatten norms.

use std::ops::{Add, Mul, Neg, Range, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
pub use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const SVD_MAX_ITER: usize = 10_000;
const EIG_MAX_ITER: usize = 10_000;

/// Numerical thresholds threaded through every operation.
///
/// All fields are *relative* factors. The absolute threshold is obtained by
/// multiplying with `max(1, ‖input‖)` (for `hermitian`, `projection`,
/// `ortho`, `recon`, `cluster`) or with the largest singular value of the
/// linear system at hand (for `nullspace` and `rank`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub hermitian: f64,
    pub projection: f64,
    pub ortho: f64,
    pub recon: f64,
    pub cluster: f64,
    pub nullspace: f64,
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-9,
            projection: 1e-9,
            ortho: 1e-9,
            recon: 1e-9,
            cluster: 1e-8,
            nullspace: 1e-8,
            rank: 1e-8,
        }
    }
}

impl Tolerances {
    /// Multiplies every threshold by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let t = Self {
            hermitian: self.hermitian * factor,
            projection: self.projection * factor,
            ortho: self.ortho * factor,
            recon: self.recon * factor,
            cluster: self.cluster * factor,
            nullspace: self.nullspace * factor,
            rank: self.rank * factor,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.hermitian,
            self.projection,
            self.ortho,
            self.recon,
            self.cluster,
            self.nullspace,
            self.rank,
        ];
        if all.iter().all(|t| t.is_finite() && *t > 0.0) {
            Ok(())
        } else {
            Err(Error::Precondition(
                "tolerances must be positive and finite".into(),
            ))
        }
    }

    pub fn hermitian_for(&self, scale: f64) -> f64 {
        self.hermitian * scale.max(1.0)
    }

    pub fn projection_for(&self, scale: f64) -> f64 {
        self.projection * scale.max(1.0)
    }

    pub fn ortho_for(&self, scale: f64) -> f64 {
        self.ortho * scale.max(1.0)
    }

    pub fn recon_for(&self, scale: f64) -> f64 {
        self.recon * scale.max(1.0)
    }

    pub fn cluster_for(&self, scale: f64) -> f64 {
        self.cluster * scale.max(1.0)
    }

    pub fn nullspace_cutoff(&self, sigma_max: f64) -> f64 {
        self.nullspace * sigma_max
    }

    pub fn rank_cutoff(&self, sigma_max: f64) -> f64 {
        self.rank * sigma_max
    }
}

/// A dense `n×n` complex matrix with finite entries and `n ≥ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::BadShape {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by arithmetic on already validated inputs.
    pub(crate) fn from_inner(m: DMatrix<C64>) -> Self {
        debug_assert!(m.nrows() == m.ncols() && m.nrows() > 0);
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "dimension must be positive");
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "dimension must be positive");
        Self(DMatrix::identity(n, n))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    /// Builds a matrix from row-major real and (optional) imaginary parts.
    pub fn from_rows(re: &[Vec<f64>], im: Option<&[Vec<f64>]>) -> Result<Self> {
        let n = re.len();
        if re.iter().any(|r| r.len() != n) {
            return Err(Error::BadShape {
                rows: n,
                cols: re.first().map_or(0, Vec::len),
            });
        }
        if let Some(im) = im {
            if im.len() != n || im.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: im.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            C64::new(re[i][j], im.map_or(0.0, |im| im[i][j]))
        }))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_diagonal(d: &[C64]) -> Result<Self> {
        let n = d.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                d[i]
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    #[inline]
    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hilbert–Schmidt inner product `⟨self, other⟩ = trace(other* · self)`.
    pub fn hs_inner(&self, other: &Self) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(x, y)| y.conj() * x)
            .sum()
    }

    /// `self · other − other · self`.
    pub fn commutator(&self, other: &Self) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// `u* · self · u`.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        Self(u.0.adjoint() * &self.0 * &u.0)
    }

    /// Real part `(M + M*)/2`.
    pub fn real_part(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.clone())
    }

    /// Imaginary part `(M − M*)/(2i)`.
    pub fn imag_part(&self) -> HermitianMatrix {
        let m = (&self.0 - self.0.adjoint()) * C64::new(0.0, -0.5);
        HermitianMatrix::symmetrized(Self(m))
    }

    /// `A + iB`.
    pub fn from_parts(a: &HermitianMatrix, b: &HermitianMatrix) -> Self {
        Self(&a.as_matrix().0 + &b.as_matrix().0 * C64::new(0.0, 1.0))
    }

    pub fn apply(&self, v: &ComplexVector) -> Result<ComplexVector> {
        check_dim(self.dim(), v.dim())?;
        Ok(ComplexVector(&self.0 * &v.0))
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        singular_values_of(&self.0)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.0[(i, j)].norm() <= tol))
    }

    /// Column-major entries.
    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

/// A complex column vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector(DVector<C64>);

impl ComplexVector {
    pub fn new(entries: Vec<C64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::BadShape { rows: 0, cols: 1 });
        }
        if let Some(k) = entries
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::NonFinite { row: k, col: 0 });
        }
        Ok(Self(DVector::from_vec(entries)))
    }

    pub(crate) fn from_inner(v: DVector<C64>) -> Self {
        Self(v)
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// The `k`-th standard basis vector of `ℂⁿ`.
    pub fn basis(n: usize, k: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[k] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn inner(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn get(&self, k: usize) -> C64 {
        self.0[k]
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Self(self.0.map(|z| z / n)))
    }

    /// `⟨self, other⟩ = Σ selfᵢ · conj(otherᵢ)`.
    pub fn dot(&self, other: &Self) -> C64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(x, y)| x * y.conj())
            .sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }
}

/// A Hermitian matrix, stored symmetrized.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    inner: ComplexMatrix,
}

impl HermitianMatrix {
    /// Accepts `m` if `‖m − m*‖_∞ ≤ hermitian_tol` and stores `(m + m*)/2`.
    pub fn new(m: ComplexMatrix, tol: &Tolerances) -> Result<Self> {
        let deviation = (&m - &m.adjoint()).max_abs();
        let allowed = tol.hermitian_for(m.max_abs());
        if deviation > allowed {
            return Err(Error::NotHermitian {
                deviation,
                tol: allowed,
            });
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: ComplexMatrix) -> Self {
        let s = (&m.0 + m.0.adjoint()) * C64::new(0.5, 0.0);
        Self {
            inner: ComplexMatrix(s),
        }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Result<Self> {
        Ok(Self {
            inner: ComplexMatrix::from_real_diagonal(d)?,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: ComplexMatrix::zeros(n),
        }
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.inner
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Real diagonal entries.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.inner.get(i, i).re).collect()
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::symmetrized(&self.inner + &other.inner)
    }

    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::symmetrized(self.inner.conjugate_by(u))
    }
}

/// An orthogonal projection `P = P² = P*` together with its rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    inner: HermitianMatrix,
    rank: usize,
}

impl Projection {
    pub fn new(h: HermitianMatrix, tol: &Tolerances) -> Result<Self> {
        let p = h.as_matrix();
        let deviation = (&(p * p) - p).max_abs();
        let allowed = tol.projection_for(1.0);
        if deviation > allowed {
            return Err(Error::NotProjection {
                deviation,
                tol: allowed,
            });
        }
        let tr = p.trace().re;
        let rank = tr.round();
        if (tr - rank).abs() > tol.projection_for(p.dim() as f64).max(1e-6) {
            return Err(Error::NotProjection {
                deviation: (tr - rank).abs(),
                tol: allowed,
            });
        }
        Ok(Self {
            inner: h,
            rank: rank.max(0.0) as usize,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            inner: HermitianMatrix::zeros(n),
            rank: 0,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: HermitianMatrix {
                inner: ComplexMatrix::identity(n),
            },
            rank: n,
        }
    }

    /// `W · W*` for a matrix `W` with orthonormal columns.
    pub(crate) fn from_orthonormal_columns(n: usize, w: &DMatrix<C64>) -> Self {
        if w.ncols() == 0 {
            return Self::zero(n);
        }
        let p = w * w.adjoint();
        Self {
            inner: HermitianMatrix::symmetrized(ComplexMatrix(p)),
            rank: w.ncols(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.inner
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        self.inner.as_matrix()
    }

    pub fn complement(&self) -> Self {
        let n = self.dim();
        let m = &ComplexMatrix::identity(n) - self.as_matrix();
        Self {
            inner: HermitianMatrix::symmetrized(m),
            rank: n - self.rank,
        }
    }

    /// Orthonormal basis of the range, as the columns of an `n × rank`
    /// matrix: eigenvectors of `P` for the eigenvalue 1, in the order of the
    /// eigendecomposition (ascending eigenvalue, ties by index).
    pub fn range_basis(&self, tol: &Tolerances) -> Result<DMatrix<C64>> {
        let n = self.dim();
        if self.rank == 0 {
            return Ok(DMatrix::zeros(n, 0));
        }
        let eig = hermitian_eig(&self.inner, tol)?;
        Ok(eig
            .unitary
            .inner()
            .columns(n - self.rank, self.rank)
            .into_owned())
    }
}

/// Spectral decomposition of a Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is a unit eigenvector for `eigenvalues[k]`.
    pub unitary: ComplexMatrix,
}

impl EigenDecomposition {
    /// Transitive clusters of eigenvalues at distance `tol`.
    pub fn clusters(&self, tol: f64) -> Vec<Range<usize>> {
        cluster_sorted(&self.eigenvalues, tol)
    }

    /// Sum of `u_k u_k*` over the given column indices.
    pub fn projection_onto(&self, cols: Range<usize>) -> Projection {
        let n = self.unitary.dim();
        let w = self
            .unitary
            .inner()
            .columns(cols.start, cols.len())
            .into_owned();
        Projection::from_orthonormal_columns(n, &w)
    }
}

/// Splits an ascending sequence into maximal runs whose consecutive gaps are
/// at most `tol`.
pub fn cluster_sorted(values: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] > tol {
            if i > start {
                out.push(start..i);
            }
            start = i;
        }
    }
    out
}

/// The rank-one operator `e ⊗̂ f : h ↦ ⟨h, f⟩ e`, i.e. the matrix `e f*`.
pub fn rank_one(e: &ComplexVector, f: &ComplexVector) -> Result<ComplexMatrix> {
    check_dim(e.dim(), f.dim())?;
    Ok(ComplexMatrix(&e.0 * f.0.adjoint()))
}

/// Schatten `p`-norm `(Σ σⱼᵖ)^{1/p}`; `p = ∞` gives the largest singular value.
pub fn schatten_norm(m: &ComplexMatrix, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let sv = m.singular_values()?;
    if p.is_infinite() {
        return Ok(sv.first().copied().unwrap_or(0.0));
    }
    if p == 1.0 {
        return Ok(sv.iter().sum());
    }
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0.0);
    }
    // Scale by σ_max to avoid overflow for large p.
    Ok(smax
        * sv.iter()
            .map(|s| (s / smax).powf(p))
            .sum::<f64>()
            .powf(1.0 / p))
}

/// Eigendecomposition with ascending eigenvalues. Each eigenvector's
/// largest-modulus entry is made real and positive so the output is
/// reproducible.
pub fn hermitian_eig(a: &HermitianMatrix, tol: &Tolerances) -> Result<EigenDecomposition> {
    let m = a.as_matrix();
    let n = m.dim();
    let eig = SymmetricEigen::try_new(m.0.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or(
        Error::Numerical {
            context: "hermitian eigendecomposition",
            residual: f64::NAN,
        },
    )?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut u = DMatrix::<C64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, z)| {
                if z.norm() > best.1 + 1e-12 {
                    (i, z.norm())
                } else {
                    best
                }
            })
            .0;
        let phase = col[pivot].conj() / col[pivot].norm().max(f64::MIN_POSITIVE);
        for i in 0..n {
            u[(i, dst)] = col[i] * phase;
        }
    }

    let ortho = (u.adjoint() * &u - DMatrix::<C64>::identity(n, n))
        .iter()
        .fold(0.0_f64, |a, z| a.max(z.norm()));
    if ortho > tol.ortho_for(1.0) {
        return Err(Error::Numerical {
            context: "eigenvector orthonormality",
            residual: ortho,
        });
    }
    let d = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(eigenvalues[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let recon = (&m.0 * &u - &u * d)
        .iter()
        .fold(0.0_f64, |a, z| a.max(z.norm()));
    if recon > tol.recon_for(m.max_abs()) {
        return Err(Error::Numerical {
            context: "eigen reconstruction",
            residual: recon,
        });
    }
    Ok(EigenDecomposition {
        eigenvalues,
        unitary: ComplexMatrix(u),
    })
}

/// Projection onto the eigenspaces of `a` for eigenvalues in `[lo, hi]`.
pub fn spectral_projection(
    a: &HermitianMatrix,
    lo: f64,
    hi: f64,
    tol: &Tolerances,
) -> Result<Projection> {
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(Error::InvalidInterval { lo, hi });
    }
    let eig = hermitian_eig(a, tol)?;
    let ctol = tol.cluster_for(a.as_matrix().max_abs());
    // Membership is closed with slack `ctol`; a cluster split by that rule
    // has no well-defined side.
    let inside = |l: f64| l >= lo - ctol && l <= hi + ctol;
    let mut selected = Vec::new();
    for cluster in eig.clusters(ctol) {
        let flags: Vec<bool> = eig.eigenvalues[cluster.clone()]
            .iter()
            .map(|&l| inside(l))
            .collect();
        if flags.iter().any(|&f| f) && !flags.iter().all(|&f| f) {
            let eigenvalue = eig.eigenvalues[cluster.start];
            let endpoint = if (eigenvalue - lo).abs() < (eigenvalue - hi).abs() {
                lo
            } else {
                hi
            };
            return Err(Error::AmbiguousInterval {
                endpoint,
                eigenvalue,
                tol: ctol,
            });
        }
        if flags[0] {
            selected.extend(cluster);
        }
    }
    if selected.is_empty() {
        return Ok(Projection::zero(a.dim()));
    }
    // Ascending order makes the selection contiguous.
    Ok(eig.projection_onto(selected[0]..selected[selected.len() - 1] + 1))
}

pub(crate) fn singular_values_of(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, SVD_MAX_ITER).ok_or(
        Error::Numerical {
            context: "singular value decomposition",
            residual: f64::NAN,
        },
    )?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sv)
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
