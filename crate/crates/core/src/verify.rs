//! Independent re-derivation of perturbation guarantees.
//!
//! The commutant dimension is recomputed from the full complex
//! `2n² × n²` commutation system, assembled entry by entry and solved with
//! a different linear-algebra backend than the one used by
//! [`crate::algebra`]. The trace norm is re-measured the same way.

use faer::{c64, Mat};

use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, Tolerances};
use crate::perturb::PerturbationResult;

/// Relative tolerance for comparing a result's claims with re-measured values.
const CLAIM_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleCommutant {
    pub dim: usize,
    /// Smallest singular value above the cutoff, if any.
    pub margin: Option<f64>,
    pub cutoff: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub trace_norm_ok: bool,
    pub irreducible_ok: bool,
    pub commutant_dim: usize,
    pub margin: Option<f64>,
    /// Singular-value threshold the oracle used for the commutant dimension.
    pub cutoff: f64,
    pub measured_trace_norm: f64,
    /// The result's own trace norm and certificate agree with the
    /// re-measured values.
    pub claims_consistent: bool,
    pub details: Vec<String>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.trace_norm_ok && self.irreducible_ok && self.claims_consistent
    }
}

fn to_faer(m: &ComplexMatrix) -> Mat<c64> {
    Mat::from_fn(m.dim(), m.dim(), |i, j| {
        let z = m.get(i, j);
        c64::new(z.re, z.im)
    })
}

fn singular_values(m: &Mat<c64>) -> Result<Vec<f64>> {
    m.singular_values().map_err(|_| Error::Numerical {
        context: "oracle SVD",
        residual: f64::NAN,
    })
}

/// Dimension of `{X : XT = TX, XT* = T*X}` from the raw linear system.
pub fn brute_force_commutant_dim(t: &ComplexMatrix, tol: &Tolerances) -> Result<OracleCommutant> {
    let n = t.dim();
    let t = to_faer(t);
    let unknown = |row: usize, col: usize| row + n * col;
    let mut sys = Mat::<c64>::zeros(2 * n * n, n * n);
    for (block, op) in [t.clone(), t.adjoint().to_owned()].iter().enumerate() {
        for a in 0..n {
            for b in 0..n {
                let eq = block * n * n + a + n * b;
                // (XS − SX)_{ab} = Σ_c X_{ac} S_{cb} − S_{ac} X_{cb}.
                for c in 0..n {
                    sys[(eq, unknown(a, c))] += op[(c, b)];
                    sys[(eq, unknown(c, b))] -= op[(a, c)];
                }
            }
        }
    }
    let sv = singular_values(&sys)?;
    let smax = sv.iter().copied().fold(0.0_f64, f64::max);
    let cutoff = tol.nullspace_cutoff(smax);
    let above: Vec<f64> = sv.iter().copied().filter(|&s| s > cutoff).collect();
    Ok(OracleCommutant {
        dim: n * n - above.len(),
        margin: above.into_iter().reduce(f64::min),
        cutoff,
    })
}

/// `‖M‖₁` through the oracle backend.
pub fn oracle_trace_norm(m: &ComplexMatrix) -> Result<f64> {
    Ok(singular_values(&to_faer(m))?.iter().sum())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CLAIM_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Re-checks `‖K‖₁ < ε` (no slack) and irreducibility of `T + K`, and
/// compares both against what the result claims.
pub fn verify_perturbation(
    t: &ComplexMatrix,
    result: &PerturbationResult,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    if result.k.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            found: result.k.dim(),
        });
    }
    let measured = oracle_trace_norm(&result.k)?;
    let oracle = brute_force_commutant_dim(&(t + &result.k), tol)?;
    let trace_norm_ok = measured < result.epsilon;
    let irreducible_ok = oracle.dim == 1;

    let mut details = Vec::new();
    details.push(format!(
        "trace norm {measured:.6e} {} epsilon {:.6e}",
        if trace_norm_ok { "<" } else { ">=" },
        result.epsilon
    ));
    details.push(match oracle.margin {
        Some(m) => format!(
            "commutant dimension {} (margin {m:.3e}, cutoff {:.3e})",
            oracle.dim, oracle.cutoff
        ),
        None => format!(
            "commutant dimension {} (no singular value above cutoff)",
            oracle.dim
        ),
    });

    let mut claims_consistent = true;
    if !close(measured, result.trace_norm) {
        claims_consistent = false;
        details.push(format!(
            "claimed trace norm {:.6e} differs from measured",
            result.trace_norm
        ));
    }
    if result.certificate.irreducible != irreducible_ok {
        claims_consistent = false;
        details.push(format!(
            "claimed irreducible = {} disagrees with oracle",
            result.certificate.irreducible
        ));
    }
    if result.certificate.commutant_dim != oracle.dim {
        claims_consistent = false;
        details.push(format!(
            "claimed commutant dimension {} disagrees with oracle",
            result.certificate.commutant_dim
        ));
    }

    Ok(VerificationReport {
        trace_norm_ok,
        irreducible_ok,
        commutant_dim: oracle.dim,
        margin: oracle.margin,
        cutoff: oracle.cutoff,
        measured_trace_norm: measured,
        claims_consistent,
        details,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::IrreducibilityCertificate;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn oracle_examples() {
        let j = ComplexMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]], None).unwrap();
        let o = brute_force_commutant_dim(&j, &tol()).unwrap();
        assert_eq!(o.dim, 1);
        assert!(o.margin.unwrap() > 0.0);

        let o = brute_force_commutant_dim(&ComplexMatrix::identity(3), &tol()).unwrap();
        assert_eq!(o.dim, 9);
        assert_eq!(o.margin, None);

        let d = ComplexMatrix::from_real_diagonal(&[1.0, 2.0, 1.0, 2.0]).unwrap();
        assert_eq!(brute_force_commutant_dim(&d, &tol()).unwrap().dim, 8);
    }

    fn claimed(
        k: ComplexMatrix,
        epsilon: f64,
        irreducible: bool,
        dim: usize,
    ) -> PerturbationResult {
        let trace_norm = oracle_trace_norm(&k).unwrap();
        PerturbationResult {
            k,
            trace_norm,
            epsilon,
            certificate: IrreducibilityCertificate {
                irreducible,
                commutant_dim: dim,
                margin: None,
                cutoff: 0.0,
            },
            witness: None,
            log: Vec::new(),
        }
    }

    #[test]
    fn negative_controls() {
        let t = ComplexMatrix::from_real_diagonal(&[1.0, 2.0]).unwrap();
        let r = verify_perturbation(&t, &claimed(ComplexMatrix::zeros(2), 0.1, true, 1), &tol())
            .unwrap();
        assert!(!r.irreducible_ok && r.commutant_dim == 2 && !r.claims_consistent && !r.passed());

        let k = ComplexMatrix::from_real_diagonal(&[0.25, 0.0]).unwrap();
        let r = verify_perturbation(&t, &claimed(k, 0.25, false, 2), &tol()).unwrap();
        assert!(!r.trace_norm_ok);
    }

    #[test]
    fn dimension_mismatch() {
        let t = ComplexMatrix::identity(2);
        let r = verify_perturbation(&t, &claimed(ComplexMatrix::zeros(3), 0.1, false, 9), &tol());
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
