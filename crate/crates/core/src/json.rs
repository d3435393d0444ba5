//! JSON wire formats for matrices, vectors, algebras and reports.
//!
//! Matrices are `{"n", "re", "im"}` with row-major nested arrays; `"im"` may
//! be omitted on input and defaults to zeros.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::{BlockDecomposition, IrreducibilityCertificate, StarAlgebra, VectorReport};
use crate::error::{Error, Result};
use crate::matrix::{ComplexMatrix, ComplexVector, Tolerances, C64};
use crate::perturb::{LogEntry, PerturbationResult, Witness};
use crate::verify::VerificationReport;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &ComplexMatrix) -> Self {
        let n = m.dim();
        let re = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j).re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j).im).collect())
            .collect();
        Self {
            n,
            re,
            im: Some(im),
        }
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let rows_ok =
            |rows: &Vec<Vec<f64>>| rows.len() == self.n && rows.iter().all(|r| r.len() == self.n);
        if self.n == 0 || !rows_ok(&self.re) || !self.im.as_ref().is_none_or(rows_ok) {
            return Err(Error::Parse(format!(
                "matrix rows do not match n = {}",
                self.n
            )));
        }
        ComplexMatrix::from_rows(&self.re, self.im.as_deref())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorJson {
    pub n: usize,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl VectorJson {
    pub fn from_vector(v: &ComplexVector) -> Self {
        Self {
            n: v.dim(),
            re: v.as_slice().iter().map(|z| z.re).collect(),
            im: Some(v.as_slice().iter().map(|z| z.im).collect()),
        }
    }

    pub fn to_vector(&self) -> Result<ComplexVector> {
        let im_len = self.im.as_ref().map_or(self.n, Vec::len);
        if self.n == 0 || self.re.len() != self.n || im_len != self.n {
            return Err(Error::Parse(format!(
                "vector entries do not match n = {}",
                self.n
            )));
        }
        let entries = (0..self.n)
            .map(|k| C64::new(self.re[k], self.im.as_ref().map_or(0.0, |im| im[k])))
            .collect();
        ComplexVector::new(entries)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraJson {
    pub n: usize,
    pub basis: Vec<MatrixJson>,
}

impl AlgebraJson {
    pub fn from_algebra(a: &StarAlgebra) -> Self {
        Self {
            n: a.n(),
            basis: a.basis().iter().map(MatrixJson::from_matrix).collect(),
        }
    }

    /// Re-orthonormalizes the listed basis and validates closure.
    pub fn to_algebra(&self, tol: &Tolerances) -> Result<StarAlgebra> {
        let family = self
            .basis
            .iter()
            .map(MatrixJson::to_matrix)
            .collect::<Result<Vec<_>>>()?;
        StarAlgebra::from_spanning(self.n, &family, tol)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDecompositionJson {
    pub unitary: MatrixJson,
    pub blocks: Vec<[usize; 2]>,
}

impl From<&BlockDecomposition> for BlockDecompositionJson {
    fn from(d: &BlockDecomposition) -> Self {
        Self {
            unitary: MatrixJson::from_matrix(&d.unitary),
            blocks: d.blocks.iter().map(|&(s, m)| [s, m]).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntryJson {
    pub stage: String,
    pub budget: f64,
    pub used: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessJson {
    Distinct {
        min_gap: f64,
        interpolation_residual: f64,
    },
    Isolated {
        lambda: f64,
        gap: Option<f64>,
        shift: f64,
        scale: f64,
    },
}

impl From<&Witness> for WitnessJson {
    fn from(w: &Witness) -> Self {
        match *w {
            Witness::Distinct {
                min_gap,
                interpolation_residual,
            } => WitnessJson::Distinct {
                min_gap,
                interpolation_residual,
            },
            Witness::Isolated {
                lambda,
                gap,
                shift,
                scale,
            } => WitnessJson::Isolated {
                lambda,
                gap,
                shift,
                scale,
            },
        }
    }
}

impl From<&WitnessJson> for Witness {
    fn from(w: &WitnessJson) -> Self {
        match *w {
            WitnessJson::Distinct {
                min_gap,
                interpolation_residual,
            } => Witness::Distinct {
                min_gap,
                interpolation_residual,
            },
            WitnessJson::Isolated {
                lambda,
                gap,
                shift,
                scale,
            } => Witness::Isolated {
                lambda,
                gap,
                shift,
                scale,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationJson {
    #[serde(rename = "K")]
    pub k: MatrixJson,
    pub trace_norm: f64,
    pub epsilon: f64,
    pub irreducible: bool,
    pub commutant_dim: usize,
    pub margin: Option<f64>,
    pub log: Vec<LogEntryJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessJson>,
}

impl From<&PerturbationResult> for PerturbationJson {
    fn from(r: &PerturbationResult) -> Self {
        Self {
            k: MatrixJson::from_matrix(&r.k),
            trace_norm: r.trace_norm,
            epsilon: r.epsilon,
            irreducible: r.certificate.irreducible,
            commutant_dim: r.certificate.commutant_dim,
            margin: r.certificate.margin,
            log: r
                .log
                .iter()
                .map(|e| LogEntryJson {
                    stage: e.stage.clone(),
                    budget: e.budget,
                    used: e.used,
                })
                .collect(),
            witness: r.witness.as_ref().map(WitnessJson::from),
        }
    }
}

impl PerturbationJson {
    /// Rebuilds a result from its report. The cutoff is not serialized and
    /// comes back as zero.
    pub fn to_result(&self) -> Result<PerturbationResult> {
        Ok(PerturbationResult {
            k: self.k.to_matrix()?,
            trace_norm: self.trace_norm,
            epsilon: self.epsilon,
            certificate: IrreducibilityCertificate {
                irreducible: self.irreducible,
                commutant_dim: self.commutant_dim,
                margin: self.margin,
                cutoff: 0.0,
            },
            witness: self.witness.as_ref().map(Witness::from),
            log: self
                .log
                .iter()
                .map(|e| LogEntry {
                    stage: e.stage.clone(),
                    budget: e.budget,
                    used: e.used,
                })
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    pub irreducible: bool,
    pub commutant_dim: usize,
    pub margin: Option<f64>,
}

impl From<&IrreducibilityCertificate> for CertificateJson {
    fn from(c: &IrreducibilityCertificate) -> Self {
        Self {
            irreducible: c.irreducible,
            commutant_dim: c.commutant_dim,
            margin: c.margin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationJson {
    pub passed: bool,
    pub trace_norm_ok: bool,
    pub irreducible_ok: bool,
    pub commutant_dim: usize,
    pub margin: Option<f64>,
    pub cutoff: f64,
    pub measured_trace_norm: f64,
    pub claims_consistent: bool,
    pub details: Vec<String>,
}

impl From<&VerificationReport> for VerificationJson {
    fn from(r: &VerificationReport) -> Self {
        Self {
            passed: r.passed(),
            trace_norm_ok: r.trace_norm_ok,
            irreducible_ok: r.irreducible_ok,
            commutant_dim: r.commutant_dim,
            margin: r.margin,
            cutoff: r.cutoff,
            measured_trace_norm: r.measured_trace_norm,
            claims_consistent: r.claims_consistent,
            details: r.details.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorReportJson {
    pub is_cyclic: bool,
    pub is_separating: bool,
    pub algebra_orbit_rank: usize,
    pub commutant_orbit_rank: usize,
}

impl From<&VectorReport> for VectorReportJson {
    fn from(r: &VectorReport) -> Self {
        Self {
            is_cyclic: r.is_cyclic,
            is_separating: r.is_separating,
            algebra_orbit_rank: r.algebra_orbit_rank,
            commutant_orbit_rank: r.commutant_orbit_rank,
        }
    }
}

/// Operator-set inputs accepted by algebra-level commands.
#[derive(Clone, Debug, PartialEq)]
pub enum OperatorInput {
    Matrix(ComplexMatrix),
    Matrices(Vec<ComplexMatrix>),
    Algebra(AlgebraJson),
}

fn from_value<T: for<'de> Deserialize<'de>>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_value(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn parse_matrix(v: &Value) -> Result<ComplexMatrix> {
    from_value::<MatrixJson>(v)?.to_matrix()
}

pub fn parse_vector(v: &Value) -> Result<ComplexVector> {
    from_value::<VectorJson>(v)?.to_vector()
}

pub fn parse_perturbation(v: &Value) -> Result<PerturbationResult> {
    from_value::<PerturbationJson>(v)?.to_result()
}

/// A single matrix, an array of matrices, or an algebra object.
pub fn parse_operators(v: &Value) -> Result<OperatorInput> {
    match v {
        Value::Array(items) => {
            let ms = items.iter().map(parse_matrix).collect::<Result<Vec<_>>>()?;
            if ms.is_empty() {
                return Err(Error::Parse("empty matrix list".into()));
            }
            Ok(OperatorInput::Matrices(ms))
        }
        Value::Object(map) if map.contains_key("basis") => {
            Ok(OperatorInput::Algebra(from_value(v)?))
        }
        Value::Object(_) => Ok(OperatorInput::Matrix(parse_matrix(v)?)),
        _ => Err(Error::Parse(
            "expected a matrix, an array of matrices, or an algebra".into(),
        )),
    }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_and_default_imaginary() {
        let v = parse_value(r#"{"n":2,"re":[[0,1],[0,0]]}"#).unwrap();
        let m = parse_matrix(&v).unwrap();
        assert_eq!(m.get(0, 1), C64::new(1.0, 0.0));
        let back = to_value(&MatrixJson::from_matrix(&m));
        assert_eq!(parse_matrix(&back).unwrap(), m);
    }

    #[test]
    fn malformed_inputs_are_parse_errors() {
        for text in [
            r#"{"n":2,"re":[[0,1]]}"#,
            r#"{"n":1}"#,
            r#"{"n":2,"re":[1,2],"im":[1]}"#,
        ] {
            let v = parse_value(text).unwrap();
            assert!(parse_matrix(&v).is_err() || parse_vector(&v).is_err());
        }
        assert!(matches!(parse_value("{"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_operators(&parse_value("3").unwrap()),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn operator_inputs() {
        let one = parse_value(r#"{"n":1,"re":[[2]]}"#).unwrap();
        assert!(matches!(
            parse_operators(&one).unwrap(),
            OperatorInput::Matrix(_)
        ));
        let many = Value::Array(vec![one.clone(), one]);
        assert!(
            matches!(parse_operators(&many).unwrap(), OperatorInput::Matrices(ref v) if v.len() == 2)
        );
        let alg = to_value(&AlgebraJson::from_algebra(&StarAlgebra::diagonal(2)));
        match parse_operators(&alg).unwrap() {
            OperatorInput::Algebra(a) => {
                assert_eq!(a.to_algebra(&Tolerances::default()).unwrap().dim(), 2)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn perturbation_round_trip() {
        let r = PerturbationResult {
            k: ComplexMatrix::identity(2),
            trace_norm: 2.0,
            epsilon: 3.0,
            certificate: IrreducibilityCertificate {
                irreducible: false,
                commutant_dim: 4,
                margin: None,
                cutoff: 0.0,
            },
            witness: Some(Witness::Isolated {
                lambda: 1.0,
                gap: None,
                shift: 0.0,
                scale: 1.0,
            }),
            log: vec![LogEntry {
                stage: "s".into(),
                budget: 1.0,
                used: 0.5,
            }],
        };
        let v = to_value(&PerturbationJson::from(&r));
        assert!(v["margin"].is_null());
        assert_eq!(v["K"]["n"], 2);
        assert_eq!(parse_perturbation(&v).unwrap(), r);
    }
}
