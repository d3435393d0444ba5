//! `tracepert`: JSON in, JSON out front end for the toolkit.
//!
//! Exit codes: 0 when every check passes, 2 when a check fails or a
//! numerical routine gives up, 3 for unreadable input or a violated
//! structural hypothesis.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde_json::{json, Value};

use tracepert::algebra::{
    atomic_support, central_support, commutant, cyclicity_obstruction, find_cyclic_vector,
    generate_algebra, is_irreducible, minimal_central_projections, vector_report,
    wedderburn_decompose, StarAlgebra,
};
use tracepert::ensemble::{self, Ensemble};
use tracepert::json::{
    parse_matrix, parse_operators, parse_perturbation, parse_value, parse_vector, to_value,
    AlgebraJson, BlockDecompositionJson, CertificateJson, MatrixJson, OperatorInput,
    PerturbationJson, VectorJson, VectorReportJson, VerificationJson,
};
use tracepert::perturb::{self, PerturbationRequest, PerturbationResult};
use tracepert::verify::verify_perturbation;
use tracepert::{ComplexMatrix, Error, HermitianMatrix, Projection, Tolerances};

#[derive(Parser, Debug)]
#[command(
    name = "tracepert",
    version,
    about = "Trace-norm perturbations to irreducibility, with certificates"
)]
struct Cli {
    /// Perturbation budget (Schatten-1 norm).
    #[arg(long, global = true, default_value_t = 0.1)]
    eps: f64,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = PerturbationRequest::DEFAULT_SEED)]
    seed: u64,
    /// Multiplies every default tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Irreducibility certificate of a matrix.
    Check { input: PathBuf },
    /// Commutant of a matrix, a list of matrices, or an algebra.
    Commutant { input: PathBuf },
    /// Block form of the generated algebra.
    Decompose { input: PathBuf },
    /// Central projections, atomic support and (optionally) a central support.
    Supports {
        input: PathBuf,
        /// Projection whose central support is wanted.
        #[arg(long)]
        projection: Option<PathBuf>,
    },
    /// Cyclic/separating report for a vector, and an optional nearby cyclic vector.
    Cyclic {
        input: PathBuf,
        #[arg(long)]
        vector: PathBuf,
        /// Search radius for a cyclic vector near the given one.
        #[arg(long)]
        radius: Option<f64>,
    },
    /// Run a single construction.
    Perturb {
        #[arg(long, value_enum)]
        op: Op,
        /// Operands in order: D | A | A B P | A B P1 [P2] | A B.
        inputs: Vec<PathBuf>,
        /// Values the diagonal construction must avoid (comma separated).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        forbidden: Vec<f64>,
        /// Size of the diagonal first block for the cyclic coupling.
        #[arg(long)]
        split: Option<usize>,
        /// Explicit unit vector for the isolated-eigenvalue construction.
        #[arg(long)]
        vector: Option<PathBuf>,
    },
    /// Perturb any matrix into an irreducible one.
    Pipeline { input: PathBuf },
    /// Re-check a pipeline report against its input.
    Verify { input: PathBuf, result: PathBuf },
    /// Run seeded random matrices through pipeline and verification.
    Fuzz {
        /// Number of samples.
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Largest matrix dimension sampled.
        #[arg(long, default_value_t = 8)]
        dim_max: usize,
        #[arg(long, value_enum, default_value_t = EnsembleArg::Generic)]
        ensemble: EnsembleArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Op {
    Diag,
    Isolated,
    Couple,
    TwoProjection,
    CyclicCoupling,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnsembleArg {
    Generic,
    Normal,
    Block,
}

impl From<EnsembleArg> for Ensemble {
    fn from(e: EnsembleArg) -> Self {
        match e {
            EnsembleArg::Generic => Ensemble::Generic,
            EnsembleArg::Normal => Ensemble::Normal,
            EnsembleArg::Block => Ensemble::Block,
        }
    }
}

/// Report plus the exit code it implies.
struct Outcome {
    report: Value,
    ok: bool,
}

impl Outcome {
    fn pass(report: Value) -> Self {
        Self { report, ok: true }
    }
}

struct Ctx {
    eps: f64,
    seed: u64,
    tol: Tolerances,
}

impl Ctx {
    fn request(&self) -> Result<PerturbationRequest, Error> {
        Ok(PerturbationRequest::new(self.eps)?
            .with_seed(self.seed)
            .with_tolerances(self.tol))
    }
}

fn read_json(path: &Path) -> Result<Value, Error> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_value(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn read_matrix(path: &Path) -> Result<ComplexMatrix, Error> {
    parse_matrix(&read_json(path)?)
}

fn read_hermitian(path: &Path, tol: &Tolerances) -> Result<HermitianMatrix, Error> {
    HermitianMatrix::new(read_matrix(path)?, tol)
}

fn read_projection(path: &Path, tol: &Tolerances) -> Result<Projection, Error> {
    Projection::new(read_hermitian(path, tol)?, tol)
}

fn read_algebra(path: &Path, tol: &Tolerances) -> Result<StarAlgebra, Error> {
    match parse_operators(&read_json(path)?)? {
        OperatorInput::Matrix(t) => generate_algebra(t.dim(), &[t], tol),
        OperatorInput::Matrices(ms) => generate_algebra(ms[0].dim(), &ms, tol),
        OperatorInput::Algebra(a) => a.to_algebra(tol),
    }
}

fn matrix_value(m: &ComplexMatrix) -> Value {
    to_value(&MatrixJson::from_matrix(m))
}

fn perturbation_value(r: &PerturbationResult) -> Value {
    to_value(&PerturbationJson::from(r))
}

fn run_check(input: &Path, ctx: &Ctx) -> Result<Outcome, Error> {
    let t = read_matrix(input)?;
    let cert = is_irreducible(&t, &ctx.tol)?;
    Ok(Outcome {
        report: to_value(&CertificateJson::from(&cert)),
        ok: cert.irreducible,
    })
}

fn run_commutant(input: &Path, ctx: &Ctx) -> Result<Outcome, Error> {
    let comm = match parse_operators(&read_json(input)?)? {
        OperatorInput::Matrix(t) => commutant(&[t], &ctx.tol)?,
        OperatorInput::Matrices(ms) => commutant(&ms, &ctx.tol)?,
        OperatorInput::Algebra(a) => a.to_algebra(&ctx.tol)?.commutant(&ctx.tol)?,
    };
    Ok(Outcome::pass(
        json!({ "dim": comm.dim(), "algebra": to_value(&AlgebraJson::from_algebra(&comm)) }),
    ))
}

fn run_decompose(input: &Path, ctx: &Ctx) -> Result<Outcome, Error> {
    let alg = read_algebra(input, &ctx.tol)?;
    let dec = wedderburn_decompose(&alg, &ctx.tol, ctx.seed)?;
    let mut report = to_value(&BlockDecompositionJson::from(&dec));
    report["dim"] = json!(alg.dim());
    report["commutant_dim"] = json!(dec.blocks.iter().map(|(_, m)| m * m).sum::<usize>());
    Ok(Outcome::pass(report))
}

fn run_supports(input: &Path, projection: Option<&Path>, ctx: &Ctx) -> Result<Outcome, Error> {
    let alg = read_algebra(input, &ctx.tol)?;
    let central = minimal_central_projections(&alg, &ctx.tol, ctx.seed)?;
    let atomic = if alg.is_abelian(&ctx.tol) {
        Some(matrix_value(
            atomic_support(&alg, &ctx.tol, ctx.seed)?.as_matrix(),
        ))
    } else {
        None
    };
    let support = match projection {
        Some(p) => {
            let p = read_projection(p, &ctx.tol)?;
            Some(matrix_value(
                central_support(&p, &alg, &ctx.tol, ctx.seed)?.as_matrix(),
            ))
        }
        None => None,
    };
    Ok(Outcome::pass(json!({
        "center_dim": central.len(),
        "minimal_central_projections": central.iter().map(|z| matrix_value(z.as_matrix())).collect::<Vec<_>>(),
        "atomic_support": atomic,
        "central_support": support,
    })))
}

fn run_cyclic(
    input: &Path,
    vector: &Path,
    radius: Option<f64>,
    ctx: &Ctx,
) -> Result<Outcome, Error> {
    let alg = read_algebra(input, &ctx.tol)?;
    let xi = parse_vector(&read_json(vector)?)?;
    let report = vector_report(&alg, &xi, &ctx.tol)?;
    let dec = wedderburn_decompose(&alg, &ctx.tol, ctx.seed)?;
    let obstruction = cyclicity_obstruction(&dec).map(|(n, m)| json!([n, m]));
    let found = match radius {
        Some(r) => find_cyclic_vector(&alg, &xi, r, &ctx.tol, ctx.seed)?
            .map(|v| to_value(&VectorJson::from_vector(&v))),
        None => None,
    };
    Ok(Outcome::pass(json!({
        "report": to_value(&VectorReportJson::from(&report)),
        "obstruction": obstruction,
        "cyclic_vector": found,
    })))
}

fn operand(inputs: &[PathBuf], k: usize, what: &str) -> Result<PathBuf, Error> {
    inputs
        .get(k)
        .cloned()
        .ok_or_else(|| Error::Parse(format!("missing operand {} ({what})", k + 1)))
}

fn run_perturb(
    op: Op,
    inputs: &[PathBuf],
    forbidden: &[f64],
    split: Option<usize>,
    vector: Option<&Path>,
    ctx: &Ctx,
) -> Result<Outcome, Error> {
    let req = ctx.request()?;
    let tol = &ctx.tol;
    let herm = |k: usize, what: &str| read_hermitian(&operand(inputs, k, what)?, tol);
    let (result, certify) = match op {
        Op::Diag => (
            perturb::diag_distinct(&herm(0, "D")?, forbidden, &req)?,
            false,
        ),
        Op::Isolated => {
            let a = herm(0, "A")?;
            let (r, _) = match vector {
                Some(v) => perturb::isolated_simple_eigenvalue_with(
                    &a,
                    &parse_vector(&read_json(v)?)?,
                    &req,
                )?,
                None => perturb::isolated_simple_eigenvalue(&a, &req)?,
            };
            (r, false)
        }
        Op::Couple => {
            let p = read_projection(&operand(inputs, 2, "P")?, tol)?;
            (
                perturb::couple_via_partial_isometry(&herm(0, "A")?, &herm(1, "B")?, &p, &req)?,
                true,
            )
        }
        Op::TwoProjection => {
            let p1 = read_projection(&operand(inputs, 2, "P1")?, tol)?;
            let p2 = match inputs.get(3) {
                Some(path) => read_projection(path, tol)?,
                None => p1.complement(),
            };
            (
                perturb::two_projection_coupling(&herm(0, "A")?, &herm(1, "B")?, &p1, &p2, &req)?,
                true,
            )
        }
        Op::CyclicCoupling => {
            let split = split.ok_or_else(|| Error::Parse("--split is required".into()))?;
            (
                perturb::cyclic_coupling(&herm(0, "A")?, &herm(1, "B")?, split, &req)?,
                true,
            )
        }
    };
    let ok = !certify || result.certificate.irreducible;
    Ok(Outcome {
        report: perturbation_value(&result),
        ok,
    })
}

fn run_pipeline(input: &Path, ctx: &Ctx) -> Result<Outcome, Error> {
    let t = read_matrix(input)?;
    let result = perturb::irreducible_pipeline(&t, &ctx.request()?)?;
    Ok(Outcome {
        ok: result.certificate.irreducible,
        report: perturbation_value(&result),
    })
}

fn run_verify(input: &Path, result: &Path, ctx: &Ctx) -> Result<Outcome, Error> {
    let t = read_matrix(input)?;
    let claimed = parse_perturbation(&read_json(result)?)?;
    let report = verify_perturbation(&t, &claimed, &ctx.tol)?;
    Ok(Outcome {
        ok: report.passed(),
        report: to_value(&VerificationJson::from(&report)),
    })
}

fn run_fuzz(samples: usize, dim_max: usize, ens: EnsembleArg, ctx: &Ctx) -> Result<Outcome, Error> {
    if dim_max == 0 {
        return Err(Error::Parse("--dim-max must be at least 1".into()));
    }
    let base = ctx.request()?;
    let mut passed = 0usize;
    let mut max_ratio = 0.0_f64;
    let mut min_margin: Option<f64> = None;
    let mut failures = Vec::new();
    for index in 0..samples {
        let seed = ctx.seed.wrapping_add(index as u64);
        let mut rng = ensemble::rng(seed);
        let n = rng.random_range(1..=dim_max);
        let t = Ensemble::from(ens).sample(n, &mut rng);
        let req = base.clone().with_seed(seed);
        let outcome = perturb::irreducible_pipeline(&t, &req)
            .and_then(|r| verify_perturbation(&t, &r, &ctx.tol).map(|v| (r, v)));
        match outcome {
            Ok((result, report)) => {
                max_ratio = max_ratio.max(report.measured_trace_norm / ctx.eps);
                if let Some(m) = report.margin {
                    min_margin = Some(min_margin.map_or(m, |x| x.min(m)));
                }
                if report.passed() {
                    passed += 1;
                } else {
                    failures.push(
                        json!({ "index": index, "seed": seed, "n": n, "reason": report.details }),
                    );
                }
                debug_assert_eq!(result.epsilon, ctx.eps);
            }
            Err(e) => failures
                .push(json!({ "index": index, "seed": seed, "n": n, "reason": [e.to_string()] })),
        }
    }
    let report = json!({
        "samples": samples,
        "passed": passed,
        "failed": samples - passed,
        "ensemble": format!("{ens:?}").to_lowercase(),
        "epsilon": ctx.eps,
        "seed": ctx.seed,
        "dim_max": dim_max,
        "max_ratio": max_ratio,
        "min_margin": min_margin,
        "failures": failures,
    });
    Ok(Outcome {
        ok: passed == samples,
        report,
    })
}

fn dispatch(cli: &Cli, ctx: &Ctx) -> Result<Outcome, Error> {
    match &cli.command {
        Command::Check { input } => run_check(input, ctx),
        Command::Commutant { input } => run_commutant(input, ctx),
        Command::Decompose { input } => run_decompose(input, ctx),
        Command::Supports { input, projection } => run_supports(input, projection.as_deref(), ctx),
        Command::Cyclic {
            input,
            vector,
            radius,
        } => run_cyclic(input, vector, *radius, ctx),
        Command::Perturb {
            op,
            inputs,
            forbidden,
            split,
            vector,
        } => run_perturb(*op, inputs, forbidden, *split, vector.as_deref(), ctx),
        Command::Pipeline { input } => run_pipeline(input, ctx),
        Command::Verify { input, result } => run_verify(input, result, ctx),
        Command::Fuzz {
            n,
            dim_max,
            ensemble,
        } => run_fuzz(*n, *dim_max, *ensemble, ctx),
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Numerical { .. } | Error::RetryExhausted { .. } => 2,
        _ => 3,
    }
}

fn error_kind(e: &Error) -> &'static str {
    if e.is_structural() {
        "structural"
    } else {
        match e {
            Error::Parse(_) => "parse",
            Error::Numerical { .. } | Error::RetryExhausted { .. } => "numerical",
            _ => "input",
        }
    }
}

fn emit(report: &Value, out: Option<&Path>) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("JSON values serialize");
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = Tolerances::default().scaled(cli.tol_scale).and_then(|tol| {
        let ctx = Ctx {
            eps: cli.eps,
            seed: cli.seed,
            tol,
        };
        dispatch(&cli, &ctx)
    });
    let (report, code) = match result {
        Ok(outcome) => {
            let code = if outcome.ok { 0 } else { 2 };
            (outcome.report, code)
        }
        Err(e) => {
            eprintln!("tracepert: {e}");
            (
                json!({ "error": e.to_string(), "kind": error_kind(&e) }),
                exit_code_for(&e),
            )
        }
    };
    if let Err(e) = emit(&report, cli.out.as_deref()) {
        eprintln!("tracepert: cannot write report: {e}");
        return ExitCode::from(3);
    }
    ExitCode::from(code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&Error::Parse("x".into())), 3);
        assert_eq!(exit_code_for(&Error::NoCyclicVector { n: 1, m: 2 }), 3);
        assert_eq!(
            exit_code_for(&Error::Numerical {
                context: "c",
                residual: 1.0
            }),
            2
        );
        assert_eq!(error_kind(&Error::RankSurrogate("r".into())), "structural");
    }
}
