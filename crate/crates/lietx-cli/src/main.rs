//! Command-line front end: ingest map specifications, run representation,
//! composition and normalization, emit coefficient tables and verification
//! reports.
//!
//! Exit codes: 0 success, 2 malformed input, 3 grading violation,
//! 4 resonance abort, 5 verification failure.

use clap::{Args, Parser, Subcommand, ValueEnum};
use lietx::algebra::{FtTerm, HomogeneousPolyField};
use lietx::io::{self, MapSpecDoc, NormalFormDoc, RepresentDoc, SeriesDoc, CSV_HEADER};
use lietx::lie::GenSeq;
use lietx::normalform::{
    normalize_lie_series, normalize_lie_transform, normalize_poly, normalize_reversible,
    Diagnostics, Driver, KroneckerHomological, NormalForm, Tolerances,
};
use lietx::oracle;
use lietx::represent::{factor_map, GenSeqKind, MapSpec, Perturbation, Unperturbed};
use lietx::{Error, Mode};
use num_complex::Complex64;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lietx",
    about = "Lie-series representation and normal forms of perturbed maps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Float,
    Exact,
}

#[derive(Copy, Clone, ValueEnum)]
enum DriverArg {
    Transform,
    Series,
}

#[derive(Args)]
struct SpecOpts {
    /// Map specification file (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Override the truncation order of the specification.
    #[arg(long)]
    order: Option<u32>,
    /// Override the order-1 Fourier cutoff K1.
    #[arg(long)]
    cutoff: Option<u32>,
    /// Override the arithmetic mode.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Subcommand)]
enum Command {
    /// Factor the map into x' = R ∘ T_V x and x' = T_W ∘ R x.
    Represent {
        #[command(flatten)]
        spec: SpecOpts,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Compose two generating sequences: T_A ∘ T_B = T_Z.
    Compose {
        /// First sequence document (applied second).
        #[arg(long)]
        a: PathBuf,
        /// Second sequence document (applied first).
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        order: Option<u32>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Compute the normal form order by order.
    Normalize {
        #[command(flatten)]
        spec: SpecOpts,
        #[arg(long, value_enum, default_value = "transform")]
        driver: DriverArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Divisor modulus below which a mode counts as resonant.
        #[arg(long)]
        tol_resonance: Option<f64>,
        /// Divisors below this floor are solved but reported.
        #[arg(long)]
        divisor_floor: Option<f64>,
        /// Accepted for reproducibility bookkeeping; normalization is
        /// deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check a previously produced result against its specification.
    Verify {
        #[command(flatten)]
        spec: SpecOpts,
        /// Result file from `represent` or `normalize`.
        #[arg(long)]
        result: PathBuf,
        /// Coefficientwise tolerance in float mode.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Sampling radius for the numeric residual report.
        #[arg(long, default_value_t = 0.05)]
        radius: f64,
        #[arg(long, default_value_t = 64)]
        samples: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Iterate the map numerically from a starting point.
    Iterate {
        #[command(flatten)]
        spec: SpecOpts,
        /// Linear maps: "re[+im i], ..."; Kronecker maps: "φ1,..;I1,..".
        #[arg(long)]
        point: String,
        #[arg(long)]
        steps: u32,
        /// Output file; prints to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

fn error_code(e: &CliError) -> u8 {
    match e {
        CliError::Lib(Error::Grading(_)) => 3,
        CliError::Lib(Error::Resonance { .. }) => 4,
        _ => 2,
    }
}

enum CliError {
    Lib(Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Write through a temporary file and rename, so partial outputs are never
/// left behind.
fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_spec(opts: &SpecOpts) -> CliResult<(MapSpec, MapSpecDoc)> {
    let mut doc: MapSpecDoc = read_json(&opts.spec)?;
    if let Some(n) = opts.order {
        if n < 1 {
            return Err(CliError::Io("--order must be at least 1".into()));
        }
        doc.order = n;
    }
    if let Some(k) = opts.cutoff {
        doc.fourier_cutoff = Some(k);
    }
    if let Some(m) = opts.mode {
        doc.arithmetic = match m {
            ModeArg::Float => Mode::Float,
            ModeArg::Exact => Mode::Exact,
        };
    }
    let spec = io::mapspec_from_doc(&doc)?;
    Ok((spec, doc))
}

fn tolerances(res: Option<f64>, floor: Option<f64>) -> CliResult<Tolerances> {
    let mut tol = Tolerances::default();
    if let Some(r) = res {
        if r <= 0.0 {
            return Err(CliError::Io("--tol-resonance must be positive".into()));
        }
        tol.resonance = r;
    }
    if let Some(f) = floor {
        if f <= 0.0 {
            return Err(CliError::Io("--divisor-floor must be positive".into()));
        }
        tol.divisor_floor = f;
    }
    Ok(tol)
}

fn run(cmd: Command) -> CliResult<ExitCode> {
    match cmd {
        Command::Represent { spec, out, format } => cmd_represent(&spec, &out, format),
        Command::Compose {
            a,
            b,
            out,
            order,
            format,
        } => cmd_compose(&a, &b, &out, order, format),
        Command::Normalize {
            spec,
            driver,
            out,
            format,
            tol_resonance,
            divisor_floor,
            seed: _,
        } => cmd_normalize(&spec, driver, &out, format, tol_resonance, divisor_floor),
        Command::Verify {
            spec,
            result,
            tol,
            radius,
            samples,
            seed,
        } => cmd_verify(&spec, &result, tol, radius, samples, seed),
        Command::Iterate {
            spec,
            point,
            steps,
            out,
            seed: _,
        } => cmd_iterate(&spec, &point, steps, out.as_deref()),
    }
}

// ----------------------------------------------------------------- represent

fn seq_kind_to_doc(seq: &GenSeqKind, spec: &MapSpec) -> SeriesDoc {
    match (seq, &spec.unperturbed) {
        (GenSeqKind::Poly(s), Unperturbed::Linear(lin)) => {
            io::poly_seq_to_doc(s, lin.dim(), spec.mode)
        }
        (GenSeqKind::Ft(s), Unperturbed::Kronecker(k)) => {
            io::ft_seq_to_doc(s, k.n(), k.m(), k.caps())
        }
        _ => unreachable!("sequence kind matches the spec"),
    }
}

fn cmd_represent(opts: &SpecOpts, out: &Path, format: FormatArg) -> CliResult<ExitCode> {
    let (spec, _) = load_spec(opts)?;
    let (v, w) = factor_map(&spec)?;
    let doc = RepresentDoc {
        result: "represent".into(),
        order: spec.order,
        v: seq_kind_to_doc(&v, &spec),
        w: seq_kind_to_doc(&w, &spec),
    };
    let contents = match format {
        FormatArg::Json => to_json(&doc)?,
        FormatArg::Csv => {
            let mut s = String::from(CSV_HEADER);
            io::series_doc_to_csv("v", &doc.v, &mut s);
            io::series_doc_to_csv("w", &doc.w, &mut s);
            s
        }
    };
    write_atomic(out, &contents)?;
    println!(
        "represent: order {} — V terms {}, W terms {} -> {}",
        spec.order,
        doc.v.terms.len(),
        doc.w.terms.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

// ------------------------------------------------------------------- compose

fn cmd_compose(
    a: &Path,
    b: &Path,
    out: &Path,
    order: Option<u32>,
    format: FormatArg,
) -> CliResult<ExitCode> {
    let da: SeriesDoc = read_json(a)?;
    let db: SeriesDoc = read_json(b)?;
    if da.kind != db.kind {
        return Err(CliError::Io(
            "cannot compose sequences of different kinds".into(),
        ));
    }
    let n = order.unwrap_or_else(|| da.order.min(db.order));
    let doc = match (io::seq_doc_to_kind(&da)?, io::seq_doc_to_kind(&db)?) {
        (GenSeqKind::Poly(x), GenSeqKind::Poly(y)) => {
            let z = lietx::represent::compose_transforms(&x, &y, n)?;
            io::poly_seq_to_doc(&z, da.dim, da.arithmetic)
        }
        (GenSeqKind::Ft(x), GenSeqKind::Ft(y)) => {
            let z = lietx::represent::compose_transforms(&x, &y, n)?;
            let caps = lietx::algebra::FtCaps {
                k1: da.fourier_cutoff.unwrap_or(1),
                action_cap: da.action_degree_cap.unwrap_or(8),
            };
            io::ft_seq_to_doc(&z, da.dim, da.actions.unwrap_or(0), caps)
        }
        _ => unreachable!("kinds checked equal"),
    };
    let contents = match format {
        FormatArg::Json => to_json(&doc)?,
        FormatArg::Csv => {
            let mut s = String::from(CSV_HEADER);
            io::series_doc_to_csv("z", &doc, &mut s);
            s
        }
    };
    write_atomic(out, &contents)?;
    println!("compose: order {n}, {} terms -> {}", doc.terms.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

// ----------------------------------------------------------------- normalize

/// A Kronecker perturbation qualifies for the reversible path when every
/// order is of type (+,-): angle blocks even, action blocks odd.
fn is_reversible(pert: &lietx::algebra::FtField) -> bool {
    pert.terms().all(|(_, t)| t.plus_minus_defect() <= 1e-9)
}

fn cmd_normalize(
    opts: &SpecOpts,
    driver: DriverArg,
    out: &Path,
    format: FormatArg,
    tol_resonance: Option<f64>,
    divisor_floor: Option<f64>,
) -> CliResult<ExitCode> {
    let (spec, _) = load_spec(opts)?;
    let tol = tolerances(tol_resonance, divisor_floor)?;
    let driver = match driver {
        DriverArg::Transform => Driver::Transform,
        DriverArg::Series => Driver::Series,
    };
    let doc = match (&spec.unperturbed, &spec.perturbation) {
        (Unperturbed::Linear(lin), Perturbation::Poly(pert)) => {
            let (nf, _) = normalize_poly(lin, pert, spec.order, driver, tol)?;
            NormalFormDoc {
                result: "normalform".into(),
                driver,
                order: spec.order,
                reversible: false,
                x: io::poly_seq_to_doc(&nf.x, lin.dim(), spec.mode),
                z: io::poly_seq_to_doc(&nf.z, lin.dim(), spec.mode),
                diagnostics: nf.diagnostics.clone(),
                omega_prime: None,
            }
        }
        (Unperturbed::Kronecker(kron), Perturbation::Ft(pert)) => {
            if is_reversible(pert) && kron.constant_omega().is_some() {
                // reversible path: the perturbation orders are the
                // generating sequence of the near-identity factor
                let outp = normalize_reversible(kron, pert, spec.order, tol)?;
                NormalFormDoc {
                    result: "normalform".into(),
                    driver: Driver::Transform,
                    order: spec.order,
                    reversible: true,
                    x: io::ft_seq_to_doc(&outp.nf.x, kron.n(), kron.m(), kron.caps()),
                    z: io::ft_seq_to_doc(&outp.nf.z, kron.n(), kron.m(), kron.caps()),
                    diagnostics: outp.nf.diagnostics.clone(),
                    omega_prime: Some(io::omega_to_terms(&outp.omega_prime)),
                }
            } else {
                let (_, w) = factor_map(&spec)?;
                let w = match w {
                    GenSeqKind::Ft(w) => w,
                    _ => unreachable!(),
                };
                let sys = KroneckerHomological::new(kron, tol);
                let mut nf = match driver {
                    Driver::Transform => normalize_lie_transform(&sys, &w, spec.order)?,
                    Driver::Series => normalize_lie_series(&sys, &w, spec.order)?,
                };
                lietx::normalform::record_ft_truncation(&mut nf);
                NormalFormDoc {
                    result: "normalform".into(),
                    driver,
                    order: spec.order,
                    reversible: false,
                    x: io::ft_seq_to_doc(&nf.x, kron.n(), kron.m(), kron.caps()),
                    z: io::ft_seq_to_doc(&nf.z, kron.n(), kron.m(), kron.caps()),
                    diagnostics: nf.diagnostics.clone(),
                    omega_prime: None,
                }
            }
        }
        _ => unreachable!("validated"),
    };
    let contents = match format {
        FormatArg::Json => to_json(&doc)?,
        FormatArg::Csv => {
            let mut s = String::from(CSV_HEADER);
            io::series_doc_to_csv("x", &doc.x, &mut s);
            io::series_doc_to_csv("z", &doc.z, &mut s);
            s
        }
    };
    write_atomic(out, &contents)?;
    print_diagnostics(&doc.diagnostics);
    println!(
        "normalize ({:?}): order {} — X terms {}, Z terms {} -> {}",
        doc.driver,
        doc.order,
        doc.x.terms.len(),
        doc.z.terms.len(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn print_diagnostics(diag: &Diagnostics) {
    match diag.min_divisor {
        Some(d) => println!("min |divisor| = {d:.6e}"),
        None => println!("min |divisor| = n/a (no divisors encountered)"),
    }
    for r in &diag.resonant_modes {
        println!(
            "resonant mode at order {}, component {}, key ({})",
            r.order,
            r.component + 1,
            r.key
        );
    }
    for w in &diag.warnings {
        println!("warning: {w}");
    }
}

// -------------------------------------------------------------------- verify

fn cmd_verify(
    opts: &SpecOpts,
    result: &Path,
    tol: f64,
    radius: f64,
    samples: u32,
    seed: u64,
) -> CliResult<ExitCode> {
    let (spec, _) = load_spec(opts)?;
    let value: serde_json::Value = read_json(result)?;
    let tag = value
        .get("result")
        .and_then(|v| v.as_str())
        .ok_or_else(|| CliError::Io("result file has no `result` tag".into()))?;
    match tag {
        "represent" => {
            let doc: RepresentDoc = read_json(result)?;
            verify_represent(&spec, &doc, tol)
        }
        "normalform" => {
            let doc: NormalFormDoc = read_json(result)?;
            verify_normalform(&spec, &doc, tol, radius, samples, seed)
        }
        other => Err(CliError::Io(format!("unknown result tag `{other}`"))),
    }
}

fn verify_represent(spec: &MapSpec, doc: &RepresentDoc, tol: f64) -> CliResult<ExitCode> {
    let v = io::seq_doc_to_kind(&doc.v)?;
    let w = io::seq_doc_to_kind(&doc.w)?;
    let defect = oracle::reconstruction_defect(spec, &v, &w)?;
    let pass = if spec.mode == Mode::Exact {
        defect == 0.0
    } else {
        defect <= tol
    };
    println!(
        "reconstruction defect {defect:.3e} -> {}",
        if pass { "pass" } else { "FAIL" }
    );
    // W_s = R V_s termwise
    let mut rv_defect = 0.0f64;
    match (&spec.unperturbed, &v, &w) {
        (Unperturbed::Linear(lin), GenSeqKind::Poly(v), GenSeqKind::Poly(w)) => {
            for s in 1..=spec.order {
                let rv = v.get(s).map(|vs| lin.apply_field(vs, false));
                let d = match (rv, w.get(s)) {
                    (None, None) => 0.0,
                    (Some(rv), Some(ws)) => rv.add(&ws.neg()).max_coeff_modulus(),
                    (Some(rv), None) => rv.max_coeff_modulus(),
                    (None, Some(ws)) => ws.max_coeff_modulus(),
                };
                rv_defect = rv_defect.max(d);
            }
        }
        (Unperturbed::Kronecker(kron), GenSeqKind::Ft(v), GenSeqKind::Ft(w)) => {
            for s in 1..=spec.order {
                let rv = v.get(s).map(|vs| kron.apply_term(vs, false));
                let d = match (rv, w.get(s)) {
                    (None, None) => 0.0,
                    (Some(rv), Some(ws)) => rv.add(&ws.neg()).max_coeff_modulus(),
                    (Some(rv), None) => rv.max_coeff_modulus(),
                    (None, Some(ws)) => ws.max_coeff_modulus(),
                };
                rv_defect = rv_defect.max(d);
            }
        }
        _ => return Err(CliError::Io("result kind does not match the spec".into())),
    }
    let rv_pass = if spec.mode == Mode::Exact {
        rv_defect == 0.0
    } else {
        rv_defect <= tol
    };
    println!(
        "W = R V termwise defect {rv_defect:.3e} -> {}",
        if rv_pass { "pass" } else { "FAIL" }
    );
    if pass && rv_pass {
        println!("verify: pass");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: FAIL");
        Ok(ExitCode::from(5))
    }
}

fn report_orders(defects: &[(u32, f64)], tol: f64, exact: bool) -> bool {
    let mut pass = true;
    for (s, d) in defects {
        let ok = if exact { *d == 0.0 } else { *d <= tol };
        if !ok {
            pass = false;
            println!("conjugation defect {d:.3e} at order {s} -> FAIL");
        } else {
            println!("conjugation defect {d:.3e} at order {s} -> pass");
        }
    }
    pass
}

fn verify_normalform(
    spec: &MapSpec,
    doc: &NormalFormDoc,
    tol: f64,
    radius: f64,
    samples: u32,
    seed: u64,
) -> CliResult<ExitCode> {
    let exact = spec.mode == Mode::Exact;
    let pass = match (&spec.unperturbed, &spec.perturbation) {
        (Unperturbed::Linear(lin), Perturbation::Poly(pert)) => {
            let nf = NormalForm::<HomogeneousPolyField> {
                x: io::poly_seq_from_doc(&doc.x)?,
                z: io::poly_seq_from_doc(&doc.z)?,
                order: doc.order,
                driver: doc.driver,
                diagnostics: doc.diagnostics.clone(),
            };
            let defects = oracle::map_conjugacy_defects_poly(lin, pert, &nf);
            let pass = report_orders(&defects, tol, exact);
            if !exact {
                let rep = oracle::conjugacy_residual_poly(lin, pert, &nf, radius, samples, seed);
                let rep_half =
                    oracle::conjugacy_residual_poly(lin, pert, &nf, radius / 2.0, samples, seed);
                println!(
                    "residual at radius {:.3e}: max {:.3e}, mean {:.3e}",
                    rep.radius, rep.max_residual, rep.mean_residual
                );
                println!(
                    "residual at radius {:.3e}: max {:.3e}, mean {:.3e} (ratio {:.1})",
                    rep_half.radius,
                    rep_half.max_residual,
                    rep_half.mean_residual,
                    rep.max_residual / rep_half.max_residual.max(1e-300)
                );
            }
            pass
        }
        (Unperturbed::Kronecker(kron), Perturbation::Ft(pert)) => {
            let nf = NormalForm::<FtTerm> {
                x: io::ft_seq_from_doc(&doc.x)?,
                z: io::ft_seq_from_doc(&doc.z)?,
                order: doc.order,
                driver: doc.driver,
                diagnostics: doc.diagnostics.clone(),
            };
            // rebuild the W sequence the run used
            let w: GenSeq<FtTerm> = if doc.reversible {
                let mut w = GenSeq::new(doc.order);
                for (_, t) in pert.terms() {
                    w.set(t.clone())?;
                }
                w
            } else {
                match factor_map(spec)?.1 {
                    GenSeqKind::Ft(w) => w,
                    _ => unreachable!(),
                }
            };
            let defects = oracle::map_conjugacy_defects_kronecker(kron, &w, &nf)?;
            let pass = report_orders(&defects, tol, false);
            if let Ok(rep) =
                oracle::conjugacy_residual_kronecker(kron, &w, &nf, radius, samples, seed)
            {
                println!(
                    "residual at action radius {:.3e}: max {:.3e}, mean {:.3e}",
                    rep.radius, rep.max_residual, rep.mean_residual
                );
            }
            pass
        }
        _ => unreachable!("validated"),
    };
    if pass {
        println!("verify: pass");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: FAIL");
        Ok(ExitCode::from(5))
    }
}

// ------------------------------------------------------------------- iterate

fn parse_complex(s: &str) -> CliResult<Complex64> {
    let t = s.trim().replace(' ', "");
    if let Some(stripped) = t.strip_suffix('i') {
        // forms: "bi", "a+bi", "a-bi"
        if let Some(pos) = stripped.rfind(['+', '-']).filter(|&p| p > 0) {
            let re: f64 = stripped[..pos]
                .parse()
                .map_err(|_| CliError::Io(format!("bad complex number `{s}`")))?;
            let im_str = &stripped[pos..];
            let im: f64 = if im_str == "+" || im_str == "-" {
                format!("{im_str}1").parse().unwrap()
            } else {
                im_str
                    .parse()
                    .map_err(|_| CliError::Io(format!("bad complex number `{s}`")))?
            };
            Ok(Complex64::new(re, im))
        } else {
            let im: f64 = match stripped {
                "" | "+" => 1.0,
                "-" => -1.0,
                other => other
                    .parse()
                    .map_err(|_| CliError::Io(format!("bad complex number `{s}`")))?,
            };
            Ok(Complex64::new(0.0, im))
        }
    } else {
        let re: f64 = t
            .parse()
            .map_err(|_| CliError::Io(format!("bad number `{s}`")))?;
        Ok(Complex64::new(re, 0.0))
    }
}

fn cmd_iterate(
    opts: &SpecOpts,
    point: &str,
    steps: u32,
    out: Option<&Path>,
) -> CliResult<ExitCode> {
    let (spec, _) = load_spec(opts)?;
    let payload = match (&spec.unperturbed, &spec.perturbation) {
        (Unperturbed::Linear(lin), Perturbation::Poly(pert)) => {
            let start: Vec<Complex64> = point
                .split(',')
                .map(parse_complex)
                .collect::<CliResult<_>>()?;
            if start.len() != lin.dim() {
                return Err(CliError::Io(format!(
                    "expected {} coordinates, found {}",
                    lin.dim(),
                    start.len()
                )));
            }
            let traj = oracle::iterate_linear(lin, pert, &start, steps)?;
            serde_json::json!({
                "steps": steps,
                "trajectory": traj
                    .iter()
                    .map(|x| x.iter().map(|c| serde_json::json!({"re": c.re, "im": c.im})).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            })
        }
        (Unperturbed::Kronecker(kron), Perturbation::Ft(pert)) => {
            let (phis, acts) = point
                .split_once(';')
                .ok_or_else(|| CliError::Io("Kronecker points use \"angles;actions\"".into()))?;
            let phi: Vec<f64> = phis
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Io(format!("bad angle: {e}")))?;
            let act: Vec<f64> = acts
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Io(format!("bad action: {e}")))?;
            if phi.len() != kron.n() || act.len() != kron.m() {
                return Err(CliError::Io("point dimensions do not match the map".into()));
            }
            let traj = oracle::iterate_kronecker(kron, pert, &phi, &act, steps)?;
            serde_json::json!({
                "steps": steps,
                "trajectory": traj
                    .iter()
                    .map(|(p, i)| serde_json::json!({"angles": p, "actions": i}))
                    .collect::<Vec<_>>(),
            })
        }
        _ => unreachable!("validated"),
    };
    let mut text = serde_json::to_string_pretty(&payload)
        .map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    match out {
        Some(path) => {
            write_atomic(path, &text)?;
            println!("iterate: {steps} steps -> {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}
