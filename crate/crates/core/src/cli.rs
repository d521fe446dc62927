//! Command-line front end: soliton reports, integral identities and flow runs.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::catalog::{
    cigar_almost_rb, flat_torus, flat_torus_soliton, hamilton_cigar, perturbed_sphere_metric,
    round_sphere_metric, round_sphere_soliton, torus_test_fields, warped_product_2d,
    SphereConstruction, WarpedParams,
};
use crate::chartcalc::{ChartMetric, LocalGeometry, ScalarField, VectorField};
use crate::integrals::{
    bianchi_sweep, bochner_check, lemma_residual, sphere_grid, torus_grid, yano_check,
    IdentityCheck, LemmaId, LemmaResult, QuadratureGrid, LEMMA_CSV_HEADER,
};
use crate::rbflow::{
    initial_state, run as run_flow, DtPolicy, FlowError, InitProfile, Trajectory, TrajectoryRow,
    CIGAR_HALF_WIDTH, TORUS_NODES, TRAJECTORY_CSV_HEADER,
};
use crate::soliton::{
    obata_residual, soliton_residual, ObataVariant, SolitonData, SolitonReport,
    DEFAULT_SAMPLES_PER_AXIS,
};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Pass = 0,
    Usage = 1,
    Fail = 2,
    BlowUp = 3,
}

/// Default pointwise tolerance of `check`.
pub const DEFAULT_CHECK_TOL: f64 = 1e-8;
/// Default tolerance of the contracted Bianchi sweep.
pub const DEFAULT_BIANCHI_TOL: f64 = 1e-7;
/// Default ε of the perturbed sphere.
pub const DEFAULT_SPHERE_EPS: f64 = 0.2;
/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "RBLAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "rblab",
    version,
    about = "Almost Ricci–Bourguignon soliton checks, integral identities and 2D flows"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the soliton equation and pointwise identities of a catalog example.
    Check(CheckArgs),
    /// Evaluate integral identities on a compact example.
    Lemma(LemmaArgs),
    /// Run the 2D conformal flow and write its trajectory.
    Flow(FlowArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Example {
    HamiltonCigar,
    CigarRb,
    Warped,
    Sphere,
    PerturbedSphere,
    Torus,
    TorusField,
}

impl Example {
    fn allowed(self) -> &'static [&'static str] {
        match self {
            Example::HamiltonCigar => &[],
            Example::CigarRb => &["rho", "t"],
            Example::Warped => &["rho", "c", "a", "b", "h0", "h1"],
            Example::Sphere => &["rho", "c", "Z"],
            Example::PerturbedSphere => &["eps"],
            Example::Torus => &["rho", "periods"],
            Example::TorusField => &[],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Example::HamiltonCigar => "hamilton-cigar",
            Example::CigarRb => "cigar-rb",
            Example::Warped => "warped",
            Example::Sphere => "sphere",
            Example::PerturbedSphere => "perturbed-sphere",
            Example::Torus => "torus",
            Example::TorusField => "torus-field",
        }
    }
}

/// Example parameters; each example accepts a fixed subset.
#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<f64>,
    /// Ambient vector, comma separated (n+1 components for S^n).
    #[arg(long = "Z", allow_hyphen_values = true)]
    pub z: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub h0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub h1: Option<f64>,
    /// Torus periods `lx,ly`.
    #[arg(long)]
    pub periods: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
}

impl Params {
    fn given(&self) -> Vec<&'static str> {
        let flags = [
            ("rho", self.rho.is_some()),
            ("t", self.t.is_some()),
            ("c", self.c.is_some()),
            ("Z", self.z.is_some()),
            ("a", self.a.is_some()),
            ("b", self.b.is_some()),
            ("h0", self.h0.is_some()),
            ("h1", self.h1.is_some()),
            ("periods", self.periods.is_some()),
            ("eps", self.eps.is_some()),
        ];
        flags.iter().filter(|f| f.1).map(|f| f.0).collect()
    }

    fn validate(&self, ex: Example) -> Result<(), CliError> {
        let allowed = ex.allowed();
        for p in self.given() {
            if !allowed.contains(&p) {
                return Err(CliError::Usage(format!(
                    "example '{}' does not take --{p} (accepted: {})",
                    ex.name(),
                    if allowed.is_empty() {
                        "none".to_string()
                    } else {
                        allowed
                            .iter()
                            .map(|a| format!("--{a}"))
                            .collect::<Vec<_>>()
                            .join(", ")
                    }
                )));
            }
        }
        Ok(())
    }

    fn z(&self) -> Result<Vec<f64>, CliError> {
        match &self.z {
            Some(s) => parse_list(s, "--Z"),
            None => Ok(vec![0.0, 0.0, 1.0]),
        }
    }

    fn periods(&self) -> Result<(f64, f64), CliError> {
        match &self.periods {
            Some(s) => match parse_list(s, "--periods")?.as_slice() {
                [lx, ly] => Ok((*lx, *ly)),
                _ => Err(CliError::Usage("--periods takes two values lx,ly".into())),
            },
            None => Ok((2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub example: Example,
    #[command(flatten)]
    pub params: Params,
    /// Sample points per axis, `N` or `NxN`.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value_t = DEFAULT_CHECK_TOL)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LemmaArgs {
    /// `L2.1` … `L2.5` (with `L2.3a`, `L2.3b`), `all`, `yano`, `bochner` or `bianchi`.
    pub which: String,
    #[arg(long, value_enum)]
    pub example: Example,
    #[command(flatten)]
    pub params: Params,
    /// Quadrature resolution `NxM`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Overrides the grid's default tolerance scale.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    /// `cigar`, `torus-perturb` or `flat`.
    #[arg(long)]
    pub init: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long = "T")]
    pub t_end: f64,
    /// Grid spacing (defaults: 1/32 for the cigar, 2π/64 on the torus).
    #[arg(long)]
    pub h: Option<f64>,
    /// Fixed time step instead of the stability-bound policy.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Fraction of the stability bound used by the default policy.
    #[arg(long, default_value_t = 0.9)]
    pub cfl: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Refused(String),
    Io(io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Refused(m) => write!(f, "refused: {m}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{flag}: '{v}' is not a number")))
        })
        .collect()
}

fn parse_resolution(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--grid: expected N or NxM, got '{s}'"));
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match nums.as_slice() {
        [n] => Ok((*n, *n)),
        [n, m] => Ok((*n, *m)),
        _ => Err(bad()),
    }
}

/// JSON formatter printing every float with 17 significant digits.
struct SciFormatter<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident),*) => {
        $(fn $name<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
            self.0.$name(w)
        })*
    };
}

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    delegate!(
        begin_array,
        end_array,
        end_array_value,
        begin_object,
        end_object,
        begin_object_value,
        end_object_value
    );
}

/// Serializes `value` as pretty JSON with 17-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, SciFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

fn emit(path: &Option<PathBuf>, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => File::create(p)?.write_all(text.as_bytes())?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// `check` output: the soliton report plus example-specific residuals.
#[derive(Debug, Serialize)]
pub struct CheckOutput {
    #[serde(flatten)]
    pub report: SolitonReport,
    /// Further residuals of the example (for the sphere: `Δμ + ncμ` and Obata).
    pub extras: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub pass: bool,
}

fn build_soliton(ex: Example, p: &Params) -> Result<SolitonData, CliError> {
    let refuse = |e: &dyn fmt::Display| CliError::Usage(e.to_string());
    match ex {
        Example::HamiltonCigar => Ok(hamilton_cigar()),
        Example::CigarRb => {
            cigar_almost_rb(p.rho.unwrap_or(0.0), p.t.unwrap_or(0.0)).map_err(|e| refuse(&e))
        }
        Example::Warped => {
            let d = WarpedParams::default();
            warped_product_2d(WarpedParams {
                c: p.c.unwrap_or(d.c),
                h0: p.h0.unwrap_or(d.h0),
                h1: p.h1.unwrap_or(d.h1),
                a: p.a.unwrap_or(d.a),
                b: p.b.unwrap_or(d.b),
                rho: p.rho.unwrap_or(d.rho),
                ..d
            })
            .map_err(|e| refuse(&e))
        }
        Example::Sphere => round_sphere_soliton(p.c.unwrap_or(1.0), &p.z()?, p.rho.unwrap_or(0.0))
            .map_err(|e| refuse(&e)),
        Example::Torus => {
            let (lx, ly) = p.periods()?;
            flat_torus_soliton(lx, ly, p.rho.unwrap_or(0.0)).map_err(|e| refuse(&e))
        }
        Example::PerturbedSphere | Example::TorusField => Err(CliError::Usage(format!(
            "example '{}' is a test geometry, not a soliton",
            ex.name()
        ))),
    }
}

/// Sphere-specific residuals: `sup |Δμ + ncμ|` and the Obata equation for μ.
fn sphere_extras(p: &Params, samples: &[Vec<f64>]) -> Result<BTreeMap<String, f64>, CliError> {
    let usage = |e: &dyn fmt::Display| CliError::Usage(e.to_string());
    let c = p.c.unwrap_or(1.0);
    let s = SphereConstruction::new(c, p.z()?).map_err(|e| usage(&e))?;
    let n = s.dim() as f64;
    let mu = s.mu();
    let metric = round_sphere_metric(s.dim(), c).map_err(|e| usage(&e))?;
    let mut out = BTreeMap::new();
    let mut record = |key: &str, v: f64| {
        let e = out.entry(key.to_string()).or_insert(0.0f64);
        *e = e.max(v);
    };
    for pt in samples {
        let geo = LocalGeometry::new(&metric, pt, 0.0, 0).map_err(|e| usage(&e))?;
        let m = geo.scalar_field(&mu);
        record(
            "laplacian_mu",
            (geo.laplacian(&m).value() + n * c * m.value()).abs(),
        );
        let scaled =
            obata_residual(&metric, &mu, ObataVariant::Scaled, pt, 0.0).map_err(|e| usage(&e))?;
        record("obata_scaled", scaled / (n - 1.0));
        if c == 1.0 {
            let unit =
                obata_residual(&metric, &mu, ObataVariant::Unit, pt, 0.0).map_err(|e| usage(&e))?;
            record("obata_unit", unit);
        }
    }
    Ok(out)
}

fn cmd_check(a: &CheckArgs, stdout: &mut dyn Write) -> Result<ExitCode, CliError> {
    a.params.validate(a.example)?;
    let per_axis = match &a.grid {
        Some(g) => match parse_resolution(g)? {
            (n, m) if n == m && n > 0 => n,
            _ => {
                return Err(CliError::Usage(
                    "check --grid takes one positive count per axis".into(),
                ))
            }
        },
        None => DEFAULT_SAMPLES_PER_AXIS,
    };
    if !(a.tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let d = build_soliton(a.example, &a.params)?;
    let samples = d.default_samples(per_axis);
    let report = soliton_residual(&d, &samples).map_err(|e| CliError::Refused(e.to_string()))?;
    let extras = if a.example == Example::Sphere {
        sphere_extras(&a.params, &samples.points)?
    } else {
        BTreeMap::new()
    };
    let pass = report.passes(a.tol) && extras.values().all(|v| *v < a.tol);
    let out = CheckOutput {
        report,
        extras,
        tolerance: a.tol,
        pass,
    };
    let text = match a.format {
        Format::Json => to_json(&out),
        Format::Csv => check_csv(&out),
    };
    emit(&a.output, stdout, &text)?;
    Ok(if pass { ExitCode::Pass } else { ExitCode::Fail })
}

fn check_csv(out: &CheckOutput) -> String {
    let r = &out.report;
    let mut rows = vec![
        "quantity,value".to_string(),
        format!("example,{}", r.example),
        format!("rho,{}", sci(r.rho)),
        format!("time,{}", sci(r.time)),
        format!("residual_sup,{}", sci(r.residual_sup)),
        format!("lambda_source,{}", r.lambda_source),
        format!("lambda_min,{}", sci(r.lambda_min)),
        format!("lambda_max,{}", sci(r.lambda_max)),
        format!("classification,{}", r.classification),
    ];
    if let Some(c) = &r.lambda_comparison {
        rows.push(format!("closed_form_lambda_min,{}", sci(c.closed_form_min)));
        rows.push(format!("closed_form_lambda_max,{}", sci(c.closed_form_max)));
        rows.push(format!(
            "closed_form_classification,{}",
            c.closed_form_classification
        ));
        rows.push(format!("lambda_max_discrepancy,{}", sci(c.max_discrepancy)));
        rows.push(format!(
            "closed_form_residual_sup,{}",
            sci(c.closed_form_residual_sup)
        ));
    }
    for (k, v) in r.identities.iter().chain(&out.extras) {
        rows.push(format!("{k},{}", sci(*v)));
    }
    rows.push(format!("ctrbs_passing_variant,{}", r.ctrbs_passing_variant));
    rows.push(format!("samples,{}", r.points.count));
    rows.push(format!("tolerance,{}", sci(out.tolerance)));
    rows.push(format!("pass,{}", out.pass));
    rows.join("\n") + "\n"
}

/// One row of `lemma` output, shared by the lemmas and the other identities.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum IdentityRow {
    Lemma(LemmaResult),
    Integral(IdentityCheck),
    Bianchi {
        id: String,
        max_residual: f64,
        grid: String,
        tolerance: f64,
        pass: bool,
    },
}

impl IdentityRow {
    fn pass(&self) -> bool {
        match self {
            IdentityRow::Lemma(l) => l.pass,
            IdentityRow::Integral(c) => c.pass,
            IdentityRow::Bianchi { pass, .. } => *pass,
        }
    }

    fn csv_row(&self) -> String {
        match self {
            IdentityRow::Lemma(l) => l.csv_row(),
            IdentityRow::Integral(c) => format!(
                "{},{},{},{},{},{},{}",
                c.identity,
                sci(c.integral),
                sci(0.0),
                sci(c.residual),
                c.grid,
                sci(c.tolerance),
                c.pass
            ),
            IdentityRow::Bianchi {
                id,
                max_residual,
                grid,
                tolerance,
                pass,
            } => format!(
                "{id},{},{},{},{grid},{},{pass}",
                sci(*max_residual),
                sci(0.0),
                sci(*max_residual),
                sci(*tolerance)
            ),
        }
    }
}

/// Requested identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Identity {
    Lemma(LemmaId),
    Yano,
    Bochner,
    Bianchi,
}

fn parse_which(s: &str) -> Result<Vec<Identity>, CliError> {
    match s.to_ascii_lowercase().as_str() {
        "all" => {
            let mut v: Vec<Identity> = LemmaId::ALL.iter().map(|id| Identity::Lemma(*id)).collect();
            v.push(Identity::Yano);
            v.push(Identity::Bochner);
            Ok(v)
        }
        "yano" => Ok(vec![Identity::Yano]),
        "bochner" => Ok(vec![Identity::Bochner]),
        "bianchi" => Ok(vec![Identity::Bianchi]),
        other => LemmaId::parse(other)
            .map(|id| vec![Identity::Lemma(id)])
            .ok_or_else(|| CliError::Usage(format!("unknown identity '{s}'"))),
    }
}

/// Geometry and test fields of a compact example.
struct CompactSetup {
    grid: QuadratureGrid,
    metric: ChartMetric,
    soliton: Option<SolitonData>,
    xi: VectorField,
    lambda: ScalarField,
}

fn compact_setup(ex: Example, p: &Params, grid: &Option<String>) -> Result<CompactSetup, CliError> {
    let usage = |e: &dyn fmt::Display| CliError::Usage(e.to_string());
    let chart_fields = || -> Result<(VectorField, ScalarField), CliError> {
        let s = SphereConstruction::new(1.0, vec![0.0, 0.0, 1.0]).map_err(|e| usage(&e))?;
        Ok((s.xi(), s.mu()))
    };
    let res = |default: (usize, usize)| -> Result<(usize, usize), CliError> {
        grid.as_deref().map(parse_resolution).unwrap_or(Ok(default))
    };
    let sphere = |c: f64, r: (usize, usize)| sphere_grid(c, r.0, r.1).map_err(|e| usage(&e));
    match ex {
        Example::HamiltonCigar | Example::CigarRb | Example::Warped => {
            Err(CliError::Refused(format!(
                "example '{}' is not compact; integral identities need a closed manifold",
                ex.name()
            )))
        }
        Example::Sphere => {
            let c = p.c.unwrap_or(1.0);
            let z = p.z()?;
            if z.len() != 3 {
                return Err(CliError::Refused(format!(
                    "quadrature grids exist for S^2 only; --Z has {} components",
                    z.len()
                )));
            }
            let d = build_soliton(ex, p)?;
            let s = SphereConstruction::new(c, z).map_err(|e| usage(&e))?;
            Ok(CompactSetup {
                grid: sphere(c, res((128, 256))?)?,
                metric: d.metric.clone(),
                xi: s.xi(),
                lambda: s.mu(),
                soliton: Some(d),
            })
        }
        Example::PerturbedSphere => {
            let eps = p.eps.unwrap_or(DEFAULT_SPHERE_EPS);
            if !(eps.abs() < 1.0) {
                return Err(CliError::Usage(format!(
                    "--eps must lie in (-1, 1), got {eps}"
                )));
            }
            let (xi, lambda) = chart_fields()?;
            Ok(CompactSetup {
                grid: sphere(1.0, res((40, 80))?)?,
                metric: perturbed_sphere_metric(eps),
                soliton: None,
                xi,
                lambda,
            })
        }
        Example::Torus => {
            let (lx, ly) = p.periods()?;
            let d = build_soliton(ex, p)?;
            let (nx, ny) = res((64, 64))?;
            Ok(CompactSetup {
                grid: torus_grid(lx, ly, nx, ny).map_err(|e| usage(&e))?,
                metric: d.metric.clone(),
                xi: d.xi.clone(),
                lambda: ScalarField::constant(0.0),
                soliton: Some(d),
            })
        }
        Example::TorusField => {
            let l = 2.0 * std::f64::consts::PI;
            let (xi, lambda) = torus_test_fields();
            let (nx, ny) = res((64, 64))?;
            Ok(CompactSetup {
                grid: torus_grid(l, l, nx, ny).map_err(|e| usage(&e))?,
                metric: flat_torus(l, l).map_err(|e| usage(&e))?,
                soliton: None,
                xi,
                lambda,
            })
        }
    }
}

fn with_tol(mut c: IdentityCheck, tol: Option<f64>) -> IdentityCheck {
    if let Some(t) = tol {
        let largest = c.terms.iter().map(|t| t.l1).fold(0.0, f64::max);
        c.tolerance = t * (1.0 + largest);
        c.pass = c.residual <= c.tolerance;
    }
    c
}

fn cmd_lemma(
    a: &LemmaArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<ExitCode, CliError> {
    let which = parse_which(&a.which)?;
    a.params.validate(a.example)?;
    if let Some(t) = a.tol {
        if !(t > 0.0) {
            return Err(CliError::Usage("--tol must be positive".into()));
        }
    }
    let setup = compact_setup(a.example, &a.params, &a.grid)?;
    let refused = |e: &dyn fmt::Display| CliError::Refused(e.to_string());
    let mut rows = Vec::new();
    for id in which {
        let row = match id {
            Identity::Lemma(l) => {
                let d = setup.soliton.as_ref().ok_or_else(|| {
                    CliError::Refused(format!("example '{}' carries no soliton", a.example.name()))
                })?;
                let mut r = lemma_residual(l, d, &setup.grid).map_err(|e| refused(&e))?;
                if let Some(t) = a.tol {
                    let largest = r.terms.iter().map(|t| t.l1).fold(0.0, f64::max);
                    r.tolerance = t * (1.0 + largest);
                    r.pass = r.residual <= r.tolerance;
                }
                IdentityRow::Lemma(r)
            }
            Identity::Yano => IdentityRow::Integral(with_tol(
                yano_check(&setup.grid, &setup.metric, &setup.xi).map_err(|e| refused(&e))?,
                a.tol,
            )),
            Identity::Bochner => IdentityRow::Integral(with_tol(
                bochner_check(&setup.grid, &setup.metric, &setup.lambda)
                    .map_err(|e| refused(&e))?,
                a.tol,
            )),
            Identity::Bianchi => {
                let grid = setup
                    .grid
                    .with_metric(&setup.metric)
                    .map_err(|e| refused(&e))?;
                let max_residual = bianchi_sweep(&grid, &setup.metric).map_err(|e| refused(&e))?;
                let tolerance = a.tol.unwrap_or(DEFAULT_BIANCHI_TOL);
                IdentityRow::Bianchi {
                    id: "bianchi".into(),
                    max_residual,
                    grid: grid.to_string(),
                    tolerance,
                    pass: max_residual < tolerance,
                }
            }
        };
        rows.push(row);
    }
    let text = match a.format {
        Format::Csv => {
            let mut lines = vec![LEMMA_CSV_HEADER.to_string()];
            lines.extend(rows.iter().map(IdentityRow::csv_row));
            lines.join("\n") + "\n"
        }
        Format::Json => to_json(&rows),
    };
    emit(&a.output, stdout, &text)?;
    let pass = rows.iter().all(IdentityRow::pass);
    if !pass {
        writeln!(stderr, "one or more identities failed")?;
    }
    Ok(if pass { ExitCode::Pass } else { ExitCode::Fail })
}

fn trajectory_text(t: &Trajectory, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut lines = vec![TRAJECTORY_CSV_HEADER.to_string()];
            lines.extend(t.rows.iter().map(TrajectoryRow::csv_row));
            lines.join("\n") + "\n"
        }
        Format::Json => to_json(t),
    }
}

fn cmd_flow(
    a: &FlowArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<ExitCode, CliError> {
    let profile = InitProfile::parse(&a.init).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown --init '{}' (expected cigar, torus-perturb or flat)",
            a.init
        ))
    })?;
    if a.rho > 0.5 {
        return Err(CliError::Refused(
            FlowError::Refused { rho: a.rho }.to_string(),
        ));
    }
    let h = a.h.unwrap_or(match profile {
        InitProfile::Cigar => 2.0 * CIGAR_HALF_WIDTH / 256.0,
        InitProfile::TorusPerturb | InitProfile::Flat => {
            2.0 * std::f64::consts::PI / TORUS_NODES as f64
        }
    });
    let policy = match a.dt {
        Some(dt) => DtPolicy::Fixed(dt),
        None if a.cfl > 0.0 && a.cfl <= 1.0 => DtPolicy::Cfl { fraction: a.cfl },
        None => {
            return Err(CliError::Usage(format!(
                "--cfl must lie in (0, 1], got {}",
                a.cfl
            )))
        }
    };
    let (state, reference) =
        initial_state(profile, a.rho, h).map_err(|e| CliError::Usage(e.to_string()))?;
    match run_flow(&state, a.t_end, policy, reference.as_ref()) {
        Ok((_, traj)) => {
            emit(&a.output, stdout, &trajectory_text(&traj, a.format))?;
            let last = traj.last();
            writeln!(
                stderr,
                "steps={} time={} max_abs_S={} area={}{}",
                traj.steps,
                sci(last.time),
                sci(last.max_abs_s),
                sci(last.area),
                last.sup_err
                    .map(|e| format!(" sup_err={}", sci(e)))
                    .unwrap_or_default()
            )?;
            Ok(ExitCode::Pass)
        }
        Err(e) => {
            let code = flow_error_code(&e);
            if let FlowError::BlowUp {
                time,
                steps,
                trajectory,
            } = &e
            {
                emit(&a.output, stdout, &trajectory_text(trajectory, a.format))?;
                writeln!(
                    stderr,
                    "blow-up: non-finite state at t = {time} after {steps} steps"
                )?;
                return Ok(code);
            }
            Err(match code {
                ExitCode::Fail => CliError::Refused(e.to_string()),
                _ => CliError::Usage(e.to_string()),
            })
        }
    }
}

/// Exit code of a failed flow run.
pub fn flow_error_code(e: &FlowError) -> ExitCode {
    match e {
        FlowError::BlowUp { .. } => ExitCode::BlowUp,
        FlowError::Refused { .. } => ExitCode::Fail,
        FlowError::Cfl { .. } | FlowError::Parameter(_) => ExitCode::Usage,
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
        CliError::Usage(format!("{THREADS_ENV} must be an integer >= 1, got '{v}'"))
    })?;
    // a pool installed earlier in the same process is kept
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                ExitCode::Usage
            } else {
                ExitCode::Pass
            };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Check(a) => cmd_check(a, stdout),
        Command::Lemma(a) => cmd_lemma(a, stdout, stderr),
        Command::Flow(a) => cmd_flow(a, stdout, stderr),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            match e {
                CliError::Usage(_) | CliError::Io(_) => ExitCode::Usage,
                CliError::Refused(_) => ExitCode::Fail,
            }
        }
    }
}
