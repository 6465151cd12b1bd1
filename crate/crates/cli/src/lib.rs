//! The `zerofree` command line: one verb per experiment, each emitting a
//! [`Report`] as JSON or CSV.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use zerofree::exact::{Ensemble, REAL_SPECTRUM_TOLERANCE};
use zerofree::extended::{
    fourier_eta, fourier_stats, fourier_xi, hom_admissible, hom_polydisk_radius, log_disk_radius,
    polydisk_spectral_comparison, polydisk_zero_probe, tensor_admissible, tensor_polydisk_radius, C_FOURIER,
};
use zerofree::glauber::{
    composed_ising_distribution, ergodicity_check, ising_parameters, ising_table, ising_transform_empirical,
    run_chain, total_connectivity_check, transition_matrix, tv_distance, Start,
};
use zerofree::model::Interaction;
use zerofree::model_file::parse_model;
use zerofree::poly::{to_multiaffine, zero_scan_uniform, ZERO_THRESHOLD};
use zerofree::region::{delta, SamplerOptions};
use zerofree::stability::{
    certify_model, check_two_spin_roots, eta_bound, mixing_time_formula, poly_roots, EtaInputs, EtaVariant,
    MixingKind, RealPolynomial, CERTIFY_SLACK,
};
use zerofree::{Caps, Configuration, Error, Family, Graph, ModelSpec, Pinning, Region};

pub mod sweep;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "zerofree", version, about = "Zero-free regions, spectral independence and Glauber dynamics on small models")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Largest number of sites for exhaustive routines.
    #[arg(long, global = true, default_value_t = 20)]
    pub max_sites: usize,
    /// Largest number of positive-weight states for transition matrices.
    #[arg(long, global = true, default_value_t = 4096)]
    pub max_states: usize,
    /// Largest number of pinned sites for connectivity checks.
    #[arg(long, global = true, default_value_t = 12)]
    pub max_pinned: usize,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Record wall-clock time (makes reports non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
}

impl GlobalArgs {
    fn caps(&self) -> Result<Caps, Error> {
        if self.max_sites == 0 || self.max_states == 0 {
            return Err(Error::Precondition("caps must be positive".into()));
        }
        Ok(Caps {
            max_sites: self.max_sites,
            max_states: self.max_states,
            ..Caps::default()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Run Glauber dynamics from a seed.
    Sample(SampleArgs),
    /// Largest EigMax over all pinnings, by enumeration.
    VerifySi(VerifySiArgs),
    /// Certify a named-family model and compare with enumeration.
    Certify(CertifyArgs),
    /// Roots of a two-spin local polynomial or of given coefficients.
    Roots(RootsArgs),
    /// Distance from a point to the boundary of a region.
    RegionDist(RegionDistArgs),
    /// Spectral-independence constant from a zero-free region.
    Eta(EtaArgs),
    /// Exact mixing diagnostics from the transition matrix.
    MixDiag(MixDiagArgs),
    /// Seeded search for zeros inside a region.
    ZeroScan(ZeroScanArgs),
    /// Near-one admissibility of homomorphism and tensor models.
    Admissible(AdmissibleArgs),
    /// Fourier statistics and certificate of a cube model.
    FourierStats(FourierStatsArgs),
    /// Even subgraphs to Ising: analytic and sampled comparison.
    IsingTransform(IsingTransformArgs),
    /// Run a parameter grid from a TOML file into one table.
    Sweep(SweepArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub steps: u64,
    #[arg(long)]
    pub seed: u64,
    /// `greedy` or a comma-separated configuration.
    #[arg(long, default_value = "greedy")]
    pub start: String,
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifySiArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Compare the largest EigMax with this constant.
    #[arg(long)]
    pub eta: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CertifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Edge field; defaults to the model's own.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct RootsArgs {
    #[arg(long, requires_all = ["gamma", "d"], conflicts_with = "coeffs")]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Ascending coefficients, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub coeffs: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegionDistArgs {
    #[arg(long)]
    pub region: String,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    pub lambda_im: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EtaArgs {
    /// R+, lambda_c_below, lambda_c_above or arb.
    #[arg(long, default_value = "R+")]
    pub variant: String,
    #[arg(long, required_unless_present = "region")]
    pub delta: Option<f64>,
    /// Derive delta from this region at `--lambda`.
    #[arg(long, requires = "lambda")]
    pub region: Option<String>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lambda_c: Option<f64>,
    #[arg(long, requires = "lambda_max")]
    pub lambda_min: Option<f64>,
    #[arg(long, requires = "lambda_min")]
    pub lambda_max: Option<f64>,
    /// Site count for the mixing-time shape.
    #[arg(long)]
    pub n: Option<usize>,
    /// Smallest Gibbs probability for the mixing-time shape.
    #[arg(long, requires = "n")]
    pub mu_min: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct MixDiagArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub horizon: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct ZeroScanArgs {
    /// Model whose multivariate partition function is scanned.
    #[arg(long, conflicts_with = "coeffs", required_unless_present = "coeffs")]
    pub model: Option<PathBuf>,
    /// Univariate polynomial, ascending coefficients.
    #[arg(long, allow_hyphen_values = true)]
    pub coeffs: Option<String>,
    /// Region for every variable; defaults to the certified region of a family model.
    #[arg(long)]
    pub region: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
    /// Random feasible pinnings scanned in addition to the empty one.
    #[arg(long, default_value_t = 0)]
    pub pinnings: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AdmissibleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// Zero-scan samples per pinning over the polydisk (0 skips the probe).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub pinnings: usize,
    /// Compare the largest EigMax with 2/(b delta^2).
    #[arg(long)]
    pub compare: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct FourierStatsArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Marginal bound; computed by enumeration when absent.
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct IsingTransformArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub grid: PathBuf,
}

/// A tabular part of a report, written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub verb: String,
    pub version: String,
    pub inputs: Value,
    pub results: Value,
    /// `None` for verbs without a pass/fail check.
    pub passed: Option<bool>,
    /// The results and formulas exercised.
    pub tags: Vec<String>,
    pub caveats: Vec<String>,
    /// Part of the work was refused by a cap; the exit code is then 3.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub cap_exceeded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl Report {
    fn new(verb: &str, inputs: impl Serialize) -> Self {
        Report {
            verb: verb.into(),
            version: VERSION.into(),
            inputs: serde_json::to_value(inputs).expect("inputs serialize"),
            results: Value::Null,
            passed: None,
            tags: Vec::new(),
            caveats: Vec::new(),
            cap_exceeded: false,
            table: None,
            wall_time: None,
        }
    }

    /// Compact JSON with floats written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
        self.serialize(&mut ser).expect("report serializes");
        String::from_utf8(out).expect("utf-8")
    }

    /// The table if there is one, else `key,value` rows of the scalar results.
    pub fn to_csv(&self) -> String {
        let table = self.table.clone().unwrap_or_else(|| {
            let mut rows = Vec::new();
            flatten("", &self.results, &mut rows);
            if let Some(p) = self.passed {
                rows.push(vec!["passed".into(), p.to_string()]);
            }
            Table {
                header: vec!["key".into(), "value".into()],
                rows,
            }
        });
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.header).expect("in-memory write");
        for r in &table.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<Vec<String>>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&key(k), x, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(&key(&i.to_string()), x, out)),
        Value::Null => {}
        Value::String(s) => out.push(vec![prefix.into(), s.clone()]),
        Value::Number(n) => out.push(vec![prefix.into(), fmt_num(n)]),
        Value::Bool(b) => out.push(vec![prefix.into(), b.to_string()]),
    }
}

fn fmt_num(n: &serde_json::Number) -> String {
    match n.as_f64() {
        Some(x) if n.is_f64() => fmt_f64(x),
        _ => n.to_string(),
    }
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Parse arguments, run the verb and render the report.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_PARSE,
            };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome { code, stdout: text, stderr: String::new() }
            } else {
                Outcome { code, stdout: String::new(), stderr: text }
            };
        }
    };
    let started = Instant::now();
    let report = match dispatch(&cli) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                code: exit_code(&e),
                stdout: String::new(),
                stderr: format!("error: {}\n", e.message()),
            }
        }
    };
    let mut report = report;
    if cli.global.timing {
        report.wall_time = Some(started.elapsed().as_secs_f64());
    }
    let text = match cli.global.format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.to_csv(),
    };
    let code = if report.cap_exceeded {
        EXIT_CAP
    } else if report.passed == Some(false) {
        EXIT_VALIDATION
    } else {
        EXIT_OK
    };
    match &cli.global.output {
        Some(path) => match std::fs::write(path, &text) {
            Ok(()) => Outcome { code, stdout: String::new(), stderr: String::new() },
            Err(e) => Outcome {
                code: EXIT_PARSE,
                stdout: String::new(),
                stderr: format!("error: cannot write {}: {e}\n", path.display()),
            },
        },
        None => Outcome { code, stdout: text, stderr: String::new() },
    }
}

/// Errors of a verb, classified for the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or unparseable input.
    Input(String),
    Core(Error),
}

impl CliError {
    fn message(&self) -> String {
        match self {
            CliError::Input(s) => s.clone(),
            CliError::Core(e) => e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Input(_) | CliError::Core(Error::Parse { .. }) => EXIT_PARSE,
        CliError::Core(Error::CapExceeded { .. }) => EXIT_CAP,
        CliError::Core(_) => EXIT_VALIDATION,
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_model(path: &Path) -> CliResult<ModelSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| match e {
        Error::Parse { line, message } => CliError::Input(format!("{}:{line}: {message}", path.display())),
        other => CliError::Core(other),
    })
}

fn parse_region(s: &str) -> CliResult<Region> {
    s.parse::<Region>().map_err(|e| CliError::Input(format!("region `{s}`: {e}")))
}

fn parse_coeffs(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Input(format!("cannot parse coefficient `{t}`"))))
        .collect()
}

fn to_value(x: impl Serialize) -> Value {
    serde_json::to_value(x).expect("results serialize")
}

fn dispatch(cli: &Cli) -> CliResult<Report> {
    let caps = cli.global.caps()?;
    match &cli.verb {
        Verb::Sample(a) => sample(a, &caps),
        Verb::VerifySi(a) => verify_si(a, &caps),
        Verb::Certify(a) => certify(a, &caps),
        Verb::Roots(a) => roots(a),
        Verb::RegionDist(a) => region_dist(a),
        Verb::Eta(a) => eta(a),
        Verb::MixDiag(a) => mix_diag(a, &caps, cli.global.max_pinned),
        Verb::ZeroScan(a) => zero_scan(a, &caps),
        Verb::Admissible(a) => admissible(a, &caps),
        Verb::FourierStats(a) => fourier(a, &caps),
        Verb::IsingTransform(a) => ising(a, &caps),
        Verb::Sweep(a) => sweep::run_sweep(&a.grid, &caps),
    }
}

fn sample(a: &SampleArgs, caps: &Caps) -> CliResult<Report> {
    let model = load_model(&a.model)?;
    let start = if a.start == "greedy" {
        Start::GreedyFeasible
    } else {
        let spins = a
            .start
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Input(format!("cannot parse spin `{t}`"))))
            .collect::<CliResult<Vec<_>>>()?;
        Start::Given(Configuration::new(spins))
    };
    let run = run_chain(&model, a.steps, a.seed, &start, a.trace, caps)?;
    let mut r = Report::new("sample", a);
    r.results = json!({
        "start": run.start.spins,
        "end": run.end.spins,
        "steps": run.steps,
        "end_weight": model.weight(&run.end),
    });
    if a.trace {
        r.table = Some(Table {
            header: ["step", "site", "old_spin", "new_spin", "config_hash"].map(String::from).to_vec(),
            rows: run
                .trace
                .iter()
                .map(|t| {
                    vec![
                        t.step.to_string(),
                        t.site.to_string(),
                        t.old_spin.to_string(),
                        t.new_spin.to_string(),
                        format!("{:016x}", t.config_hash),
                    ]
                })
                .collect(),
        });
    }
    r.tags.push("Glauber dynamics: heat-bath update of a uniformly chosen site".into());
    Ok(r)
}

fn verify_si(a: &VerifySiArgs, caps: &Caps) -> CliResult<Report> {
    let model = load_model(&a.model)?;
    let scan = Ensemble::new(&model, caps)?.spectral_scan()?;
    let mut r = Report::new("verify-si", a);
    let real = scan.max_symmetry_residual <= REAL_SPECTRUM_TOLERANCE;
    let within = a.eta.map(|eta| scan.max_eigmax <= eta + CERTIFY_SLACK);
    r.passed = Some(real && within.unwrap_or(true));
    r.results = json!({ "scan": to_value(&scan), "real_spectrum_certified": real, "within_eta": within });
    r.tags.push("spectral independence: largest eigenvalue of every conditional influence matrix".into());
    r.caveats.push("EigMax is computed on the symmetrized influence matrix; realness is certified by the symmetry residual".into());
    Ok(r)
}

fn certify(a: &CertifyArgs, caps: &Caps) -> CliResult<Report> {
    let model = load_model(&a.model)?;
    let family = model
        .family()
        .ok_or_else(|| Error::Precondition("certify needs a named-family holant model".into()))?;
    let lambda = a.lambda.unwrap_or(family.lambda());
    let c = certify_model(&model, lambda, caps)?;
    let mut r = Report::new("certify", a);
    r.passed = c.comparison.as_ref().map(|x| x.passes);
    if let Some(s) = &c.skipped {
        r.cap_exceeded = true;
        r.caveats.push(format!("brute-force comparison skipped: {s}"));
    }
    r.tags.extend(c.certificate.tags.iter().cloned());
    r.tags.push(format!("zero-free region for {}: {}", c.stability.family, c.stability.region));
    r.caveats.extend(c.stability.notes.iter().cloned());
    r.results = to_value(&c);
    Ok(r)
}

fn roots_json(roots: &[Complex64]) -> Value {
    to_value(roots.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn roots(a: &RootsArgs) -> CliResult<Report> {
    let mut r = Report::new("roots", a);
    if let (Some(beta), Some(gamma), Some(d)) = (a.beta, a.gamma, a.d) {
        let rep = check_two_spin_roots(beta, gamma, d)?;
        r.passed = Some(rep.all_negative_real && rep.ratios_ok);
        r.results = json!({
            "roots": roots_json(&rep.roots),
            "all_negative_real": rep.all_negative_real,
            "ratios_ok": rep.ratios_ok,
            "max_ratio": rep.max_ratio,
            "epsilon_d": rep.roots.first().map(|z| -z.re),
        });
        r.tags.push("two-spin local polynomial: real negative roots with consecutive ratios below beta*gamma".into());
    } else if let Some(c) = &a.coeffs {
        let p = RealPolynomial::new(parse_coeffs(c)?)?;
        let roots = poly_roots(&p)?;
        let residual = roots.iter().map(|&z| p.eval(z).norm() / p.scale_at(z)).fold(0.0, f64::max);
        r.results = json!({ "roots": roots_json(&roots), "max_relative_residual": residual });
    } else {
        return Err(CliError::Input("give --beta --gamma --d or --coeffs".into()));
    }
    r.tags.push("polynomial roots by Aberth iteration with companion-matrix fallback".into());
    Ok(r)
}

fn region_dist(a: &RegionDistArgs) -> CliResult<Report> {
    let region = parse_region(&a.region)?;
    let z = Complex64::new(a.lambda, a.lambda_im);
    let d = region.dist_to_boundary(z)?;
    let mut r = Report::new("region-dist", a);
    let rel = (a.lambda_im == 0.0 && a.lambda > 0.0).then(|| delta(a.lambda, &region)).transpose()?;
    r.results = json!({
        "region": region.to_string(),
        "contains": region.contains(z),
        "distance": d.value,
        "method": to_value(d.method),
        "delta": rel,
    });
    r.tags.push("distance to the boundary of a zero-free region".into());
    Ok(r)
}

fn eta(a: &EtaArgs) -> CliResult<Report> {
    let variant: EtaVariant = a.variant.parse()?;
    let (d, region) = match (&a.region, a.delta) {
        (Some(s), _) => {
            let region = parse_region(s)?;
            let lambda = a.lambda.expect("clap requires lambda with region");
            (delta(lambda, &region)?, Some(region.to_string()))
        }
        (None, Some(d)) => (d, None),
        (None, None) => return Err(CliError::Input("give --delta or --region".into())),
    };
    let mut cert = eta_bound(EtaInputs {
        variant,
        delta: d,
        b: a.b,
        lambda: a.lambda,
        lambda_c: a.lambda_c,
        lambda_extremes: a.lambda_min.zip(a.lambda_max),
    })?;
    cert.region = region;
    let mut r = Report::new("eta", a);
    r.tags.extend(cert.tags.iter().cloned());
    let mixing = match (a.n, a.mu_min) {
        (Some(n), Some(mu)) => Some(mixing_time_formula(MixingKind::Generic, n, cert.eta, mu)?),
        (Some(n), None) => Some(mixing_time_formula(MixingKind::BoundedDegree, n, cert.eta, 1.0)?),
        _ => None,
    };
    if let Some(m) = &mixing {
        r.caveats.push(m.caveat.clone());
    }
    r.results = json!({ "certificate": to_value(&cert), "mixing": to_value(&mixing) });
    Ok(r)
}

fn mix_diag(a: &MixDiagArgs, caps: &Caps, max_pinned: usize) -> CliResult<Report> {
    let model = load_model(&a.model)?;
    let p = transition_matrix(&model, caps)?;
    let table = Ensemble::new(&model, caps)?.gibbs_table(&Pinning::empty(model.site_count()))?;
    let gibbs_gap = p
        .states
        .iter()
        .zip(&p.stationary)
        .map(|(c, &s)| (table.probability(c) - s).abs())
        .fold(0.0, f64::max);
    let erg = ergodicity_check(&model, caps)?;
    let total = total_connectivity_check(&model, max_pinned, caps)?;
    let mut mix = p.worst_case_tv_curve(a.horizon);
    let mut r = Report::new("mix-diag", a);
    if let Some(f) = model.family() {
        if let Ok(c) = certify_model(&model, f.lambda(), caps) {
            let shape = mixing_time_formula(MixingKind::Generic, model.site_count(), c.certificate.eta, table.min_probability())?;
            mix.theoretical_bound = Some(shape.value);
            r.caveats.push(shape.caveat);
            r.tags.push(format!("mixing from spectral independence: {}", shape.formula));
        }
    }
    let db = p.detailed_balance_residual();
    r.passed = Some(erg.ergodic && db <= 1e-12 && gibbs_gap <= 1e-12 && mix.t_mix_observed.is_some());
    r.results = json!({
        "states": p.len(),
        "detailed_balance_residual": db,
        "stationarity_residual": p.stationarity_residual(),
        "row_sum_residual": p.row_sum_residual(),
        "stationary_vs_gibbs": gibbs_gap,
        "ergodicity": to_value(&erg),
        "pinned_connectivity_failure": to_value(&total),
        "t_mix_observed": mix.t_mix_observed,
        "theoretical_bound": mix.theoretical_bound,
    });
    r.table = Some(Table {
        header: vec!["step".into(), "tv".into()],
        rows: mix.tv_curve.iter().map(|(t, v)| vec![t.to_string(), fmt_f64(*v)]).collect(),
    });
    r.tags.push("Glauber transition matrix: reversibility and exact total-variation curve".into());
    Ok(r)
}

fn zero_scan(a: &ZeroScanArgs, caps: &Caps) -> CliResult<Report> {
    let mut r = Report::new("zero-scan", a);
    let options = SamplerOptions::default();
    if let Some(c) = &a.coeffs {
        let region = parse_region(a.region.as_deref().ok_or_else(|| CliError::Input("--coeffs needs --region".into()))?)?;
        let coeffs = parse_coeffs(c)?;
        let p = RealPolynomial::new(coeffs.clone())?;
        let roots = poly_roots(&p)?;
        let inside: Vec<Complex64> = roots.iter().copied().filter(|z| region.contains(*z)).collect();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(a.seed);
        let mut min = f64::INFINITY;
        for _ in 0..a.samples {
            min = min.min(p.eval(region.sample(&mut rng, &options)?).norm());
        }
        let zero_found = !inside.is_empty() || min < ZERO_THRESHOLD;
        r.passed = Some(!zero_found);
        r.results = json!({
            "region": region.to_string(),
            "min_sampled_modulus": min,
            "roots_inside": roots_json(&inside),
            "zero_found": zero_found,
        });
        r.tags.push("falsification probe of a zero-free region".into());
        return Ok(r);
    }
    let model = load_model(a.model.as_ref().expect("clap requires model or coeffs"))?;
    let region = match &a.region {
        Some(s) => parse_region(s)?,
        None => {
            let f = model.family().ok_or_else(|| CliError::Input("--region is required for models without a family".into()))?;
            let g = model.graph().expect("families live on graphs");
            zerofree::stability::stability_region_for_family(f, g.max_degree())?.region
        }
    };
    let ensemble = Ensemble::new(&model, caps)?;
    let mut pinnings = vec![Pinning::empty(model.site_count())];
    pinnings.extend(ensemble.random_pinnings(a.pinnings, a.seed));
    let mut rows = Vec::new();
    let mut min = f64::INFINITY;
    for (i, tau) in pinnings.iter().enumerate() {
        let p = to_multiaffine(&model, tau, caps)?;
        let rep = zero_scan_uniform(&p, &region, a.samples, a.seed.wrapping_add(i as u64), &options)?;
        min = min.min(rep.min_modulus);
        rows.push(vec![
            i.to_string(),
            format!("{:?}", tau.pairs()),
            fmt_f64(rep.min_modulus),
            rep.zero_found.to_string(),
        ]);
    }
    let zero_found = min < ZERO_THRESHOLD;
    r.passed = Some(!zero_found);
    r.results = json!({ "region": region.to_string(), "scans": pinnings.len(), "min_modulus": min, "zero_found": zero_found });
    r.table = Some(Table {
        header: ["scan", "pinning", "min_modulus", "zero_found"].map(String::from).to_vec(),
        rows,
    });
    r.tags.push("pinned partition functions stay zero-free in the region".into());
    r.caveats.push("a seeded random search: a falsification probe, not a proof".into());
    Ok(r)
}

fn complex_rows(rows: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    rows.iter().map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect()
}

fn admissible(a: &AdmissibleArgs, caps: &Caps) -> CliResult<Report> {
    let model = load_model(&a.model)?;
    let mut r = Report::new("admissible", a);
    let (adm, radius) = match model.interaction() {
        Interaction::VertexSpin { graph, matrices, .. } => {
            r.tags.push("graph homomorphisms: entries within gamma/(Delta+gamma) of one".into());
            let adm = hom_admissible(&complex_rows(matrices), graph.max_degree(), a.eps)?;
            (adm, adm.admissible.then(|| hom_polydisk_radius(graph.max_degree(), a.eps)).transpose()?)
        }
        Interaction::TensorNetwork { graph, tensors, .. } => {
            r.tags.push("tensor networks: entries within gamma/(Delta+1+gamma) of one".into());
            let adm = tensor_admissible(&complex_rows(tensors), graph.max_degree(), a.eps)?;
            (adm, adm.admissible.then(|| tensor_polydisk_radius(graph.max_degree(), a.eps)).transpose()?)
        }
        _ => return Err(Error::Precondition("admissible needs a vertexspin or tensor model".into()).into()),
    };
    let mut passed = adm.admissible;
    let mut probe = None;
    let mut comparison = None;
    if let Some(c) = radius {
        if a.samples > 0 {
            let p = polydisk_zero_probe(&model, c, a.pinnings, a.samples, a.seed, caps)?;
            passed &= !p.zero_found;
            probe = Some(p);
        }
        if a.compare {
            let cmp = polydisk_spectral_comparison(&model, c, caps)?;
            passed &= cmp.passes;
            comparison = Some(cmp);
            r.tags.push("eta = 2/(b delta^2) from a zero-free polydisk around the fields".into());
        }
    }
    r.passed = Some(passed);
    r.results = json!({
        "admissibility": to_value(adm),
        "polydisk_radius": radius,
        "probe": to_value(&probe),
        "comparison": to_value(&comparison),
    });
    Ok(r)
}

fn fourier(a: &FourierStatsArgs, caps: &Caps) -> CliResult<Report> {
    let model = load_model(&a.model)?;
    let Interaction::CubeFourier { potential } = model.interaction() else {
        return Err(Error::Precondition("fourier-stats needs a cube model".into()).into());
    };
    let stats = fourier_stats(potential);
    let mut r = Report::new("fourier-stats", a);
    r.tags.push("cube potentials: sqrt(deg f) L(f) below the absolute constant C".into());
    let condition = stats.condition_value < C_FOURIER;
    let mut results = json!({
        "stats": to_value(stats),
        "c_fourier": C_FOURIER,
        "condition_holds": condition,
        "dobrushin_condition": stats.dobrushin_value < 1.0,
    });
    r.caveats.push("the (deg f - 1) L(f) < 1 comparison is informational".into());
    if condition {
        let xi = fourier_xi(&stats);
        let ensemble = Ensemble::new(&model, caps);
        let b = match (a.b, &ensemble) {
            (Some(b), _) => b,
            (None, Ok(e)) => e.marginal_bound()?,
            (None, Err(e)) => return Err(e.clone().into()),
        };
        let cert = fourier_eta(potential, b)?;
        results["xi"] = to_value(xi);
        results["disk_radius"] = to_value(log_disk_radius(xi));
        results["certificate"] = to_value(&cert);
        r.tags.extend(cert.tags.iter().cloned());
        if let Ok(e) = ensemble {
            let scan = e.spectral_scan()?;
            let passes = scan.max_eigmax <= cert.eta + CERTIFY_SLACK;
            results["max_eigmax"] = to_value(scan.max_eigmax);
            results["comparison_passes"] = to_value(passes);
            r.passed = Some(passes);
        }
        r.caveats.push("disk radius 1 - exp(-xi) is one valid choice of the polydisk".into());
    }
    r.results = results;
    Ok(r)
}

fn ising(a: &IsingTransformArgs, caps: &Caps) -> CliResult<Report> {
    let model = load_model(&a.model)?;
    let Some(Family::EvenSubgraph { lambda, rho }) = model.family().copied() else {
        return Err(Error::Precondition("ising-transform needs an even_subgraph model".into()).into());
    };
    let params = ising_parameters(lambda, rho)?;
    let graph: &Graph = model.graph().expect("families live on graphs");
    let target = ising_table(graph, params.beta, params.field);
    let analytic = tv_distance(&composed_ising_distribution(&model, caps)?, &target);
    let empirical = if a.draws > 0 {
        Some(ising_transform_empirical(&model, a.draws, a.seed, caps)?.tv)
    } else {
        None
    };
    let mut r = Report::new("ising-transform", a);
    r.passed = Some(analytic <= 1e-10);
    r.results = json!({
        "ising_beta": params.beta,
        "ising_field": params.field,
        "analytic_tv": analytic,
        "empirical_tv": empirical,
        "draws": a.draws,
    });
    r.tags.push("even subgraphs map to the ferromagnetic Ising model with beta = (1+lambda)/(1-lambda), field = (1+rho)/(1-rho)".into());
    Ok(r)
}

/// Lookup used by reports that echo results as maps.
pub fn results_map(r: &Report) -> BTreeMap<String, String> {
    let mut rows = Vec::new();
    flatten("", &r.results, &mut rows);
    rows.into_iter().map(|mut kv| (kv.remove(0), kv.remove(0))).collect()
}
