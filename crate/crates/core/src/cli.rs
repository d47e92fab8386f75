//! Command-line front end. Every subcommand produces one CSV table whose
//! leading `# ` lines name the parameters of the run; output depends only
//! on the arguments, never on the clock or the thread count.
//!
//! Exit codes: 0 success, 1 a checked property failed (or a computation
//! error), 2 usage error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::anova::{anova_audit, AnovaConfig};
use crate::fixtures::{inverse_sqrt_density, PolyGaussian};
use crate::kernel::{KernelContext, KernelError, WeightParams};
use crate::lattice::LatticeError;
use crate::norms::{
    audit_equivalence, reproducing_check, truncated_norms, NormConfig, NormError, PROFILE_RADII,
};
use crate::option::{
    price, price_reference, AsianOptionSpec, Averaging, Factorization, OptionError, PricingMethod, RuleConfig,
    VectorChoice,
};
use crate::preint::{PreintError, DEFAULT_INNER_ORDER, DEFAULT_ROOT_TOL};
use crate::weights::{PsiFamily, RhoFamily, WeightError, WeightPair};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(#[from] clap::Error),
    #[error("config file {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Preint(#[from] PreintError),
    #[error(transparent)]
    Option(#[from] OptionError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => EXIT_OK,
            CliError::Clap(_) | CliError::Config { .. } | CliError::Usage(_) => EXIT_USAGE,
            CliError::Option(OptionError::InvalidSpec(_)) => EXIT_USAGE,
            _ => EXIT_PROPERTY_FAILURE,
        }
    }
}

#[derive(Parser, Debug, Clone)]
#[command(name = "anova-qmc", version, about = "Weighted ANOVA spaces on R^d and lattice QMC with preintegration")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `key=value` file of flag defaults; flags on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Weak/strong weight conditions and C(ρ, ψ) for a sweep of ψ.
    Conditions(ConditionsArgs),
    /// C(ρ, ψ) and the norm-equivalence constant for product weights.
    Constant(WeightArgs),
    /// Kernel identities at random points.
    KernelCheck(KernelCheckArgs),
    /// Norm-equivalence audits: sandwich sweep, counterexample, reproducing property.
    NormEquiv(NormEquivArgs),
    /// ANOVA decomposition audit of a random fixture.
    Anova(AnovaArgs),
    /// Error-versus-N sweep of an Asian option estimator with a fitted rate.
    Converge(ConvergeArgs),
    /// Price an Asian call.
    Price(PriceArgs),
}

#[derive(Args, Debug, Clone)]
pub struct WeightArgs {
    /// Density ρ: `gaussian` or `logistic`.
    #[arg(long, default_value = "gaussian")]
    pub rho: RhoFamily,
    /// Weight ψ: `gaussian_decay:alpha=A`, `exp_decay:alpha=A` or `constant:c=C`.
    #[arg(long)]
    pub psi: Option<PsiFamily>,
    /// Product weights γ_1,…,γ_d; their count sets the dimension.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub gamma: Vec<f64>,
}

pub const DEFAULT_PSI: PsiFamily = PsiFamily::GaussianDecay { alpha: 4.0 };

impl WeightArgs {
    fn pair(&self, default_psi: PsiFamily) -> Result<WeightPair, CliError> {
        Ok(WeightPair::new(self.rho, self.psi.unwrap_or(default_psi))?)
    }

    fn context(&self, default_psi: PsiFamily) -> Result<KernelContext, CliError> {
        let pair = self.pair(default_psi)?;
        let weights = WeightParams::product(self.gamma.clone())?;
        Ok(KernelContext::new(vec![pair; self.gamma.len()], weights)?)
    }

    fn params(&self, p: &mut Params, default_psi: PsiFamily) {
        p.push("rho", self.rho);
        p.push("psi", self.psi.unwrap_or(default_psi));
        p.push("gamma", join_num(&self.gamma));
    }
}

#[derive(Args, Debug, Clone)]
pub struct ConditionsArgs {
    #[arg(long, default_value = "gaussian")]
    pub rho: RhoFamily,
    /// ψ families to classify (comma separated or repeated). Defaults to
    /// the Gaussian-decay sweep α ∈ {0.4, 0.5, 0.9, 1, 1.1, 4}.
    #[arg(long, value_delimiter = ',')]
    pub psi: Vec<PsiFamily>,
}

#[derive(Args, Debug, Clone)]
pub struct KernelCheckArgs {
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Number of random points y.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditCheck {
    /// `‖f‖_W² ≤ ‖f‖_H² ≤ bound ‖f‖_W²` for random fixtures.
    Sandwich,
    /// `f = 1/√ρ`: finite W norm, linearly growing truncated L²_ρ norm.
    Counterexample,
    /// `f(y) = ⟨f, K(·, y)⟩_W` for random fixtures and points.
    Reproducing,
}

#[derive(Args, Debug, Clone)]
pub struct NormEquivArgs {
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long, value_enum, default_value_t = AuditCheck::Sandwich)]
    pub check: AuditCheck,
    /// Number of random fixtures (default 50 for sandwich, 3 for reproducing).
    #[arg(long)]
    pub count: Option<usize>,
    /// Random points per fixture for the reproducing check.
    #[arg(long, default_value_t = 10)]
    pub points: usize,
}

#[derive(Args, Debug, Clone)]
pub struct AnovaArgs {
    #[command(flatten)]
    pub weights: WeightArgs,
    /// Random probe points for reconstruction.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
}

#[derive(Args, Debug, Clone)]
pub struct OptionArgs {
    #[arg(long, default_value_t = 100.0)]
    pub s0: f64,
    #[arg(long, default_value_t = 100.0)]
    pub strike: f64,
    #[arg(long, default_value_t = 0.05)]
    pub r: f64,
    #[arg(long, default_value_t = 0.2)]
    pub sigma: f64,
    /// Maturity in years.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Number of monitoring dates.
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    /// `arith` or `geom`.
    #[arg(long, default_value = "arith")]
    pub avg: Averaging,
    /// `std`, `bb` or `pca`.
    #[arg(long, default_value = "bb")]
    pub fact: Factorization,
}

impl OptionArgs {
    fn spec(&self) -> Result<AsianOptionSpec, CliError> {
        let spec = AsianOptionSpec {
            s0: self.s0,
            strike: self.strike,
            r: self.r,
            sigma: self.sigma,
            t_final: self.t,
            d: self.d,
            averaging: self.avg,
            factorization: self.fact,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn params(&self, p: &mut Params) {
        p.push("s0", self.s0);
        p.push("strike", self.strike);
        p.push("r", self.r);
        p.push("sigma", self.sigma);
        p.push("t", self.t);
        p.push("d", self.d);
        p.push("avg", self.avg);
        p.push("fact", self.fact);
    }
}

#[derive(Args, Debug, Clone)]
pub struct RuleArgs {
    /// Number of independent random shifts.
    #[arg(long, default_value_t = 16)]
    pub shifts: usize,
    /// Generating vector file (`N=…` / `z=…`); an embedded vector serves
    /// every N dividing its own.
    #[arg(long, conflicts_with = "korobov_a")]
    pub vector_file: Option<PathBuf>,
    /// Korobov parameter a: z = (1, a, a², …) mod N.
    #[arg(long)]
    pub korobov_a: Option<u64>,
    /// Gauss–Legendre order of the inner preintegration rule.
    #[arg(long, default_value_t = DEFAULT_INNER_ORDER)]
    pub inner_order: usize,
    /// Kink root tolerance |φ| ≤ tol.
    #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
    pub root_tol: f64,
}

impl RuleArgs {
    fn config(&self, n: u64, seed: u64) -> RuleConfig {
        let vector = match (&self.vector_file, self.korobov_a) {
            (Some(path), _) => VectorChoice::File(path.clone()),
            (None, Some(a)) => VectorChoice::Korobov(a),
            (None, None) => VectorChoice::Default,
        };
        RuleConfig { n, m: self.shifts, seed, vector, inner_order: self.inner_order, root_tol: self.root_tol }
    }

    fn params(&self, p: &mut Params) {
        p.push("shifts", self.shifts);
        p.push(
            "vector",
            match (&self.vector_file, self.korobov_a) {
                (Some(path), _) => format!("file:{}", path.display()),
                (None, Some(a)) => format!("korobov:{a}"),
                (None, None) => "default".to_string(),
            },
        );
        p.push("inner_order", self.inner_order);
        p.push("root_tol", num(self.root_tol));
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    Mc,
    Qmc,
    QmcPreint,
}

impl From<MethodArg> for PricingMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mc => PricingMethod::Mc,
            MethodArg::Qmc => PricingMethod::Qmc,
            MethodArg::QmcPreint => PricingMethod::QmcPreint,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub option: OptionArgs,
    #[command(flatten)]
    pub rule: RuleArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::QmcPreint)]
    pub method: MethodArg,
    /// Point counts N.
    #[arg(long, value_delimiter = ',', default_value = "128,256,512,1024,2048,4096,8192")]
    pub n_list: Vec<u64>,
    /// Fail (exit 1) if the fitted slope exceeds this value.
    #[arg(long, allow_negative_numbers = true)]
    pub max_slope: Option<f64>,
    /// Fail (exit 1) if the fitted slope is below this value.
    #[arg(long, allow_negative_numbers = true)]
    pub min_slope: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Text,
}

#[derive(Args, Debug, Clone)]
pub struct PriceArgs {
    #[command(flatten)]
    pub option: OptionArgs,
    #[command(flatten)]
    pub rule: RuleArgs,
    /// Lattice points per shift (or samples per batch for mc).
    #[arg(long, default_value_t = 1 << 13)]
    pub n: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::QmcPreint)]
    pub method: MethodArg,
    /// Add the reference price (closed form or stored high-effort run).
    #[arg(long)]
    pub reference: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

/// Ordered `key=value` parameters written as `# ` header lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(pub Vec<(String, String)>);

impl Params {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }
}

/// One CSV table with its parameter header and trailing notes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub params: Params,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Written as `# ` lines after the rows.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(params: Params, columns: &[&str]) -> Self {
        Self { params, columns: columns.iter().map(|c| c.to_string()).collect(), ..Self::default() }
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut out = String::new();
        for (k, v) in &self.params.0 {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        out.push_str(&String::from_utf8_lossy(&bytes));
        for note in &self.notes {
            out.push_str(&format!("# {note}\n"));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub table: Table,
    /// Every checked property held.
    pub passed: bool,
    /// Human-readable rendering, when the command offers one.
    pub text: Option<String>,
}

impl Report {
    pub fn render(&self) -> Result<String, CliError> {
        match &self.text {
            Some(t) => Ok(t.clone()),
            None => self.table.to_csv(),
        }
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn join_num(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(";")
}

/// Shortest round-trip decimal; exponent form outside `[1e-4, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn yes_no(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

/// Least-squares fit of `log₂ rms` against `log₂ N`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub n: Vec<u64>,
    pub rms: Vec<f64>,
    /// Points used by the fit: all but the smallest N.
    pub fitted: Vec<bool>,
    pub slope: f64,
    pub stderr: f64,
}

/// Smallest number of distinct N values entering the fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Fit the rate, leaving out the smallest N (pre-asymptotic).
pub fn fit_rate(n: &[u64], rms: &[f64]) -> Result<RateReport, CliError> {
    if n.len() != rms.len() {
        return Err(CliError::Usage("N list and error list differ in length".into()));
    }
    let mut distinct = n.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != n.len() {
        return Err(CliError::Usage("N values must be distinct".into()));
    }
    if n.len() < MIN_FIT_POINTS + 1 {
        return Err(CliError::Usage(format!(
            "rate fit needs at least {} N values (the smallest is left out)",
            MIN_FIT_POINTS + 1
        )));
    }
    let smallest = distinct[0];
    let fitted: Vec<bool> = n.iter().map(|&v| v != smallest).collect();
    let pts: Vec<(f64, f64)> = n
        .iter()
        .zip(rms)
        .zip(&fitted)
        .filter(|(_, &f)| f)
        .map(|((&v, &e), _)| ((v as f64).log2(), e.log2()))
        .collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return Err(CliError::Usage("rms errors must be positive and finite to fit a rate".into()));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(RateReport { n: n.to_vec(), rms: rms.to_vec(), fitted, slope, stderr })
}

/// Parse arguments, filling flags missing from `args` from the `--config`
/// file. Config keys are flag names without the leading dashes.
pub fn parse_args<I, T>(args: I) -> Result<Cli, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let config = args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    });
    let mut full = args.clone();
    if let Some(path) = config {
        let path = PathBuf::from(path);
        for (key, value) in read_config(&path)? {
            if key == "config" {
                return Err(CliError::Config { path, message: "nested config files are not supported".into() });
            }
            let flag = format!("--{key}");
            let given = args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
            if given {
                continue;
            }
            match value.as_str() {
                "true" => full.push(flag),
                "false" => {}
                v => full.push(format!("{flag}={v}")),
            }
        }
    }
    Ok(Cli::try_parse_from(full)?)
}

fn read_config(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config { path: path.to_path_buf(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Config {
            path: path.to_path_buf(),
            message: format!("line {}: expected key=value", i + 1),
        })?;
        out.push((k.trim().replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn base_params(cli: &Cli, command: &str) -> Params {
    let mut p = Params::default();
    p.push("anova-qmc", env!("CARGO_PKG_VERSION"));
    p.push("command", command);
    p.push("seed", cli.seed);
    p
}

/// Run the parsed command.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Conditions(a) => cmd_conditions(cli, a),
        Command::Constant(a) => cmd_constant(cli, a),
        Command::KernelCheck(a) => cmd_kernel_check(cli, a),
        Command::NormEquiv(a) => cmd_norm_equiv(cli, a),
        Command::Anova(a) => cmd_anova(cli, a),
        Command::Converge(a) => cmd_converge(cli, a),
        Command::Price(a) => cmd_price(cli, a),
    }
}

/// Parse, execute and write the output; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let cli = match parse_args(args) {
        Ok(cli) => cli,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let result = execute(&cli).and_then(|report| Ok((report.render()?, report.passed)));
    match result {
        Ok((output, passed)) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &output).map_err(|e| CliError::Io { path: path.clone(), source: e }),
                None => {
                    print!("{output}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return e.exit_code();
            }
            if passed {
                EXIT_OK
            } else {
                eprintln!("one or more checked properties failed");
                EXIT_PROPERTY_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub const CONDITION_SWEEP: [f64; 6] = [0.4, 0.5, 0.9, 1.0, 1.1, 4.0];

fn cmd_conditions(cli: &Cli, a: &ConditionsArgs) -> Result<Report, CliError> {
    let psis: Vec<PsiFamily> = if a.psi.is_empty() {
        CONDITION_SWEEP.iter().map(|&alpha| PsiFamily::GaussianDecay { alpha }).collect()
    } else {
        a.psi.clone()
    };
    let mut p = base_params(cli, "conditions");
    p.push("rho", a.rho);
    p.push("psi", join(&psis));
    let mut t = Table::new(
        p,
        &["rho", "psi", "weak", "strong", "c_constant", "numeric_weak", "numeric_strong", "numeric_status", "consistent"],
    );
    let mut passed = true;
    for psi in psis {
        let pair = WeightPair::new(a.rho, psi)?;
        let analytic = pair.check_conditions()?;
        let (nw, ns, status) = match pair.classify_numerically() {
            Ok(r) => (yes_no(r.weak_holds), yes_no(r.strong_holds), "classified".to_string()),
            Err(WeightError::ClassificationInconclusive { .. }) => (String::new(), String::new(), "inconclusive".into()),
            Err(e) => return Err(e.into()),
        };
        // an inconclusive numeric verdict never contradicts the analytic one
        let consistent = status == "inconclusive"
            || (nw == yes_no(analytic.weak_holds) && ns == yes_no(analytic.strong_holds));
        passed &= consistent;
        t.rows.push(vec![
            a.rho.to_string(),
            psi.to_string(),
            yes_no(analytic.weak_holds),
            yes_no(analytic.strong_holds),
            analytic.c_constant.map(num).unwrap_or_default(),
            nw,
            ns,
            status,
            yes_no(consistent),
        ]);
    }
    Ok(Report { table: t, passed, text: None })
}

/// Relative agreement required between the embedding constant and its
/// product-weight closed form.
pub const PRODUCT_BOUND_TOL: f64 = 1e-12;

fn cmd_constant(cli: &Cli, a: &WeightArgs) -> Result<Report, CliError> {
    let mut p = base_params(cli, "constant");
    a.params(&mut p, DEFAULT_PSI);
    let pair = a.pair(DEFAULT_PSI)?;
    let c = pair.compute_c()?;
    let ctx = a.context(DEFAULT_PSI)?;
    let embed = ctx.embed_constant()?;
    let product: f64 = a.gamma.iter().map(|g| 1.0 + g * c).product();
    let ok = (embed - product).abs() <= PRODUCT_BOUND_TOL * product;
    let mut t = Table::new(p, &["quantity", "value"]);
    t.rows.push(vec!["c_constant".into(), num(c)]);
    t.rows.push(vec!["embed_constant".into(), num(embed)]);
    t.rows.push(vec!["product_formula".into(), num(product)]);
    t.rows.push(vec!["agree".into(), yes_no(ok)]);
    Ok(Report { table: t, passed: ok, text: None })
}

pub const ANNIHILATION_TOL: f64 = 1e-8;
pub const ENERGY_TOL: f64 = 1e-8;
pub const KERNEL_MEAN_TOL: f64 = 1e-7;
pub const DIAGONAL_TOL: f64 = 1e-8;

fn cmd_kernel_check(cli: &Cli, a: &KernelCheckArgs) -> Result<Report, CliError> {
    let mut p = base_params(cli, "kernel-check");
    a.weights.params(&mut p, DEFAULT_PSI);
    p.push("points", a.points);
    let ctx = a.weights.context(DEFAULT_PSI)?;
    let d = ctx.dim();
    let mut rng = ChaCha20Rng::seed_from_u64(cli.seed);
    let mut t = Table::new(p, &["check", "coordinate", "y", "value", "expected", "abs_error", "tolerance", "pass"]);
    let mut passed = true;
    let mut row = |t: &mut Table, check: &str, j: String, y: String, value: f64, expected: f64, tol: f64| {
        let err = (value - expected).abs();
        let ok = err <= tol;
        passed &= ok;
        t.rows.push(vec![
            check.into(),
            j,
            y,
            num(value),
            num(expected),
            num(err),
            num(tol),
            yes_no(ok),
        ]);
    };
    for _ in 0..a.points {
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        for (j, &yj) in y.iter().enumerate() {
            let coord = (j + 1).to_string();
            let ann = ctx.eta_rho_integral(j, yj)?;
            row(&mut t, "annihilation", coord.clone(), num(yj), ann, 0.0, ANNIHILATION_TOL);
            let energy = ctx.eta_dx_energy(j, yj)?;
            let diag = ctx.eta(j, yj, yj)?;
            row(&mut t, "derivative_energy", coord, num(yj), energy, diag, ENERGY_TOL);
        }
        let mean = ctx.kernel_rho_integral(&y)?;
        row(&mut t, "kernel_mean", "all".into(), join_num(&y), mean, 1.0, KERNEL_MEAN_TOL);
    }
    let cs = ctx.c_constants();
    for j in 0..d {
        if let Ok(cs) = &cs {
            let diag = ctx.diagonal_integral(j)?;
            row(&mut t, "diagonal_mean", (j + 1).to_string(), String::new(), diag, cs[j], DIAGONAL_TOL);
        }
    }
    Ok(Report { table: t, passed, text: None })
}

/// `ψ = exp(-3x²/4)`, under which `1/√ρ` has a finite W norm.
pub const COUNTEREXAMPLE_PSI: PsiFamily = PsiFamily::GaussianDecay { alpha: 2.0 / 3.0 };
pub const REPRODUCING_TOL: f64 = 1e-5;
/// Absolute tolerance on the truncated `‖f‖²_{L²_ρ} = 2R` of the counterexample.
pub const COUNTEREXAMPLE_L2_TOL: f64 = 1e-8;
/// Relative change of the W norm over the last domain doubling that
/// counts as converged.
pub const COUNTEREXAMPLE_W_TOL: f64 = 1e-8;

fn cmd_norm_equiv(cli: &Cli, a: &NormEquivArgs) -> Result<Report, CliError> {
    let mut p = base_params(cli, "norm-equiv");
    let check = a.check.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    p.push("check", &check);
    let mut rng = ChaCha20Rng::seed_from_u64(cli.seed);
    match a.check {
        AuditCheck::Sandwich => {
            a.weights.params(&mut p, DEFAULT_PSI);
            let count = a.count.unwrap_or(50);
            p.push("count", count);
            let ctx = a.weights.context(DEFAULT_PSI)?;
            let cfg = NormConfig::default();
            let mut t = Table::new(p, &["function-id", "w_norm_sq", "h_norm_sq", "ratio", "bound", "pass"]);
            let mut passed = true;
            for id in 0..count {
                let f = PolyGaussian::random(ctx.dim(), &mut rng);
                let r = audit_equivalence(&f, &ctx, &cfg)?;
                let ok = r.lower_ok && r.upper_ok;
                passed &= ok;
                t.rows.push(vec![
                    id.to_string(),
                    num(r.w_norm_sq),
                    num(r.h_norm_sq),
                    num(r.ratio),
                    num(r.bound),
                    yes_no(ok),
                ]);
            }
            Ok(Report { table: t, passed, text: None })
        }
        AuditCheck::Counterexample => {
            let weights = WeightArgs { rho: RhoFamily::GaussianStd, psi: a.weights.psi, gamma: vec![1.0] };
            weights.params(&mut p, COUNTEREXAMPLE_PSI);
            p.push("function", "1/sqrt(rho)");
            if a.weights.rho != RhoFamily::GaussianStd {
                return Err(CliError::Usage("the counterexample is defined for the Gaussian density".into()));
            }
            let ctx = weights.context(COUNTEREXAMPLE_PSI)?;
            let f = inverse_sqrt_density()?;
            let mut t = Table::new(
                p,
                &["radius", "w_norm_sq", "w_relative_change", "l2_rho_sq", "expected_l2_rho_sq", "pass"],
            );
            let mut passed = true;
            let mut previous: Option<f64> = None;
            for (i, &radius) in PROFILE_RADII.iter().enumerate() {
                let tr = truncated_norms(&f, &ctx, radius)?;
                let change = previous.map(|w| (tr.w_norm_sq - w).abs() / tr.w_norm_sq);
                let l2_ok = (tr.l2_rho_sq - 2.0 * radius).abs() <= COUNTEREXAMPLE_L2_TOL;
                // W convergence is judged on the last doubling only
                let last = i + 1 == PROFILE_RADII.len();
                let w_ok = !last || change.is_some_and(|c| c <= COUNTEREXAMPLE_W_TOL);
                passed &= l2_ok && w_ok;
                t.rows.push(vec![
                    num(radius),
                    num(tr.w_norm_sq),
                    change.map(num).unwrap_or_default(),
                    num(tr.l2_rho_sq),
                    num(2.0 * radius),
                    yes_no(l2_ok && w_ok),
                ]);
                previous = Some(tr.w_norm_sq);
            }
            Ok(Report { table: t, passed, text: None })
        }
        AuditCheck::Reproducing => {
            a.weights.params(&mut p, DEFAULT_PSI);
            let count = a.count.unwrap_or(3);
            p.push("count", count);
            p.push("points", a.points);
            let ctx = a.weights.context(DEFAULT_PSI)?;
            let cfg = NormConfig::default();
            let mut t = Table::new(p, &["function-id", "y", "value", "inner_product", "residual", "pass"]);
            let mut passed = true;
            for id in 0..count {
                let f = PolyGaussian::random(ctx.dim(), &mut rng);
                for _ in 0..a.points {
                    let y: Vec<f64> = (0..ctx.dim()).map(|_| rng.random_range(-2.5..2.5)).collect();
                    let r = reproducing_check(&f, &ctx, &y, &cfg)?;
                    let ok = r.residual <= REPRODUCING_TOL;
                    passed &= ok;
                    t.rows.push(vec![
                        id.to_string(),
                        join_num(&y),
                        num(r.value),
                        num(r.inner_product),
                        num(r.residual),
                        yes_no(ok),
                    ]);
                }
            }
            Ok(Report { table: t, passed, text: None })
        }
    }
}

pub const RECONSTRUCTION_TOL: f64 = 1e-6;
pub const ORTHOGONALITY_TOL: f64 = 1e-7;
pub const PARSEVAL_TOL: f64 = 1e-6;

fn cmd_anova(cli: &Cli, a: &AnovaArgs) -> Result<Report, CliError> {
    let mut p = base_params(cli, "anova");
    a.weights.params(&mut p, DEFAULT_PSI);
    p.push("points", a.points);
    let ctx = a.weights.context(DEFAULT_PSI)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cli.seed);
    let f = PolyGaussian::random(ctx.dim(), &mut rng);
    p.push("fixture", "random polynomial times Gaussian, drawn from the seed");
    let points: Vec<Vec<f64>> =
        (0..a.points).map(|_| (0..ctx.dim()).map(|_| rng.random_range(-2.5..2.5)).collect()).collect();
    let audit = anova_audit(&f, &ctx, &AnovaConfig::default(), &points)?;
    let mut t = Table::new(p, &["item", "value", "tolerance", "pass"]);
    for (u, norm) in &audit.term_norms {
        t.rows.push(vec![format!("term_norm_sq {u}"), num(*norm), String::new(), String::new()]);
    }
    t.rows.push(vec!["total_norm_sq".into(), num(audit.total_norm_sq), String::new(), String::new()]);
    t.rows.push(vec!["annihilation_error".into(), num(audit.annihilation_error), String::new(), String::new()]);
    let mut passed = true;
    for (item, value, tol) in [
        ("reconstruction_error", audit.reconstruction_error, RECONSTRUCTION_TOL),
        ("orthogonality_error", audit.orthogonality_error, ORTHOGONALITY_TOL),
        ("parseval_error", audit.parseval_error, PARSEVAL_TOL),
    ] {
        let ok = value <= tol;
        passed &= ok;
        t.rows.push(vec![item.into(), num(value), num(tol), yes_no(ok)]);
    }
    Ok(Report { table: t, passed, text: None })
}

fn method_name(m: MethodArg) -> String {
    PricingMethod::from(m).to_string()
}

fn cmd_converge(cli: &Cli, a: &ConvergeArgs) -> Result<Report, CliError> {
    let spec = a.option.spec()?;
    let mut p = base_params(cli, "converge");
    a.option.params(&mut p);
    a.rule.params(&mut p);
    p.push("method", method_name(a.method));
    p.push("n_list", join(&a.n_list));
    p.push("rate_fit", "least squares of log2(rms) on log2(N), smallest N left out");
    let mut rms = Vec::with_capacity(a.n_list.len());
    let mut prices = Vec::with_capacity(a.n_list.len());
    for &n in &a.n_list {
        let r = price(&spec, a.method.into(), &a.rule.config(n, cli.seed))?;
        rms.push(r.rms_error);
        prices.push(r.price);
    }
    let rate = fit_rate(&a.n_list, &rms)?;
    let mut t = Table::new(p, &["n", "price", "rms_error", "in_fit"]);
    for i in 0..a.n_list.len() {
        t.rows.push(vec![a.n_list[i].to_string(), num(prices[i]), num(rms[i]), yes_no(rate.fitted[i])]);
    }
    t.notes.push(format!("slope={} stderr={}", rate.slope, rate.stderr));
    let mut passed = true;
    if let Some(max) = a.max_slope {
        let ok = rate.slope <= max;
        t.notes.push(format!("slope <= {max}: {}", yes_no(ok)));
        passed &= ok;
    }
    if let Some(min) = a.min_slope {
        let ok = rate.slope >= min;
        t.notes.push(format!("slope >= {min}: {}", yes_no(ok)));
        passed &= ok;
    }
    Ok(Report { table: t, passed, text: None })
}

fn cmd_price(cli: &Cli, a: &PriceArgs) -> Result<Report, CliError> {
    let spec = a.option.spec()?;
    let mut p = base_params(cli, "price");
    a.option.params(&mut p);
    a.rule.params(&mut p);
    p.push("n", a.n);
    p.push("method", method_name(a.method));
    let r = price(&spec, a.method.into(), &a.rule.config(a.n, cli.seed))?;
    let reference = if a.reference { Some(price_reference(&spec)?) } else { None };
    let mut columns = vec!["price", "rms_error", "n", "m"];
    let mut row = vec![num(r.price), num(r.rms_error), r.n.to_string(), r.m.to_string()];
    if let Some(rf) = &reference {
        columns.extend(["reference", "reference_rms_error"]);
        row.extend([num(rf.price), num(rf.rms_error)]);
    }
    let mut t = Table::new(p, &columns);
    t.rows.push(row);
    let text = (a.format == OutputFormat::Text).then(|| {
        let mut s = format!(
            "{} Asian call, d={}, {} construction, {}\n  price      {:.8}\n  rms error  {:.3e}  (N={}, m={})\n",
            if spec.averaging == Averaging::Arithmetic { "arithmetic" } else { "geometric" },
            spec.d,
            spec.factorization,
            method_name(a.method),
            r.price,
            r.rms_error,
            r.n,
            r.m
        );
        if let Some(rf) = &reference {
            s.push_str(&format!("  reference  {:.8}  (rms {:.3e})\n", rf.price, rf.rms_error));
        }
        s
    });
    Ok(Report { table: t, passed: true, text })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_fit_recovers_a_power_law() {
        let n: Vec<u64> = (7..=13).map(|k| 1u64 << k).collect();
        let rms: Vec<f64> = n.iter().map(|&v| 3.0 * (v as f64).powf(-0.9)).collect();
        let r = fit_rate(&n, &rms).unwrap();
        assert!((r.slope + 0.9).abs() < 1e-12);
        assert!(r.stderr < 1e-10);
        assert_eq!(r.fitted.iter().filter(|&&f| !f).count(), 1);
        assert!(!r.fitted[0]);
        assert!(fit_rate(&n[..4], &rms[..4]).is_err());
        assert!(fit_rate(&[1, 1, 2, 4, 8], &[1.0; 5]).is_err());
    }

    #[test]
    fn usage_errors_exit_with_two() {
        let e = parse_args(["anova-qmc", "price", "--n", "abc"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        let e = parse_args(["anova-qmc", "conditions", "--psi", "wavy"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        let e = parse_args(["anova-qmc", "price", "--vector-file", "x", "--korobov-a", "3"]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn config_values_are_overridden_by_flags() {
        let dir = std::env::temp_dir().join(format!("anova-qmc-cli-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(&path, "# comment\nseed = 7\nn=512\nshifts=4\nreference=true\n").unwrap();
        let cli = parse_args(["anova-qmc", "price", "--config", path.to_str().unwrap(), "--n", "256"]).unwrap();
        assert_eq!(cli.seed, 7);
        match &cli.command {
            Command::Price(a) => {
                assert_eq!((a.n, a.rule.shifts, a.reference), (256, 4, true));
            }
            other => panic!("{other:?}"),
        }
        std::fs::write(&path, "no equals sign\n").unwrap();
        let e = parse_args(["anova-qmc", "price", "--config", path.to_str().unwrap()]).unwrap_err();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn tables_render_with_parameter_header() {
        let cli = parse_args(["anova-qmc", "--seed", "3", "constant", "--gamma", "0.5,0.25"]).unwrap();
        let report = execute(&cli).unwrap();
        assert!(report.passed);
        let csv = report.render().unwrap();
        assert!(csv.starts_with("# anova-qmc="));
        assert!(csv.contains("# seed=3\n"));
        assert!(csv.contains("\nquantity,value\n"));
        assert_eq!(csv, execute(&cli).unwrap().render().unwrap());
    }

    #[test]
    fn conditions_sweep_matches_the_thresholds() {
        let cli = parse_args(["anova-qmc", "conditions"]).unwrap();
        let report = execute(&cli).unwrap();
        assert!(report.passed);
        let rows = &report.table.rows;
        let strong: Vec<&str> = rows.iter().map(|r| r[3].as_str()).collect();
        let weak: Vec<&str> = rows.iter().map(|r| r[2].as_str()).collect();
        assert_eq!(weak, ["false", "true", "true", "true", "true", "true"]);
        assert_eq!(strong, ["false", "false", "false", "false", "true", "true"]);
        // α = 1: numeric verdict is never "strong"
        assert_ne!(rows[3][6], "true");
    }
}
