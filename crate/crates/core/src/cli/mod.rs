//! Command-line front end: `run`, `steady` and `sweep`, each writing one CSV
//! per table plus a `<id>_meta.toml` document.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use toml::{Table as Doc, Value};

use crate::dynamics::{IntegratorSettings, Method};
use crate::error::Error;
use crate::model::normalize_units;
use crate::scenarios::{
    run_config, run_fig2, run_fig2_inset, run_fig3, run_fig4, run_full_vs_restricted, run_realistic_n20, run_steady,
    sweep, Fig2Params, Fig3Params, Fig4Params, FullVsRestrictedParams, InsetParams, N20Variant, RealisticParams,
    ScenarioResult,
};

/// Exit status for malformed input (bad flags, unreadable or invalid config).
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for failures while running a valid configuration.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Parser, Debug)]
#[command(name = "rydberg-dark", version, about = "Dark-state preparation in driven Rydberg ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a pre-registered scenario, or `custom` with --config.
    Run {
        scenario: ScenarioName,
        #[command(flatten)]
        opts: Common,
    },
    /// Solve for the steady state of the model in --config.
    Steady {
        #[command(flatten)]
        opts: Common,
    },
    /// Run the [sweep] section of --config.
    Sweep {
        #[command(flatten)]
        opts: Common,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    Fig2,
    Fig2Inset,
    Fig3,
    Fig4,
    #[value(name = "n20-w")]
    N20W,
    N20Equal,
    FullVsRestricted,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Adaptive,
    Expm,
    Rk4,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub tolerance_rel: Option<f64>,
    #[arg(long)]
    pub tolerance_abs: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Step for --method rk4 (µs).
    #[arg(long)]
    pub fixed_step: Option<f64>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }
}

/// Parse `args` (including the program name) and execute. Returns the exit
/// status; diagnostics go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(results) => {
            for r in &results {
                eprintln!(
                    "{}: {} tables, {:.2} s, {} steps",
                    r.id,
                    r.tables.len(),
                    r.wall_time_s,
                    r.stats.accepted_steps
                );
            }
            0
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

/// Run the parsed command and write its bundle.
pub fn execute(cli: &Cli) -> Result<Vec<ScenarioResult>, CliError> {
    let opts = match &cli.command {
        Command::Run { opts, .. } | Command::Steady { opts } | Command::Sweep { opts } => opts,
    };
    let overrides = Overrides::from_opts(opts)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.parallelism {
        if n == 0 {
            return Err(CliError::config("--parallelism must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| dispatch(&cli.command, opts, &overrides))?;
    for r in &results {
        write_bundle(r, &opts.out).map_err(|e| CliError {
            code: EXIT_RUNTIME,
            message: format!("writing to {}: {e}", opts.out.display()),
        })?;
    }
    Ok(results)
}

#[derive(Clone, Debug, Default)]
struct Overrides {
    rtol: Option<f64>,
    atol: Option<f64>,
    method: Option<Method>,
}

impl Overrides {
    fn from_opts(o: &Common) -> Result<Self, CliError> {
        let method = match (o.method, o.fixed_step) {
            (None, None) => None,
            (Some(MethodArg::Adaptive), None) => Some(Method::Adaptive),
            (Some(MethodArg::Expm), None) => Some(Method::Expm),
            (Some(MethodArg::Rk4), Some(dt)) => Some(Method::Rk4 { dt }),
            (Some(MethodArg::Rk4), None) => return Err(CliError::config("--method rk4 requires --fixed-step")),
            (_, Some(_)) => return Err(CliError::config("--fixed-step only applies to --method rk4")),
        };
        let ov = Overrides {
            rtol: o.tolerance_rel,
            atol: o.tolerance_abs,
            method,
        };
        ov.apply(IntegratorSettings::default())
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        Ok(ov)
    }

    fn apply(&self, mut s: IntegratorSettings) -> IntegratorSettings {
        if let Some(r) = self.rtol {
            s.rtol = r;
        }
        if let Some(a) = self.atol {
            s.atol = a;
        }
        if let Some(m) = self.method {
            s.method = m;
        }
        s
    }

    /// Write the overrides into the [run] section of a raw config.
    fn apply_raw(&self, raw: &mut Doc) {
        let run = raw
            .entry("run")
            .or_insert_with(|| Value::Table(Doc::new()));
        let Value::Table(run) = run else { return };
        if let Some(r) = self.rtol {
            run.insert("rtol".into(), Value::Float(r));
        }
        if let Some(a) = self.atol {
            run.insert("atol".into(), Value::Float(a));
        }
        match self.method {
            Some(Method::Adaptive) => {
                run.insert("method".into(), Value::String("adaptive".into()));
            }
            Some(Method::Expm) => {
                run.insert("method".into(), Value::String("expm".into()));
            }
            Some(Method::Rk4 { dt }) => {
                run.insert("method".into(), Value::String("rk4".into()));
                run.insert("fixed_step_us".into(), Value::Float(dt));
            }
            None => {}
        }
    }
}

fn dispatch(cmd: &Command, opts: &Common, ov: &Overrides) -> Result<Vec<ScenarioResult>, CliError> {
    let run = |r: crate::Result<ScenarioResult>| r.map(|x| vec![x]).map_err(|e| from_error(e, None));
    match cmd {
        Command::Run { scenario, .. } => {
            if *scenario != ScenarioName::Custom && opts.config.is_some() {
                return Err(CliError::config("--config only applies to `run custom`, `steady` and `sweep`"));
            }
            match scenario {
                ScenarioName::Fig2 => {
                    let mut p = Fig2Params::default();
                    p.settings = ov.apply(p.settings);
                    run(run_fig2(&p))
                }
                ScenarioName::Fig2Inset => {
                    let mut p = InsetParams::default();
                    p.settings = ov.apply(p.settings);
                    run(run_fig2_inset(&p))
                }
                ScenarioName::Fig3 => {
                    let mut p = Fig3Params::default();
                    p.settings = ov.apply(p.settings);
                    run(run_fig3(&p))
                }
                ScenarioName::Fig4 => {
                    let mut p = Fig4Params::default();
                    p.settings = ov.apply(p.settings);
                    run(run_fig4(&p))
                }
                ScenarioName::N20W | ScenarioName::N20Equal => {
                    let v = if *scenario == ScenarioName::N20W {
                        N20Variant::WDominated
                    } else {
                        N20Variant::EqualWeight
                    };
                    let mut p = RealisticParams::new(v);
                    p.settings = ov.apply(p.settings);
                    run(run_realistic_n20(&p))
                }
                ScenarioName::FullVsRestricted => {
                    let mut p = FullVsRestrictedParams::default();
                    p.settings = ov.apply(p.settings);
                    run(run_full_vs_restricted(&p))
                }
                ScenarioName::Custom => {
                    let (raw, text) = load(opts, ov)?;
                    if raw.contains_key("sweep") {
                        return Err(CliError::config("config has a [sweep] section; use the `sweep` command"));
                    }
                    let cfg = normalize_units(&raw).map_err(|e| from_error(e, Some(&text)))?;
                    run(run_config(&stem(opts), &cfg))
                }
            }
        }
        Command::Steady { .. } => {
            let (raw, text) = load(opts, ov)?;
            let cfg = normalize_units(&raw).map_err(|e| from_error(e, Some(&text)))?;
            if !cfg.sweep.is_empty() {
                return Err(CliError::config("steady takes a single model; remove the [sweep] section"));
            }
            run(run_steady(&format!("{}_steady", stem(opts)), &cfg))
        }
        Command::Sweep { .. } => {
            let (raw, text) = load(opts, ov)?;
            if !raw.contains_key("sweep") {
                return Err(CliError::config("missing section [sweep]"));
            }
            normalize_units(&raw).map_err(|e| from_error(e, Some(&text)))?;
            sweep(&format!("{}_sweep", stem(opts)), &raw)
                .map(|x| vec![x])
                .map_err(|e| from_error(e, Some(&text)))
        }
    }
}

fn stem(opts: &Common) -> String {
    opts.config
        .as_deref()
        .and_then(Path::file_stem)
        .map(|s| s.to_string_lossy().replace(|c: char| !c.is_ascii_alphanumeric() && c != '_' && c != '-', "_"))
        .unwrap_or_else(|| "custom".into())
}

fn load(opts: &Common, ov: &Overrides) -> Result<(Doc, String), CliError> {
    let path = opts
        .config
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs --config"))?;
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut raw: Doc = text
        .parse()
        .map_err(|e: toml::de::Error| CliError::config(format!("{}: {}", path.display(), e.to_string().trim_end())))?;
    ov.apply_raw(&mut raw);
    Ok((raw, text))
}

fn from_error(e: Error, text: Option<&str>) -> CliError {
    match e {
        Error::Validation { ref field, .. } => {
            let at = text
                .and_then(|t| locate_key(t, field))
                .map(|l| format!(" (line {l})"))
                .unwrap_or_default();
            CliError::config(format!("{e}{at}"))
        }
        Error::Config(_) => CliError::config(e.to_string()),
        other => CliError {
            code: EXIT_RUNTIME,
            message: other.to_string(),
        },
    }
}

/// 1-based line on which `section.key` is assigned in `text`.
pub fn locate_key(text: &str, field: &str) -> Option<usize> {
    let (sec, key) = field.split_once('.')?;
    let mut current = "";
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(h) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = h.trim();
            continue;
        }
        if current == sec {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

/// Metadata document for a result.
pub fn metadata(r: &ScenarioResult) -> Doc {
    let mut meta = Doc::new();
    meta.insert("scenario".into(), Value::String(r.id.clone()));
    meta.insert("version".into(), Value::String(format!("rydberg-dark {}", env!("CARGO_PKG_VERSION"))));
    meta.insert("wall_time_s".into(), Value::Float(r.wall_time_s));
    meta.insert(
        "tables".into(),
        Value::Array(r.tables.iter().map(|t| Value::String(format!("{}.csv", t.name))).collect()),
    );
    meta.insert("parameters".into(), Value::Table(r.parameters.clone()));
    let mut stats = Doc::new();
    for (k, v) in [
        ("accepted_steps", r.stats.accepted_steps),
        ("rejected_steps", r.stats.rejected_steps),
        ("rhs_evaluations", r.stats.rhs_evaluations),
        ("propagators", r.stats.propagators),
    ] {
        stats.insert(k.into(), Value::Integer(v as i64));
    }
    meta.insert("integrator_stats".into(), Value::Table(stats));
    if let Some(d) = r.diagnostics {
        let mut t = Doc::new();
        t.insert("trace_error".into(), Value::Float(d.trace_error));
        t.insert("hermiticity_error".into(), Value::Float(d.hermiticity_error));
        t.insert("min_eigenvalue".into(), Value::Float(d.min_eigenvalue));
        t.insert("valid".into(), Value::Boolean(d.is_valid()));
        meta.insert("diagnostics".into(), Value::Table(t));
    }
    let summary: Doc = r.summary.iter().map(|(k, v)| (k.clone(), Value::Float(*v))).collect();
    meta.insert("summary".into(), Value::Table(summary));
    meta.insert(
        "notes".into(),
        Value::Array(r.notes.iter().cloned().map(Value::String).collect()),
    );
    meta
}

/// Write `<table>.csv` for each table and `<id>_meta.toml` under `out`.
pub fn write_bundle(r: &ScenarioResult, out: &Path) -> std::io::Result<()> {
    fs::create_dir_all(out)?;
    for t in &r.tables {
        fs::write(out.join(format!("{}.csv", t.name)), t.to_csv())?;
    }
    let meta = toml::to_string(&metadata(r)).map_err(std::io::Error::other)?;
    fs::write(out.join(format!("{}_meta.toml", r.id.replace('-', "_"))), meta)
}
