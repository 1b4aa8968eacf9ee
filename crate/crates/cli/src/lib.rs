//! Argument handling for the `deotsu` benchmark driver.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;
use deotsu_core::experiment::{emit_report, run_matrix, ExperimentError, Method, RunSpec};
use deotsu_core::objectives::{ObjectiveKind, DEFAULT_TSALLIS_Q};
use thiserror::Error;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Help or version output requested; not a failure.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Info(_) => 0,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

/// Segment an image with DE+OTSU and the GA/PSO/ABC/MABC baselines and
/// report PSNR, SSIM and time per (level, method, objective).
#[derive(Debug, Default, Parser)]
#[command(name = "deotsu", version)]
struct Args {
    /// Input image (binary PGM or PNG).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated threshold counts [default: 2,3,4,5].
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Comma-separated subset of de_otsu,mabc,abc,pso,ga [default: all].
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Comma-separated subset of variance,kapur,tsallis [default: all].
    #[arg(long, value_delimiter = ',')]
    objectives: Option<Vec<String>>,
    /// DE generations [default: 10].
    #[arg(long)]
    generations: Option<usize>,
    /// DE population size [default: 100].
    #[arg(long)]
    population: Option<usize>,
    /// DE crossover probability [default: 0.2].
    #[arg(long)]
    cr: Option<f64>,
    /// DE scale factor [default: 0.3].
    #[arg(long)]
    f: Option<f64>,
    /// Tsallis entropic index [default: 0.5].
    #[arg(long = "tsallis-q")]
    tsallis_q: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for segmented images and the report [default: out].
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Report format: csv or md [default: csv].
    #[arg(long)]
    format: Option<String>,
    /// key=value file mirroring the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write `n/a` instead of timings so reports are byte-reproducible.
    #[arg(long = "no-timing")]
    no_timing: bool,
}

impl Args {
    fn or(self, file: Args) -> Args {
        Args {
            input: self.input.or(file.input),
            levels: self.levels.or(file.levels),
            methods: self.methods.or(file.methods),
            objectives: self.objectives.or(file.objectives),
            generations: self.generations.or(file.generations),
            population: self.population.or(file.population),
            cr: self.cr.or(file.cr),
            f: self.f.or(file.f),
            tsallis_q: self.tsallis_q.or(file.tsallis_q),
            seed: self.seed.or(file.seed),
            out_dir: self.out_dir.or(file.out_dir),
            format: self.format.or(file.format),
            config: self.config,
            no_timing: self.no_timing || file.no_timing,
        }
    }
}

fn clap_error(e: clap::Error) -> CliError {
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => CliError::Info(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

/// Turns `key = value` lines into flag tokens. Blank lines and `#` comments
/// are skipped; `no-timing = true` becomes a bare flag.
pub fn config_tokens(text: &str) -> Result<Vec<String>, CliError> {
    let mut tokens = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key == "config" {
            return Err(CliError::Usage("config files cannot include other config files".into()));
        }
        if key == "no-timing" {
            match value {
                "true" | "1" | "yes" => tokens.push("--no-timing".into()),
                "false" | "0" | "no" => {}
                other => return Err(CliError::Usage(format!("no-timing: expected true or false, got '{other}'"))),
            }
            continue;
        }
        tokens.push(format!("--{key}"));
        tokens.push(value.to_string());
    }
    Ok(tokens)
}

fn parse_list<T>(items: &[String], what: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, CliError> {
    items
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(s).map_err(|e| CliError::Usage(format!("--{what}: {e}"))))
        .collect()
}

/// Builds a [`RunSpec`] from `argv` (including the program name).
pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let mut args = Args::try_parse_from(&argv).map_err(clap_error)?;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut file_argv = vec![OsString::from("deotsu")];
        file_argv.extend(config_tokens(&text)?.into_iter().map(OsString::from));
        let file = Args::try_parse_from(file_argv).map_err(|e| match clap_error(e) {
            CliError::Usage(msg) => CliError::Usage(format!("in config {}: {msg}", path.display())),
            other => other,
        })?;
        args = args.or(file);
    }

    let input = args
        .input
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let mut spec = RunSpec::new(input);
    if let Some(levels) = args.levels {
        spec.levels = levels;
    }
    if let Some(methods) = &args.methods {
        spec.methods = parse_list(methods, "methods", |s| s.parse::<Method>())?;
    }
    let q = args.tsallis_q.unwrap_or(DEFAULT_TSALLIS_Q);
    if let Some(objectives) = &args.objectives {
        spec.objectives = parse_list(objectives, "objectives", |s| {
            s.parse::<ObjectiveKind>().map_err(|e| e.to_string())
        })?;
    }
    for obj in spec.objectives.iter_mut() {
        if let ObjectiveKind::TsallisEntropy { q: slot } = obj {
            *slot = q;
        }
    }
    if let Some(g) = args.generations {
        spec.de.generations = g;
    }
    if let Some(np) = args.population {
        spec.de.population_size = np;
    }
    if let Some(cr) = args.cr {
        spec.de.crossover_prob = cr;
    }
    if let Some(f) = args.f {
        spec.de.scale_factor = f;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.output_dir = Some(args.out_dir.unwrap_or_else(|| PathBuf::from("out")));
    if let Some(format) = &args.format {
        spec.format = format.parse().map_err(|e: String| CliError::Usage(format!("--format: {e}")))?;
    }
    spec.record_timing = !args.no_timing;
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(spec)
}

/// Report file path for a spec: `<out-dir>/<stem>_report.<csv|md>`.
pub fn report_path(spec: &RunSpec) -> PathBuf {
    let stem = spec
        .input
        .file_stem()
        .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned());
    spec.output_dir
        .as_deref()
        .unwrap_or(Path::new("."))
        .join(format!("{stem}_report.{}", spec.format.extension()))
}

/// Parses `argv`, runs the matrix, writes the report and returns its text.
pub fn run<I, T>(argv: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let spec = parse_args(argv)?;
    let rows = run_matrix(&spec).map_err(|e| match e {
        ExperimentError::InvalidSpec(msg) => CliError::Usage(msg),
        other => CliError::Io(other.to_string()),
    })?;
    let report = emit_report(&rows, spec.format);
    let path = report_path(&spec);
    std::fs::write(&path, &report).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(report)
}
