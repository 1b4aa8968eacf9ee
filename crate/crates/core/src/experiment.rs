//! The (level x method x objective) comparison matrix and its reports.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::de::{segment_de_otsu, DeConfig};
use crate::imaging::{load_image, save_image, GrayImage, ImageError};
use crate::meta::{apply_thresholds, Optimizer, OptimizerConfig};
use crate::metrics::{psnr, ssim, timed};
use crate::objectives::{probabilities, ObjectiveKind, ThresholdVector};
use crate::rng::{derive_seed, stream};

/// Objective label used for DE+OTSU rows.
pub const DE_OBJECTIVE_LABEL: &str = "otsu";

pub const CSV_HEADER: &str = "image,level,method,objective,psnr_db,ssim,seconds,thresholds";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid run specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("cannot create {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    DeOtsu,
    Mabc,
    Abc,
    Pso,
    Ga,
}

impl Method {
    /// Column order of the comparison tables.
    pub const ALL: [Method; 5] = [Method::DeOtsu, Method::Mabc, Method::Abc, Method::Pso, Method::Ga];

    pub fn name(&self) -> &'static str {
        match self {
            Method::DeOtsu => "de_otsu",
            Method::Mabc => "mabc",
            Method::Abc => "abc",
            Method::Pso => "pso",
            Method::Ga => "ga",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            Method::DeOtsu => "DE+OTSU",
            Method::Mabc => "MABC",
            Method::Abc => "ABC",
            Method::Pso => "PSO",
            Method::Ga => "GA",
        }
    }

    pub fn optimizer(&self) -> Option<Optimizer> {
        match self {
            Method::DeOtsu => None,
            Method::Mabc => Some(Optimizer::Mabc),
            Method::Abc => Some(Optimizer::Abc),
            Method::Pso => Some(Optimizer::Pso),
            Method::Ga => Some(Optimizer::Ga),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', '+'], "_").as_str() {
            "de_otsu" | "de" | "deotsu" => Ok(Method::DeOtsu),
            "mabc" => Ok(Method::Mabc),
            "abc" => Ok(Method::Abc),
            "pso" => Ok(Method::Pso),
            "ga" => Ok(Method::Ga),
            other => Err(format!("unknown method '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Md,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Md => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Md),
            other => Err(format!("unknown format '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub input: PathBuf,
    pub levels: Vec<usize>,
    pub methods: Vec<Method>,
    /// Objectives for the baselines; DE+OTSU runs once per level regardless.
    pub objectives: Vec<ObjectiveKind>,
    pub seed: u64,
    /// Segmented images are written here when set.
    pub output_dir: Option<PathBuf>,
    pub format: ReportFormat,
    /// DE settings; its `seed` is replaced per cell.
    pub de: DeConfig,
    /// With timing off the seconds column reads `n/a`, making reports
    /// byte-reproducible.
    pub record_timing: bool,
}

impl RunSpec {
    pub fn new(input: impl Into<PathBuf>) -> Self {
        Self {
            input: input.into(),
            levels: vec![2, 3, 4, 5],
            methods: Method::ALL.to_vec(),
            objectives: vec![
                ObjectiveKind::BetweenClassVariance,
                ObjectiveKind::KapurEntropy,
                ObjectiveKind::TsallisEntropy {
                    q: crate::objectives::DEFAULT_TSALLIS_Q,
                },
            ],
            seed: 0,
            output_dir: None,
            format: ReportFormat::Csv,
            de: DeConfig::default(),
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidSpec(m));
        if self.levels.is_empty() {
            return bad("at least one level is required".into());
        }
        if let Some(l) = self.levels.iter().find(|&&l| !(1..=255).contains(&l)) {
            return bad(format!("levels must be in 1..=255, got {l}"));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        let baselines = self.methods.iter().any(|m| m.optimizer().is_some());
        if baselines && self.objectives.is_empty() {
            return bad("baseline methods need at least one objective".into());
        }
        for obj in &self.objectives {
            obj.validate().map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
        }
        self.de
            .validate()
            .map_err(|e| ExperimentError::InvalidSpec(e.to_string()))
    }

    /// Number of rows [`run_matrix`] produces.
    pub fn row_count(&self) -> usize {
        self.cells().len()
    }

    fn cells(&self) -> Vec<Cell> {
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();
        let mut cells = Vec::new();
        for &level in &self.levels {
            for (mi, &method) in methods.iter().enumerate() {
                if method == Method::DeOtsu {
                    cells.push(Cell { level, method, objective: None, label: (mi, usize::MAX) });
                } else {
                    for (oi, &obj) in self.objectives.iter().enumerate() {
                        cells.push(Cell { level, method, objective: Some(obj), label: (mi, oi) });
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    level: usize,
    method: Method,
    objective: Option<ObjectiveKind>,
    label: (usize, usize),
}

impl Cell {
    fn objective_label(&self) -> String {
        self.objective
            .map_or_else(|| DE_OBJECTIVE_LABEL.to_string(), |o| o.name().to_string())
    }

    fn seed(&self, base: u64) -> u64 {
        let s = derive_seed(base, self.level as u64);
        let s = derive_seed(s, self.method as u64);
        derive_seed(s, self.label.1 as u64)
    }
}

/// One cell of the matrix. `None` metrics mean the cell failed (see `error`)
/// or timing was disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub image: String,
    pub level: usize,
    pub method: Method,
    pub objective: String,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds: Option<f64>,
    pub thresholds: Option<ThresholdVector>,
    pub error: Option<String>,
}

/// Loads `spec.input`, runs every cell and writes segmented images.
pub fn run_matrix(spec: &RunSpec) -> Result<Vec<ReportRow>, ExperimentError> {
    spec.validate()?;
    let img = load_image(&spec.input)?;
    let stem = spec
        .input
        .file_stem()
        .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned());
    run_matrix_on(&img, &stem, spec)
}

/// [`run_matrix`] on an image already in memory.
pub fn run_matrix_on(img: &GrayImage, stem: &str, spec: &RunSpec) -> Result<Vec<ReportRow>, ExperimentError> {
    spec.validate()?;
    if let Some(dir) = &spec.output_dir {
        std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let rows = spec
        .cells()
        .par_iter()
        .map(|cell| run_cell(img, stem, spec, cell))
        .collect();
    Ok(rows)
}

fn run_cell(img: &GrayImage, stem: &str, spec: &RunSpec, cell: &Cell) -> ReportRow {
    let mut row = ReportRow {
        image: stem.to_string(),
        level: cell.level,
        method: cell.method,
        objective: cell.objective_label(),
        psnr_db: None,
        ssim: None,
        seconds: None,
        thresholds: None,
        error: None,
    };
    let seed = cell.seed(spec.seed);
    let (outcome, seconds) = timed(|| segment_cell(img, spec, cell, seed));
    let result = outcome.and_then(|(segmented, cuts)| {
        row.psnr_db = Some(psnr(img, &segmented).map_err(|e| e.to_string())?);
        row.ssim = Some(ssim(img, &segmented).map_err(|e| e.to_string())?);
        row.thresholds = Some(cuts);
        if spec.record_timing {
            row.seconds = Some(seconds);
        }
        if let Some(dir) = &spec.output_dir {
            save_image(&segmented, image_path(dir, stem, cell)).map_err(|e| e.to_string())?;
        }
        Ok(())
    });
    if let Err(e) = result {
        row.psnr_db = None;
        row.ssim = None;
        row.seconds = None;
        row.error = Some(e);
    }
    row
}

fn segment_cell(
    img: &GrayImage,
    spec: &RunSpec,
    cell: &Cell,
    seed: u64,
) -> Result<(GrayImage, ThresholdVector), String> {
    match (cell.method.optimizer(), cell.objective) {
        (None, _) => {
            let cfg = DeConfig { seed, ..spec.de.clone() };
            let result = segment_de_otsu(img, cell.level, &cfg).map_err(|e| e.to_string())?;
            Ok((result.image, result.thresholds))
        }
        (Some(opt), Some(obj)) => {
            let p = probabilities(&img.histogram()).map_err(|e| e.to_string())?;
            let run = OptimizerConfig::default_for(opt)
                .run(&p, cell.level, obj, &mut stream(seed, 0, 0))
                .map_err(|e| e.to_string())?;
            Ok((apply_thresholds(img, &run.thresholds), run.thresholds))
        }
        (Some(_), None) => unreachable!("baseline cells always carry an objective"),
    }
}

/// `<stem>_<method>_<objective>_L<level>.pgm`
fn image_path(dir: &Path, stem: &str, cell: &Cell) -> PathBuf {
    dir.join(format!(
        "{stem}_{}_{}_L{}.pgm",
        cell.method.name(),
        cell.objective_label(),
        cell.level
    ))
}

fn fmt_metric(v: Option<f64>) -> String {
    match v {
        None => "n/a".into(),
        Some(x) if x.is_infinite() && x > 0.0 => "inf".into(),
        Some(x) => format!("{x:.6}"),
    }
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(rows),
        ReportFormat::Md => emit_markdown(rows),
    }
}

fn emit_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let cuts = r.thresholds.as_ref().map_or_else(|| "n/a".into(), |t| t.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.image,
            r.level,
            r.method,
            r.objective,
            fmt_metric(r.psnr_db),
            fmt_metric(r.ssim),
            fmt_metric(r.seconds),
            cuts
        )
        .expect("writing to a String");
    }
    out
}

/// One table per (objective, metric): rows are (image, level), columns are
/// methods. DE+OTSU appears in every objective's tables.
fn emit_markdown(rows: &[ReportRow]) -> String {
    let mut objectives: Vec<&str> = Vec::new();
    for r in rows.iter().filter(|r| r.method != Method::DeOtsu) {
        if !objectives.contains(&r.objective.as_str()) {
            objectives.push(&r.objective);
        }
    }
    if objectives.is_empty() {
        objectives.push(DE_OBJECTIVE_LABEL);
    }
    let mut methods: Vec<Method> = rows.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut keys: Vec<(&str, usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.image.as_str(), r.level)) {
            keys.push((&r.image, r.level));
        }
    }

    type Pick = fn(&ReportRow) -> Option<f64>;
    let metrics: [(&str, Pick); 3] = [
        ("PSNR (dB)", |r| r.psnr_db),
        ("SSIM", |r| r.ssim),
        ("CPU time (s)", |r| r.seconds),
    ];

    let mut out = String::new();
    for obj in &objectives {
        for (title, pick) in &metrics {
            if !out.is_empty() {
                out.push('\n');
            }
            writeln!(out, "### {title}, {obj}\n").unwrap();
            out.push_str("| Image | Level |");
            for m in &methods {
                write!(out, " {} |", m.title()).unwrap();
            }
            out.push_str("\n|---|---|");
            out.push_str(&"---|".repeat(methods.len()));
            out.push('\n');
            for &(image, level) in &keys {
                write!(out, "| {image} | {level} |").unwrap();
                for &m in &methods {
                    let cell = rows.iter().find(|r| {
                        r.image == image
                            && r.level == level
                            && r.method == m
                            && (m == Method::DeOtsu || r.objective == *obj)
                    });
                    let text = cell.map_or_else(|| "".into(), |r| fmt_metric(pick(r)));
                    write!(out, " {text} |").unwrap();
                }
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(psnr: Option<f64>) -> ReportRow {
        ReportRow {
            image: "img".into(),
            level: 2,
            method: Method::Ga,
            objective: "kapur".into(),
            psnr_db: psnr,
            ssim: Some(0.5),
            seconds: None,
            thresholds: Some(ThresholdVector::new(vec![10, 20]).unwrap()),
            error: None,
        }
    }

    #[test]
    fn csv_single_row() {
        let csv = emit_report(&[row(Some(f64::INFINITY))], ReportFormat::Csv);
        assert_eq!(
            csv,
            format!("{CSV_HEADER}\nimg,2,ga,kapur,inf,0.500000,n/a,10;20\n")
        );
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn cell_count_and_order() {
        let spec = RunSpec::new("x.pgm");
        assert_eq!(spec.row_count(), 52);
        let cells = spec.cells();
        assert_eq!(cells[0].method, Method::DeOtsu);
        assert_eq!(cells[1].method, Method::Mabc);
        assert_eq!(cells[13].level, 3);
        let only_de = RunSpec {
            methods: vec![Method::DeOtsu],
            ..RunSpec::new("x.pgm")
        };
        assert_eq!(only_de.row_count(), 4);
    }

    #[test]
    fn markdown_has_nine_tables() {
        let mut rows = Vec::new();
        for obj in ["variance", "kapur", "tsallis"] {
            let mut r = row(Some(30.0));
            r.objective = obj.into();
            rows.push(r);
        }
        let md = emit_report(&rows, ReportFormat::Md);
        assert_eq!(md.matches("### ").count(), 9);
        assert!(md.contains("| img | 2 | 30.000000 |"));
    }

    #[test]
    fn parses_names() {
        assert_eq!("DE+OTSU".parse::<Method>(), Ok(Method::DeOtsu));
        assert_eq!("de_otsu".parse::<Method>(), Ok(Method::DeOtsu));
        assert_eq!("PSO".parse::<Method>(), Ok(Method::Pso));
        assert!("aco".parse::<Method>().is_err());
        assert_eq!("md".parse::<ReportFormat>(), Ok(ReportFormat::Md));
    }

    #[test]
    fn validation() {
        let mut spec = RunSpec::new("x.pgm");
        assert!(spec.validate().is_ok());
        spec.levels = vec![];
        assert!(spec.validate().is_err());
        spec.levels = vec![0];
        assert!(spec.validate().is_err());
        spec.levels = vec![2];
        spec.methods = vec![];
        assert!(spec.validate().is_err());
    }
}
