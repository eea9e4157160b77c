//! Staged pipeline: configuration, stage runners and run manifests.
//!
//! Each stage reads its inputs from files written by upstream stages, writes
//! into `<output_dir>/<stage>.partial/` and is renamed to `<output_dir>/<stage>/`
//! on success or `<output_dir>/<stage>.quarantine/` on failure.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bicm::{fit_bicm, BicmOptions, NullModel};
use crate::bipartite::{binarize, compute_rca, nestedness, BinaryBipartite};
use crate::code::Scheme;
use crate::complexity::{
    eci_pci, exogenous_fitness, fitness_complexity, reflections, sectoral_fitness, ConvergenceRecord, FitnessOptions,
    Method, Normalization, ScoreAxis, ScoreVector,
};
use crate::error::{Error, Result};
use crate::export::{
    assist_graph, nestedness_document, proximity_graph, read_binary, read_proximity, read_rca, read_scores,
    summary_path, tested_edges, validated_graph, write_binary, write_edges, write_green, write_json, write_proximity,
    write_rca, write_records, write_scores, write_weights,
};
use crate::green::{green_scores, GreenOptions};
use crate::ingest::{
    build_matrix, count_patents, parse_patents, parse_records, CountingMode, GeoLevel, GreenClassification,
    IngestReport, ParseMode, ParseOptions, RawRecord, RecordSchema,
};
use crate::plot::emit_plot_data;
use crate::relatedness::{assist_matrix, proximity};
use crate::validation::{validate_links, NullPair, ValidationOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "ECOMPLEXITY_THREADS";

/// Sizes the global rayon pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
    if n == 0 {
        return Err(Error::Config(format!("{THREADS_ENV} must be at least 1")));
    }
    // A pool may already exist (e.g. in tests); keeping it is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Rca,
    Binarize,
    Complexity,
    Nestedness,
    Proximity,
    Assist,
    Validate,
    Green,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Rca,
        Stage::Binarize,
        Stage::Complexity,
        Stage::Nestedness,
        Stage::Proximity,
        Stage::Assist,
        Stage::Validate,
        Stage::Green,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Rca => "rca",
            Stage::Binarize => "binarize",
            Stage::Complexity => "complexity",
            Stage::Nestedness => "nestedness",
            Stage::Proximity => "proximity",
            Stage::Assist => "assist",
            Stage::Validate => "validate",
            Stage::Green => "green",
            Stage::Report => "report",
        }
    }

    /// Stages whose output directories this stage reads.
    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Rca | Stage::Assist | Stage::Validate => &[Stage::Ingest],
            Stage::Binarize => &[Stage::Rca],
            Stage::Complexity | Stage::Nestedness | Stage::Proximity | Stage::Report => &[Stage::Binarize],
            Stage::Green => &[Stage::Binarize, Stage::Complexity, Stage::Proximity],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Records,
    Patents,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatentOptions {
    pub scheme: Scheme,
    pub counting: CountingMode,
    pub geo_level: GeoLevel,
    /// Truncation depth applied to codes before splitting weight across them.
    pub code_depth: Option<usize>,
}

impl Default for PatentOptions {
    fn default() -> Self {
        PatentOptions {
            scheme: Scheme::Cpc,
            counting: CountingMode::Fractional,
            geo_level: GeoLevel::AsIs,
            code_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub format: InputFormat,
    pub schema: RecordSchema,
    pub parse: ParseOptions,
    pub patents: PatentOptions,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            path: PathBuf::from("records.csv"),
            format: InputFormat::Records,
            schema: RecordSchema::default(),
            parse: ParseOptions::default(),
            patents: PatentOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityMethod {
    Reflections,
    Eci,
    Fitness,
}

impl std::str::FromStr for ComplexityMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reflections" => Ok(ComplexityMethod::Reflections),
            "eci" => Ok(ComplexityMethod::Eci),
            "fitness" => Ok(ComplexityMethod::Fitness),
            _ => Err(Error::Config(format!("unknown complexity method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexityConfig {
    pub methods: Vec<ComplexityMethod>,
    pub fitness: FitnessOptions,
    /// Reflection iterations reported; an even count compares to ECI.
    pub reflections_iterations: usize,
    /// Activity complexities (scores CSV or JSON) for exogenous fitness.
    pub exogenous_q: Option<PathBuf>,
}

impl Default for ComplexityConfig {
    fn default() -> Self {
        ComplexityConfig {
            methods: vec![ComplexityMethod::Eci, ComplexityMethod::Fitness],
            fitness: FitnessOptions::default(),
            reflections_iterations: 20,
            exogenous_q: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssistConfig {
    pub lag: i32,
    /// Separate target layer; the main input is used when absent.
    pub target: Option<InputConfig>,
    pub target_layer: Option<String>,
}

impl Default for AssistConfig {
    fn default() -> Self {
        AssistConfig {
            lag: 5,
            target: None,
            target_layer: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenConfig {
    pub list: Option<PathBuf>,
    pub name: String,
    /// Scheme of the list; defaults to the scheme of the matrix activities.
    pub scheme: Option<Scheme>,
    pub options: GreenOptions,
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig {
            list: None,
            name: "green".into(),
            scheme: None,
            options: GreenOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    pub layer: String,
    /// Year analysed; the latest year in the data when absent.
    pub period: Option<i32>,
    /// Code depth used for aggregation (HS digits, patent depth).
    pub digits: usize,
    pub threshold: f64,
    pub stages: Vec<Stage>,
    pub complexity: ComplexityConfig,
    pub assist: AssistConfig,
    pub bicm: BicmOptions,
    pub validation: ValidationOptions,
    pub green: GreenConfig,
    /// Proximity cutoff for graph documents and plot bundles.
    pub proximity_cutoff: f64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: InputConfig::default(),
            layer: "trade".into(),
            period: None,
            digits: 6,
            threshold: 1.0,
            stages: vec![
                Stage::Ingest,
                Stage::Rca,
                Stage::Binarize,
                Stage::Complexity,
                Stage::Nestedness,
                Stage::Proximity,
                Stage::Report,
            ],
            complexity: ComplexityConfig::default(),
            assist: AssistConfig::default(),
            bicm: BicmOptions::default(),
            validation: ValidationOptions::default(),
            green: GreenConfig::default(),
            proximity_cutoff: 0.55,
            output_dir: PathBuf::from("out"),
        }
    }
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} `{}` does not exist", path.display())))
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks ranges and referenced paths. Runs before any computation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad(format!("threshold must be positive, got {}", self.threshold));
        }
        if self.digits == 0 {
            return bad("digits must be at least 1".into());
        }
        let f = &self.complexity.fitness;
        if !(f.tol > 0.0 && f.tol.is_finite()) {
            return bad(format!("complexity.fitness.tol must be positive, got {}", f.tol));
        }
        if f.max_iter == 0 {
            return bad("complexity.fitness.max_iter must be at least 1".into());
        }
        if !(f.floor > 0.0 && f.floor < 1.0) {
            return bad(format!("complexity.fitness.floor must be in (0, 1), got {}", f.floor));
        }
        if !(self.bicm.tol > 0.0 && self.bicm.tol.is_finite()) {
            return bad(format!("bicm.tol must be positive, got {}", self.bicm.tol));
        }
        if !(self.bicm.damping > 0.0 && self.bicm.damping <= 1.0) {
            return bad(format!("bicm.damping must be in (0, 1], got {}", self.bicm.damping));
        }
        if self.validation.samples < 100 {
            return bad(format!("validation.samples must be at least 100, got {}", self.validation.samples));
        }
        if !(self.validation.alpha > 0.0 && self.validation.alpha <= 1.0) {
            return bad(format!("validation.alpha must be in (0, 1], got {}", self.validation.alpha));
        }
        if self.assist.lag < 0 {
            return bad(format!("assist.lag must be non-negative, got {}", self.assist.lag));
        }
        if !(0.0..=1.0).contains(&self.proximity_cutoff) {
            return bad(format!("proximity_cutoff must be in [0, 1], got {}", self.proximity_cutoff));
        }
        if self.stages.is_empty() {
            return bad("no stages requested".into());
        }
        if self.stages.contains(&Stage::Ingest) {
            require_file(&self.input.path, "input")?;
            if let Some(t) = &self.assist.target {
                require_file(&t.path, "assist target input")?;
            }
        }
        if let Some(q) = &self.complexity.exogenous_q {
            require_file(q, "exogenous complexity file")?;
        }
        if self.stages.contains(&Stage::Green) {
            match &self.green.list {
                Some(p) => require_file(p, "green list")?,
                None => return bad("stage `green` needs green.list".into()),
            }
            if !self.complexity.methods.contains(&ComplexityMethod::Eci) {
                return bad("stage `green` needs the `eci` complexity method for PCI".into());
            }
        }
        Ok(())
    }

    fn input_files(&self) -> Vec<PathBuf> {
        let mut files = Vec::new();
        if self.stages.contains(&Stage::Ingest) {
            files.push(self.input.path.clone());
            if let Some(t) = &self.assist.target {
                files.push(t.path.clone());
            }
        }
        files.extend(self.complexity.exogenous_q.clone());
        if self.stages.contains(&Stage::Green) {
            files.extend(self.green.list.clone());
        }
        files
    }
}

/// What a stage reports back for the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub parameters: Value,
    pub convergence: BTreeMap<String, ConvergenceRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: String,
    pub parameters: Value,
    pub outputs: Vec<FileDigest>,
    pub convergence: BTreeMap<String, ConvergenceRecord>,
    pub warnings: Vec<String>,
    pub wall_clock_seconds: f64,
}

/// Machine-readable failure description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<Value>,
}

impl ErrorReport {
    pub fn new(e: &Error, stage: Option<Stage>) -> Self {
        let rows = match e {
            Error::MalformedRows(rows) => rows
                .iter()
                .map(|r| json!({"line": r.line, "field": r.field, "message": r.message}))
                .collect(),
            _ => Vec::new(),
        };
        ErrorReport {
            kind: e.kind().into(),
            exit_code: e.exit_code(),
            message: e.to_string(),
            stage,
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub created_unix: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub stages: Vec<StageRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

fn digest_dir(dir: &Path, rel_to: &Path) -> Result<Vec<FileDigest>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    files.sort();
    files
        .into_iter()
        .filter(|p| p.is_file())
        .map(|p| {
            Ok(FileDigest {
                sha256: sha256_file(&p)?,
                path: p.strip_prefix(rel_to).unwrap_or(&p).to_path_buf(),
            })
        })
        .collect()
}

fn remove_dir_if_exists(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn stage_dir(out: &Path, stage: Stage) -> PathBuf {
    out.join(stage.name())
}

/// Runs the configured stages in dependency order and writes
/// `manifest.json` (and `error.json` on failure) into the output directory.
pub fn run_pipeline(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let out = &config.output_dir;
    let mut stages = config.stages.clone();
    stages.sort();
    stages.dedup();
    for &s in &stages {
        for &dep in s.dependencies() {
            if !stages.contains(&dep) && !stage_dir(out, dep).is_dir() {
                return Err(Error::Config(format!(
                    "stage `{}` needs `{}` outputs; request that stage or provide {}",
                    s.name(),
                    dep.name(),
                    stage_dir(out, dep).display()
                )));
            }
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let _ = fs::remove_file(out.join("error.json"));
    let inputs = config
        .input_files()
        .into_iter()
        .map(|p| Ok(FileDigest { sha256: sha256_file(&p)?, path: p }))
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = RunManifest {
        version: VERSION.into(),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        config: config.clone(),
        inputs,
        stages: Vec::new(),
        error: None,
    };

    for stage in stages {
        let partial = out.join(format!("{}.partial", stage.name()));
        let quarantine = out.join(format!("{}.quarantine", stage.name()));
        let target = stage_dir(out, stage);
        remove_dir_if_exists(&partial)?;
        fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
        let started = Instant::now();
        let result = execute_stage(stage, config, &partial);
        let elapsed = started.elapsed().as_secs_f64();
        match result {
            Ok(outcome) => {
                remove_dir_if_exists(&target)?;
                remove_dir_if_exists(&quarantine)?;
                fs::rename(&partial, &target).map_err(|e| Error::io(&target, e))?;
                manifest.stages.push(StageRecord {
                    stage,
                    status: "ok".into(),
                    parameters: outcome.parameters,
                    outputs: digest_dir(&target, out)?,
                    convergence: outcome.convergence,
                    warnings: outcome.warnings,
                    wall_clock_seconds: elapsed,
                });
            }
            Err(e) => {
                remove_dir_if_exists(&quarantine)?;
                fs::rename(&partial, &quarantine).map_err(|err| Error::io(&quarantine, err))?;
                let report = ErrorReport::new(&e, Some(stage));
                manifest.stages.push(StageRecord {
                    stage,
                    status: "failed".into(),
                    parameters: Value::Null,
                    outputs: digest_dir(&quarantine, out)?,
                    convergence: BTreeMap::new(),
                    warnings: Vec::new(),
                    wall_clock_seconds: elapsed,
                });
                write_json(&out.join("error.json"), &report)?;
                manifest.error = Some(report);
                write_json(&out.join("manifest.json"), &manifest)?;
                return Err(e);
            }
        }
    }
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn execute_stage(stage: Stage, c: &RunConfig, dir: &Path) -> Result<StageOutcome> {
    let out = &c.output_dir;
    let ingest = stage_dir(out, Stage::Ingest);
    let matrix = stage_dir(out, Stage::Binarize).join("matrix.csv");
    match stage {
        Stage::Ingest => {
            let mut outcome = ingest_stage(&c.input, dir, "records")?;
            if let Some(t) = &c.assist.target {
                let target = ingest_stage(t, dir, "target_records")?;
                outcome.parameters = json!({"input": outcome.parameters, "target": target.parameters});
                outcome.warnings.extend(target.warnings);
            }
            Ok(outcome)
        }
        Stage::Rca => rca_stage(&ingest.join("records.csv"), c.period, c.digits, &c.layer, dir),
        Stage::Binarize => binarize_stage(&stage_dir(out, Stage::Rca).join("rca.csv"), c.threshold, dir),
        Stage::Complexity => complexity_stage(&matrix, &c.complexity, dir),
        Stage::Nestedness => nestedness_stage(&matrix, dir),
        Stage::Proximity => proximity_stage(&matrix, c.proximity_cutoff, dir),
        Stage::Assist | Stage::Validate => {
            let target_records = if c.assist.target.is_some() {
                ingest.join("target_records.csv")
            } else {
                ingest.join("records.csv")
            };
            let inputs = AssistInputs {
                source_records: ingest.join("records.csv"),
                target_records,
                period: c.period,
                lag: c.assist.lag,
                digits: c.digits,
                threshold: c.threshold,
                source_layer: c.layer.clone(),
                target_layer: c.assist.target_layer.clone().unwrap_or_else(|| c.layer.clone()),
            };
            if stage == Stage::Assist {
                assist_stage(&inputs, dir)
            } else {
                validate_stage(&inputs, &c.bicm, &c.validation, dir)
            }
        }
        Stage::Green => {
            let cx = stage_dir(out, Stage::Complexity);
            let complexity = cx.join("complexity.json");
            green_stage(
                &GreenInputs {
                    matrix,
                    pci: cx.join("pci.json"),
                    proximity: stage_dir(out, Stage::Proximity).join("proximity.csv"),
                    list: c.green.list.clone().expect("validated"),
                    name: c.green.name.clone(),
                    scheme: c.green.scheme,
                    complexity: complexity.exists().then_some(complexity),
                    options: c.green.options,
                },
                dir,
            )
        }
        Stage::Report => {
            let mut files = vec![matrix];
            let fitness = stage_dir(out, Stage::Complexity).join("fitness.csv");
            let prox = stage_dir(out, Stage::Proximity).join("proximity.csv");
            files.extend([fitness, prox].into_iter().filter(|p| p.exists()));
            report_stage(&files, c.proximity_cutoff, dir)
        }
    }
}

/// Reads an input file into canonical records (patents are counted first).
pub fn load_input(input: &InputConfig) -> Result<(Vec<RawRecord>, IngestReport)> {
    let file = File::open(&input.path).map_err(|e| Error::io(&input.path, e))?;
    let reader = std::io::BufReader::with_capacity(1 << 20, file);
    match input.format {
        InputFormat::Records => {
            let parsed = parse_records(reader, &input.schema, &input.parse)?;
            Ok((parsed.records, parsed.report))
        }
        InputFormat::Patents => {
            let parsed = parse_patents(reader, input.patents.scheme, &input.parse)?;
            let p = &input.patents;
            let records = count_patents(&parsed.records, p.counting, p.geo_level, p.code_depth)?;
            Ok((records, parsed.report))
        }
    }
}

/// Writes `<name>.csv` (canonical records) and `<name>_report.json`.
pub fn ingest_stage(input: &InputConfig, dir: &Path, name: &str) -> Result<StageOutcome> {
    let (records, report) = load_input(input)?;
    write_records(&dir.join(format!("{name}.csv")), &records)?;
    write_json(&dir.join(format!("{name}_report.json")), &report)?;
    let mut warnings = Vec::new();
    if !report.skipped.is_empty() {
        warnings.push(format!("{} malformed row(s) skipped", report.skipped.len()));
    }
    let periods: std::collections::BTreeSet<i32> = records.iter().map(|r| r.period).collect();
    Ok(StageOutcome {
        parameters: json!({
            "path": input.path,
            "format": input.format,
            "rows_read": report.rows_read,
            "rows_accepted": report.rows_accepted,
            "records_written": records.len(),
            "periods": periods,
        }),
        convergence: BTreeMap::new(),
        warnings,
    })
}

/// Reads a canonical `geo,activity,value,year` file.
pub fn read_canonical_records(path: &Path) -> Result<Vec<RawRecord>> {
    let schema = RecordSchema {
        scheme: None,
        ..RecordSchema::default()
    };
    let opts = ParseOptions {
        mode: ParseMode::Strict,
        ..ParseOptions::default()
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_records(std::io::BufReader::with_capacity(1 << 20, file), &schema, &opts)?.records)
}

fn resolve_period(records: &[RawRecord], period: Option<i32>) -> Result<i32> {
    match period {
        Some(p) => Ok(p),
        None => records
            .iter()
            .map(|r| r.period)
            .max()
            .ok_or_else(|| Error::Data("no records to choose a period from".into())),
    }
}

fn binary_for(records: &[RawRecord], period: i32, digits: usize, threshold: f64, layer: &str) -> Result<BinaryBipartite> {
    let (w, _) = build_matrix(records, period, digits, layer)?;
    binarize(&compute_rca(&w)?, threshold)
}

/// Aggregates one period into `weights.csv` and `rca.csv` (with summaries).
pub fn rca_stage(records_path: &Path, period: Option<i32>, digits: usize, layer: &str, dir: &Path) -> Result<StageOutcome> {
    let records = read_canonical_records(records_path)?;
    let period = resolve_period(&records, period)?;
    let (w, report) = build_matrix(&records, period, digits, layer)?;
    let wp = dir.join("weights.csv");
    let ws = write_weights(&wp, &w)?;
    write_json(&summary_path(&wp), &ws)?;
    let rca = compute_rca(&w)?;
    let rp = dir.join("rca.csv");
    let rs = write_rca(&rp, &rca)?;
    write_json(&summary_path(&rp), &rs)?;
    let mut warnings = Vec::new();
    if !report.zero_rows.is_empty() || !report.zero_columns.is_empty() {
        warnings.push(format!(
            "{} zero row(s) and {} zero column(s); their RCA is undefined",
            report.zero_rows.len(),
            report.zero_columns.len()
        ));
    }
    Ok(StageOutcome {
        parameters: json!({"period": period, "digits": digits, "layer": layer, "records_used": report.records_used}),
        convergence: BTreeMap::new(),
        warnings,
    })
}

pub fn binarize_stage(rca_path: &Path, threshold: f64, dir: &Path) -> Result<StageOutcome> {
    let rca = read_rca(rca_path)?;
    let m = binarize(&rca, threshold)?;
    let p = dir.join("matrix.csv");
    let s = write_binary(&p, &m)?;
    write_json(&summary_path(&p), &s)?;
    Ok(StageOutcome {
        parameters: json!({"threshold": threshold, "fill": s.fill}),
        ..StageOutcome::default()
    })
}

fn write_score_pair(dir: &Path, name: &str, s: &ScoreVector) -> Result<()> {
    write_scores(&dir.join(format!("{name}.csv")), s)?;
    write_json(&dir.join(format!("{name}.json")), s)
}

/// Drops empty rows and columns, with a warning naming them.
fn positive_part(m: &BinaryBipartite, warnings: &mut Vec<String>) -> BinaryBipartite {
    let pruned = m.prune_zero_degree();
    if pruned.n_geos() != m.n_geos() || pruned.n_activities() != m.n_activities() {
        warnings.push(format!(
            "excluded {} geo(s) and {} activit(ies) with zero degree",
            m.n_geos() - pruned.n_geos(),
            m.n_activities() - pruned.n_activities()
        ));
    }
    pruned
}

pub fn complexity_stage(matrix_path: &Path, cfg: &ComplexityConfig, dir: &Path) -> Result<StageOutcome> {
    let full = read_binary(matrix_path)?;
    let mut outcome = StageOutcome::default();
    let m = positive_part(&full, &mut outcome.warnings);
    for method in &cfg.methods {
        match method {
            ComplexityMethod::Reflections => {
                let n = cfg.reflections_iterations;
                let trace = reflections(&m, n)?;
                let flat = || Error::Numerical("reflection iterate has no spread to standardise".into());
                let g = trace.geo_standardized[n].clone().ok_or_else(flat)?;
                let a = trace.activity_standardized[n].clone().ok_or_else(flat)?;
                let gs = ScoreVector::new(
                    ScoreAxis::Geo,
                    m.geos.clone(),
                    g,
                    Method::Reflections,
                    Normalization::Standardized,
                );
                let as_ = ScoreVector::new(
                    ScoreAxis::Activity,
                    m.activities.iter().map(ToString::to_string).collect(),
                    a,
                    Method::Reflections,
                    Normalization::Standardized,
                );
                write_score_pair(dir, "reflections_geo", &gs)?;
                write_score_pair(dir, "reflections_activity", &as_)?;
            }
            ComplexityMethod::Eci => {
                let (eci, pci) = eci_pci(&m)?;
                outcome.warnings.extend(eci.warnings.iter().cloned());
                if let Some(r) = &eci.convergence {
                    outcome.convergence.insert("eci".into(), r.clone());
                }
                write_score_pair(dir, "eci", &eci)?;
                write_score_pair(dir, "pci", &pci)?;
            }
            ComplexityMethod::Fitness => {
                let (f, q) = fitness_complexity(&m, &cfg.fitness)?;
                outcome.warnings.extend(f.warnings.iter().map(|w| format!("fitness: {w}")));
                if let Some(r) = &f.convergence {
                    outcome.convergence.insert("fitness".into(), r.clone());
                }
                write_score_pair(dir, "fitness", &f)?;
                write_score_pair(dir, "complexity", &q)?;
            }
        }
    }
    if let Some(q_path) = &cfg.exogenous_q {
        let q = read_scores(q_path, ScoreAxis::Activity, Method::Complexity, Normalization::MeanOne)?;
        let ex = exogenous_fitness(&full, &q)?;
        outcome.warnings.extend(ex.warnings.iter().cloned());
        write_score_pair(dir, "exogenous_fitness", &ex)?;
    }
    outcome.parameters = json!({
        "methods": cfg.methods,
        "fitness": cfg.fitness,
        "reflections_iterations": cfg.reflections_iterations,
        "exogenous_q": cfg.exogenous_q,
        "geos": m.n_geos(),
        "activities": m.n_activities(),
    });
    Ok(outcome)
}

pub fn nestedness_stage(matrix_path: &Path, dir: &Path) -> Result<StageOutcome> {
    let m = read_binary(matrix_path)?;
    let rep = nestedness(&m);
    write_json(&dir.join("nestedness.json"), &nestedness_document(&m, &rep))?;
    let mut warnings = Vec::new();
    if rep.score.is_none() {
        warnings.push("fewer than two rows or columns; NODF undefined".into());
    }
    Ok(StageOutcome {
        parameters: json!({"metric": "nodf", "score": rep.score}),
        convergence: BTreeMap::new(),
        warnings,
    })
}

pub fn proximity_stage(matrix_path: &Path, cutoff: f64, dir: &Path) -> Result<StageOutcome> {
    let m = read_binary(matrix_path)?;
    let net = proximity(&m);
    write_proximity(&dir.join("proximity.csv"), &net)?;
    write_json(&dir.join("proximity.json"), &proximity_graph(&net, cutoff))?;
    let mut warnings = Vec::new();
    if !net.zero_ubiquity.is_empty() {
        warnings.push(format!("{} activit(ies) with zero ubiquity", net.zero_ubiquity.len()));
    }
    Ok(StageOutcome {
        parameters: json!({"cutoff": cutoff}),
        convergence: BTreeMap::new(),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssistInputs {
    pub source_records: PathBuf,
    pub target_records: PathBuf,
    /// Source year; the latest year with a `lag`-year successor when absent.
    pub period: Option<i32>,
    pub lag: i32,
    pub digits: usize,
    pub threshold: f64,
    pub source_layer: String,
    pub target_layer: String,
}

impl AssistInputs {
    fn matrices(&self) -> Result<(BinaryBipartite, BinaryBipartite)> {
        let src = read_canonical_records(&self.source_records)?;
        let dst = if self.target_records == self.source_records {
            src.clone()
        } else {
            read_canonical_records(&self.target_records)?
        };
        let period = match self.period {
            Some(p) => p,
            None => {
                let targets: std::collections::BTreeSet<i32> = dst.iter().map(|r| r.period).collect();
                src.iter()
                    .map(|r| r.period)
                    .filter(|p| targets.contains(&(p + self.lag)))
                    .max()
                    .ok_or_else(|| Error::Data(format!("no source year has data {} year(s) later", self.lag)))?
            }
        };
        let a = binary_for(&src, period, self.digits, self.threshold, &self.source_layer)?;
        let b = binary_for(&dst, period + self.lag, self.digits, self.threshold, &self.target_layer)?;
        Ok((a, b))
    }

    fn parameters(&self, src: &BinaryBipartite, dst: &BinaryBipartite) -> Value {
        json!({
            "source_period": src.period,
            "target_period": dst.period,
            "lag": self.lag,
            "digits": self.digits,
            "threshold": self.threshold,
            "source_layer": self.source_layer,
            "target_layer": self.target_layer,
        })
    }
}

fn write_matrix_with_summary(path: &Path, m: &BinaryBipartite) -> Result<()> {
    let s = write_binary(path, m)?;
    write_json(&summary_path(path), &s)
}

pub fn assist_stage(inputs: &AssistInputs, dir: &Path) -> Result<StageOutcome> {
    let (src, dst) = inputs.matrices()?;
    let b = assist_matrix(&src, &dst)?;
    write_matrix_with_summary(&dir.join("source_matrix.csv"), &src)?;
    write_matrix_with_summary(&dir.join("target_matrix.csv"), &dst)?;
    let graph = assist_graph(&b);
    write_edges(&dir.join("assist.csv"), &graph.edges)?;
    write_json(&dir.join("assist.json"), &graph)?;
    Ok(StageOutcome {
        parameters: inputs.parameters(&src, &dst),
        convergence: BTreeMap::new(),
        warnings: b.warnings.clone(),
    })
}

fn null_record(n: &NullModel) -> ConvergenceRecord {
    ConvergenceRecord {
        iterations: n.iterations,
        residual: n.residual,
        converged: true,
        ..ConvergenceRecord::default()
    }
}

pub fn validate_stage(
    inputs: &AssistInputs,
    bicm: &BicmOptions,
    opts: &ValidationOptions,
    dir: &Path,
) -> Result<StageOutcome> {
    let (src, dst) = inputs.matrices()?;
    let b = assist_matrix(&src, &dst)?;
    let mut convergence = BTreeMap::new();
    let src_null = fit_bicm(&src, bicm)?;
    convergence.insert("bicm_source".to_string(), null_record(&src_null));
    let validated = if src == dst {
        validate_links(&b, NullPair::Shared(&src_null), opts)?
    } else {
        let dst_null = fit_bicm(&dst, bicm)?;
        convergence.insert("bicm_target".to_string(), null_record(&dst_null));
        validate_links(
            &b,
            NullPair::Separate {
                source: &src_null,
                target: &dst_null,
            },
            opts,
        )?
    };
    write_edges(&dir.join("links.csv"), &tested_edges(&validated))?;
    let graph = validated_graph(&b, &validated);
    write_edges(&dir.join("network.csv"), &graph.edges)?;
    write_json(&dir.join("network.json"), &graph)?;
    let mut parameters = inputs.parameters(&src, &dst);
    parameters["bicm"] = serde_json::to_value(bicm)?;
    parameters["validation"] = serde_json::to_value(opts)?;
    parameters["significant_links"] = validated.edges.len().into();
    Ok(StageOutcome {
        parameters,
        convergence,
        warnings: b.warnings.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenInputs {
    pub matrix: PathBuf,
    /// PCI as scores JSON or CSV.
    pub pci: PathBuf,
    pub proximity: PathBuf,
    pub list: PathBuf,
    pub name: String,
    pub scheme: Option<Scheme>,
    /// Full-run activity complexities; enables sectoral fitness.
    pub complexity: Option<PathBuf>,
    pub options: GreenOptions,
}

pub fn green_stage(inputs: &GreenInputs, dir: &Path) -> Result<StageOutcome> {
    let full = read_binary(&inputs.matrix)?;
    let pci = read_scores(&inputs.pci, ScoreAxis::Activity, Method::Pci, Normalization::Standardized)?;
    // PCI exists only for activities with positive ubiquity.
    let mut warnings = Vec::new();
    let m = {
        let keep: std::collections::HashSet<&str> = pci.ids.iter().map(String::as_str).collect();
        let cols: Vec<usize> = (0..full.n_activities())
            .filter(|&a| keep.contains(full.activities[a].to_string().as_str()))
            .collect();
        if cols.len() < full.n_activities() {
            warnings.push(format!("{} activit(ies) without PCI left out", full.n_activities() - cols.len()));
        }
        let entries = full.entries.select(ndarray::Axis(1), &cols);
        let mut m = BinaryBipartite::new(full.geos.clone(), cols.iter().map(|&a| full.activities[a].clone()).collect(), entries)?;
        m.threshold = full.threshold;
        m.period = full.period;
        m.layer = full.layer.clone();
        m
    };
    let net = read_proximity(&inputs.proximity, &m)?;
    let scheme = match inputs.scheme {
        Some(s) => s,
        None => m
            .activities
            .first()
            .map(|a| a.scheme())
            .ok_or_else(|| Error::Data("matrix has no activities".into()))?,
    };
    let text = fs::read_to_string(&inputs.list).map_err(|e| Error::io(&inputs.list, e))?;
    let mask = GreenClassification::parse(&text, &inputs.name, scheme)?.mask(&m.activities)?;
    let scores = green_scores(&m, &pci, &net, &mask, &inputs.options)?;
    write_green(&dir.join("green.csv"), &scores)?;
    write_json(&dir.join("green.json"), &scores)?;
    if let Some(q_path) = &inputs.complexity {
        let q = read_scores(q_path, ScoreAxis::Activity, Method::Complexity, Normalization::MeanOne)?;
        let sf = sectoral_fitness(&m, &q, &mask)?;
        write_score_pair(dir, "sectoral_fitness", &sf)?;
    }
    Ok(StageOutcome {
        parameters: json!({
            "green_set": inputs.name,
            "green_activities": mask.count(),
            "options": inputs.options,
            "sectoral_fitness": inputs.complexity.is_some(),
        }),
        convergence: BTreeMap::new(),
        warnings,
    })
}

pub fn report_stage(files: &[PathBuf], cutoff: f64, dir: &Path) -> Result<StageOutcome> {
    let written = files
        .iter()
        .map(|f| emit_plot_data(f, dir, cutoff))
        .collect::<Result<Vec<_>>>()?;
    Ok(StageOutcome {
        parameters: json!({
            "cutoff": cutoff,
            "tables": written.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy()).collect::<Vec<_>>(),
        }),
        ..StageOutcome::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = RunConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn unknown_fields_are_config_errors() {
        let e = RunConfig::from_json(r#"{"treshold": 2}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn zero_tolerance_fails_validation() {
        let mut c = RunConfig::default();
        c.stages = vec![Stage::Complexity];
        c.complexity.fitness.tol = 0.0;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn dependencies_come_earlier() {
        for s in Stage::ALL {
            assert!(s.dependencies().iter().all(|&d| d < s));
        }
    }
}
