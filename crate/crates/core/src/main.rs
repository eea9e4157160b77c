use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ecomplexity::code::Scheme;
use ecomplexity::complexity::{FitnessOptions, Scale};
use ecomplexity::error::{Error, Result};
use ecomplexity::green::{GcpWeighting, GreenOptions, PciTransform};
use ecomplexity::ingest::{CountingMode, GeoLevel, ParseMode, ParseOptions, RecordSchema};
use ecomplexity::pipeline::{
    self, AssistInputs, ComplexityConfig, ComplexityMethod, ErrorReport, GreenInputs, InputConfig, InputFormat,
    PatentOptions, RunConfig, StageOutcome,
};
use ecomplexity::validation::{Correction, ValidationOptions};

#[derive(Parser)]
#[command(name = "ecomplexity", version, about = "Economic complexity and green-transition metrics")]
struct Cli {
    /// Print the default run configuration and exit.
    #[arg(long)]
    print_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a record or patent file into canonical records.
    Ingest(IngestArgs),
    /// Aggregate one year and compute RCA.
    Rca {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        period: Option<i32>,
        #[arg(long, default_value_t = 6)]
        digits: usize,
        #[arg(long, default_value = "trade")]
        layer: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold an RCA matrix.
    Binarize {
        #[arg(long)]
        rca: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// ECI/PCI, Fitness-Complexity or reflection scores.
    Complexity {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "eci,fitness")]
        method: Vec<String>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value = "mean-one")]
        scale: String,
        #[arg(long)]
        exogenous_q: Option<PathBuf>,
        /// Reflection iterations.
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Product-space proximity network.
    Proximity {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 0.55)]
        cutoff: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time-lagged assist matrix.
    Assist(AssistArgs),
    /// Assist matrix filtered against BiCM null models.
    Validate {
        #[command(flatten)]
        assist: AssistArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value = "bh-fdr")]
        correction: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Green complexity metrics.
    Green {
        #[command(subcommand)]
        command: GreenCommand,
    },
    /// NODF nestedness with degree orderings.
    Nestedness {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plot-ready tables from score, matrix or edge files.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.55)]
        cutoff: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the staged pipeline from a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides validation.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum GreenCommand {
    /// GCI and GCP per geo.
    Score {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        pci: PathBuf,
        #[arg(long)]
        proximity: PathBuf,
        #[arg(long)]
        green_list: PathBuf,
        #[arg(long, default_value = "green")]
        name: String,
        #[arg(long)]
        scheme: Option<String>,
        /// Full-run activity complexities; adds sectoral fitness.
        #[arg(long)]
        complexity: Option<PathBuf>,
        /// Use rank-transformed PCI in GCI.
        #[arg(long)]
        rank_pci: bool,
        /// Weight GCP by rank-transformed PCI.
        #[arg(long)]
        pci_weighted_gcp: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    /// Input holds patents (patent_id, year, codes, locations).
    #[arg(long)]
    patents: bool,
    /// Activity scheme: hs (default for records), cpc (default for patents),
    /// ipc, custom, or `prefixed` when cells carry `SCHEME:` prefixes.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long, default_value = "geo")]
    geo_column: String,
    #[arg(long, default_value = "activity")]
    activity_column: String,
    #[arg(long, default_value = "value")]
    value_column: String,
    #[arg(long, default_value = "year")]
    period_column: String,
    /// Fractional (default) or full patent counting.
    #[arg(long, default_value = "fractional")]
    counting: String,
    /// Keep only this many leading characters of patent locations.
    #[arg(long)]
    geo_prefix: Option<usize>,
    #[arg(long)]
    code_depth: Option<usize>,
    /// Skip malformed rows instead of failing.
    #[arg(long)]
    lenient: bool,
    #[arg(long)]
    min_year: Option<i32>,
    #[arg(long)]
    max_year: Option<i32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AssistArgs {
    #[arg(long)]
    records: PathBuf,
    /// Records of a different target layer.
    #[arg(long)]
    target_records: Option<PathBuf>,
    #[arg(long)]
    period: Option<i32>,
    #[arg(long, default_value_t = 5)]
    lag: i32,
    #[arg(long, default_value_t = 6)]
    digits: usize,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long, default_value = "trade")]
    layer: String,
    #[arg(long)]
    target_layer: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

impl AssistArgs {
    fn inputs(&self) -> AssistInputs {
        AssistInputs {
            source_records: self.records.clone(),
            target_records: self.target_records.clone().unwrap_or_else(|| self.records.clone()),
            period: self.period,
            lag: self.lag,
            digits: self.digits,
            threshold: self.threshold,
            source_layer: self.layer.clone(),
            target_layer: self.target_layer.clone().unwrap_or_else(|| self.layer.clone()),
        }
    }
}

fn out_dir(p: &Path) -> Result<&Path> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
    Ok(p)
}

fn parse_scale(s: &str) -> Result<Scale> {
    match s {
        "mean-one" => Ok(Scale::MeanOne),
        "dummy" => Ok(Scale::Dummy),
        _ => Err(Error::Config(format!("unknown scale `{s}` (mean-one or dummy)"))),
    }
}

fn ingest(a: IngestArgs) -> Result<StageOutcome> {
    let prefixed = a.scheme.as_deref() == Some("prefixed");
    let scheme = a.scheme.as_deref().filter(|_| !prefixed).map(str::parse::<Scheme>).transpose()?;
    let counting = match a.counting.as_str() {
        "fractional" => CountingMode::Fractional,
        "full" => CountingMode::Full,
        c => return Err(Error::Config(format!("unknown counting mode `{c}`"))),
    };
    let input = InputConfig {
        path: a.input,
        format: if a.patents { InputFormat::Patents } else { InputFormat::Records },
        schema: RecordSchema {
            geo_column: a.geo_column,
            activity_column: a.activity_column,
            value_column: a.value_column,
            period_column: a.period_column,
            scheme: if a.patents || prefixed { None } else { Some(scheme.unwrap_or(Scheme::Hs)) },
        },
        parse: ParseOptions {
            mode: if a.lenient { ParseMode::Lenient } else { ParseMode::Strict },
            min_year: a.min_year,
            max_year: a.max_year,
        },
        patents: PatentOptions {
            scheme: scheme.unwrap_or(Scheme::Cpc),
            counting,
            geo_level: a.geo_prefix.map_or(GeoLevel::AsIs, GeoLevel::Prefix),
            code_depth: a.code_depth,
        },
    };
    pipeline::ingest_stage(&input, out_dir(&a.out)?, "records")
}

fn dispatch(command: Command) -> Result<serde_json::Value> {
    let outcome = match command {
        Command::Ingest(a) => ingest(a)?,
        Command::Rca {
            records,
            period,
            digits,
            layer,
            out,
        } => pipeline::rca_stage(&records, period, digits, &layer, out_dir(&out)?)?,
        Command::Binarize { rca, threshold, out } => {
            if !(threshold > 0.0) {
                return Err(Error::Config(format!("threshold must be positive, got {threshold}")));
            }
            pipeline::binarize_stage(&rca, threshold, out_dir(&out)?)?
        }
        Command::Complexity {
            matrix,
            method,
            tol,
            max_iter,
            scale,
            exogenous_q,
            iterations,
            out,
        } => {
            if !(tol > 0.0) || max_iter == 0 {
                return Err(Error::Config("--tol must be positive and --max-iter at least 1".into()));
            }
            let cfg = ComplexityConfig {
                methods: method.iter().map(|m| m.parse()).collect::<Result<Vec<ComplexityMethod>>>()?,
                fitness: FitnessOptions {
                    tol,
                    max_iter,
                    scale: parse_scale(&scale)?,
                    ..FitnessOptions::default()
                },
                reflections_iterations: iterations,
                exogenous_q,
            };
            pipeline::complexity_stage(&matrix, &cfg, out_dir(&out)?)?
        }
        Command::Proximity { matrix, cutoff, out } => pipeline::proximity_stage(&matrix, cutoff, out_dir(&out)?)?,
        Command::Assist(a) => pipeline::assist_stage(&a.inputs(), out_dir(&a.out)?)?,
        Command::Validate {
            assist,
            samples,
            alpha,
            correction,
            seed,
        } => {
            let opts = ValidationOptions {
                samples,
                alpha,
                correction: correction.parse::<Correction>()?,
                seed,
            };
            pipeline::validate_stage(&assist.inputs(), &Default::default(), &opts, out_dir(&assist.out)?)?
        }
        Command::Green {
            command:
                GreenCommand::Score {
                    matrix,
                    pci,
                    proximity,
                    green_list,
                    name,
                    scheme,
                    complexity,
                    rank_pci,
                    pci_weighted_gcp,
                    out,
                },
        } => {
            let inputs = GreenInputs {
                matrix,
                pci,
                proximity,
                list: green_list,
                name,
                scheme: scheme.as_deref().map(str::parse).transpose()?,
                complexity,
                options: GreenOptions {
                    pci_transform: if rank_pci { PciTransform::Rank } else { PciTransform::Raw },
                    gcp_weighting: if pci_weighted_gcp {
                        GcpWeighting::PciRank
                    } else {
                        GcpWeighting::Unweighted
                    },
                },
            };
            pipeline::green_stage(&inputs, out_dir(&out)?)?
        }
        Command::Nestedness { matrix, out } => pipeline::nestedness_stage(&matrix, out_dir(&out)?)?,
        Command::Report { input, cutoff, out } => pipeline::report_stage(&input, cutoff, out_dir(&out)?)?,
        Command::Run { config, seed, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.validation.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let manifest = pipeline::run_pipeline(&cfg)?;
            return Ok(serde_json::json!({
                "output_dir": cfg.output_dir,
                "stages": manifest.stages.iter().map(|s| s.stage).collect::<Vec<_>>(),
            }));
        }
    };
    Ok(serde_json::to_value(outcome)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = pipeline::configure_threads().and_then(|_| {
        if cli.print_default_config {
            return Ok(serde_json::to_value(RunConfig::default())?);
        }
        match cli.command {
            Some(c) => dispatch(c),
            None => Err(Error::Config("no subcommand given (see --help)".into())),
        }
    });
    match result {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("JSON value serialises"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = ErrorReport::new(&e, None);
            eprintln!("{}", serde_json::to_string_pretty(&report).expect("report serialises"));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
