//! `pstates`: synthesize cohorts and run the patient-state pipeline stage by
//! stage or end to end. Every stage writes a `<stage>.manifest.json` with
//! sha256 hashes of the files it read and wrote.

mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pstates::clustering::ClusterModel;
use pstates::features::{FeatureTable, Modality, NormalizationParams};
use pstates::io::{open, read_json};
use pstates::pipeline::{
    assign_and_contrast, build_features, cluster_features, json_to, robustness, run_pipeline, validate_model,
    write_with, AnalysisConfig, InputPaths, Inputs, KRange, StageArtifacts, ASSIGNMENTS_FILE, COHORT_FILE, DWELL_FILE,
    FEATURES_FILE, MOBILITY_FILE, MODEL_FILE, NORMALIZATION_FILE, RANKED_MODEL_FILE, ROBUSTNESS_FILE, TIMECOURSE_DIR,
    VALIDATION_FILE, VOICE_COMPONENTS_FILE,
};
use pstates::synth::{generate_cohort, CohortSpec};
use pstates::timecourse::{
    event_dates, export_timecourse, parse_events, read_assignments, write_assignments, DwellContrast,
};
use pstates::validation::parse_assessments;
use pstates::{Error, Result};

use manifest::write_manifest;

/// Environment variable naming the default analysis config file.
const CONFIG_ENV: &str = "PSTATES_CONFIG";

#[derive(Parser, Debug)]
#[command(
    name = "pstates",
    version,
    about = "Patient-state discovery from daily questionnaires, voice and actigraphy"
)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic cohort with known latent states.
    Synth {
        /// CohortSpec JSON; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and filter the daily questionnaire records.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the normalized feature table.
    Features {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select k and fit the state model.
    Cluster {
        /// Feature table from `features`; otherwise built from `--data`.
        #[arg(long, conflicts_with = "modality")]
        features: Option<PathBuf>,
        #[arg(long, requires = "features")]
        normalization: Option<PathBuf>,
        #[command(flatten)]
        data: OptionalDataArgs,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlate centroid distances with clinical assessments and rank states.
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        assessments: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every day with its nearest state and compute dwell contrasts.
    Assign {
        /// Ranked model from `validate`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write per-participant state CSVs and SVG timecourses.
    Report {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        assignments: PathBuf,
        #[arg(long)]
        dwell: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage. With `--spec`, a synthetic cohort is generated into
    /// `<out>/data` first.
    Pipeline {
        #[arg(long, conflicts_with = "data", required_unless_present = "data")]
        spec: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[command(flatten)]
        analysis: AnalysisArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Directory holding questions.csv, records.csv and optional tables.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug)]
struct OptionalDataArgs {
    #[arg(long, required_unless_present = "features")]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalysisArgs {
    /// Analysis config JSON.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// questionnaires, voice, mobility or all.
    #[arg(long)]
    modality: Option<Modality>,
    /// Inclusive range of k to compare, e.g. 2..10.
    #[arg(long)]
    k_range: Option<KRange>,
    /// Fit this k instead of selecting one.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Permutations per validation cell.
    #[arg(long)]
    n_perm: Option<usize>,
}

impl AnalysisArgs {
    fn resolve(&self) -> Result<AnalysisConfig> {
        let mut cfg: AnalysisConfig = match &self.config {
            Some(path) => read_json(path)?,
            None => AnalysisConfig::default(),
        };
        if let Some(m) = self.modality {
            cfg.features.modality = m;
        }
        if let Some(r) = self.k_range {
            cfg.k_range = r;
        }
        if self.k.is_some() {
            cfg.k = self.k;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.n_perm {
            cfg.validation.n_perm = n;
        }
        Ok(cfg)
    }

    fn inputs(&self) -> Vec<PathBuf> {
        self.config.iter().cloned().collect()
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Invariant(_) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { spec, seed, out } => {
            synth(spec.as_deref(), seed, &out, &out)?;
        }
        Command::Ingest { data, analysis, out } => {
            let cfg = analysis.resolve()?;
            let paths = input_paths(&data.data)?;
            let build = build_features(&Inputs::load(&paths, &cfg.parse)?, &cfg.features)?;
            let cohort = write_with(&out.join(COHORT_FILE), |w| build.cohort.write_csv(w))?;
            let mut inputs = vec![paths.questions.clone(), paths.records.clone()];
            inputs.extend(paths.actigraphy.clone());
            inputs.extend(analysis.inputs());
            write_manifest(&out, "ingest", cfg.seed, &cfg, &inputs, &[cohort])?;
        }
        Command::Features { data, analysis, out } => {
            let cfg = analysis.resolve()?;
            let paths = input_paths(&data.data)?;
            let build = build_features(&Inputs::load(&paths, &cfg.parse)?, &cfg.features)?;
            let mut outputs = vec![
                write_with(&out.join(FEATURES_FILE), |w| build.table.write_csv(w))?,
                json_to(out.join(NORMALIZATION_FILE), &build.params)?,
            ];
            if let Some(m) = &build.mobility {
                outputs.push(write_with(&out.join(MOBILITY_FILE), |w| {
                    pstates::features::write_mobility(m, w)
                })?);
            }
            if let Some(v) = &build.voice {
                outputs.push(json_to(out.join(VOICE_COMPONENTS_FILE), v)?);
            }
            let mut inputs = owned(paths.files());
            inputs.extend(analysis.inputs());
            write_manifest(&out, "features", cfg.seed, &cfg, &inputs, &outputs)?;
        }
        Command::Cluster {
            features,
            normalization,
            data,
            analysis,
            out,
        } => {
            let cfg = analysis.resolve()?;
            let mut inputs = analysis.inputs();
            let (table, params, rates, anchors) = match (&features, &data.data) {
                (Some(f), _) => {
                    inputs.push(f.clone());
                    let table = FeatureTable::read_csv(open(f)?)?;
                    let params: Option<NormalizationParams> = match &normalization {
                        Some(n) => {
                            inputs.push(n.clone());
                            Some(read_json(n)?)
                        }
                        None => None,
                    };
                    (table, params, None, BTreeMap::new())
                }
                (None, Some(dir)) => {
                    let paths = input_paths(dir)?;
                    inputs.extend(owned(paths.files()));
                    let build = build_features(&Inputs::load(&paths, &cfg.parse)?, &cfg.features)?;
                    let anchors = match &paths.events {
                        Some(e) => event_dates(&parse_events(open(e)?)?, &cfg.dwell.event_type),
                        None => BTreeMap::new(),
                    };
                    (build.table, Some(build.params), Some(build.response_rates), anchors)
                }
                (None, None) => return Err(config_error("features", "pass --features or --data")),
            };
            let model = cluster_features(&table, params.as_ref(), &cfg)?;
            let splits = robustness(
                &table,
                &model,
                rates.as_ref(),
                (!anchors.is_empty()).then_some(&anchors),
                &cfg,
            )?;
            if let Some(sel) = &model.selection {
                println!(
                    "k = {} from {} (votes: elbow {}, silhouette {}, agglomerative {}, consensus {})",
                    sel.chosen_k,
                    cfg.k_range,
                    sel.votes.elbow,
                    sel.votes.silhouette,
                    sel.votes.agglomerative,
                    sel.votes.consensus
                );
            }
            let outputs = [
                json_to(out.join(MODEL_FILE), &model)?,
                json_to(out.join(ROBUSTNESS_FILE), &splits)?,
            ];
            write_manifest(&out, "cluster", cfg.seed, &cfg, &inputs, &outputs)?;
        }
        Command::Validate {
            model,
            features,
            assessments,
            analysis,
            out,
        } => {
            let cfg = analysis.resolve()?;
            let fitted: ClusterModel = read_json(&model)?;
            let table = FeatureTable::read_csv(open(&features)?)?;
            let records = parse_assessments(open(&assessments)?)?;
            let (ranked, _, report) = validate_model(&fitted, &table, &records, &cfg.validation)?;
            println!(
                "states ranked best to worst: {}",
                ranking_summary(&report.ordinal_labels, &report.ranking_scores)
            );
            let outputs = [
                json_to(out.join(VALIDATION_FILE), &report)?,
                json_to(out.join(RANKED_MODEL_FILE), &ranked)?,
            ];
            let mut inputs = vec![model, features, assessments];
            inputs.extend(analysis.inputs());
            write_manifest(&out, "validate", cfg.validation.seed, &cfg, &inputs, &outputs)?;
        }
        Command::Assign {
            model,
            features,
            events,
            analysis,
            out,
        } => {
            let cfg = analysis.resolve()?;
            let ranked: ClusterModel = read_json(&model)?;
            let table = FeatureTable::read_csv(open(&features)?)?;
            let event_records = match &events {
                Some(e) => parse_events(open(e)?)?,
                None => Vec::new(),
            };
            let (timecourses, contrasts) = assign_and_contrast(&ranked, &table, &event_records, &cfg.dwell)?;
            let outputs = [
                write_with(&out.join(ASSIGNMENTS_FILE), |w| {
                    write_assignments(&timecourses, ranked.k, w)
                })?,
                json_to(out.join(DWELL_FILE), &contrasts)?,
            ];
            let mut inputs = vec![model, features];
            inputs.extend(events);
            inputs.extend(analysis.inputs());
            write_manifest(&out, "assign", ranked.seed, &cfg.dwell, &inputs, &outputs)?;
        }
        Command::Report {
            model,
            features,
            assignments,
            dwell,
            out,
        } => {
            let ranked: ClusterModel = read_json(&model)?;
            let labels = ranked
                .ranking
                .clone()
                .ok_or_else(|| Error::Schema("model has no ordinal labels; run validate first".into()))?;
            let table = FeatureTable::read_csv(open(&features)?)?;
            let timecourses = read_assignments(open(&assignments)?, &labels)?;
            let contrasts: Vec<DwellContrast> = match &dwell {
                Some(d) => read_json(d)?,
                None => Vec::new(),
            };
            let bundle = export_timecourse(&timecourses, &labels, &table, &contrasts, &out.join(TIMECOURSE_DIR))?;
            let mut inputs = vec![model, features, assignments];
            inputs.extend(dwell);
            write_manifest(&out, "report", ranked.seed, &labels, &inputs, &bundle.files)?;
        }
        Command::Pipeline {
            spec,
            data,
            analysis,
            out,
        } => {
            let cfg = analysis.resolve()?;
            let paths = match (&spec, &data) {
                (Some(s), _) => synth(Some(s), None, &out.join("data"), &out)?,
                (None, Some(d)) => input_paths(d)?,
                (None, None) => return Err(config_error("spec", "pass --spec or --data")),
            };
            let stages = run_pipeline(&paths, &cfg, &out)?;
            for StageArtifacts { stage, inputs, outputs } in &stages {
                let mut inputs = inputs.clone();
                inputs.extend(analysis.inputs());
                write_manifest(&out, stage, cfg.seed, &cfg, &inputs, outputs)?;
            }
            let last = stages.last().map_or("none", |s| s.stage);
            println!(
                "pipeline finished {} stages (last: {last}) in {}",
                stages.len(),
                out.display()
            );
        }
    }
    Ok(())
}

/// Generate a cohort into `data_dir`, writing the manifest into `manifest_dir`.
fn synth(spec_path: Option<&Path>, seed: Option<u64>, data_dir: &Path, manifest_dir: &Path) -> Result<InputPaths> {
    let mut spec: CohortSpec = match spec_path {
        Some(p) => read_json(p)?,
        None => CohortSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let cohort = generate_cohort(&spec)?;
    let files = cohort.write_to(data_dir)?;
    let inputs: Vec<PathBuf> = spec_path.map(Path::to_path_buf).into_iter().collect();
    write_manifest(manifest_dir, "synth", spec.seed, &spec, &inputs, &files)?;
    Ok(InputPaths::in_dir(data_dir))
}

fn input_paths(dir: &Path) -> Result<InputPaths> {
    let paths = InputPaths::in_dir(dir);
    paths.check_exist()?;
    Ok(paths)
}

fn owned(paths: Vec<&Path>) -> Vec<PathBuf> {
    paths.into_iter().map(Path::to_path_buf).collect()
}

fn config_error(field: &str, message: &str) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn ranking_summary(labels: &[String], scores: &[f64]) -> String {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| labels[a].len().cmp(&labels[b].len()).then(labels[a].cmp(&labels[b])));
    order
        .iter()
        .map(|&i| format!("{} (cluster {i}, R = {:.3})", labels[i], scores[i]))
        .collect::<Vec<_>>()
        .join(", ")
}
