//! Stage glue shared by the command line and the end-to-end tests: load
//! inputs, build features, cluster, validate, assign and export.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::clustering::{
    kmeans, robustness_splits, select_k, ClusterModel, KMeansConfig, RobustnessInputs, RobustnessReport,
    SelectionConfig,
};
use crate::error::{Error, Result};
use crate::features::{
    assemble_features, derive_zones, fit_normalization, parse_actigraphy, watch_coverage, write_mobility,
    ActigraphySample, FeatureTable, JoinSummary, MobilityProfile, Modality, NormalizationMethod, NormalizationParams,
    VoiceComponents, VoiceTable, ZoneConfig, DEFAULT_PENALTY,
};
use crate::ingest::{
    aggregate_daily, filter_complete, parse_daily_records, parse_demographics, response_rates, CohortTable,
    Demographics, FilterCriteria, ParseOptions, QuestionRegistry, RawDailyRecord,
};
use crate::io::{create, open, write_json};
use crate::synth::SyntheticCohort;
use crate::timecourse::{
    assign_states, dwell_contrasts, event_dates, export_timecourse, parse_events, write_assignments, DwellConfig,
    DwellContrast, EventRecord, StateTimecourse,
};
use crate::validation::{
    pair_assessments, parse_assessments, sample_days, validate_states, AssessmentRecord, PairingOutcome,
    ValidationConfig, ValidationReport,
};

/// Everything read from disk before any processing.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub registry: QuestionRegistry,
    pub records: Vec<RawDailyRecord>,
    pub actigraphy: Option<Vec<ActigraphySample>>,
    pub voice: Option<VoiceTable>,
    pub demographics: BTreeMap<String, Demographics>,
}

impl Inputs {
    pub fn load(paths: &InputPaths, parse: &ParseOptions) -> Result<Self> {
        let registry = QuestionRegistry::read_csv(open(&paths.questions)?)?;
        let records = parse_daily_records(open(&paths.records)?, &registry, parse)?;
        let actigraphy = match &paths.actigraphy {
            Some(p) => Some(parse_actigraphy(open(p)?)?),
            None => None,
        };
        let voice = match &paths.voice {
            Some(p) => Some(VoiceTable::read_csv(open(p)?)?),
            None => None,
        };
        let demographics = match &paths.demographics {
            Some(p) => parse_demographics(open(p)?)?,
            None => BTreeMap::new(),
        };
        Ok(Self {
            registry,
            records,
            actigraphy,
            voice,
            demographics,
        })
    }

    pub fn from_synthetic(cohort: &SyntheticCohort) -> Self {
        Self {
            registry: cohort.registry.clone(),
            records: cohort.raw_records(),
            actigraphy: Some(cohort.actigraphy.clone()),
            voice: Some(cohort.voice.clone()),
            demographics: cohort.demographics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    pub modality: Modality,
    pub normalization: NormalizationMethod,
    pub penalty: f64,
    pub zones: ZoneConfig,
    pub filter: FilterCriteria,
    pub voice_var_threshold: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            modality: Modality::Questionnaires,
            normalization: NormalizationMethod::ScaleBoundsMinmax,
            penalty: DEFAULT_PENALTY,
            zones: ZoneConfig::default(),
            filter: FilterCriteria::default(),
            voice_var_threshold: 0.02,
        }
    }
}

impl FeatureOptions {
    pub fn with_modality(modality: Modality) -> Self {
        Self {
            modality,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureBuild {
    pub cohort: CohortTable,
    pub params: NormalizationParams,
    pub table: FeatureTable,
    pub join: JoinSummary,
    pub mobility: Option<Vec<MobilityProfile>>,
    pub voice: Option<VoiceComponents>,
    /// Mean submissions per reported day, per participant.
    pub response_rates: BTreeMap<String, f64>,
}

/// Aggregate, filter, normalize and join the enabled modalities. Using
/// mobility turns on the watch-coverage rule.
pub fn build_features(inputs: &Inputs, opts: &FeatureOptions) -> Result<FeatureBuild> {
    let daily = aggregate_daily(&inputs.records);
    let mobility = if opts.modality.uses_mobility() {
        let samples = inputs
            .actigraphy
            .as_ref()
            .ok_or_else(|| Error::config("modality", "mobility needs an actigraphy table"))?;
        Some(derive_zones(samples, &opts.zones)?)
    } else {
        None
    };
    let coverage = mobility.as_deref().map(watch_coverage);
    let criteria = FilterCriteria {
        require_watch: opts.filter.require_watch || mobility.is_some(),
        ..opts.filter
    };
    let cohort = filter_complete(&daily, &inputs.registry, &criteria, coverage.as_ref())?;
    let params = fit_normalization(&cohort, opts.normalization)?;

    let (scores, voice) = if opts.modality.uses_voice() {
        let table = inputs
            .voice
            .as_ref()
            .ok_or_else(|| Error::config("modality", "voice needs a voice table"))?;
        let keep: Vec<usize> = (0..table.keys.len())
            .filter(|&i| cohort.participants.contains(&table.keys[i].0))
            .collect();
        let kept = VoiceTable {
            feature_names: table.feature_names.clone(),
            keys: keep.iter().map(|&i| table.keys[i].clone()).collect(),
            values: table.values.select(ndarray::Axis(0), &keep),
        };
        let (scores, components) = kept.reduce(&inputs.demographics, opts.voice_var_threshold)?;
        (Some(scores), Some(components))
    } else {
        (None, None)
    };

    let (table, join) = assemble_features(&cohort, &params, opts.penalty, mobility.as_deref(), scores.as_ref())?;
    let mut rates = response_rates(&inputs.records);
    rates.retain(|p, _| cohort.participants.contains(p));
    Ok(FeatureBuild {
        cohort,
        params,
        table,
        join,
        mobility,
        voice,
        response_rates: rates,
    })
}

/// Where each input table lives. Optional tables enable the stages that need
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub questions: PathBuf,
    pub records: PathBuf,
    #[serde(default)]
    pub actigraphy: Option<PathBuf>,
    #[serde(default)]
    pub voice: Option<PathBuf>,
    #[serde(default)]
    pub demographics: Option<PathBuf>,
    #[serde(default)]
    pub events: Option<PathBuf>,
    #[serde(default)]
    pub assessments: Option<PathBuf>,
}

impl InputPaths {
    /// The file names written by the synthetic generator. Optional tables
    /// are only picked up when present.
    pub fn in_dir(dir: &Path) -> Self {
        let optional = |name: &str| Some(dir.join(name)).filter(|p| p.is_file());
        Self {
            questions: dir.join("questions.csv"),
            records: dir.join("records.csv"),
            actigraphy: optional("actigraphy.csv"),
            voice: optional("voice.csv"),
            demographics: optional("demographics.csv"),
            events: optional("events.csv"),
            assessments: optional("assessments.csv"),
        }
    }

    pub fn files(&self) -> Vec<&Path> {
        let mut out = vec![self.questions.as_path(), self.records.as_path()];
        out.extend(
            [
                &self.actigraphy,
                &self.voice,
                &self.demographics,
                &self.events,
                &self.assessments,
            ]
            .into_iter()
            .flatten()
            .map(PathBuf::as_path),
        );
        out
    }

    pub fn check_exist(&self) -> Result<()> {
        for f in self.files() {
            if !f.is_file() {
                return Err(Error::io(f, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        Ok(())
    }
}

/// Inclusive range of cluster counts, written `2..10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KRange {
    pub min: usize,
    pub max: usize,
}

impl KRange {
    pub fn len(&self) -> usize {
        self.max + 1 - self.min
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for KRange {
    fn default() -> Self {
        Self { min: 2, max: 10 }
    }
}

impl fmt::Display for KRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.min, self.max)
    }
}

impl FromStr for KRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("k_range", format!("`{s}` is not of the form MIN..MAX"));
        let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let min: usize = lo.trim().parse().map_err(|_| bad())?;
        let max: usize = hi.trim().parse().map_err(|_| bad())?;
        if min < 2 || max <= min {
            return Err(Error::config("k_range", format!("need 2 <= MIN < MAX, got {s}")));
        }
        Ok(Self { min, max })
    }
}

impl Serialize for KRange {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KRange {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Every tunable of an analysis run. Serialized into each run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub parse: ParseOptions,
    pub features: FeatureOptions,
    pub k_range: KRange,
    /// Skip model selection and fit this many clusters.
    pub k: Option<usize>,
    pub seed: u64,
    pub restarts: usize,
    pub max_pairwise: usize,
    pub consensus_resamples: usize,
    pub validation: ValidationConfig,
    pub dwell: DwellConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            parse: ParseOptions::default(),
            features: FeatureOptions::default(),
            k_range: KRange::default(),
            k: None,
            seed: 0,
            restarts: 50,
            max_pairwise: 1000,
            consensus_resamples: 100,
            validation: ValidationConfig::default(),
            dwell: DwellConfig::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn kmeans(&self, k: usize) -> KMeansConfig {
        KMeansConfig::new(k, self.seed).with_restarts(self.restarts)
    }

    pub fn selection(&self) -> SelectionConfig {
        let mut cfg = SelectionConfig::new(self.k_range.min, self.k_range.max, self.seed);
        cfg.kmeans.restarts = self.restarts;
        cfg.max_pairwise = self.max_pairwise;
        cfg.consensus.resamples = self.consensus_resamples;
        cfg
    }
}

/// Fit the final model, either at a fixed `k` or at the k chosen by the
/// selection vote.
pub fn cluster_features(
    table: &FeatureTable,
    normalization: Option<&NormalizationParams>,
    cfg: &AnalysisConfig,
) -> Result<ClusterModel> {
    let x = table.matrix();
    let mut model = match cfg.k {
        Some(k) => {
            let fit = kmeans(x.view(), &cfg.kmeans(k))?;
            ClusterModel::from_fit(&fit, table.names.clone(), cfg.seed)
        }
        None => {
            let (report, fits) = select_k(x.view(), &cfg.selection())?;
            let fit = fits
                .iter()
                .find(|f| f.k() == report.chosen_k)
                .ok_or_else(|| Error::Invariant(format!("no fit for chosen k = {}", report.chosen_k)))?;
            let mut model = ClusterModel::from_fit(fit, table.names.clone(), cfg.seed);
            model.selection = Some(report);
            model
        }
    };
    model.normalization = normalization.cloned();
    Ok(model)
}

pub fn robustness(
    table: &FeatureTable,
    model: &ClusterModel,
    response_rates: Option<&BTreeMap<String, f64>>,
    events: Option<&BTreeMap<String, NaiveDate>>,
    cfg: &AnalysisConfig,
) -> Result<Vec<RobustnessReport>> {
    let inputs = RobustnessInputs { response_rates, events };
    robustness_splits(table, &inputs, model, &cfg.kmeans(model.k))
}

/// Pair, correlate and rank. Returns the model carrying its ordinal labels.
pub fn validate_model(
    model: &ClusterModel,
    table: &FeatureTable,
    assessments: &[AssessmentRecord],
    cfg: &ValidationConfig,
) -> Result<(ClusterModel, PairingOutcome, ValidationReport)> {
    let samples = sample_days(model, table)?;
    let pairing = pair_assessments(&samples, assessments, cfg.window_days);
    let report = validate_states(model, &pairing, cfg)?;
    let mut ranked = model.clone();
    ranked.ranking = Some(report.ordinal_labels.clone());
    Ok((ranked, pairing, report))
}

pub fn assign_and_contrast(
    model: &ClusterModel,
    table: &FeatureTable,
    events: &[EventRecord],
    cfg: &DwellConfig,
) -> Result<(Vec<StateTimecourse>, Vec<DwellContrast>)> {
    let labels = model
        .ranking
        .as_ref()
        .ok_or_else(|| Error::Schema("model has no ordinal labels; validate it first".into()))?;
    let timecourses = assign_states(model, table)?;
    let dates = event_dates(events, &cfg.event_type);
    let contrasts = dwell_contrasts(&timecourses, labels, &dates, cfg, false)?;
    Ok((timecourses, contrasts))
}

/// Files one stage read and wrote. Paths of later stages' inputs point at
/// earlier stages' outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StageArtifacts {
    pub stage: &'static str,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

pub const COHORT_FILE: &str = "cohort.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const NORMALIZATION_FILE: &str = "normalization.json";
pub const MOBILITY_FILE: &str = "mobility.csv";
pub const VOICE_COMPONENTS_FILE: &str = "voice_components.json";
pub const MODEL_FILE: &str = "model.json";
pub const ROBUSTNESS_FILE: &str = "robustness.json";
pub const VALIDATION_FILE: &str = "validation.json";
pub const RANKED_MODEL_FILE: &str = "ranked_model.json";
pub const ASSIGNMENTS_FILE: &str = "assignments.csv";
pub const DWELL_FILE: &str = "dwell.json";
pub const TIMECOURSE_DIR: &str = "timecourses";

/// Create `path` (and its parent directories), hand the writer to `f`,
/// flush, and return the path.
pub fn write_with(path: &Path, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<PathBuf> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

pub fn json_to(path: PathBuf, value: &impl Serialize) -> Result<PathBuf> {
    write_json(&path, value)?;
    Ok(path)
}

/// Run every stage over `paths` and write the artifacts into `out`.
/// Validation, assignment and export need an assessments table; without
/// one the run stops after clustering.
pub fn run_pipeline(paths: &InputPaths, cfg: &AnalysisConfig, out: &Path) -> Result<Vec<StageArtifacts>> {
    paths.check_exist()?;
    let inputs = Inputs::load(paths, &cfg.parse)?;
    let events = match &paths.events {
        Some(p) => parse_events(open(p)?)?,
        None => Vec::new(),
    };
    let mut stages = Vec::new();
    let raw_inputs: Vec<PathBuf> = paths.files().into_iter().map(Path::to_path_buf).collect();

    let build = build_features(&inputs, &cfg.features)?;
    let cohort_csv = write_with(&out.join(COHORT_FILE), |w| build.cohort.write_csv(w))?;
    stages.push(StageArtifacts {
        stage: "ingest",
        inputs: vec![paths.questions.clone(), paths.records.clone()],
        outputs: vec![cohort_csv.clone()],
    });

    let mut outputs = vec![
        write_with(&out.join(FEATURES_FILE), |w| build.table.write_csv(w))?,
        json_to(out.join(NORMALIZATION_FILE), &build.params)?,
    ];
    if let Some(m) = &build.mobility {
        outputs.push(write_with(&out.join(MOBILITY_FILE), |w| write_mobility(m, w))?);
    }
    if let Some(v) = &build.voice {
        outputs.push(json_to(out.join(VOICE_COMPONENTS_FILE), v)?);
    }
    let features_csv = outputs[0].clone();
    stages.push(StageArtifacts {
        stage: "features",
        inputs: raw_inputs.clone(),
        outputs,
    });

    let model = cluster_features(&build.table, Some(&build.params), cfg)?;
    let anchors = event_dates(&events, &cfg.dwell.event_type);
    let splits = robustness(
        &build.table,
        &model,
        Some(&build.response_rates),
        (!anchors.is_empty()).then_some(&anchors),
        cfg,
    )?;
    let model_json = json_to(out.join(MODEL_FILE), &model)?;
    stages.push(StageArtifacts {
        stage: "cluster",
        inputs: vec![features_csv.clone()],
        outputs: vec![model_json.clone(), json_to(out.join(ROBUSTNESS_FILE), &splits)?],
    });

    let Some(assessments_path) = &paths.assessments else {
        log::warn!("no assessments table; stopping after clustering");
        return Ok(stages);
    };
    let assessments = parse_assessments(open(assessments_path)?)?;
    let (ranked, _, report) = validate_model(&model, &build.table, &assessments, &cfg.validation)?;
    let ranked_json = json_to(out.join(RANKED_MODEL_FILE), &ranked)?;
    stages.push(StageArtifacts {
        stage: "validate",
        inputs: vec![model_json, features_csv.clone(), assessments_path.clone()],
        outputs: vec![json_to(out.join(VALIDATION_FILE), &report)?, ranked_json.clone()],
    });

    let (timecourses, contrasts) = assign_and_contrast(&ranked, &build.table, &events, &cfg.dwell)?;
    let assignments = write_with(&out.join(ASSIGNMENTS_FILE), |w| {
        write_assignments(&timecourses, ranked.k, w)
    })?;
    let dwell_json = json_to(out.join(DWELL_FILE), &contrasts)?;
    let mut assign_inputs = vec![ranked_json.clone(), features_csv.clone()];
    assign_inputs.extend(paths.events.clone());
    stages.push(StageArtifacts {
        stage: "assign",
        inputs: assign_inputs,
        outputs: vec![assignments.clone(), dwell_json.clone()],
    });

    let labels = ranked.ranking.as_deref().unwrap_or_default();
    let bundle = export_timecourse(
        &timecourses,
        labels,
        &build.table,
        &contrasts,
        &out.join(TIMECOURSE_DIR),
    )?;
    stages.push(StageArtifacts {
        stage: "report",
        inputs: vec![ranked_json, features_csv, assignments, dwell_json],
        outputs: bundle.files,
    });
    Ok(stages)
}

/// Write a synthetic cohort's input tables into `dir` and return their paths.
pub fn write_synthetic_inputs(cohort: &SyntheticCohort, dir: &Path) -> Result<InputPaths> {
    cohort.write_to(dir)?;
    Ok(InputPaths::in_dir(dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_cohort, CohortSpec};
    use std::fs;

    #[test]
    fn modalities_change_width_and_rows() {
        let spec = CohortSpec {
            n_participants: 8,
            days_per_participant: 40,
            ..CohortSpec::default()
        };
        let inputs = Inputs::from_synthetic(&generate_cohort(&spec).unwrap());
        let q = build_features(&inputs, &FeatureOptions::default()).unwrap();
        assert_eq!(q.table.dim(), 6);
        let m = build_features(&inputs, &FeatureOptions::with_modality(Modality::Mobility)).unwrap();
        assert_eq!(m.table.dim(), 7);
        assert!(m.table.len() < q.table.len());
        let v = build_features(&inputs, &FeatureOptions::with_modality(Modality::Voice)).unwrap();
        let comps = v.voice.as_ref().unwrap().n_components();
        assert!(comps >= 1);
        assert_eq!(v.table.dim(), 6 + comps);
        assert!(v.table.len() * 5 < q.table.len());
        assert_eq!(q.response_rates.len(), q.cohort.participants.len());
    }

    #[test]
    fn missing_tables_are_config_errors() {
        let spec = CohortSpec {
            n_participants: 3,
            days_per_participant: 20,
            ..CohortSpec::default()
        };
        let mut inputs = Inputs::from_synthetic(&generate_cohort(&spec).unwrap());
        inputs.actigraphy = None;
        inputs.voice = None;
        for m in [Modality::Mobility, Modality::Voice] {
            assert!(matches!(
                build_features(&inputs, &FeatureOptions::with_modality(m)),
                Err(Error::Config { .. })
            ));
        }
    }

    #[test]
    fn k_range_parses_inclusive() {
        let r: KRange = "2..10".parse().unwrap();
        assert_eq!((r.min, r.max, r.len()), (2, 10, 9));
        assert_eq!("3..=5".parse::<KRange>().unwrap(), KRange { min: 3, max: 5 });
        for bad in ["1..4", "5..5", "2-10", "a..3"] {
            assert!(bad.parse::<KRange>().is_err(), "{bad}");
        }
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, "\"2..10\"");
        assert_eq!(serde_json::from_str::<KRange>(&json).unwrap(), r);
    }

    #[test]
    fn config_accepts_partial_json() {
        let cfg: AnalysisConfig =
            serde_json::from_str(r#"{"k": 3, "features": {"modality": "mobility"}, "validation": {"n_perm": 99}}"#)
                .unwrap();
        assert_eq!(cfg.k, Some(3));
        assert_eq!(cfg.features.modality, Modality::Mobility);
        assert_eq!(cfg.validation.n_perm, 99);
        assert_eq!(cfg.validation.window_days, 7);
        assert!(serde_json::from_str::<AnalysisConfig>(r#"{"kk": 3}"#).is_err());
    }

    #[test]
    fn pipeline_writes_every_stage() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CohortSpec {
            n_participants: 12,
            days_per_participant: 40,
            ..CohortSpec::graded(3)
        };
        let paths = write_synthetic_inputs(&generate_cohort(&spec).unwrap(), &dir.path().join("data")).unwrap();
        let cfg = AnalysisConfig {
            k_range: KRange { min: 2, max: 4 },
            restarts: 5,
            consensus_resamples: 10,
            validation: ValidationConfig {
                n_perm: 99,
                ..ValidationConfig::default()
            },
            ..AnalysisConfig::default()
        };
        let out = dir.path().join("out");
        let stages = run_pipeline(&paths, &cfg, &out).unwrap();
        let names: Vec<_> = stages.iter().map(|s| s.stage).collect();
        assert_eq!(names, ["ingest", "features", "cluster", "validate", "assign", "report"]);
        for s in &stages {
            for f in s.inputs.iter().chain(&s.outputs) {
                assert!(f.is_file(), "{}", f.display());
            }
        }
        let model: ClusterModel = crate::io::read_json(&out.join(RANKED_MODEL_FILE)).unwrap();
        assert_eq!(model.selection.as_ref().unwrap().chosen_k, model.k);
        assert_eq!(model.ranking.as_ref().unwrap().len(), model.k);
        let svgs = fs::read_dir(out.join(TIMECOURSE_DIR))
            .unwrap()
            .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg"))
            .count();
        assert_eq!(svgs, 12);
    }

    #[test]
    fn missing_input_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let paths = InputPaths::in_dir(dir.path());
        assert!(matches!(
            run_pipeline(&paths, &AnalysisConfig::default(), dir.path()),
            Err(Error::Io { .. })
        ));
    }
}
