//! Run configuration: the JSON schema accepted by `--config`, flag
//! overrides, and resolution against the dataset's columns.
//!
//! Configs are resolved before use: optional fields are filled with their
//! defaults, covariate lists are inferred from the CSV header when omitted,
//! and subsets get display names. The resolved config is embedded verbatim
//! in every report, and re-loading that embedded object reproduces the run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tevim::crossfit::{AlgorithmConfig, AlgorithmId};
use tevim::data::{CovariateSubset, Dataset, Mode};
use tevim::learners::LearnerSpec;
use tevim::nuisance::PropensitySpec;
use tevim::{Error, Result};

fn default_mode() -> Mode {
    Mode::Binary
}

fn default_algorithm() -> String {
    "2B".to_string()
}

fn default_analysis_folds() -> usize {
    20
}

fn default_clip() -> f64 {
    0.01
}

fn default_variance_floor() -> f64 {
    1e-3
}

/// Configuration for `estimate`. Every field except `data` and `schema` has
/// a default, so a minimal config is just those two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Input CSV; a relative path is taken relative to the config file.
    pub data: String,
    pub schema: SchemaConfig,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// One of 1A, 1B, 2A, 2B: without/with cross-fitting, outcome-difference
    /// vs pseudo-outcome-regression effect estimate.
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    #[serde(default = "default_analysis_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Propensity clip, in (0, 0.5).
    #[serde(default = "default_clip")]
    pub clip: f64,
    /// Floor for the fitted treatment variance (continuous mode only).
    #[serde(default = "default_variance_floor")]
    pub variance_floor: f64,
    #[serde(default)]
    pub learners: LearnerRoles,
    /// Column groups to score; empty means one subset per covariate.
    #[serde(default)]
    pub subsets: Vec<SubsetConfig>,
    /// Also run the split-sample no-heterogeneity test for each subset.
    #[serde(default)]
    pub null_test: bool,
}

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub outcome: String,
    pub treatment: String,
    /// Omit to use every other CSV column, in file order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<Vec<String>>,
}

/// Learner choice per regression role; unset roles resolve to the flexible
/// default (cubic polynomial basis with interactions under a light ridge
/// penalty).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerRoles {
    /// Arm-specific outcome regressions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<LearnerSpec>,
    /// Propensity model, or `{"type":"known_constant","value":p}` for
    /// randomized designs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propensity: Option<PropensitySpec>,
    /// Pseudo-outcome regression (algorithms 1B/2B only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cate: Option<LearnerSpec>,
    /// Subset-effect regressions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<LearnerSpec>,
}

/// One covariate group to score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetConfig {
    /// Display name; defaults to the columns joined with "+".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub columns: Vec<String>,
}

impl RunConfig {
    /// Fills every optional field so the embedded config is complete: the
    /// covariate list from the CSV header, one singleton subset per covariate
    /// when none are configured, display names for unnamed subsets, the
    /// flexible default for unset learner roles, and the algorithm label in
    /// canonical upper-case form.
    pub fn resolve(&mut self, header: &[String]) -> Result<()> {
        self.algorithm = self.algorithm.parse::<AlgorithmId>()?.to_string();
        if self.schema.covariates.is_none() {
            let inferred: Vec<String> = header
                .iter()
                .filter(|h| **h != self.schema.outcome && **h != self.schema.treatment)
                .cloned()
                .collect();
            if inferred.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "no covariate columns remain after removing {:?} and {:?} from the CSV \
                     header",
                    self.schema.outcome, self.schema.treatment
                )));
            }
            self.schema.covariates = Some(inferred);
        }
        if self.subsets.is_empty() {
            self.subsets = self
                .schema
                .covariates
                .as_ref()
                .unwrap()
                .iter()
                .map(|c| SubsetConfig { name: Some(c.clone()), columns: vec![c.clone()] })
                .collect();
        }
        for subset in &mut self.subsets {
            if subset.columns.is_empty() {
                return Err(Error::InvalidConfig(
                    "a configured subset lists no columns".into(),
                ));
            }
            if subset.name.is_none() {
                subset.name = Some(subset.columns.join("+"));
            }
        }
        self.learners.outcome.get_or_insert_with(LearnerSpec::flexible);
        self.learners
            .propensity
            .get_or_insert_with(|| PropensitySpec::Learner(LearnerSpec::flexible()));
        self.learners.cate.get_or_insert_with(LearnerSpec::flexible);
        self.learners.subset.get_or_insert_with(LearnerSpec::flexible);
        Ok(())
    }

    /// The estimation config this run config describes. Call after
    /// [`RunConfig::resolve`].
    pub fn to_algorithm_config(&self, subsets: Vec<CovariateSubset>) -> Result<AlgorithmConfig> {
        let id: AlgorithmId = self.algorithm.parse()?;
        let roles = &self.learners;
        Ok(AlgorithmConfig {
            split: id.sample_split(self.folds),
            variant: id.variant,
            subsets,
            outcome_spec: roles.outcome.clone().expect("resolve() fills every learner role"),
            propensity_spec: roles
                .propensity
                .clone()
                .expect("resolve() fills every learner role"),
            cate_spec: roles.cate.clone().expect("resolve() fills every learner role"),
            subset_spec: roles.subset.clone().expect("resolve() fills every learner role"),
            clip: self.clip,
            seed: self.seed,
        })
    }
}

/// Flag values that override the loaded estimate config.
#[derive(Debug, Default)]
pub struct EstimateOverrides {
    pub algorithm: Option<String>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub clip: Option<f64>,
    pub subsets: Option<String>,
    pub mode: Option<String>,
}

impl EstimateOverrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(algorithm) = &self.algorithm {
            cfg.algorithm = algorithm.clone();
        }
        if let Some(folds) = self.folds {
            cfg.folds = folds;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(clip) = self.clip {
            cfg.clip = clip;
        }
        if let Some(spec) = &self.subsets {
            cfg.subsets = parse_subset_flag(spec)?;
        }
        if let Some(mode) = &self.mode {
            cfg.mode = parse_mode(mode)?;
        }
        Ok(())
    }
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s.trim() {
        "binary" => Ok(Mode::Binary),
        "continuous" => Ok(Mode::Continuous),
        other => Err(Error::InvalidConfig(format!(
            "mode must be \"binary\" or \"continuous\", got {other:?}"
        ))),
    }
}

/// Parses the `--subsets` flag: groups separated by `;`, column names within
/// a group separated by `,` — e.g. `"x1,x2;x3"`.
pub fn parse_subset_flag(spec: &str) -> Result<Vec<SubsetConfig>> {
    let mut subsets = Vec::new();
    for group in spec.split(';') {
        let columns: Vec<String> = group
            .split(',')
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .collect();
        if columns.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "--subsets group {group:?} lists no columns"
            )));
        }
        subsets.push(SubsetConfig { name: None, columns });
    }
    if subsets.is_empty() {
        return Err(Error::InvalidConfig("--subsets lists no groups".into()));
    }
    Ok(subsets)
}

/// Display name and column list for each resolved subset.
pub type SubsetNames = BTreeMap<CovariateSubset, (String, Vec<String>)>;

/// Maps each configured subset to column positions, preserving config order,
/// and records its display name and columns. Rejects two groups that resolve
/// to the same columns — they would silently collapse to one report row —
/// and two groups that share a name, which would make report rows ambiguous.
pub fn resolve_subsets(
    cfg: &RunConfig,
    data: &Dataset<f64>,
) -> Result<(Vec<CovariateSubset>, SubsetNames)> {
    let mut order = Vec::with_capacity(cfg.subsets.len());
    let mut names = BTreeMap::new();
    for subset_cfg in &cfg.subsets {
        let subset = data.subset_of_names(&subset_cfg.columns)?;
        let name = subset_cfg
            .name
            .clone()
            .expect("resolve() names every subset");
        if let Some((previous, _)) = names.get(&subset) {
            return Err(Error::InvalidConfig(format!(
                "subsets {previous:?} and {name:?} resolve to the same columns"
            )));
        }
        if names.values().any(|(taken, _)| *taken == name) {
            return Err(Error::InvalidConfig(format!(
                "two subsets share the name {name:?}; give each group a distinct name"
            )));
        }
        names.insert(subset.clone(), (name, subset_cfg.columns.clone()));
        order.push(subset);
    }
    Ok((order, names))
}

fn default_sample_sizes() -> Vec<usize> {
    vec![500, 2000]
}

fn default_algorithms() -> Vec<String> {
    AlgorithmId::ALL.iter().map(|id| id.to_string()).collect()
}

fn default_sim_learners() -> Vec<NamedLearner> {
    vec![NamedLearner { name: "ridge_basis".to_string(), spec: LearnerSpec::flexible() }]
}

fn default_replicates() -> usize {
    200
}

fn default_sim_folds() -> usize {
    5
}

fn default_truth_resolution() -> usize {
    2000
}

/// Configuration for `simulate`. The defaults are the desk-scale study:
/// all four algorithm flavours, the flexible ridge learner, 200 replicates
/// at n in {500, 2000}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub sample_sizes: Vec<usize>,
    pub algorithms: Vec<String>,
    pub learners: Vec<NamedLearner>,
    pub replicates: usize,
    pub folds: usize,
    pub clip: f64,
    pub seed: u64,
    /// Quadrature nodes per axis for the ground-truth values.
    pub truth_resolution: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            sample_sizes: default_sample_sizes(),
            algorithms: default_algorithms(),
            learners: default_sim_learners(),
            replicates: default_replicates(),
            folds: default_sim_folds(),
            clip: default_clip(),
            seed: 0,
            truth_resolution: default_truth_resolution(),
        }
    }
}

/// A learner spec with the label used in the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedLearner {
    pub name: String,
    pub spec: LearnerSpec,
}

impl SimulateConfig {
    pub fn parsed_algorithms(&self) -> Result<Vec<AlgorithmId>> {
        self.algorithms.iter().map(|label| label.parse()).collect()
    }
}

/// Flag values that override the loaded simulate config.
#[derive(Debug, Default)]
pub struct SimulateOverrides {
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub clip: Option<f64>,
    pub replicates: Option<usize>,
}

impl SimulateOverrides {
    pub fn apply(&self, cfg: &mut SimulateConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(folds) = self.folds {
            cfg.folds = folds;
        }
        if let Some(clip) = self.clip {
            cfg.clip = clip;
        }
        if let Some(replicates) = self.replicates {
            cfg.replicates = replicates;
        }
    }
}

fn read_config_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    serde_json::from_str(&read_config_text(path)?)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

pub fn load_simulate_config(path: &Path) -> Result<SimulateConfig> {
    serde_json::from_str(&read_config_text(path)?)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

/// A relative `data` path counts from the config file's directory, so a
/// config sitting next to its CSV works from any working directory.
pub fn resolve_data_path(config_path: &Path, data: &str) -> PathBuf {
    let data_path = Path::new(data);
    if data_path.is_absolute() {
        data_path.to_path_buf()
    } else {
        match config_path.parent() {
            Some(dir) if !dir.as_os_str().is_empty() => dir.join(data_path),
            _ => data_path.to_path_buf(),
        }
    }
}

/// The column names in the CSV's header row, in file order.
pub fn csv_header(path: &Path) -> Result<Vec<String>> {
    let io_err = |message: String| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, message),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| io_err(e.to_string()))?;
    let headers = reader.headers().map_err(|e| io_err(e.to_string()))?;
    Ok(headers.iter().map(|h| h.trim().to_string()).collect())
}
