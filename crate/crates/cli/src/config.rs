//! Declarative experiment configuration (TOML).

use std::path::{Path, PathBuf};

use neurogsp::builders::{GraphBuildParams, GraphType};
use neurogsp::classifiers::ClassifierSpec;
use neurogsp::graph::Band;
use neurogsp::pipeline::Method;
use neurogsp::reducers::{FrequencySelection, ReductionSpec};
use neurogsp::simulator::CohortConfig;
use neurogsp::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Schema version this build reads and writes.
pub const SPEC_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: String,
    /// Seed of every random choice made by the pipeline (label permutations,
    /// ICA initialisation). The simulated cohort has its own seed.
    #[serde(default)]
    pub seed: u64,
    /// Default output directory; `--out` takes precedence.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads, 0 = all cores; `--jobs` takes precedence.
    #[serde(default)]
    pub jobs: usize,
    /// Shuffle labels within sessions before decoding (chance-level control).
    #[serde(default)]
    pub permute_labels: bool,
    pub data: DataConfig,
    #[serde(default)]
    pub graphs: GraphsConfig,
    #[serde(default)]
    pub reduction: ReductionConfig,
    #[serde(default)]
    pub classifier: ClassifierSpec,
    #[serde(default)]
    pub folds: FoldsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataConfig {
    /// Subjects generated by the simulator.
    Simulated {
        #[serde(default)]
        cohort: CohortConfig,
    },
    /// Already-parcellated matrices on disk, one entry per run.
    Files { runs: Vec<RunFiles> },
}

/// Paths of one run; relative paths are resolved against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFiles {
    pub subject: String,
    pub signals: PathBuf,
    pub labels: PathBuf,
    pub coords: PathBuf,
    pub rest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphsConfig {
    pub types: Vec<GraphType>,
    /// `None`: per-dataset defaults derived from the coordinates.
    pub params: Option<GraphBuildParams>,
}

impl Default for GraphsConfig {
    fn default() -> Self {
        GraphsConfig {
            types: GraphType::ALL.to_vec(),
            params: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReductionConfig {
    /// Dimension of every reduced representation in the tables.
    pub k: usize,
    /// Dimensions of the accuracy-versus-k curve.
    pub k_grid: Vec<usize>,
    /// Graph of the curve.
    pub curve_graph: GraphType,
    /// Reductions traced by the curve, by table label (e.g. `GS-HF`).
    pub curve_methods: Vec<String>,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            k: 50,
            k_grid: vec![5, 10, 20, 30, 40, 50, 60, 80, 100],
            curve_graph: GraphType::Semilocal,
            curve_methods: vec!["GS-HF".into(), "GFT-ANOVA".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldPolicy {
    /// Sessions sorted and paired; each pair is held out once.
    LeaveTwoSessionsOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoldsConfig {
    pub policy: FoldPolicy,
}

impl Default for FoldsConfig {
    fn default() -> Self {
        FoldsConfig {
            policy: FoldPolicy::LeaveTwoSessionsOut,
        }
    }
}

/// Parses a reduction label as used in the result tables: `GS-LF`, `GS-HF`,
/// `GFT-LF`, `GFT-HF`, `GFT-ANOVA`, `PCA`, `ICA` or `ANOVA`.
pub fn parse_reduction(label: &str, k: usize) -> Result<ReductionSpec> {
    Ok(match label.trim().to_ascii_uppercase().as_str() {
        "GS-LF" => ReductionSpec::GS { band: Band::LF, k },
        "GS-HF" => ReductionSpec::GS { band: Band::HF, k },
        "GFT-LF" => ReductionSpec::GFS { selection: FrequencySelection::LF, k },
        "GFT-HF" => ReductionSpec::GFS { selection: FrequencySelection::HF, k },
        "GFT-ANOVA" => ReductionSpec::GFS { selection: FrequencySelection::ANOVA, k },
        "PCA" => ReductionSpec::PCA { k },
        "ICA" => ReductionSpec::ICA { k },
        "ANOVA" => ReductionSpec::ANOVA { k },
        other => return Err(Error::Config(format!("unknown reduction `{other}`"))),
    })
}

impl ExperimentConfig {
    /// A simulated default cohort.
    pub fn simulated(cohort: CohortConfig) -> Self {
        ExperimentConfig {
            spec_version: SPEC_VERSION.into(),
            seed: 0,
            output_dir: None,
            jobs: 0,
            permute_labels: false,
            data: DataConfig::Simulated { cohort },
            graphs: GraphsConfig::default(),
            reduction: ReductionConfig::default(),
            classifier: ClassifierSpec::default(),
            folds: FoldsConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, validates and resolves relative data paths against the
    /// directory of `path`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DataConfig::Files { runs } = &mut cfg.data {
            for r in runs {
                for p in [&mut r.signals, &mut r.labels, &mut r.coords, &mut r.rest] {
                    if p.is_relative() {
                        *p = base.join(&*p);
                    }
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(Error::Config(format!(
                "spec_version `{}` is not supported (expected `{SPEC_VERSION}`)",
                self.spec_version
            )));
        }
        match &self.data {
            DataConfig::Simulated { cohort } => cohort.validate()?,
            DataConfig::Files { runs } => {
                if runs.is_empty() {
                    return Err(Error::Config("data.runs is empty".into()));
                }
            }
        }
        if self.graphs.types.is_empty() {
            return Err(Error::Config("graphs.types is empty".into()));
        }
        if let Some(p) = &self.graphs.params {
            p.validate()?;
        }
        if self.reduction.k == 0 || self.reduction.k_grid.contains(&0) {
            return Err(Error::Config("reduction dimensions must be positive".into()));
        }
        for label in &self.reduction.curve_methods {
            parse_reduction(label, 1)?;
        }
        self.classifier.validate()?;
        Ok(())
    }

    /// Curve methods over the configured grid.
    pub fn curve_methods(&self) -> Result<Vec<Method>> {
        let templates = self
            .reduction
            .curve_methods
            .iter()
            .map(|l| parse_reduction(l, 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(neurogsp::pipeline::curve_methods(
            self.reduction.curve_graph,
            &templates,
            &self.reduction.k_grid,
        ))
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration,
    /// leaving out the settings that cannot change any result (output
    /// directory and thread count).
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            output_dir: None,
            jobs: 0,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("configuration is always serializable");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is always serializable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::simulated(CohortConfig::default());
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn hash_ignores_output_location_and_threads() {
        let cfg = ExperimentConfig::simulated(CohortConfig::default());
        let moved = ExperimentConfig {
            output_dir: Some("elsewhere".into()),
            jobs: 3,
            ..cfg.clone()
        };
        assert_eq!(moved.hash(), cfg.hash());
        let reseeded = ExperimentConfig { seed: 1, ..cfg.clone() };
        assert_ne!(reseeded.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "spec_version = \"1\"\ncolour = 3\n[data]\nsource = \"simulated\"\n";
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))));
        let text = "spec_version = \"1\"\n[data]\nsource = \"simulated\"\n[data.cohort]\nrunz = 2\n";
        assert!(matches!(ExperimentConfig::from_toml_str(text), Err(Error::Config(_))));
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let text = "spec_version = \"1\"\n[data]\nsource = \"simulated\"\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.reduction.k, 50);
        assert_eq!(cfg.graphs.types.len(), 7);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = "spec_version = \"0\"\n[data]\nsource = \"simulated\"\n";
        assert!(ExperimentConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn reduction_labels() {
        assert_eq!(parse_reduction("gs-hf", 30).unwrap(), ReductionSpec::GS { band: Band::HF, k: 30 });
        assert!(parse_reduction("GS-MF", 30).is_err());
    }
}
