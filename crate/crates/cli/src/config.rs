//! Pipeline settings from flags and an optional TOML file.
//!
//! The file uses the flag names with underscores, e.g.
//!
//! ```toml
//! algo = "stem"
//! alpha = 0.02
//! beta = 1.0
//! seed = 7
//! hyperplanes = 100
//! max_sweeps = 2000
//! rel_tol = 1e-10
//! cone_diameter = 0.5
//! dump_graph = true
//! jobs = 4
//! out = "results"
//! ```
//!
//! A flag given on the command line wins over the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;
use stem_core::batch::PipelineConfig;
use stem_core::{Algorithm, RoundingConfig, SolverConfig, WeightConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoArg {
    Stem,
    Greedy,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Stem => Algorithm::Stem,
            AlgoArg::Greedy => Algorithm::Greedy,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with default values for the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algo: Option<AlgoArg>,
    /// Weight of one reply between two speakers [default: 1.0]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of one quote between two speakers [default: 0.0]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Global seed; per-conversation seeds derive from it [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random hyperplanes tried when rounding [default: 100]
    #[arg(long)]
    pub hyperplanes: Option<usize>,
    /// Solver sweep budget [default: 2000]
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Solver stops when a sweep gains less than this fraction [default: 1e-10]
    #[arg(long)]
    pub rel_tol: Option<f64>,
    /// Cone diameter for the per-speaker in-cone flags
    #[arg(long)]
    pub cone_diameter: Option<f64>,
    /// Write `<id>.graph.csv` edge lists.
    #[arg(long)]
    pub dump_graph: bool,
    /// Write `<id>.embedding.csv` speaker vectors.
    #[arg(long)]
    pub dump_embedding: bool,
    /// Write `<id>.pca.csv` 2D projections.
    #[arg(long)]
    pub dump_pca: bool,
    /// Worker threads; 0 uses every core [default: 0]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    algo: Option<AlgoArg>,
    alpha: Option<f64>,
    beta: Option<f64>,
    seed: Option<u64>,
    hyperplanes: Option<usize>,
    max_sweeps: Option<usize>,
    rel_tol: Option<f64>,
    cone_diameter: Option<f64>,
    dump_graph: Option<bool>,
    dump_embedding: Option<bool>,
    dump_pca: Option<bool>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
}

fn load_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub pipeline: PipelineConfig,
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let defaults = PipelineConfig::default();

        let weights = WeightConfig::new(
            self.alpha.or(file.alpha).unwrap_or(defaults.weights.alpha()),
            self.beta.or(file.beta).unwrap_or(defaults.weights.beta()),
        )?;
        let solver = SolverConfig {
            max_sweeps: self.max_sweeps.or(file.max_sweeps).unwrap_or(defaults.solver.max_sweeps),
            rel_tol: self.rel_tol.or(file.rel_tol).unwrap_or(defaults.solver.rel_tol),
            seed: 0,
        };
        solver.validate().map_err(anyhow::Error::msg)?;
        let rounding = RoundingConfig {
            num_hyperplanes: self
                .hyperplanes
                .or(file.hyperplanes)
                .unwrap_or(defaults.rounding.num_hyperplanes),
            seed: 0,
            cone_diameter_threshold: self.cone_diameter.or(file.cone_diameter),
        };
        rounding.validate().map_err(anyhow::Error::msg)?;

        let Some(out) = self.out.clone().or(file.out) else {
            bail!("no output directory: pass --out or set `out` in the config file");
        };
        Ok(Settings {
            pipeline: PipelineConfig {
                algorithm: self.algo.or(file.algo).map_or(defaults.algorithm, Algorithm::from),
                weights,
                solver,
                rounding,
                dump_graph: self.dump_graph || file.dump_graph.unwrap_or(false),
                dump_embedding: self.dump_embedding || file.dump_embedding.unwrap_or(false),
                dump_pca: self.dump_pca || file.dump_pca.unwrap_or(false),
            },
            seed: self.seed.or(file.seed).unwrap_or(0),
            jobs: self.jobs.or(file.jobs).unwrap_or(0),
            out,
        })
    }
}
