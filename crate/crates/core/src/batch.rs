//! Corpus-level runs: one pipeline per conversation on a worker pool.
//!
//! Each conversation draws its solver and rounding seeds from a hash of the
//! global seed and its conversation id, so results do not depend on the
//! number of workers or on processing order.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::corpus::ConversationTree;
use crate::embed::SolverConfig;
use crate::graph::WeightConfig;
use crate::partition::{run_greedy, run_stem, Algorithm, PartitionRecord, PipelineOutput, RoundingConfig};
use crate::pca::{pca_projection, write_pca_csv};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub algorithm: Algorithm,
    pub weights: WeightConfig,
    pub solver: SolverConfig,
    pub rounding: RoundingConfig,
    pub dump_graph: bool,
    pub dump_embedding: bool,
    pub dump_pca: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            algorithm: Algorithm::Stem,
            weights: WeightConfig::default(),
            solver: SolverConfig::default(),
            rounding: RoundingConfig::default(),
            dump_graph: false,
            dump_embedding: false,
            dump_pca: false,
        }
    }
}

/// `(solver seed, rounding seed)` for one conversation.
pub fn derive_seeds(global: u64, conversation_id: &str) -> (u64, u64) {
    let mut h = Sha256::new();
    h.update(global.to_le_bytes());
    h.update(conversation_id.as_bytes());
    let digest = h.finalize();
    let word = |i: usize| u64::from_le_bytes(digest[i * 8..(i + 1) * 8].try_into().expect("8 bytes"));
    (word(0), word(1))
}

#[derive(Debug, Clone)]
pub struct ConversationOutput {
    pub record: PartitionRecord,
    pub topic: String,
    pub num_speakers: usize,
    pub core_size: usize,
    pub graph_csv: Option<String>,
    pub embedding_csv: Option<String>,
    pub pca_csv: Option<String>,
    pub elapsed: Duration,
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing csv to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Runs the configured algorithm on one conversation. `global_seed` is
/// combined with the conversation id to seed the solver and the rounding.
pub fn run_conversation(tree: &ConversationTree, cfg: &PipelineConfig, global_seed: u64) -> ConversationOutput {
    let start = Instant::now();
    let (solver_seed, rounding_seed) = derive_seeds(global_seed, tree.conversation_id());
    let out: PipelineOutput = match cfg.algorithm {
        Algorithm::Stem => run_stem(
            tree,
            &cfg.weights,
            &SolverConfig {
                seed: solver_seed,
                ..cfg.solver
            },
            &RoundingConfig {
                seed: rounding_seed,
                ..cfg.rounding
            },
        ),
        Algorithm::Greedy => run_greedy(tree, &cfg.weights),
    };
    let graph_csv = cfg.dump_graph.then(|| csv_string(|b| out.network.write_edge_csv(b)));
    let embedding_csv = match (&out.embedding, cfg.dump_embedding) {
        (Some(e), true) => Some(csv_string(|b| e.write_csv(b))),
        _ => None,
    };
    let pca_csv = match (&out.embedding, cfg.dump_pca) {
        (Some(e), true) => {
            let rows = pca_projection(e, &out.partition.core_labels);
            Some(csv_string(|b| write_pca_csv(&rows, b)))
        }
        _ => None,
    };
    ConversationOutput {
        record: out.partition.to_record(),
        topic: tree.topic().to_owned(),
        num_speakers: out.network.node_count(),
        core_size: out.core.subgraph.node_count(),
        graph_csv,
        embedding_csv,
        pca_csv,
        elapsed: start.elapsed(),
    }
}

/// Runs every conversation on a pool of `jobs` threads (0 = all cores).
/// Output order follows input order.
pub fn run_corpus(trees: &[ConversationTree], cfg: &PipelineConfig, global_seed: u64, jobs: usize) -> Vec<ConversationOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    pool.install(|| trees.par_iter().map(|t| run_conversation(t, cfg, global_seed)).collect())
}

/// Corpus-level digest of a run. Contains no timings, so it is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusSummary {
    pub algorithm: Algorithm,
    pub conversations: usize,
    pub speakers: usize,
    pub core_speakers: usize,
    pub mean_core_size: f64,
    pub max_core_size: usize,
    pub empty_cores: usize,
    pub confidence: Option<ConfidenceSummary>,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceSummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    /// Counts in [0, .25), [.25, .5), [.5, .75), [.75, 1].
    pub histogram: [usize; 4],
}

pub fn summarize(algorithm: Algorithm, outputs: &[ConversationOutput]) -> CorpusSummary {
    let n = outputs.len();
    let core_speakers: usize = outputs.iter().map(|o| o.core_size).sum();
    let conf: Vec<f64> = outputs.iter().filter_map(|o| o.record.confidence).collect();
    let confidence = (!conf.is_empty()).then(|| {
        let mut histogram = [0; 4];
        for &c in &conf {
            histogram[((c * 4.0) as usize).min(3)] += 1;
        }
        ConfidenceSummary {
            min: conf.iter().copied().fold(f64::INFINITY, f64::min),
            mean: conf.iter().sum::<f64>() / conf.len() as f64,
            max: conf.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            histogram,
        }
    });
    CorpusSummary {
        algorithm,
        conversations: n,
        speakers: outputs.iter().map(|o| o.num_speakers).sum(),
        core_speakers,
        mean_core_size: if n == 0 { 0.0 } else { core_speakers as f64 / n as f64 },
        max_core_size: outputs.iter().map(|o| o.core_size).max().unwrap_or(0),
        empty_cores: outputs.iter().filter(|o| o.core_size == 0).count(),
        confidence,
        warnings: outputs.iter().map(|o| o.record.warnings.len()).sum(),
    }
}

/// Mean wall time per conversation.
pub fn mean_elapsed(outputs: &[ConversationOutput]) -> Duration {
    if outputs.is_empty() {
        return Duration::ZERO;
    }
    outputs.iter().map(|o| o.elapsed).sum::<Duration>() / outputs.len() as u32
}
