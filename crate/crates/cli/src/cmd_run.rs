use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use stem_core::batch::{mean_elapsed, run_corpus, summarize};
use stem_core::validate_corpus;

use crate::config::RunArgs;
use crate::inputs::{file_stem, load_corpus, PARTITION_SUFFIX};

/// Wall-clock figures live apart from `summary.json` so that file stays
/// reproducible.
#[derive(Serialize)]
struct Timing {
    conversations: usize,
    jobs: usize,
    mean_seconds_per_conversation: f64,
    total_seconds: f64,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn run(inputs: &[PathBuf], opts: &RunArgs) -> Result<()> {
    let settings = opts.resolve()?;
    let trees = load_corpus(inputs)?;
    for w in validate_corpus(&trees) {
        eprintln!("warning: {w}");
    }

    let mut stems = BTreeMap::new();
    for t in &trees {
        let stem = file_stem(t.conversation_id());
        if let Some(other) = stems.insert(stem.clone(), t.conversation_id()) {
            bail!(
                "conversation ids {other:?} and {:?} map to the same output name {stem:?}",
                t.conversation_id()
            );
        }
    }

    let out = &settings.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let start = std::time::Instant::now();
    let outputs = run_corpus(&trees, &settings.pipeline, settings.seed, settings.jobs);
    let total = start.elapsed();

    for o in &outputs {
        let id = &o.record.conversation_id;
        for w in &o.record.warnings {
            eprintln!("warning: {id}: {w}");
        }
        let stem = file_stem(id);
        write(&out.join(format!("{stem}{PARTITION_SUFFIX}")), &(o.record.to_json() + "\n"))?;
        for (suffix, body) in [("graph", &o.graph_csv), ("embedding", &o.embedding_csv), ("pca", &o.pca_csv)] {
            if let Some(body) = body {
                write(&out.join(format!("{stem}.{suffix}.csv")), body)?;
            }
        }
    }

    let summary = summarize(settings.pipeline.algorithm, &outputs);
    write(&out.join("summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    let mean = mean_elapsed(&outputs);
    let timing = Timing {
        conversations: outputs.len(),
        jobs: settings.jobs,
        mean_seconds_per_conversation: mean.as_secs_f64(),
        total_seconds: total.as_secs_f64(),
    };
    write(&out.join("timing.json"), &(serde_json::to_string_pretty(&timing)? + "\n"))?;

    println!(
        "{} conversations ({}), {} speakers, {} in cores, {} empty cores, {} warnings",
        summary.conversations,
        summary.algorithm,
        summary.speakers,
        summary.core_speakers,
        summary.empty_cores,
        summary.warnings
    );
    if let Some(c) = &summary.confidence {
        println!("confidence min {:.3} mean {:.3} max {:.3}", c.min, c.mean, c.max);
    }
    println!(
        "mean wall time {:.1} ms per conversation; results in {}",
        mean.as_secs_f64() * 1e3,
        out.display()
    );
    Ok(())
}
