use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use stem_core::corpus::parse_gold_sidecars;
use stem_core::eval::{aggregate, evaluate_conversation};
use stem_core::{build_network, PartitionRecord, SpeakerId, StanceLabel};

use crate::config::RunArgs;
use crate::inputs::{files_with_suffix, load_corpus, GOLD_SUFFIX, PARTITION_SUFFIX};

fn load_partitions(dir: &PathBuf) -> Result<BTreeMap<String, PartitionRecord>> {
    let mut out = BTreeMap::new();
    for file in files_with_suffix(std::slice::from_ref(dir), PARTITION_SUFFIX)? {
        let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let rec: PartitionRecord =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
        if out.contains_key(&rec.conversation_id) {
            bail!("two partition files for conversation {:?}", rec.conversation_id);
        }
        out.insert(rec.conversation_id.clone(), rec);
    }
    Ok(out)
}

fn load_sidecars(paths: &[PathBuf]) -> Result<BTreeMap<String, BTreeMap<SpeakerId, StanceLabel>>> {
    let mut out = BTreeMap::new();
    for file in files_with_suffix(paths, GOLD_SUFFIX)? {
        let bytes = std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
        for s in parse_gold_sidecars(&bytes).with_context(|| format!("parsing {}", file.display()))? {
            if out.insert(s.conversation_id.clone(), s.author_labels).is_some() {
                bail!("two gold sidecars for conversation {:?}", s.conversation_id);
            }
        }
    }
    Ok(out)
}

pub fn run(corpus: &[PathBuf], partitions: &PathBuf, gold: &[PathBuf], opts: &RunArgs) -> Result<()> {
    let settings = opts.resolve()?;
    let trees = load_corpus(corpus)?;
    let mut records = load_partitions(partitions)?;
    let mut sidecars = load_sidecars(gold)?;

    let mut evals = Vec::new();
    let mut any_gold = false;
    for tree in &trees {
        let id = tree.conversation_id();
        let mut labels = tree.gold_labels();
        if let Some(authors) = sidecars.remove(id) {
            labels = labels.with_author_labels(authors);
        }
        any_gold |= !labels.is_empty();
        let Some(rec) = records.remove(id) else {
            eprintln!("warning: {id}: no partition file, skipped");
            continue;
        };
        let network = build_network(tree, &settings.pipeline.weights);
        let e = evaluate_conversation(&rec, &labels, tree, &network);
        for err in &e.errors {
            eprintln!("warning: {err}");
        }
        evals.push(e);
    }
    for id in records.keys() {
        eprintln!("warning: {id}: partition has no matching conversation in the corpus");
    }
    for id in sidecars.keys() {
        eprintln!("warning: {id}: gold sidecar has no matching conversation in the corpus");
    }
    if !any_gold {
        bail!("no gold labels: the corpus has no post labels and no sidecar matched");
    }
    if evals.is_empty() {
        bail!("no partition matched any conversation in the corpus");
    }

    let report = aggregate(evals);
    let out = &settings.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let table = report.to_table();
    std::fs::write(out.join("eval.json"), serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", out.join("eval.json").display()))?;
    std::fs::write(out.join("eval.txt"), &table)
        .with_context(|| format!("writing {}", out.join("eval.txt").display()))?;
    print!("{table}");
    Ok(())
}
