//! Locating and loading corpus, partition and gold files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use stem_core::{parse_conversations, ConversationTree};
use walkdir::WalkDir;

pub const PARTITION_SUFFIX: &str = ".partition.json";
pub const GOLD_SUFFIX: &str = ".gold.json";

fn is_corpus_file(p: &Path) -> bool {
    let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
    (name.ends_with(".json") || name.ends_with(".jsonl"))
        && !name.ends_with(GOLD_SUFFIX)
        && !name.ends_with(PARTITION_SUFFIX)
        && name != "summary.json"
}

/// Expands directories (recursively, in sorted order) into the files they
/// contain that `keep` accepts. Explicit file arguments are kept as given.
pub fn expand(paths: &[PathBuf], keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            for entry in WalkDir::new(p).sort_by_file_name() {
                let entry = entry.with_context(|| format!("listing {}", p.display()))?;
                if entry.file_type().is_file() && keep(entry.path()) {
                    out.push(entry.into_path());
                }
            }
        } else if p.exists() {
            out.push(p.clone());
        } else {
            bail!("no such file or directory: {}", p.display());
        }
    }
    Ok(out)
}

pub fn files_with_suffix(paths: &[PathBuf], suffix: &str) -> Result<Vec<PathBuf>> {
    expand(paths, |p| p.to_str().is_some_and(|s| s.ends_with(suffix)))
}

/// Reads every conversation under `paths`. Conversation ids must be unique
/// across the whole corpus.
pub fn load_corpus(paths: &[PathBuf]) -> Result<Vec<ConversationTree>> {
    let mut trees = Vec::new();
    let mut seen = BTreeSet::new();
    for file in expand(paths, is_corpus_file)? {
        let bytes = std::fs::read(&file).with_context(|| format!("reading {}", file.display()))?;
        for tree in parse_conversations(&bytes).with_context(|| format!("parsing {}", file.display()))? {
            if !seen.insert(tree.conversation_id().to_owned()) {
                bail!("duplicate conversation id {:?} in {}", tree.conversation_id(), file.display());
            }
            trees.push(tree);
        }
    }
    if trees.is_empty() {
        bail!("no conversations found");
    }
    Ok(trees)
}

/// File name stem for a conversation id: anything outside `[A-Za-z0-9._-]`
/// becomes `_`.
pub fn file_stem(conversation_id: &str) -> String {
    conversation_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' })
        .collect()
}
