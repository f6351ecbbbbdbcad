use anyhow::{Context, Result};
use stem_core::batch::derive_seeds;
use stem_core::synth::{generate_with_id, SynthConfig};

use crate::inputs::GOLD_SUFFIX;
use crate::GenCmd;

/// Writes `<out>/<id>.json` per conversation and `<out>/gold/<id>.gold.json`
/// with the planted author factions. Conversation `i` is seeded from the
/// global seed and its id, so the corpus is a pure function of the flags.
pub fn run(c: &GenCmd) -> Result<()> {
    let gold_dir = c.out.join("gold");
    std::fs::create_dir_all(&gold_dir).with_context(|| format!("creating {}", gold_dir.display()))?;
    let width = c.count.saturating_sub(1).to_string().len().max(3);
    for i in 0..c.count {
        let id = format!("synth-{}-{i:0width$}", c.seed);
        let cfg = SynthConfig {
            num_speakers: c.num_speakers,
            faction_split: c.faction_split,
            num_posts: c.num_posts,
            p_cross: c.p_cross,
            p_quote: c.p_quote,
            reply_target_bias: c.bias,
            root_only: c.root_only,
            seed: derive_seeds(c.seed, &id).0,
        };
        let conv = generate_with_id(&cfg, &id, &c.topic)?;
        let path = c.out.join(format!("{id}.json"));
        std::fs::write(&path, conv.tree.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
        let path = gold_dir.join(format!("{id}{GOLD_SUFFIX}"));
        std::fs::write(&path, conv.sidecar().to_json() + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("wrote {} conversations to {}", c.count, c.out.display());
    Ok(())
}
