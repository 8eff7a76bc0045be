//! Writes a small perturbed corpus from the bundled templates and reads it
//! back through the manifest loader.
//!
//! Run with `cargo run --example synth_corpus [OUT_DIR]`.

use std::path::PathBuf;

use closematch::dataset::{self, SynthParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("closematch-synth-example"));

    let templates: Vec<_> = dataset::builtin_templates()
        .into_iter()
        .filter(|(c, _)| c == "E" || c == "F")
        .collect();
    let params = SynthParams {
        count: 6,
        ..SynthParams::default()
    };
    let samples = dataset::synth_generate(&templates, &params, 32)?;
    let manifest = dataset::write_corpus(&samples, &out)?;
    println!("wrote {} samples to {}", samples.len(), manifest.display());

    let loaded = dataset::load_manifest(&manifest)?;
    let (train, test) = dataset::split_even(&loaded, 42)?;
    println!("split: {} train, {} test", train.len(), test.len());
    for s in &test {
        println!("  test {} ({})", s.source_id, s.label);
    }
    Ok(())
}
