//! Full pipeline through the library API: synthesize a two-class corpus,
//! train on the even split, score the held-out half, then classify one image.
//!
//! Run with `cargo run --release --example end_to_end`.

use std::fs;

use closematch::cli::{self, RunConfig};
use closematch::dataset::{self, PairRegistry, SynthParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("closematch-end-to-end");
    let corpus = dir.join("corpus");
    let _ = fs::remove_dir_all(&dir);

    let templates: Vec<_> = dataset::builtin_templates()
        .into_iter()
        .filter(|(c, _)| c == "C" || c == "G")
        .collect();
    let templ_dir = dir.join("templates");
    fs::create_dir_all(&templ_dir)?;
    for (class, img) in &templates {
        fs::write(
            templ_dir.join(format!("{class}.pgm")),
            closematch::imaging::write_pgm_p2(&img.to_gray()),
        )?;
    }
    let registry = dir.join("registry.csv");
    fs::write(
        &registry,
        PairRegistry::new(vec![("C".into(), "G".into())])?.to_csv(),
    )?;

    let s = cli::cmd_synth(32, Some(&templ_dir), &SynthParams::default(), &corpus)?;
    println!("{} samples -> {}", s.samples, s.manifest.display());

    let cfg = RunConfig {
        manifest: Some(s.manifest.clone()),
        registry: Some(registry),
        model: Some(dir.join("model.json")),
        ..RunConfig::default()
    };
    let t = cli::cmd_train(&cfg)?;
    println!("gamma = {:e}", t.gamma);
    for p in &t.pairs {
        println!(
            "train {}/{}: {:.1}%",
            p.pos_class,
            p.neg_class,
            p.accuracy()
        );
    }

    let report = cli::cmd_evaluate(&s.manifest, &t.model_path, None, None)?;
    print!("{}", report.table);

    let p = cli::cmd_predict(&t.model_path, &corpus.join("0000.pgm"))?;
    print!("{}", cli::format_prediction(&p));
    Ok(())
}
