//! Writes the bundled templates as P2 PGM files plus their pair registry,
//! ready for `closematch synth --templates DIR`.
//!
//! Run with `cargo run --example export_templates [DIR]` (default
//! `templates/` in the current directory).

use std::fs;
use std::path::PathBuf;

use closematch::dataset;
use closematch::imaging;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("templates"));
    fs::create_dir_all(&dir)?;
    for (class, img) in dataset::builtin_templates() {
        let path = dir.join(format!("{class}.pgm"));
        fs::write(&path, imaging::write_pgm_p2(&img.to_gray()))?;
        println!("{}", path.display());
    }
    let registry = dir.join("registry.csv");
    fs::write(&registry, dataset::builtin_registry().to_csv())?;
    println!("{}", registry.display());
    Ok(())
}
