//! Projection histograms and truncated DFT magnitudes for one glyph, plus a
//! check that cyclically shifting a projection leaves the features unchanged.
//!
//! Run with `cargo run --example spectral_features`.

use closematch::dataset;
use closematch::features::{self, FeatureConfig};
use closematch::imaging;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (label, template) = dataset::builtin_templates()
        .into_iter()
        .next()
        .expect("templates");
    let glyph = imaging::normalize_binary(&template, 32)?;

    let proj = features::project(&glyph)?;
    println!("glyph {label:?}: {} ink pixels", proj.ink_total());
    println!("h = {:?}", proj.h);
    println!("v = {:?}", proj.v);

    let cfg = FeatureConfig::with_side(32);
    let fv = cfg.extract(&glyph)?;
    println!("d = {} features", fv.dim());
    println!("f_h[..4] = {:.4?}", &fv.horizontal()[..4]);
    println!("f_v[..4] = {:.4?}", &fv.vertical()[..4]);

    let h: Vec<f64> = proj.h.iter().map(|&x| f64::from(x)).collect();
    let mut rotated = h.clone();
    rotated.rotate_left(5);
    let a = features::truncate_spectrum(&features::dft(&h)?, cfg.m)?;
    let b = features::truncate_spectrum(&features::dft(&rotated)?, cfg.m)?;
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    println!("max |change| after a cyclic shift of 5: {worst:.2e}");
    Ok(())
}
