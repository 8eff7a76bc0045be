//! Otsu binarization and size normalization of a synthetic gray glyph.
//!
//! Run with `cargo run --example binarize_glyph`.

use closematch::imaging::{self, GrayImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // dark ring on a light, slightly noisy background
    let (w, h) = (20, 16);
    let mut px = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let d = ((r as f64 - 8.0).powi(2) + (c as f64 - 10.0).powi(2)).sqrt();
            let base: u8 = if (4.0..6.5).contains(&d) { 40 } else { 210 };
            px.push(base.wrapping_add(((r * 7 + c * 3) % 11) as u8));
        }
    }
    let gray = GrayImage::new(w, h, px)?;

    let (bin, t) = imaging::binarize_otsu(&gray);
    println!(
        "Otsu threshold: {t} ({} ink pixels of {})",
        bin.ink_count(),
        w * h
    );

    let glyph = imaging::normalize_binary(&bin, 12)?;
    for r in 0..glyph.height() {
        let line: String = (0..glyph.width())
            .map(|c| if glyph.get(r, c) == 1 { '#' } else { '.' })
            .collect();
        println!("{line}");
    }

    let pgm = imaging::write_pgm_p2(&glyph.to_gray());
    let back = imaging::load_pgm(&pgm)?;
    assert_eq!(back.pixels(), glyph.to_gray().pixels());
    println!("P2 round trip ok ({} bytes)", pgm.len());
    Ok(())
}
