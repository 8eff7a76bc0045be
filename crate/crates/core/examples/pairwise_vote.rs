//! One-vs-one voting over three 2-D clusters.
//!
//! Run with `cargo run --example pairwise_vote`.

use closematch::svm::{self, KernelParams, LabeledFeatures, PairSelection};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let centres = [("a", 0.0, 0.0), ("b", 4.0, 0.0), ("c", 2.0, 4.0)];
    let offsets = [(-0.4, 0.1), (0.3, -0.2), (0.0, 0.4), (0.2, 0.2)];
    let mut samples = Vec::new();
    for (label, cx, cy) in centres {
        for (dx, dy) in offsets {
            samples.push(LabeledFeatures::new(label, vec![cx + dx, cy + dy]));
        }
    }

    let params = KernelParams::new(0.5, 10.0)?;
    let model = svm::train_pairwise(&samples, &params, 1, PairSelection::All)?;
    println!(
        "classes {:?}, {} machines",
        model.classes(),
        model.models().len()
    );

    for probe in [[0.1, -0.1], [3.8, 0.3], [2.1, 3.6], [2.0, 1.5]] {
        let p = model.predict_multiclass(&probe)?;
        println!("{probe:?} -> {} votes {:?}", p.class, p.votes);
        for d in &p.decisions {
            println!("    {}/{}: {:+.4}", d.pos_class, d.neg_class, d.value);
        }
    }
    Ok(())
}
