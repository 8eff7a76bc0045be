//! Trains an RBF SVM with SMO on the XOR problem, which no linear separator
//! can solve, and prints the dual solution.
//!
//! Run with `cargo run --example train_svm_xor`.

use closematch::svm::{self, KernelParams, TrainingSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = vec![
        vec![0.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 0.0],
    ];
    let y = vec![1, 1, -1, -1];
    let data = TrainingSet::new(x.clone(), y.clone())?;
    let params = KernelParams::new(1.0, 10.0)?;

    let sol = svm::solve_smo(&data, &params, 7)?;
    println!("alpha = {:.6?}", sol.alpha);
    println!(
        "bias = {:.6}, dual objective = {:.6}",
        sol.bias, sol.objective
    );
    println!("{} sweeps, {} updates", sol.sweeps, sol.updates);

    let model = svm::train_smo(&data, &params, 7)?;
    for (xi, yi) in x.iter().zip(&y) {
        let f = model.decision(xi)?;
        println!("{xi:?}  label {yi:+}  decision {f:+.4}");
    }
    Ok(())
}
