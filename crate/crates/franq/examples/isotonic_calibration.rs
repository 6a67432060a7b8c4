//! Map raw estimator scores to probabilities of truth with isotonic (PAVA)
//! regression, respecting score polarity.
//!
//! Run with: `cargo run --example isotonic_calibration`

use franq::calibration::{apply_isotonic, fit_isotonic, orient, Polarity};

fn main() -> franq::Result<()> {
    // Labeled training pool: higher score, more often true — but noisy, so
    // the raw empirical rates are not monotone. PAVA pools adjacent
    // violators into a non-decreasing step function.
    let pairs: Vec<(f64, u8)> = vec![
        (0.05, 0),
        (0.10, 0),
        (0.20, 1), // noise: an early positive
        (0.30, 0),
        (0.40, 0),
        (0.55, 1),
        (0.60, 0), // noise: a late negative
        (0.70, 1),
        (0.80, 1),
        (0.95, 1),
    ];
    let model = fit_isotonic(&pairs, Polarity::Confidence)?;

    println!("fitted step function ({} steps):", model.values.len());
    for (b, v) in model.breakpoints.iter().zip(&model.values) {
        println!("  score >= {b:>5.2}  ->  P(true) = {v:.3}");
    }

    println!("\napplying to fresh scores:");
    for score in [0.0, 0.15, 0.5, 0.65, 0.9, 1.2] {
        println!("  raw {score:>5.2} -> {:.3}", apply_isotonic(&model, score));
    }

    // Uncertainty-polarity scores (lower = more confident) are negated
    // before fitting so the calibrated output is still P(true).
    let uncertain_pairs: Vec<(f64, u8)> = vec![
        (0.2, 1),
        (0.5, 1),
        (1.0, 1),
        (1.8, 0),
        (2.5, 0),
        (3.0, 0),
    ];
    let model_u = fit_isotonic(&uncertain_pairs, Polarity::Uncertainty)?;
    println!("\nuncertainty polarity (entropy-like input):");
    for score in [0.1, 1.5, 2.8] {
        println!(
            "  entropy {score:>4.1} (oriented {:>4.1}) -> P(true) = {:.3}",
            orient(score, Polarity::Uncertainty),
            apply_isotonic(&model_u, score)
        );
    }
    Ok(())
}
