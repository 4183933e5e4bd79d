//! Training the activity model on separable synthetic scenes.
//!
//! `cargo run --release --example train_activity`

use std::time::Instant;

use crowdflow::domain::Frame;
use crowdflow::engine::{fit, FitOptions};
use crowdflow::synth::{generate, presets};
use crowdflow::{Collective, Config};

fn main() -> crowdflow::Result<()> {
    let videos: Vec<Vec<Frame>> = (0..10u64)
        .map(|i| Ok(generate(&presets::separable(Collective::ALL[(i % 5) as usize], i, 40))?.frames))
        .collect::<crowdflow::Result<_>>()?;
    let cfg = Config::default();
    let start = Instant::now();
    let (model, report) = fit(&videos, &cfg, &FitOptions { stride: 3, ..FitOptions::from_config(&cfg) })?;
    println!("{} cutting-plane rounds in {:.2?}, slack {:.4}", report.rounds, start.elapsed(), report.xi);
    for (k, s) in report.stats.iter().enumerate().step_by(10) {
        println!("round {k:>3}: violation {:.4} gap {:.2e} kkt {:.1e}", s.violation, s.qp_gap, s.kkt_residual);
    }
    let norm = model.weights.data.iter().map(|w| w * w).sum::<f64>().sqrt();
    println!("|w| = {norm:.3}");
    Ok(())
}
