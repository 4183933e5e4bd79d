//! Train, then track, label and score a held-out stream.
//!
//! `cargo run --release --example pipeline`

use crowdflow::domain::Frame;
use crowdflow::engine::{fit, person_frames, run_stream, FitOptions};
use crowdflow::eval::evaluate;
use crowdflow::synth::{generate, presets};
use crowdflow::{Collective, Config};

fn main() -> crowdflow::Result<()> {
    let cfg = Config::default();
    let train: Vec<Vec<Frame>> = (0..10u64)
        .map(|i| Ok(generate(&presets::separable(Collective::ALL[(i % 5) as usize], i, 40))?.frames))
        .collect::<crowdflow::Result<_>>()?;
    let (model, _) = fit(&train, &cfg, &FitOptions { stride: 3, ..FitOptions::from_config(&cfg) })?;

    let test = generate(&presets::separable(Collective::Waiting, 500, 40))?;
    let states = run_stream(&test.frames, Some(&model), &cfg)?;
    let report = evaluate(&person_frames(&states)?)?;
    let a = &report.activity;
    println!(
        "accuracy: collective {:.3}, group {:.3}, atomic {:.3}",
        a.collective.overall, a.group.overall, a.atomic.overall
    );
    if let Some(g) = report.grouping {
        println!("grouping: purity {:.3}, RI {:.3}, NMI {:.3}", g.purity, g.rand_index, g.nmi);
    }
    println!("id switches: {} over {} people", report.tracking.switches, report.tracking.gt_tracks);
    Ok(())
}
