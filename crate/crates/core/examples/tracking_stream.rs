//! Online tracking of a synthetic stream, frame by frame.
//!
//! `cargo run --example tracking_stream`

use crowdflow::engine::advance_frame;
use crowdflow::synth::{generate, presets};
use crowdflow::{Config, FrameState};

fn main() -> crowdflow::Result<()> {
    let cfg = Config::default();
    let g = generate(&presets::ablation(3))?;
    let mut state = FrameState::initial();
    for f in &g.frames {
        state = advance_frame(&state, f.index, f.detections.clone(), None, &cfg)?;
        if f.index % 5 == 0 {
            println!(
                "frame {:>2}: {} detections, {} live tracks, {} groups, {} growing iterations",
                state.k,
                state.detections.len(),
                state.tracks.len(),
                state.groups.len(),
                state.assoc_iterations
            );
        }
    }
    println!("track ids at the last frame: {:?}", state.det_track);
    Ok(())
}
