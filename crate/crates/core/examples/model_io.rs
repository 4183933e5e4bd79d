//! Saving and loading a trained model.
//!
//! `cargo run --example model_io`

use crowdflow::engine::{fit, FitOptions};
use crowdflow::io::{read_model_for, write_model, ModelFile};
use crowdflow::synth::{generate, presets};
use crowdflow::{Collective, Config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = Config::default();
    let videos = vec![
        generate(&presets::separable(Collective::Walking, 0, 20))?.frames,
        generate(&presets::separable(Collective::Queuing, 1, 20))?.frames,
    ];
    let (model, _) = fit(&videos, &cfg, &FitOptions::from_config(&cfg))?;
    let file =
        ModelFile { spaces: Default::default(), config: cfg.clone(), weights: model.weights, action: model.action };
    let path = std::env::temp_dir().join("crowdflow-example.cfw");
    write_model(&path, &file)?;
    let back = read_model_for(&path, cfg.hist_bins)?;
    println!("wrote {} bytes, read back identical: {}", std::fs::metadata(&path)?.len(), back == file);
    match read_model_for(&path, 32) {
        Err(e) => println!("loading for 32 histogram bins fails: {e}"),
        Ok(_) => println!("unexpectedly accepted"),
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
