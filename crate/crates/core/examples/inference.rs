//! Coordinate-ascent labelling of one frame with a random potential.
//!
//! `cargo run --example inference`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdflow::features::Observations;
use crowdflow::infer::{infer, InferOptions};
use crowdflow::potentials::{Layout, WeightVector};

fn main() -> crowdflow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layout = Layout::default();
    let w = WeightVector::from_vec(layout, (0..layout.len()).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let mut obs_vec = |d: usize| (0..d).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
    let obs = Observations {
        x0: obs_vec(layout.dim_x0),
        xg: vec![obs_vec(layout.dim_xg), obs_vec(layout.dim_xg)],
        xi: (0..5).map(|_| obs_vec(layout.dim_xi)).collect(),
    };
    let grouping = [0, 0, 1, 1, 1];
    let out = infer(&w, &obs, &grouping, None, None, &InferOptions { eps: 0.0, max_iter: 20 })?;
    println!("labels {:?}", out.labels);
    println!("objective per sweep {:?}", out.objective_trace);
    println!("{} sweeps, capped: {}", out.iterations, out.capped);
    Ok(())
}
