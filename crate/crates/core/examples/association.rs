//! Joint track/group association with fixed compatibility matrices.
//!
//! `cargo run --example association`

use crowdflow::assoc::{satisfies_constraints, solve_fixed, AssocProblem};
use crowdflow::domain::Matrix;

fn main() -> crowdflow::Result<()> {
    // three detections, two live tracks, two candidate groups
    let m = Matrix::from_rows(&[vec![0.9, -0.4], vec![0.2, 0.8], vec![-0.3, -0.1]])?;
    let c = Matrix::from_rows(&[vec![0.7, -0.2], vec![0.6, 0.1], vec![-0.5, -0.6]])?;
    for lambda in [0.5, 1.0, 2.0] {
        let sol = solve_fixed(&AssocProblem::new(m.clone(), c.clone(), lambda)?);
        println!(
            "lambda {lambda}: tracks {:?} groups {:?} objective {:.3} feasible {}",
            sol.psi,
            sol.omega,
            sol.objective,
            satisfies_constraints(&sol.psi_matrix(), &sol.omega_matrix())
        );
    }
    println!("detection 2 fits no group; group growing would seed a new one from it");
    Ok(())
}
