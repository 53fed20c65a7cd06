//! The strict-monotonicity experiment at desk scale: zeroing the diagonal
//! orbit of a mixed kernel strictly raises the pseudo-critical scale.
//!
//! ```bash
//! cargo run --release -p lrperc --example strict_monotonicity
//! ```

use lrperc::lattice::{Displacement, Kernel};
use lrperc::montecarlo::monotonicity_experiment;

fn main() -> lrperc::Result<()> {
    let j = Kernel::table(
        2,
        vec![
            (Displacement::new(vec![1, 0]), 0.25),
            (Displacement::new(vec![0, 1]), 0.25),
            (Displacement::new(vec![1, 1]), 0.15),
            (Displacement::new(vec![1, -1]), 0.15),
        ],
    )?;
    let jp = j
        .with_override(Displacement::new(vec![1, 1]), 0.0)?
        .with_override(Displacement::new(vec![1, -1]), 0.0)?;

    let report = monotonicity_experiment(&j, &jp, &[8, 12, 16], 3_000, 0.5, 0.01, 64.0, 9)?;
    println!("pseudo-critical scale s: theta_n(min(1, s K)) = 0.5");
    println!(
        "{:>4} {:>10} {:>10} {:>10} {:>10} {:>8}",
        "n", "s(J)", "s(J')", "gap", "stderr", "z"
    );
    for p in &report.points {
        println!(
            "{:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>8.1}",
            p.n,
            p.scale_base.location,
            p.scale_perturbed.location,
            p.gap,
            p.combined_stderr,
            p.z_score
        );
    }
    println!("a strictly positive gap is the finite-volume shadow of the");
    println!("strict critical-point inequality under local perturbations");
    Ok(())
}
