//! Locate the pseudo-critical edge density of the family
//! J = 1 - exp(-beta phi) by bisection, for the nearest-neighbour phi and
//! for a heavy-tailed phi on the line.
//!
//! ```bash
//! cargo run --release -p lrperc --example critical_beta
//! ```

use lrperc::lattice::{Displacement, PhiFamily};
use lrperc::montecarlo::bisect_beta_c;

fn main() -> lrperc::Result<()> {
    // Nearest-neighbour phi on the plane: the implied edge probability at
    // the crossing should sit near the known bond threshold 1/2.
    let nn = PhiFamily::table(
        2,
        vec![
            (Displacement::new(vec![1, 0]), 1.0),
            (Displacement::new(vec![0, 1]), 1.0),
        ],
    )?;
    let est = bisect_beta_c(&nn, 16, 4_000, 0.5, 0.01, 16.0, 5)?;
    let implied = 1.0 - (-est.outcome.location).exp();
    println!("square lattice, n = {}:", est.n);
    println!(
        "  beta_c ~ {:.4}  (bracket [{:.4}, {:.4}], {} evaluations)",
        est.outcome.location, est.outcome.bracket.0, est.outcome.bracket.1, est.outcome.evaluations
    );
    println!("  implied nearest-neighbour probability {implied:.4} (literature: 0.5)");

    // Heavy-tailed phi(z) = |z|^-1.5 on the line, truncated at range 40:
    // long bonds are what makes the one-dimensional model percolate.
    let heavy = PhiFamily::table(
        1,
        (1..=40).map(|z| (Displacement::new(vec![z]), f64::from(z).powf(-1.5))),
    )?;
    let est = bisect_beta_c(&heavy, 24, 2_000, 0.5, 0.02, 32.0, 6)?;
    println!("heavy-tailed line (phi = |z|^-1.5, range 40), n = {}:", est.n);
    println!(
        "  beta_c ~ {:.4}  (bracket [{:.4}, {:.4}])",
        est.outcome.location, est.outcome.bracket.0, est.outcome.bracket.1
    );
    Ok(())
}
