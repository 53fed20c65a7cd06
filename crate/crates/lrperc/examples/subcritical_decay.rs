//! Exponential decay of the boundary-reach probability in the subcritical
//! phase, with the closed-form slope check on the line.
//!
//! ```bash
//! cargo run --release -p lrperc --example subcritical_decay
//! ```

use lrperc::lattice::{Displacement, Kernel};
use lrperc::montecarlo::estimate_decay;

fn main() -> lrperc::Result<()> {
    let line = Kernel::table(1, vec![(Displacement::new(vec![1]), 0.5)])?;
    let fit = estimate_decay(&line, &[2, 4, 6, 8], 50_000, 1)?;
    println!("Z^1 at rho = 0.5:");
    for p in &fit.points {
        println!("  n={:<3} theta = {:.6} (log {:.4})", p.n, p.theta, p.log_theta);
    }
    println!(
        "  slope {:.4} vs ln(1/2) = {:.4}   (R^2 = {:.4})",
        fit.slope,
        0.5f64.ln(),
        fit.r_squared
    );

    let plane = Kernel::table(
        2,
        vec![
            (Displacement::new(vec![1, 0]), 0.35),
            (Displacement::new(vec![0, 1]), 0.35),
        ],
    )?;
    let fit = estimate_decay(&plane, &[4, 8, 12, 16], 20_000, 2)?;
    println!("Z^2 at 0.35 (subcritical):");
    for p in &fit.points {
        println!("  n={:<3} theta = {:.6} (log {:.4})", p.n, p.theta, p.log_theta);
    }
    println!(
        "  slope {:.4}, intercept {:.4}, R^2 = {:.4}",
        fit.slope, fit.intercept, fit.r_squared
    );
    if !fit.dropped.is_empty() {
        println!("  dropped radii with zero hits: {:?}", fit.dropped);
    }
    Ok(())
}
