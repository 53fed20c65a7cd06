//! Exact distributions on a tiny instance, with the stochastic-dominance
//! check between the refined cluster and the halo of the retained cluster.
//!
//! ```bash
//! cargo run -p lrperc --example exact_enumeration
//! ```

use lrperc::lattice::{Displacement, Kernel};
use lrperc::oracle::{enumerate_exact, exact_domination_check, Functional};

fn print_distribution(label: &str, dist: &lrperc::oracle::ExactDistribution) {
    println!("{label} (mean {:.6}):", dist.mean());
    for (value, prob) in &dist.support {
        println!("  P({value}) = {prob:.10}");
    }
}

fn main() -> lrperc::Result<()> {
    // The radius-1 line with fair edges and a heavily perturbed kernel.
    let j = Kernel::table(1, vec![(Displacement::new(vec![1]), 0.5)])?;
    let jp = j.with_override(Displacement::new(vec![1]), 1.0 / 16.0)?;

    let plain = enumerate_exact(&j, None, 1, &Functional::ClusterSize)?;
    print_distribution("plain cluster size", &plain);

    let cprime = enumerate_exact(
        &j,
        Some(&jp),
        1,
        &Functional::CPrimeSize {
            mode: lrperc::coupling::CPrimeMode::PointwiseDominated,
        },
    )?;
    print_distribution("refined (perturbed) cluster size", &cprime);

    let halo = enumerate_exact(&j, Some(&jp), 1, &Functional::HaloVertexCount)?;
    print_distribution("halo vertex count under p*J", &halo);

    let h = enumerate_exact(&j, Some(&jp), 1, &Functional::ClusterHSize)?;
    print_distribution("untagged exploration cluster size", &h);

    let check = exact_domination_check(&j, &jp, 1)?;
    println!("p = {:.4}, q = {:.4}", check.p, check.q);
    println!("dominance outcome: {:?}", check.outcome);
    Ok(())
}
