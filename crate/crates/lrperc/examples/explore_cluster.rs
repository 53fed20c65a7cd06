//! Run the cluster exploration once and print what it uncovered.
//!
//! ```bash
//! cargo run -p lrperc --example explore_cluster
//! ```

use lrperc::exploration::{self, AssertLevel, EdgeStatus, RunOptions};
use lrperc::lattice::{DifferenceSet, Displacement, Kernel, Orientation};
use lrperc::marks::MarkField;

fn main() -> lrperc::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("seed must be an integer"))
        .unwrap_or(2028);
    // Nearest neighbours at 0.45 plus a long bond, on the plane.
    let kernel = Kernel::table(
        2,
        vec![
            (Displacement::new(vec![1, 0]), 0.45),
            (Displacement::new(vec![0, 1]), 0.45),
            (Displacement::new(vec![2, 1]), 0.1),
        ],
    )?;
    // Treat the horizontal orbit as the perturbed one and thin it at q = 0.2.
    let delta = DifferenceSet::from_displacements(
        2,
        Orientation::Undirected,
        vec![Displacement::new(vec![1, 0])],
    )?;
    println!("seed:             {seed}");
    let field = MarkField::new(seed);
    let outcome = exploration::run(
        &kernel,
        &delta,
        0.2,
        8,
        &field,
        RunOptions::with_assertions(AssertLevel::FullTrace),
    )?;

    println!("termination:      {:?}", outcome.termination);
    println!("stages:           {}", outcome.stages);
    println!("discovered:       {} vertices", outcome.discovered_vertices().len());
    println!(
        "untagged cluster: {} vertices",
        outcome.untagged_cluster_ids().len()
    );
    println!(
        "tagged leaves:    {}",
        outcome.tagged_leaf_ids().len()
    );

    let mut by_status = std::collections::BTreeMap::new();
    for (_, status) in outcome.statuses() {
        *by_status.entry(format!("{status:?}")).or_insert(0u32) += 1;
    }
    println!("edge statuses:");
    for (status, count) in by_status {
        println!("  {status:<22} {count}");
    }

    // The recorded trace is line-addressable; show the first few stages.
    if let Some(trace) = &outcome.trace {
        println!("first trace records:");
        for rec in trace.iter().take(8) {
            println!(
                "  stage {:>3}  {:<4} {:<12} {}",
                rec.stage,
                rec.step,
                rec.outcome,
                rec.edge.as_ref().map(|e| e.to_string()).unwrap_or_default()
            );
        }
    }

    // Tagged far endpoints are leaves of H: their discovery edge is their
    // only H-edge.
    let tagged = outcome
        .statuses()
        .into_iter()
        .filter(|(_, s)| *s == EdgeStatus::Tagged)
        .count();
    println!("tagged edges:     {tagged}");
    Ok(())
}
