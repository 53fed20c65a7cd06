//! One coupled realization: the thinning strength, the three clusters, and
//! the containment verdict.
//!
//! ```bash
//! cargo run -p lrperc --example coupled_sample
//! ```

use lrperc::coupling::{check_containment, CoupledRunner, CPrimeMode};
use lrperc::lattice::{Displacement, Kernel};

fn main() -> lrperc::Result<()> {
    let j = Kernel::table(
        2,
        vec![
            (Displacement::new(vec![1, 0]), 0.45),
            (Displacement::new(vec![0, 1]), 0.45),
        ],
    )?;
    let jp = j.with_override(Displacement::new(vec![1, 0]), 0.3)?;

    let runner = CoupledRunner::new(&j, &jp, 6, CPrimeMode::PointwiseDominated)?;
    let params = &runner.params;
    println!("difference set:  {} displacements", params.delta.len());
    println!("min cube gap:    {:.6}", params.min_gap);
    println!("survival bound:  {:.6}", params.survival_lower);
    println!("q = {:.6}, p = {:.6}", params.q, params.p);

    let mut holds = 0;
    let mut not_applicable = 0;
    for seed in 0..2000 {
        let sample = runner.sample_seed(seed)?;
        match check_containment(&sample).0 {
            lrperc::coupling::Containment::Holds => holds += 1,
            lrperc::coupling::Containment::NotApplicable => not_applicable += 1,
            lrperc::coupling::Containment::Violated => {
                println!("seed {seed}: VIOLATION (this would be a bug)");
            }
        }
    }
    println!("containment over 2000 seeds: {holds} hold, {not_applicable} not applicable");

    // Look at one sample in detail.
    let sample = runner.sample_seed(7)?;
    println!("sample seed 7:");
    println!("  termination:       {:?}", sample.exploration.termination);
    println!("  untagged cluster:  {} vertices", sample.cluster_h.len());
    println!("  four-condition:    {} vertices", sample.cluster_star.len());
    println!("  refined cluster:   {} vertices", sample.cluster_jprime.len());
    println!(
        "  halo:              {} vertices / {} edges",
        sample.halo_vertices.len(),
        sample.halo_edges.len()
    );
    Ok(())
}
