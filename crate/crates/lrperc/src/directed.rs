//! Directed and oriented (space-time) percolation.
//!
//! Directed kernels drop the negation symmetry; oriented kernels live on
//! Z^{d-1} x Z with support only on displacements whose time coordinate is
//! +1, and their finite volume is the space-time box rather than the ball.
//! The exploration, the coupling and the estimators all run through the
//! shared machinery with out-edge adjacency; this module adds the directed
//! entry points and the forward-reachability oracle.

use crate::coupling::{check_containment, Containment, CoupledRunner, CoupledSample, CPrimeMode};
use crate::error::{Error, Result};
use crate::exploration::{self, ExplorationOutcome, RunOptions};
use crate::lattice::{DifferenceSet, Kernel, Orientation, Vertex};
use crate::marks::MarkField;

fn require_directed(kernel: &Kernel) -> Result<()> {
    if kernel.orientation() != Orientation::Directed {
        return Err(Error::Validation(
            "directed entry points need a directed kernel".into(),
        ));
    }
    Ok(())
}

/// The exploration with out-edge adjacency: neighbourhood scans range over
/// out-displacements of the far endpoint and clusters are forward
/// reachability sets.
pub fn directed_explore(
    kernel: &Kernel,
    delta: &DifferenceSet,
    q: f64,
    n: u32,
    field: &MarkField,
    opts: RunOptions,
) -> Result<ExplorationOutcome> {
    require_directed(kernel)?;
    exploration::run(kernel, delta, q, n, field, opts)
}

/// One directed coupled sample together with its containment verdict.
pub fn directed_coupling(
    j: &Kernel,
    jp: &Kernel,
    n: u32,
    seed: u64,
    mode: CPrimeMode,
) -> Result<(CoupledSample, Containment, Option<Vertex>)> {
    require_directed(j)?;
    require_directed(jp)?;
    let sample = CoupledRunner::new(j, jp, n, mode)?.sample_seed(seed)?;
    let (containment, witness) = check_containment(&sample);
    Ok((sample, containment, witness))
}

/// Forward breadth-first reachability set of the origin.
pub fn directed_bfs(kernel: &Kernel, n: u32, field: &MarkField) -> Result<crate::oracle::Cluster> {
    require_directed(kernel)?;
    crate::oracle::bfs_cluster(kernel, n, field)
}

/// Time coordinate of a vertex of an oriented model (last coordinate).
pub fn time_of(v: &Vertex) -> i32 {
    *v.coords().last().expect("nonempty coordinates")
}
