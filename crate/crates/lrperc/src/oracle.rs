//! Independent brute-force references.
//!
//! `bfs_cluster` grows the origin cluster of the configuration graph by
//! plain breadth-first search on the same mark field the exploration uses,
//! giving a per-seed oracle for the exploration with an empty difference
//! set. `enumerate_exact` computes exact distributions on tiny instances by
//! integrating over every joint mark outcome: each edge contributes a small
//! atom alphabet (its marks only matter through finitely many threshold
//! comparisons), boundary indicators contribute a coin per vertex, and
//! functionals of the exploration additionally integrate over every edge
//! ordering.

use crate::coupling::{compute_q, cprime_open_probability, CouplingParams, CPrimeMode};
use crate::error::{Error, Result};
use crate::exploration::{
    run_with_inputs, EdgeId, ExplorationContext, MarkSource, RunOptions,
};
use crate::lattice::{
    delta_of, DifferenceSet, EdgeKey, Kernel, Orientation, Vertex,
};
use crate::marks::{Channel, MarkField};
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Vertex and edge set of the origin cluster in the configuration graph
/// restricted to the region (forward-reachability set in directed mode).
#[derive(Clone, Debug, Serialize)]
pub struct Cluster {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<EdgeKey>,
}

fn geometry(kernel: &Kernel, n: u32) -> Result<Arc<ExplorationContext>> {
    let delta = DifferenceSet::empty(kernel.d(), kernel.orientation());
    ExplorationContext::build(kernel, &delta, 0.0, n)
}

/// Breadth-first origin cluster on the given mark field. Deterministic in
/// (kernel, n, field); independent of traversal order because the field is
/// a fixed function.
pub fn bfs_cluster(kernel: &Kernel, n: u32, field: &MarkField) -> Result<Cluster> {
    let ctx = geometry(kernel, n)?;
    Ok(bfs_cluster_in(&ctx, field))
}

pub fn bfs_cluster_in(ctx: &ExplorationContext, field: &MarkField) -> Cluster {
    let mut visited = vec![false; ctx.vertices.len()];
    let mut open_edges: Vec<EdgeId> = Vec::new();
    let mut tested = vec![false; ctx.edges.len()];
    let mut queue = vec![ctx.origin];
    visited[ctx.origin as usize] = true;
    while let Some(v) = queue.pop() {
        for &f in ctx.explorable_edges(v) {
            if tested[f as usize] {
                continue;
            }
            tested[f as usize] = true;
            let info = &ctx.edges[f as usize];
            if field.mark(&info.key, Channel::U) <= info.j {
                open_edges.push(f);
                let other = if info.a == v { info.b } else { info.a };
                if !visited[other as usize] {
                    visited[other as usize] = true;
                    queue.push(other);
                }
            }
        }
    }
    open_edges.sort_unstable();
    Cluster {
        vertices: (0..ctx.vertices.len() as u32)
            .filter(|v| visited[*v as usize])
            .map(|v| ctx.vertices[v as usize].clone())
            .collect(),
        edges: open_edges
            .into_iter()
            .map(|f| ctx.edges[f as usize].key.clone())
            .collect(),
    }
}

/// Replica sampler for boundary-reach and cluster-size estimates. The
/// geometry is built once from a base kernel; `revalued` swaps in new edge
/// probabilities for another kernel supported inside the base support.
pub struct ReachSampler {
    pub ctx: Arc<ExplorationContext>,
    j: Vec<f64>,
    tail: Vec<f64>,
}

impl ReachSampler {
    pub fn new(kernel: &Kernel, n: u32) -> Result<Self> {
        let ctx = geometry(kernel, n)?;
        let j = ctx.edges.iter().map(|e| e.j).collect();
        let tail = ctx.tail_prob.clone();
        Ok(ReachSampler { ctx, j, tail })
    }

    /// Same geometry, new kernel values. The new kernel must be supported
    /// inside the base kernel's support.
    pub fn revalued(&self, kernel: &Kernel) -> Result<Self> {
        let j = self
            .ctx
            .edges
            .iter()
            .map(|e| kernel.value(&e.key.displacement()))
            .collect::<Result<Vec<f64>>>()?;
        let tail = self
            .ctx
            .vertices
            .iter()
            .map(|v| crate::lattice::tail_open_probability(kernel, &self.ctx.region, v))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ReachSampler {
            ctx: Arc::clone(&self.ctx),
            j,
            tail,
        })
    }

    /// Does the origin cluster reach a vertex with an open edge out of the
    /// region? Early-exits on the first hit.
    pub fn reaches(&self, field: &MarkField) -> bool {
        let ctx = &self.ctx;
        let mut visited = vec![false; ctx.vertices.len()];
        let mut queue = vec![ctx.origin];
        visited[ctx.origin as usize] = true;
        while let Some(v) = queue.pop() {
            let tp = self.tail[v as usize];
            if tp > 0.0 && field.vertex_mark(&ctx.vertices[v as usize]) <= tp {
                return true;
            }
            for &f in ctx.explorable_edges(v) {
                let info = &ctx.edges[f as usize];
                let other = if info.a == v { info.b } else { info.a };
                if visited[other as usize] {
                    continue;
                }
                let p = self.j[f as usize];
                if p > 0.0 && field.mark(&info.key, Channel::U) <= p {
                    visited[other as usize] = true;
                    queue.push(other);
                }
            }
        }
        false
    }

    /// Number of vertices in the origin cluster within the region.
    pub fn cluster_size(&self, field: &MarkField) -> usize {
        let ctx = &self.ctx;
        let mut visited = vec![false; ctx.vertices.len()];
        let mut queue = vec![ctx.origin];
        visited[ctx.origin as usize] = true;
        let mut count = 1usize;
        while let Some(v) = queue.pop() {
            for &f in ctx.explorable_edges(v) {
                let info = &ctx.edges[f as usize];
                let other = if info.a == v { info.b } else { info.a };
                if visited[other as usize] {
                    continue;
                }
                let p = self.j[f as usize];
                if p > 0.0 && field.mark(&info.key, Channel::U) <= p {
                    visited[other as usize] = true;
                    count += 1;
                    queue.push(other);
                }
            }
        }
        count
    }
}

/// Functionals the exact enumerator supports.
#[derive(Clone, Debug)]
pub enum Functional {
    /// |origin cluster in the configuration graph within the region|.
    ClusterSize,
    /// Indicator that the origin connects to `target` within the region.
    Connection { target: Vertex },
    /// |refined perturbed cluster| under the coupling parameters.
    CPrimeSize { mode: CPrimeMode },
    /// |vertex set of the halo of the retained cluster| under p * J.
    HaloVertexCount,
    /// |untagged exploration cluster|; integrates over edge orders and
    /// boundary indicators as well.
    ClusterHSize,
}

/// Exact distribution of a nonnegative-integer functional.
#[derive(Clone, Debug, Serialize)]
pub struct ExactDistribution {
    pub semantics: String,
    /// (value, probability), sorted by value; probabilities sum to one
    /// within 1e-12.
    pub support: Vec<(u64, f64)>,
}

impl ExactDistribution {
    pub fn total(&self) -> f64 {
        self.support.iter().map(|(_, p)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.support.iter().map(|(v, p)| *v as f64 * p).sum()
    }

    pub fn probability_of(&self, value: u64) -> f64 {
        self.support
            .iter()
            .find(|(v, _)| *v == value)
            .map(|(_, p)| *p)
            .unwrap_or(0.0)
    }

    pub fn cdf_at(&self, value: u64) -> f64 {
        self.support
            .iter()
            .filter(|(v, _)| *v <= value)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn max_value(&self) -> u64 {
        self.support.last().map(|(v, _)| *v).unwrap_or(0)
    }
}

const ATOM_LIMIT: f64 = 1e7;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// DFS over per-dimension atom choices, skipping zero-probability atoms.
fn for_each_assignment(dims: &[Vec<f64>], eval: &mut impl FnMut(&[usize], f64)) {
    fn rec(
        dims: &[Vec<f64>],
        idx: usize,
        prob: f64,
        choice: &mut Vec<usize>,
        eval: &mut impl FnMut(&[usize], f64),
    ) {
        if idx == dims.len() {
            eval(choice, prob);
            return;
        }
        for (opt, p) in dims[idx].iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            choice.push(opt);
            rec(dims, idx + 1, prob * p, choice, eval);
            choice.pop();
        }
    }
    let mut choice = Vec::with_capacity(dims.len());
    rec(dims, 0, 1.0, &mut choice, eval);
}

fn atom_count(dims: &[Vec<f64>]) -> f64 {
    dims.iter()
        .map(|d| d.iter().filter(|p| **p > 0.0).count() as f64)
        .product()
}

fn check_atom_budget(atoms: f64) -> Result<()> {
    if atoms > ATOM_LIMIT {
        return Err(Error::Size {
            atoms,
            limit: ATOM_LIMIT,
        });
    }
    Ok(())
}

/// Origin component size over the open-edge indicator, and membership flags.
fn component_of_origin(ctx: &ExplorationContext, open: &[bool]) -> Vec<bool> {
    let mut visited = vec![false; ctx.vertices.len()];
    let mut queue = vec![ctx.origin];
    visited[ctx.origin as usize] = true;
    while let Some(v) = queue.pop() {
        for &f in ctx.explorable_edges(v) {
            if !open[f as usize] {
                continue;
            }
            let info = &ctx.edges[f as usize];
            let other = if info.a == v { info.b } else { info.a };
            if !visited[other as usize] {
                visited[other as usize] = true;
                queue.push(other);
            }
        }
    }
    visited
}

/// Neumaier-compensated accumulator: atom counts near the budget would
/// otherwise push plain-f64 rounding toward the 1e-12 normalization gate.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    compensation: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        self.compensation += if self.sum.abs() >= x.abs() {
            (self.sum - t) + x
        } else {
            (x - t) + self.sum
        };
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.compensation
    }
}

fn accumulate(map: &mut BTreeMap<u64, Compensated>, value: u64, prob: f64) {
    map.entry(value).or_default().add(prob);
}

fn finish(semantics: String, map: BTreeMap<u64, Compensated>) -> Result<ExactDistribution> {
    let dist = ExactDistribution {
        semantics,
        support: map.into_iter().map(|(v, c)| (v, c.value())).collect(),
    };
    let total = dist.total();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!(
            "enumerated probabilities sum to {total}, not 1"
        )));
    }
    Ok(dist)
}

/// Exact distribution of the requested functional by full enumeration.
/// `jp` is required by the coupling functionals and ignored by the plain
/// ones.
pub fn enumerate_exact(
    j: &Kernel,
    jp: Option<&Kernel>,
    n: u32,
    functional: &Functional,
) -> Result<ExactDistribution> {
    match functional {
        Functional::ClusterSize => {
            let ctx = geometry(j, n)?;
            let dims: Vec<Vec<f64>> = ctx.edges.iter().map(|e| vec![1.0 - e.j, e.j]).collect();
            check_atom_budget(atom_count(&dims))?;
            let mut map = BTreeMap::new();
            let mut open = vec![false; ctx.edges.len()];
            for_each_assignment(&dims, &mut |choice, prob| {
                for (f, c) in choice.iter().enumerate() {
                    open[f] = *c == 1;
                }
                let comp = component_of_origin(&ctx, &open);
                let size = comp.iter().filter(|b| **b).count() as u64;
                accumulate(&mut map, size, prob);
            });
            finish("cluster-size".into(), map)
        }
        Functional::Connection { target } => {
            let ctx = geometry(j, n)?;
            let target_id = ctx
                .vertex_id(target)
                .ok_or_else(|| Error::Validation(format!("{target} outside the region")))?;
            let dims: Vec<Vec<f64>> = ctx.edges.iter().map(|e| vec![1.0 - e.j, e.j]).collect();
            check_atom_budget(atom_count(&dims))?;
            let mut map = BTreeMap::new();
            let mut open = vec![false; ctx.edges.len()];
            for_each_assignment(&dims, &mut |choice, prob| {
                for (f, c) in choice.iter().enumerate() {
                    open[f] = *c == 1;
                }
                let comp = component_of_origin(&ctx, &open);
                accumulate(&mut map, comp[target_id as usize] as u64, prob);
            });
            finish(format!("connection-to-{target}"), map)
        }
        Functional::CPrimeSize { mode } => {
            let jp = jp.ok_or_else(|| {
                Error::Validation("the refined-cluster functional needs the perturbed kernel".into())
            })?;
            let delta = delta_of(j, jp)?;
            let params = compute_q(j, jp, &delta)?;
            enumerate_cprime(j, jp, n, &params, *mode)
        }
        Functional::HaloVertexCount => {
            let jp = jp.ok_or_else(|| {
                Error::Validation("the halo functional needs the perturbed kernel".into())
            })?;
            let delta = delta_of(j, jp)?;
            let params = compute_q(j, jp, &delta)?;
            enumerate_halo(j, n, params.p)
        }
        Functional::ClusterHSize => {
            let jp = jp.ok_or_else(|| {
                Error::Validation("the exploration functional needs the perturbed kernel".into())
            })?;
            let delta = delta_of(j, jp)?;
            let params = compute_q(j, jp, &delta)?;
            enumerate_cluster_h(j, n, &params)
        }
    }
}

/// The refined cluster is an independent percolation with per-edge
/// probability given by the rule marginal.
pub fn enumerate_cprime(
    j: &Kernel,
    jp: &Kernel,
    n: u32,
    params: &CouplingParams,
    mode: CPrimeMode,
) -> Result<ExactDistribution> {
    let ctx = ExplorationContext::build(j, &params.delta, params.q, n)?;
    let mut dims = Vec::with_capacity(ctx.edges.len());
    for e in &ctx.edges {
        let jp_e = jp.value(&e.key.displacement())?;
        let open = cprime_open_probability(e.j, jp_e, e.in_delta, params.q, mode);
        dims.push(vec![1.0 - open, open]);
    }
    check_atom_budget(atom_count(&dims))?;
    let mut map = BTreeMap::new();
    let mut open = vec![false; ctx.edges.len()];
    for_each_assignment(&dims, &mut |choice, prob| {
        for (f, c) in choice.iter().enumerate() {
            open[f] = *c == 1;
        }
        let comp = component_of_origin(&ctx, &open);
        let size = comp.iter().filter(|b| **b).count() as u64;
        accumulate(&mut map, size, prob);
    });
    finish("cprime-size".into(), map)
}

/// Halo vertex count of the retained cluster under p * J, canonically
/// coupled to J. Atoms per edge: closed, open-in-J-only, retained.
pub fn enumerate_halo(j: &Kernel, n: u32, p: f64) -> Result<ExactDistribution> {
    let ctx = geometry(j, n)?;
    let dims: Vec<Vec<f64>> = ctx
        .edges
        .iter()
        .map(|e| vec![1.0 - e.j, e.j - p * e.j, p * e.j])
        .collect();
    check_atom_budget(atom_count(&dims))?;
    let mut map = BTreeMap::new();
    let mut retained = vec![false; ctx.edges.len()];
    let mut open_j = vec![false; ctx.edges.len()];
    for_each_assignment(&dims, &mut |choice, prob| {
        for (f, c) in choice.iter().enumerate() {
            retained[f] = *c == 2;
            open_j[f] = *c >= 1;
        }
        let comp = component_of_origin(&ctx, &retained);
        let mut halo = comp.clone();
        for (f, info) in ctx.edges.iter().enumerate() {
            if !open_j[f] {
                continue;
            }
            match ctx.kernel.orientation() {
                Orientation::Undirected => {
                    if comp[info.a as usize] || comp[info.b as usize] {
                        halo[info.a as usize] = true;
                        halo[info.b as usize] = true;
                    }
                }
                Orientation::Directed => {
                    if comp[info.a as usize] {
                        halo[info.b as usize] = true;
                    }
                }
            }
        }
        let size = halo.iter().filter(|b| **b).count() as u64;
        accumulate(&mut map, size, prob);
    });
    finish("halo-vertex-count".into(), map)
}

/// Atom-backed mark source for the exploration enumeration.
struct AtomMarks {
    u: Vec<f64>,
    w: Vec<f64>,
    va: Vec<f64>,
    vb: Vec<f64>,
}

impl MarkSource for AtomMarks {
    fn u(&self, id: EdgeId, _key: &EdgeKey) -> f64 {
        self.u[id as usize]
    }
    fn w(&self, id: EdgeId, _key: &EdgeKey) -> f64 {
        self.w[id as usize]
    }
    fn v(&self, id: EdgeId, key: &EdgeKey, endpoint: &Vertex) -> f64 {
        if key.a() == endpoint {
            self.va[id as usize]
        } else {
            self.vb[id as usize]
        }
    }
    fn v_virtual(&self, _from: &Vertex, _to: &Vertex, _o: Orientation) -> f64 {
        unreachable!("enumeration difference sets lie inside the kernel support")
    }
}

fn permutations(m: usize, visit: &mut impl FnMut(&[EdgeId])) {
    let mut items: Vec<EdgeId> = (0..m as EdgeId).collect();
    fn heap_rec(k: usize, items: &mut Vec<EdgeId>, visit: &mut impl FnMut(&[EdgeId])) {
        if k <= 1 {
            visit(items);
            return;
        }
        for i in 0..k {
            heap_rec(k - 1, items, visit);
            if k.is_multiple_of(2) {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    if m == 0 {
        visit(&[]);
    } else {
        heap_rec(m, &mut items, visit);
    }
}

/// Exact law of the untagged exploration cluster size: integrates edge
/// atoms, boundary indicators, and the uniform edge order.
pub fn enumerate_cluster_h(j: &Kernel, n: u32, params: &CouplingParams) -> Result<ExactDistribution> {
    let ctx = ExplorationContext::build(j, &params.delta, params.q, n)?;
    let q = params.q;
    let m = ctx.edges.len();

    // Per-edge joint atoms: U always; W and both V channels only on
    // difference-set edges (nothing else ever reveals them).
    struct EdgeAtom {
        prob: f64,
        u: f64,
        w: f64,
        va: f64,
        vb: f64,
    }
    let mut edge_atoms: Vec<Vec<EdgeAtom>> = Vec::with_capacity(m);
    for info in &ctx.edges {
        let jv = info.j;
        let u_bins = [(1.0 - jv, (1.0 + jv) / 2.0), (jv, jv / 2.0)];
        let aux_bins = [(q, 1.0 - q / 2.0), (1.0 - q, (1.0 - q) / 2.0)];
        let mut atoms = Vec::new();
        if info.in_delta {
            for (pu, u) in u_bins {
                for (pw, w) in aux_bins {
                    for (pa, va) in aux_bins {
                        for (pb, vb) in aux_bins {
                            let prob = pu * pw * pa * pb;
                            if prob > 0.0 {
                                atoms.push(EdgeAtom { prob, u, w, va, vb });
                            }
                        }
                    }
                }
            }
        } else {
            for (pu, u) in u_bins {
                if pu > 0.0 {
                    atoms.push(EdgeAtom {
                        prob: pu,
                        u,
                        w: 0.5,
                        va: 0.5,
                        vb: 0.5,
                    });
                }
            }
        }
        edge_atoms.push(atoms);
    }

    let t_dims: Vec<Vec<f64>> = ctx
        .tail_prob
        .iter()
        .map(|p| vec![1.0 - p, *p])
        .collect();

    let edge_dims: Vec<Vec<f64>> = edge_atoms
        .iter()
        .map(|atoms| atoms.iter().map(|a| a.prob).collect())
        .collect();
    let atoms = atom_count(&edge_dims) * atom_count(&t_dims) * factorial(m);
    check_atom_budget(atoms)?;

    let opts = RunOptions::default();
    let mut map = BTreeMap::new();
    let perm_weight = 1.0 / factorial(m);
    permutations(m, &mut |perm| {
        let mut rank = vec![0u64; m];
        for (pos, &e) in perm.iter().enumerate() {
            rank[e as usize] = pos as u64;
        }
        for_each_assignment(&t_dims, &mut |t_choice, t_prob| {
            let t_set: Vec<bool> = t_choice.iter().map(|c| *c == 1).collect();
            for_each_assignment(&edge_dims, &mut |e_choice, e_prob| {
                let marks = AtomMarks {
                    u: e_choice
                        .iter()
                        .enumerate()
                        .map(|(f, c)| edge_atoms[f][*c].u)
                        .collect(),
                    w: e_choice
                        .iter()
                        .enumerate()
                        .map(|(f, c)| edge_atoms[f][*c].w)
                        .collect(),
                    va: e_choice
                        .iter()
                        .enumerate()
                        .map(|(f, c)| edge_atoms[f][*c].va)
                        .collect(),
                    vb: e_choice
                        .iter()
                        .enumerate()
                        .map(|(f, c)| edge_atoms[f][*c].vb)
                        .collect(),
                };
                let outcome =
                    run_with_inputs(&ctx, rank.clone(), t_set.clone(), &marks, opts)
                        .expect("enumeration run");
                let size = outcome.untagged_cluster_ids().len() as u64;
                accumulate(&mut map, size, perm_weight * t_prob * e_prob);
            });
        });
    });
    finish("cluster-h-size".into(), map)
}

#[derive(Clone, Debug, Serialize)]
pub enum DominationOutcome {
    Dominated,
    /// First crossing point where the refined-cluster CDF fell below the
    /// halo CDF.
    Counterexample { at: u64, cdf_cprime: f64, cdf_halo: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct DominationCheck {
    pub outcome: DominationOutcome,
    pub p: f64,
    pub q: f64,
    pub cprime: ExactDistribution,
    pub halo: ExactDistribution,
}

/// First-order stochastic dominance of the halo size over the refined
/// cluster size, by exact enumeration.
pub fn exact_domination_check(j: &Kernel, jp: &Kernel, n: u32) -> Result<DominationCheck> {
    let delta = delta_of(j, jp)?;
    let params = compute_q(j, jp, &delta)?;
    exact_domination_check_with(j, jp, n, &params)
}

/// Same check with explicit coupling parameters; lets tests corrupt p and
/// confirm the checker can see a violation on a fabricated input.
pub fn exact_domination_check_with(
    j: &Kernel,
    jp: &Kernel,
    n: u32,
    params: &CouplingParams,
) -> Result<DominationCheck> {
    let cprime = enumerate_cprime(j, jp, n, params, CPrimeMode::PointwiseDominated)?;
    let halo = enumerate_halo(j, n, params.p)?;
    let max = cprime.max_value().max(halo.max_value());
    let mut outcome = DominationOutcome::Dominated;
    for k in 0..=max {
        let fc = cprime.cdf_at(k);
        let fh = halo.cdf_at(k);
        if fc < fh - 1e-12 {
            outcome = DominationOutcome::Counterexample {
                at: k,
                cdf_cprime: fc,
                cdf_halo: fh,
            };
            break;
        }
    }
    Ok(DominationCheck {
        outcome,
        p: params.p,
        q: params.q,
        cprime,
        halo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Displacement;

    fn disp(coords: &[i32]) -> Displacement {
        Displacement::new(coords.to_vec())
    }

    fn half_line() -> Kernel {
        Kernel::table(1, vec![(disp(&[1]), 0.5)]).unwrap()
    }

    #[test]
    fn bfs_cluster_trivial_cases() {
        let k = half_line();
        // All incident marks closed somewhere in the seed space.
        let mut found_isolated = false;
        for seed in 0..200 {
            let c = bfs_cluster(&k, 1, &MarkField::new(seed)).unwrap();
            if c.vertices.len() == 1 {
                assert!(c.edges.is_empty());
                found_isolated = true;
                break;
            }
        }
        assert!(found_isolated);

        let full = Kernel::table(2, vec![(disp(&[1, 0]), 1.0), (disp(&[0, 1]), 1.0)]).unwrap();
        let c = bfs_cluster(&full, 3, &MarkField::new(9)).unwrap();
        assert_eq!(c.vertices.len(), 25);
    }

    #[test]
    fn cluster_size_distribution_z1() {
        // Two independent fair edges: size = 1 + Bernoulli + Bernoulli.
        let dist = enumerate_exact(&half_line(), None, 1, &Functional::ClusterSize).unwrap();
        assert!((dist.probability_of(1) - 0.25).abs() < 1e-12);
        assert!((dist.probability_of(2) - 0.5).abs() < 1e-12);
        assert!((dist.probability_of(3) - 0.25).abs() < 1e-12);
        assert!((dist.mean() - 2.0).abs() < 1e-12);
        assert!((dist.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn connection_probability_on_a_path() {
        let dist = enumerate_exact(
            &half_line(),
            None,
            1,
            &Functional::Connection {
                target: Vertex::new(vec![1]),
            },
        )
        .unwrap();
        assert!((dist.probability_of(1) - 0.5).abs() < 1e-12);
        // Both ends of the 2-edge path: product of edge probabilities.
        let both = enumerate_exact(&half_line(), None, 1, &Functional::ClusterSize).unwrap();
        assert!((both.probability_of(3) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cprime_distribution_matches_closed_form() {
        let j = half_line();
        let jp = j.with_override(disp(&[1]), 1.0 / 16.0).unwrap();
        let dist = enumerate_exact(
            &j,
            Some(&jp),
            1,
            &Functional::CPrimeSize {
                mode: CPrimeMode::PointwiseDominated,
            },
        )
        .unwrap();
        // Both edges lie in the difference set, so the refined rule opens
        // each with probability exactly 1/16.
        assert!((dist.probability_of(1) - 0.87890625).abs() < 1e-12);
        assert!((dist.probability_of(2) - 0.1171875).abs() < 1e-12);
        assert!((dist.probability_of(3) - 0.00390625).abs() < 1e-12);
    }

    #[test]
    fn halo_distribution_matches_closed_form() {
        let j = half_line();
        let jp = j.with_override(disp(&[1]), 1.0 / 16.0).unwrap();
        let dist = enumerate_exact(&j, Some(&jp), 1, &Functional::HaloVertexCount).unwrap();
        // On the radius-1 line the halo contains each side exactly when its
        // edge is open in the base graph.
        assert!((dist.probability_of(1) - 0.25).abs() < 1e-12);
        assert!((dist.probability_of(2) - 0.5).abs() < 1e-12);
        assert!((dist.probability_of(3) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn exact_domination_on_the_tiny_instance() {
        let j = half_line();
        let jp = j.with_override(disp(&[1]), 1.0 / 16.0).unwrap();
        let check = exact_domination_check(&j, &jp, 1).unwrap();
        assert!((check.p - 0.75).abs() < 1e-12);
        assert!(matches!(check.outcome, DominationOutcome::Dominated));
    }

    #[test]
    fn corrupted_p_is_detectable() {
        // A fabricated non-theorem input: proper refined cluster against a
        // nearly empty retained cluster.
        let j = Kernel::table(1, vec![(disp(&[1]), 0.9)]).unwrap();
        let jp = j.with_override(disp(&[1]), 0.8).unwrap();
        let delta = crate::lattice::delta_of(&j, &jp).unwrap();
        let mut params = compute_q(&j, &jp, &delta).unwrap();
        params.p = 0.01;
        let check = exact_domination_check_with(&j, &jp, 2, &params).unwrap();
        assert!(
            matches!(check.outcome, DominationOutcome::Counterexample { .. }),
            "corrupted p not detected"
        );
    }

    #[test]
    fn cluster_h_distribution_is_normalized_and_bounded() {
        let j = half_line();
        let jp = j.with_override(disp(&[1]), 1.0 / 16.0).unwrap();
        let dist = enumerate_exact(&j, Some(&jp), 1, &Functional::ClusterHSize).unwrap();
        assert!((dist.total() - 1.0).abs() < 1e-12);
        assert!(dist.max_value() <= 3);
        // The untagged cluster sits inside the configuration cluster, so its
        // mean cannot exceed the plain cluster mean.
        let plain = enumerate_exact(&j, None, 1, &Functional::ClusterSize).unwrap();
        assert!(dist.mean() <= plain.mean() + 1e-12);
    }

    #[test]
    fn size_guard_rejects_large_instances() {
        let k = Kernel::table(2, vec![(disp(&[1, 0]), 0.5), (disp(&[0, 1]), 0.5)]).unwrap();
        assert!(matches!(
            enumerate_exact(&k, None, 4, &Functional::ClusterSize),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn monte_carlo_frequencies_match_enumeration() {
        // The sampler and the enumerator agree within 4 binomial standard
        // errors.
        let j = half_line();
        let dist = enumerate_exact(&j, None, 1, &Functional::ClusterSize).unwrap();
        let sampler = ReachSampler::new(&j, 1).unwrap();
        let trials = 20_000u64;
        let mut counts = BTreeMap::new();
        for seed in 0..trials {
            let s = sampler.cluster_size(&MarkField::new(seed)) as u64;
            *counts.entry(s).or_insert(0u64) += 1;
        }
        for (value, p) in &dist.support {
            let freq = *counts.get(value).unwrap_or(&0) as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!(
                (freq - p).abs() < 4.0 * se,
                "value {value}: freq {freq} vs exact {p}"
            );
        }
    }
}
