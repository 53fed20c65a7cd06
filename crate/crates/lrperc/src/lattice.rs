//! Z^d geometry and connectivity kernels.
//!
//! Vertices live on the integer lattice with the nearest-neighbour (l1)
//! metric. A kernel assigns each nonzero displacement an independent open
//! probability; kernels are translation invariant, summable, and either
//! undirected (negation symmetric) or directed. The difference set of two
//! ordered kernels collects the displacements where they disagree.

use crate::error::{Error, Result};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use smallvec::SmallVec;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Coord = i32;

type CoordVec = SmallVec<[Coord; 4]>;

/// Point of Z^d (or of Z^{d-1} x Z in oriented mode, time last).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Vertex(CoordVec);

/// Difference of two vertices; nonzero wherever it keys a kernel value.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Displacement(CoordVec);

impl Vertex {
    pub fn new(coords: impl Into<Vec<Coord>>) -> Self {
        Vertex(SmallVec::from_vec(coords.into()))
    }

    pub fn origin(d: usize) -> Self {
        Vertex(smallvec::smallvec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.0
    }

    pub fn l1_norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn offset(&self, z: &Displacement) -> Vertex {
        debug_assert_eq!(self.dim(), z.dim());
        Vertex(self.0.iter().zip(z.0.iter()).map(|(a, b)| a + b).collect())
    }

    /// Displacement `other - self`.
    pub fn to(&self, other: &Vertex) -> Displacement {
        debug_assert_eq!(self.dim(), other.dim());
        Displacement(
            other
                .0
                .iter()
                .zip(self.0.iter())
                .map(|(b, a)| b - a)
                .collect(),
        )
    }
}

impl Displacement {
    pub fn new(coords: impl Into<Vec<Coord>>) -> Self {
        Displacement(SmallVec::from_vec(coords.into()))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Coord] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0)
    }

    pub fn l1_norm(&self) -> u32 {
        self.0.iter().map(|c| c.unsigned_abs()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.0
            .iter()
            .map(|c| {
                let x = *c as f64;
                x * x
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn negated(&self) -> Displacement {
        Displacement(self.0.iter().map(|c| -c).collect())
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Displacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.orientation {
            Orientation::Undirected => write!(f, "{}-{}", self.a, self.b),
            Orientation::Directed => write!(f, "{}->{}", self.a, self.b),
        }
    }
}

impl Serialize for Vertex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for c in &self.0 {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

impl Serialize for Displacement {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for c in &self.0 {
            seq.serialize_element(c)?;
        }
        seq.end()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Undirected,
    Directed,
}

/// Potential edge. Undirected keys are canonical (smaller endpoint first),
/// so `{x,y}` and `{y,x}` construct the identical key; directed keys keep
/// the (tail, head) order.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize)]
pub struct EdgeKey {
    orientation: Orientation,
    a: Vertex,
    b: Vertex,
}

impl EdgeKey {
    pub fn undirected(x: Vertex, y: Vertex) -> Result<Self> {
        if x == y {
            return Err(Error::Validation("edge endpoints must be distinct".into()));
        }
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        Ok(EdgeKey {
            orientation: Orientation::Undirected,
            a,
            b,
        })
    }

    pub fn directed(tail: Vertex, head: Vertex) -> Result<Self> {
        if tail == head {
            return Err(Error::Validation("edge endpoints must be distinct".into()));
        }
        if tail.dim() != head.dim() {
            return Err(Error::DimensionMismatch {
                expected: tail.dim(),
                got: head.dim(),
            });
        }
        Ok(EdgeKey {
            orientation: Orientation::Directed,
            a: tail,
            b: head,
        })
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Canonical first endpoint (tail in directed mode).
    pub fn a(&self) -> &Vertex {
        &self.a
    }

    /// Canonical second endpoint (head in directed mode).
    pub fn b(&self) -> &Vertex {
        &self.b
    }

    /// Displacement b - a (head - tail in directed mode).
    pub fn displacement(&self) -> Displacement {
        self.a.to(&self.b)
    }

    pub fn has_endpoint(&self, v: &Vertex) -> bool {
        self.a == *v || self.b == *v
    }

    pub fn other_endpoint(&self, v: &Vertex) -> Option<&Vertex> {
        if self.a == *v {
            Some(&self.b)
        } else if self.b == *v {
            Some(&self.a)
        } else {
            None
        }
    }
}

/// Finite volume the algorithms work in: the l1 ball of radius n for
/// undirected and plainly directed kernels, the space-time box
/// {|space|_1 <= n, 0 <= time <= n} for oriented kernels.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Region {
    Ball { d: usize, n: u32 },
    SpaceTimeBox { space_d: usize, n: u32 },
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Ball { d, .. } => *d,
            Region::SpaceTimeBox { space_d, .. } => space_d + 1,
        }
    }

    pub fn radius(&self) -> u32 {
        match self {
            Region::Ball { n, .. } | Region::SpaceTimeBox { n, .. } => *n,
        }
    }

    pub fn contains(&self, v: &Vertex) -> bool {
        match self {
            Region::Ball { d, n } => v.dim() == *d && v.l1_norm() <= *n,
            Region::SpaceTimeBox { space_d, n } => {
                if v.dim() != space_d + 1 {
                    return false;
                }
                let time = v.coords()[*space_d];
                let space: u32 = v.coords()[..*space_d]
                    .iter()
                    .map(|c| c.unsigned_abs())
                    .sum();
                time >= 0 && time as u32 <= *n && space <= *n
            }
        }
    }

    /// Upper bound on the l1 length of any displacement internal to the region.
    pub fn max_span(&self) -> u32 {
        match self {
            Region::Ball { n, .. } => 2 * n,
            Region::SpaceTimeBox { n, .. } => 3 * n,
        }
    }

    /// All vertices of the region in lexicographic coordinate order.
    pub fn vertices(&self) -> Vec<Vertex> {
        let mut out = Vec::new();
        match self {
            Region::Ball { d, n } => {
                let mut coords = vec![0 as Coord; *d];
                enumerate_ball(&mut out, &mut coords, 0, *n as i64);
            }
            Region::SpaceTimeBox { space_d, n } => {
                let mut coords = vec![0 as Coord; space_d + 1];
                enumerate_box(&mut out, &mut coords, 0, *space_d, *n);
            }
        }
        out
    }
}

fn enumerate_ball(out: &mut Vec<Vertex>, coords: &mut [Coord], idx: usize, budget: i64) {
    if idx == coords.len() {
        out.push(Vertex::new(coords.to_vec()));
        return;
    }
    for c in -budget..=budget {
        coords[idx] = c as Coord;
        enumerate_ball(out, coords, idx + 1, budget - c.abs());
    }
}

fn enumerate_box(out: &mut Vec<Vertex>, coords: &mut [Coord], idx: usize, space_d: usize, n: u32) {
    if idx == space_d {
        for t in 0..=n as i64 {
            coords[space_d] = t as Coord;
            out.push(Vertex::new(coords.to_vec()));
        }
        return;
    }
    let budget: i64 = n as i64
        - coords[..idx]
            .iter()
            .map(|c| c.unsigned_abs() as i64)
            .sum::<i64>();
    for c in -budget..=budget {
        coords[idx] = c as Coord;
        enumerate_box(out, coords, idx + 1, space_d, n);
    }
}

/// The l1 ball of radius n around the origin, in lexicographic order.
pub fn ball(d: usize, n: u32) -> Vec<Vertex> {
    Region::Ball { d, n }.vertices()
}

/// Enumerate all nonzero displacements with l1 norm at most `max_l1`,
/// lexicographically.
fn window_displacements(d: usize, max_l1: u32) -> Vec<Displacement> {
    let mut out = Vec::new();
    fold_window_displacements(d, max_l1, &mut |z| out.push(z.clone()));
    out
}

/// Streaming variant: visits every nonzero displacement with l1 norm at
/// most `max_l1` without materializing the window.
fn fold_window_displacements(d: usize, max_l1: u32, f: &mut impl FnMut(&Displacement)) {
    fn rec(coords: &mut CoordVec, idx: usize, budget: i64, f: &mut impl FnMut(&Displacement)) {
        if idx + 1 == coords.len() {
            for c in -budget..=budget {
                coords[idx] = c as Coord;
                let z = Displacement(coords.clone());
                if !z.is_zero() {
                    f(&z);
                }
            }
            return;
        }
        for c in -budget..=budget {
            coords[idx] = c as Coord;
            rec(coords, idx + 1, budget - c.abs(), f);
        }
    }
    let mut coords: CoordVec = smallvec::smallvec![0; d];
    rec(&mut coords, 0, max_l1 as i64, f);
}

#[derive(Clone, Debug)]
enum KernelFamily {
    /// Finite map displacement -> probability.
    Table(BTreeMap<Displacement, f64>),
    /// J(z) = 1 - exp(-beta * |z|^-alpha) with |z| the Euclidean norm.
    PolynomialPhi { beta: f64, alpha: f64 },
    /// Pointwise factor * inner(z), factor in [0,1].
    ProductScaled { inner: Box<Kernel>, factor: f64 },
}

/// Translation-invariant connectivity function on Z^d.
#[derive(Clone, Debug)]
pub struct Kernel {
    d: usize,
    orientation: Orientation,
    /// Directed kernels supported only on displacements with time coordinate +1.
    oriented: bool,
    family: KernelFamily,
    overrides: BTreeMap<Displacement, f64>,
}

impl Serialize for Kernel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Kernel", 5)?;
        st.serialize_field("d", &self.d)?;
        let orientation = if self.oriented {
            "oriented"
        } else {
            match self.orientation {
                Orientation::Undirected => "undirected",
                Orientation::Directed => "directed",
            }
        };
        st.serialize_field("orientation", orientation)?;
        match &self.family {
            KernelFamily::Table(values) => {
                st.serialize_field("family", "table")?;
                let entries: Vec<(&Displacement, f64)> =
                    values.iter().map(|(z, v)| (z, *v)).collect();
                st.serialize_field("entries", &entries)?;
            }
            KernelFamily::PolynomialPhi { beta, alpha } => {
                st.serialize_field("family", "polynomial-phi")?;
                st.serialize_field("params", &serde_json::json!({ "beta": beta, "alpha": alpha }))?;
            }
            KernelFamily::ProductScaled { inner, factor } => {
                st.serialize_field("family", "product-scaled")?;
                st.serialize_field(
                    "params",
                    &serde_json::json!({ "factor": factor, "inner": inner }),
                )?;
            }
        }
        let overrides: Vec<(&Displacement, f64)> =
            self.overrides.iter().map(|(z, v)| (z, *v)).collect();
        st.serialize_field("overrides", &overrides)?;
        st.end()
    }
}

fn check_probability(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || v.is_nan() {
        return Err(Error::Validation(format!("probability out of range: {v}")));
    }
    Ok(())
}

impl Kernel {
    fn check_displacement(&self, z: &Displacement) -> Result<()> {
        if z.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: z.dim(),
            });
        }
        if z.is_zero() {
            return Err(Error::ZeroDisplacement);
        }
        Ok(())
    }

    /// Undirected table kernel. Entries are mirrored to their negations;
    /// conflicting values for z and -z are rejected.
    pub fn table(d: usize, entries: impl IntoIterator<Item = (Displacement, f64)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (z, v) in entries {
            if z.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: z.dim(),
                });
            }
            if z.is_zero() {
                return Err(Error::ZeroDisplacement);
            }
            check_probability(v)?;
            let neg = z.negated();
            for key in [z, neg] {
                if let Some(prev) = values.insert(key.clone(), v) {
                    if prev != v {
                        return Err(Error::Validation(format!(
                            "conflicting symmetric values at {key}: {prev} vs {v}"
                        )));
                    }
                }
            }
        }
        Ok(Kernel {
            d,
            orientation: Orientation::Undirected,
            oriented: false,
            family: KernelFamily::Table(values),
            overrides: BTreeMap::new(),
        })
    }

    /// Directed table kernel; no symmetry requirement.
    pub fn directed_table(
        d: usize,
        entries: impl IntoIterator<Item = (Displacement, f64)>,
    ) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (z, v) in entries {
            if z.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: z.dim(),
                });
            }
            if z.is_zero() {
                return Err(Error::ZeroDisplacement);
            }
            check_probability(v)?;
            values.insert(z, v);
        }
        Ok(Kernel {
            d,
            orientation: Orientation::Directed,
            oriented: false,
            family: KernelFamily::Table(values),
            overrides: BTreeMap::new(),
        })
    }

    /// Oriented (space-time) table kernel on Z^{space_d} x Z, time last.
    /// Support is restricted to displacements with time coordinate +1.
    pub fn oriented_table(
        space_d: usize,
        entries: impl IntoIterator<Item = (Displacement, f64)>,
    ) -> Result<Self> {
        let d = space_d + 1;
        let mut values = BTreeMap::new();
        for (z, v) in entries {
            if z.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: z.dim(),
                });
            }
            if z.coords()[space_d] != 1 {
                return Err(Error::Validation(format!(
                    "oriented kernel support must have time coordinate +1, got {z}"
                )));
            }
            check_probability(v)?;
            values.insert(z, v);
        }
        Ok(Kernel {
            d,
            orientation: Orientation::Directed,
            oriented: true,
            family: KernelFamily::Table(values),
            overrides: BTreeMap::new(),
        })
    }

    /// J(z) = 1 - exp(-beta |z|^-alpha); summable iff alpha > d, enforced here.
    pub fn polynomial_phi(d: usize, beta: f64, alpha: f64) -> Result<Self> {
        if beta < 0.0 || beta.is_nan() {
            return Err(Error::Validation(format!("beta must be >= 0, got {beta}")));
        }
        if alpha.is_nan() || alpha <= d as f64 {
            return Err(Error::Validation(format!(
                "alpha must exceed d={d} for summability, got {alpha}"
            )));
        }
        Ok(Kernel {
            d,
            orientation: Orientation::Undirected,
            oriented: false,
            family: KernelFamily::PolynomialPhi { beta, alpha },
            overrides: BTreeMap::new(),
        })
    }

    /// Pointwise p * J with p in the unit interval.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        check_probability(factor)?;
        Ok(Kernel {
            d: self.d,
            orientation: self.orientation,
            oriented: self.oriented,
            family: KernelFamily::ProductScaled {
                inner: Box::new(self.clone()),
                factor,
            },
            overrides: BTreeMap::new(),
        })
    }

    /// Materialize min(1, s * J) as a table kernel. Requires finite support.
    pub fn scale_capped_table(&self, s: f64) -> Result<Self> {
        if s < 0.0 || s.is_nan() {
            return Err(Error::Validation(format!("scale must be >= 0, got {s}")));
        }
        let radius = self.finite_support_radius().ok_or_else(|| {
            Error::Validation("scale-capped materialization needs finite support".into())
        })?;
        let entries: Vec<(Displacement, f64)> = self
            .support_displacements(radius)?
            .into_iter()
            .map(|z| {
                let v = (s * self.value(&z).expect("support displacement")).min(1.0);
                (z, v)
            })
            .collect();
        match self.orientation {
            Orientation::Undirected => Kernel::table(self.d, entries),
            Orientation::Directed => {
                if self.oriented {
                    Kernel::oriented_table(self.d - 1, entries)
                } else {
                    Kernel::directed_table(self.d, entries)
                }
            }
        }
    }

    /// Replace the value at one displacement (and its negation in
    /// undirected mode).
    pub fn with_override(&self, z: Displacement, value: f64) -> Result<Self> {
        self.check_displacement(&z)?;
        check_probability(value)?;
        if self.oriented && z.coords()[self.d - 1] != 1 && value > 0.0 {
            return Err(Error::Validation(
                "oriented kernel override must keep time coordinate +1".into(),
            ));
        }
        let mut k = self.clone();
        if self.orientation == Orientation::Undirected {
            k.overrides.insert(z.negated(), value);
        }
        k.overrides.insert(z, value);
        Ok(k)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn is_oriented(&self) -> bool {
        self.oriented
    }

    /// Finite volume this kernel's experiments run in.
    pub fn region(&self, n: u32) -> Region {
        if self.oriented {
            Region::SpaceTimeBox {
                space_d: self.d - 1,
                n,
            }
        } else {
            Region::Ball { d: self.d, n }
        }
    }

    /// J at the given displacement. Zero displacement is a domain error;
    /// undirected kernels are negation symmetric by construction.
    pub fn value(&self, z: &Displacement) -> Result<f64> {
        self.check_displacement(&z.clone())?;
        Ok(self.value_inner(z))
    }

    fn value_inner(&self, z: &Displacement) -> f64 {
        if let Some(v) = self.overrides.get(z) {
            return *v;
        }
        match &self.family {
            KernelFamily::Table(values) => values.get(z).copied().unwrap_or(0.0),
            KernelFamily::PolynomialPhi { beta, alpha } => {
                if *beta == 0.0 {
                    0.0
                } else {
                    -(-beta * z.l2_norm().powf(-alpha)).exp_m1()
                }
            }
            KernelFamily::ProductScaled { inner, factor } => factor * inner.value_inner(z),
        }
    }

    /// Radius within which all positive values lie, when the support is finite.
    pub fn finite_support_radius(&self) -> Option<u32> {
        let family_radius = match &self.family {
            KernelFamily::Table(values) => values
                .iter()
                .filter(|(_, v)| **v > 0.0)
                .map(|(z, _)| z.l1_norm())
                .max()
                .or(Some(0)),
            KernelFamily::PolynomialPhi { beta, .. } => {
                if *beta == 0.0 {
                    Some(0)
                } else {
                    None
                }
            }
            KernelFamily::ProductScaled { inner, factor } => {
                if *factor == 0.0 {
                    Some(0)
                } else {
                    inner.finite_support_radius()
                }
            }
        }?;
        let override_radius = self
            .overrides
            .iter()
            .filter(|(_, v)| **v > 0.0)
            .map(|(z, _)| z.l1_norm())
            .max()
            .unwrap_or(0);
        Some(family_radius.max(override_radius))
    }

    /// Candidate displacements that can carry positive mass, when finitely many.
    fn finite_candidates(&self) -> Option<BTreeSet<Displacement>> {
        let mut set: BTreeSet<Displacement> = match &self.family {
            KernelFamily::Table(values) => values.keys().cloned().collect(),
            KernelFamily::PolynomialPhi { beta, .. } => {
                if *beta == 0.0 {
                    BTreeSet::new()
                } else {
                    return None;
                }
            }
            KernelFamily::ProductScaled { inner, factor } => {
                if *factor == 0.0 {
                    BTreeSet::new()
                } else {
                    inner.finite_candidates()?
                }
            }
        };
        set.extend(self.overrides.keys().cloned());
        Some(set)
    }

    /// All displacements with positive value and l1 norm at most `max_l1`,
    /// in lexicographic order.
    pub fn support_displacements(&self, max_l1: u32) -> Result<Vec<Displacement>> {
        let mut out: Vec<Displacement> = match self.finite_candidates() {
            Some(cands) => cands
                .into_iter()
                .filter(|z| z.l1_norm() <= max_l1 && !z.is_zero() && self.value_inner(z) > 0.0)
                .collect(),
            None => window_displacements(self.d, max_l1)
                .into_iter()
                .filter(|z| self.value_inner(z) > 0.0)
                .collect(),
        };
        out.sort();
        Ok(out)
    }

    /// Rigorous upper bound on sum_{|z|_1 > r} J(z).
    pub fn tail_sum_bound(&self, r: u32) -> f64 {
        let family_tail = match &self.family {
            KernelFamily::Table(values) => values
                .iter()
                .filter(|(z, _)| z.l1_norm() > r)
                .map(|(_, v)| *v)
                .sum(),
            KernelFamily::PolynomialPhi { beta, alpha } => {
                if *beta == 0.0 {
                    0.0
                } else {
                    // 1 - e^-x <= x, phi(z) <= beta d^{a/2} |z|_1^-a, shell
                    // counts <= 2d 3^{d-1} m^{d-1}, and an integral tail bound.
                    let d = self.d as f64;
                    let shells = 2.0 * d * 3f64.powf(d - 1.0) * beta * d.powf(alpha / 2.0);
                    let a = *alpha;
                    if r == 0 {
                        shells * (1.0 + 1.0 / (a - d))
                    } else {
                        shells * (r as f64).powf(d - a) / (a - d)
                    }
                }
            }
            KernelFamily::ProductScaled { inner, factor } => factor * inner.tail_sum_bound(r),
        };
        let override_excess: f64 = self
            .overrides
            .iter()
            .filter(|(z, _)| z.l1_norm() > r)
            .map(|(_, v)| *v)
            .sum();
        family_tail + override_excess
    }

    /// sup over z not in `excluded` of J(z); 0 when the support is exhausted.
    pub fn sup_outside(&self, excluded: &BTreeSet<Displacement>) -> f64 {
        match self.finite_candidates() {
            Some(cands) => cands
                .iter()
                .filter(|z| !excluded.contains(*z))
                .map(|z| self.value_inner(z))
                .fold(0.0, f64::max),
            None => {
                // Values decay in |z|_2, so the sup over the complement of a
                // finite set is attained inside a window wide enough that any
                // point beyond it has larger Euclidean norm than some
                // non-excluded point inside.
                let r0 = excluded
                    .iter()
                    .chain(self.overrides.keys())
                    .map(|z| z.l1_norm())
                    .max()
                    .unwrap_or(0);
                let w = (((self.d as f64).sqrt() * (r0 as f64 + 1.0)).ceil() as u32).max(1);
                window_displacements(self.d, w)
                    .iter()
                    .filter(|z| !excluded.contains(*z))
                    .map(|z| self.value_inner(z))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// sup_z J(z), used for membership in the strictly-below-one class.
    pub fn sup_value(&self) -> f64 {
        self.sup_outside(&BTreeSet::new())
    }

    pub fn strictly_below_one(&self) -> bool {
        self.sup_value() < 1.0
    }
}

/// Finite displacement set where two ordered kernels differ; for undirected
/// kernels it is closed under negation.
#[derive(Clone, Debug)]
pub struct DifferenceSet {
    d: usize,
    orientation: Orientation,
    displacements: BTreeSet<Displacement>,
}

impl DifferenceSet {
    /// Explicit difference set; undirected sets are closed under negation.
    pub fn from_displacements(
        d: usize,
        orientation: Orientation,
        displacements: impl IntoIterator<Item = Displacement>,
    ) -> Result<Self> {
        let mut set = BTreeSet::new();
        for z in displacements {
            if z.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: z.dim(),
                });
            }
            if z.is_zero() {
                return Err(Error::ZeroDisplacement);
            }
            if orientation == Orientation::Undirected {
                set.insert(z.negated());
            }
            set.insert(z);
        }
        Ok(DifferenceSet {
            d,
            orientation,
            displacements: set,
        })
    }

    pub fn empty(d: usize, orientation: Orientation) -> Self {
        DifferenceSet {
            d,
            orientation,
            displacements: BTreeSet::new(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn is_empty(&self) -> bool {
        self.displacements.is_empty()
    }

    /// The per-vertex count of difference displacements (the exponent in the
    /// tagging bound).
    pub fn len(&self) -> usize {
        self.displacements.len()
    }

    pub fn displacements(&self) -> impl Iterator<Item = &Displacement> {
        self.displacements.iter()
    }

    pub fn contains(&self, z: &Displacement) -> bool {
        self.displacements.contains(z)
    }

    /// Membership test for a potential edge: its displacement lies in the set.
    pub fn contains_edge(&self, e: &EdgeKey) -> bool {
        self.displacements.contains(&e.displacement())
    }

    pub fn as_set(&self) -> &BTreeSet<Displacement> {
        &self.displacements
    }

    pub fn max_l1_radius(&self) -> u32 {
        self.displacements
            .iter()
            .map(|z| z.l1_norm())
            .max()
            .unwrap_or(0)
    }
}

/// Scan cap used when deciding whether two kernels differ on a finite set.
/// Beyond this radius a kernel whose tail bound has not dropped below 1e-15
/// is treated as having genuinely infinite support.
const DIFFERENCE_SCAN_CAP: u32 = 4096;
const DIFFERENCE_TOLERANCE: f64 = 1e-15;

fn structurally_comparable(a: &Kernel, b: &Kernel) -> bool {
    match (&a.family, &b.family) {
        (KernelFamily::Table(_), KernelFamily::Table(_)) => true,
        (
            KernelFamily::PolynomialPhi { beta: b1, alpha: a1 },
            KernelFamily::PolynomialPhi { beta: b2, alpha: a2 },
        ) => b1 == b2 && a1 == a2,
        (
            KernelFamily::ProductScaled { inner: i1, factor: f1 },
            KernelFamily::ProductScaled { inner: i2, factor: f2 },
        ) => f1 == f2 && structurally_comparable(i1, i2) && i1.overrides == i2.overrides,
        _ => false,
    }
}

/// Displacements where the two kernels can possibly differ, when that set is
/// provably finite.
fn difference_candidates(j: &Kernel, jp: &Kernel) -> Result<BTreeSet<Displacement>> {
    if let (Some(a), Some(b)) = (j.finite_candidates(), jp.finite_candidates()) {
        return Ok(a.union(&b).cloned().collect());
    }
    if structurally_comparable(j, jp) {
        let mut set: BTreeSet<Displacement> = j.overrides.keys().cloned().collect();
        set.extend(jp.overrides.keys().cloned());
        return Ok(set);
    }
    // Last resort: both tails must vanish below tolerance within the scan cap,
    // which effectively certifies finite support for both.
    let mut r = 4;
    while r <= DIFFERENCE_SCAN_CAP {
        if j.tail_sum_bound(r) <= DIFFERENCE_TOLERANCE && jp.tail_sum_bound(r) <= DIFFERENCE_TOLERANCE
        {
            return Ok(window_displacements(j.d, r).into_iter().collect());
        }
        r *= 2;
    }
    Err(Error::InfiniteDifference)
}

/// The finite displacement set where jp differs from j, with jp < j
/// validated pointwise.
pub fn delta_of(j: &Kernel, jp: &Kernel) -> Result<DifferenceSet> {
    if j.d != jp.d {
        return Err(Error::DimensionMismatch {
            expected: j.d,
            got: jp.d,
        });
    }
    if j.orientation != jp.orientation || j.oriented != jp.oriented {
        return Err(Error::Validation(
            "kernels must share orientation mode".into(),
        ));
    }
    let mut set = BTreeSet::new();
    for z in difference_candidates(j, jp)? {
        if z.is_zero() {
            continue;
        }
        let a = j.value_inner(&z);
        let b = jp.value_inner(&z);
        if b > a {
            return Err(Error::OrderViolation(z.to_string()));
        }
        if a != b {
            set.insert(z);
        }
    }
    if set.is_empty() {
        return Err(Error::EmptyDelta);
    }
    Ok(DifferenceSet {
        d: j.d,
        orientation: j.orientation,
        displacements: set,
    })
}

/// All potential edges with both endpoints in the region and positive kernel
/// value, in deterministic (vertex, displacement) lexicographic order.
/// Undirected edges appear once, in canonical form.
pub fn potential_edges(region: &Region, kernel: &Kernel) -> Result<Vec<EdgeKey>> {
    if region.dim() != kernel.d {
        return Err(Error::DimensionMismatch {
            expected: kernel.d,
            got: region.dim(),
        });
    }
    let support = kernel.support_displacements(region.max_span())?;
    let mut out = Vec::new();
    for v in region.vertices() {
        for z in &support {
            let w = v.offset(z);
            if !region.contains(&w) {
                continue;
            }
            match kernel.orientation {
                Orientation::Undirected => {
                    if v < w {
                        out.push(EdgeKey {
                            orientation: Orientation::Undirected,
                            a: v.clone(),
                            b: w,
                        });
                    }
                }
                Orientation::Directed => out.push(EdgeKey {
                    orientation: Orientation::Directed,
                    a: v.clone(),
                    b: w,
                }),
            }
        }
    }
    Ok(out)
}

/// Window-selection budget for infinite-support kernels: windows stop growing
/// once they would exceed this many lattice points.
const WINDOW_POINT_BUDGET: f64 = 2e7;

fn window_points(d: usize, r: u32) -> f64 {
    (2.0 * r as f64 + 1.0).powi(d as i32)
}

/// Probability that `v` has at least one open edge leaving the region:
/// 1 - prod_{w outside} (1 - J(w - v)), accurate to 1e-12.
pub fn tail_open_probability(kernel: &Kernel, region: &Region, v: &Vertex) -> Result<f64> {
    if !region.contains(v) {
        return Err(Error::Validation(format!("{v} is not in the region")));
    }
    if let Some(radius) = kernel.finite_support_radius() {
        // Exact: only finitely many displacements carry mass.
        let mut log_survival = 0.0;
        for z in kernel.support_displacements(radius)? {
            let w = v.offset(&z);
            if region.contains(&w) {
                continue;
            }
            let p = kernel.value_inner(&z);
            if p >= 1.0 {
                return Ok(1.0);
            }
            log_survival += (-p).ln_1p();
        }
        return Ok(-log_survival.exp_m1());
    }
    let sup = kernel.sup_value();
    if sup >= 1.0 {
        // Some override attains 1; if it leaves the region the probability is 1.
        for (z, p) in &kernel.overrides {
            if *p >= 1.0 && !region.contains(&v.offset(z)) {
                return Ok(1.0);
            }
        }
        return Err(Error::ZeroProduct);
    }
    let target = 5e-13 * (1.0 - sup);
    let mut r = region.max_span().max(4);
    while kernel.tail_sum_bound(r) > target {
        if window_points(kernel.d, r * 2) > WINDOW_POINT_BUDGET {
            return Err(Error::WindowBudget {
                tail: kernel.tail_sum_bound(r),
            });
        }
        r *= 2;
    }
    let mut log_survival = 0.0;
    let mut hit_one = false;
    fold_window_displacements(kernel.d, r, &mut |z| {
        if hit_one {
            return;
        }
        let w = v.offset(z);
        if region.contains(&w) {
            return;
        }
        let p = kernel.value_inner(z);
        if p >= 1.0 {
            hit_one = true;
            return;
        }
        log_survival += (-p).ln_1p();
    });
    if hit_one {
        return Ok(1.0);
    }
    let eps = kernel.tail_sum_bound(r) / (1.0 - sup);
    Ok(-(log_survival - 0.5 * eps).exp_m1())
}

/// Lower bound on the survival product together with the window it used.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SurvivalBound {
    pub lower: f64,
    pub window_radius: u32,
    pub tail_bound: f64,
}

/// Strictly positive lower bound on prod_{z outside excluded} (1 - J(z)).
/// Exact log-sum over a finite window plus a geometric-series tail estimate;
/// within a factor e^-1e-9 of the truth whenever the window can be grown so
/// that tail_sum_bound(R) <= 1e-9 (1 - a).
pub fn log_survival_product(kernel: &Kernel, excluded: &DifferenceSet) -> Result<SurvivalBound> {
    let a = kernel.sup_outside(excluded.as_set());
    if a >= 1.0 {
        return Err(Error::ZeroProduct);
    }
    let (r, tail) = match kernel.finite_support_radius() {
        Some(radius) => (radius, 0.0),
        None => {
            let target = 1e-9 * (1.0 - a);
            let mut r = excluded.max_l1_radius().max(4);
            while kernel.tail_sum_bound(r) > target
                && window_points(kernel.d, r * 2) <= WINDOW_POINT_BUDGET
            {
                r *= 2;
            }
            (r, kernel.tail_sum_bound(r))
        }
    };
    let mut log_sum = 0.0;
    let mut hit_one = false;
    match kernel.finite_candidates() {
        Some(cands) => {
            for z in cands {
                if z.l1_norm() > r || excluded.contains(&z) {
                    continue;
                }
                let p = kernel.value_inner(&z);
                if p >= 1.0 {
                    hit_one = true;
                    break;
                }
                log_sum += (-p).ln_1p();
            }
        }
        None => fold_window_displacements(kernel.d, r, &mut |z| {
            if hit_one || excluded.contains(z) {
                return;
            }
            let p = kernel.value_inner(z);
            if p >= 1.0 {
                hit_one = true;
                return;
            }
            log_sum += (-p).ln_1p();
        }),
    }
    if hit_one {
        return Err(Error::ZeroProduct);
    }
    let lower = (log_sum - tail / (1.0 - a)).exp();
    Ok(SurvivalBound {
        lower,
        window_radius: r,
        tail_bound: tail,
    })
}

/// Edge-density families of the form J(z) = 1 - exp(-beta phi(z)), used for
/// locating the critical density by bisection.
#[derive(Clone, Debug)]
pub enum PhiFamily {
    /// Finite phi table (mirrored to negations).
    Table {
        d: usize,
        values: BTreeMap<Displacement, f64>,
    },
    /// phi(z) = |z|^-alpha.
    Polynomial { d: usize, alpha: f64 },
}

impl PhiFamily {
    pub fn table(d: usize, entries: impl IntoIterator<Item = (Displacement, f64)>) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (z, phi) in entries {
            if z.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: z.dim(),
                });
            }
            if z.is_zero() {
                return Err(Error::ZeroDisplacement);
            }
            if phi < 0.0 || phi.is_nan() {
                return Err(Error::Validation(format!("phi must be >= 0, got {phi}")));
            }
            values.insert(z.negated(), phi);
            values.insert(z, phi);
        }
        Ok(PhiFamily::Table { d, values })
    }

    pub fn d(&self) -> usize {
        match self {
            PhiFamily::Table { d, .. } | PhiFamily::Polynomial { d, .. } => *d,
        }
    }

    pub fn kernel_at(&self, beta: f64) -> Result<Kernel> {
        if beta < 0.0 || beta.is_nan() {
            return Err(Error::Validation(format!("beta must be >= 0, got {beta}")));
        }
        match self {
            PhiFamily::Table { d, values } => Kernel::table(
                *d,
                values
                    .iter()
                    .map(|(z, phi)| (z.clone(), -(-beta * phi).exp_m1())),
            ),
            PhiFamily::Polynomial { d, alpha } => Kernel::polynomial_phi(*d, beta, *alpha),
        }
    }
}
