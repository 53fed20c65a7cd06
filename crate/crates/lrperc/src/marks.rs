//! Deterministic, lazily evaluated uniform mark fields.
//!
//! Every potential edge carries independent uniform marks on several
//! channels (the configuration mark U, the auxiliary triplet V/W, a
//! refinement channel X, and a priority used to order edges), and every
//! vertex carries one mark for its boundary indicator. Marks are a pure
//! function of (seed, key, channel): nothing is stored, any query order
//! observes the same configuration, and reruns with the same seed are
//! bit-identical.
//!
//! The generator is Philox-2x64 with 10 rounds, keyed by the seed, with the
//! edge encoding absorbed into the counter block by block. Output words are
//! mapped into (0,1) as (w + 0.5) / 2^53 so the values never collide with
//! the endpoints: comparisons against thresholds 0 and 1 behave exactly.

use crate::lattice::{EdgeKey, Orientation, Vertex};

/// Recorded in every output manifest so results stay reproducible across
/// releases.
pub const GENERATOR_VERSION: &str = "philox2x64-10/1";

const PHILOX_M: u64 = 0xD2B7_4407_B1CE_6E93;
const PHILOX_W: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn philox2x64(mut c0: u64, mut c1: u64, key: u64) -> (u64, u64) {
    let mut k = key;
    for _ in 0..10 {
        let prod = (c0 as u128) * (PHILOX_M as u128);
        let hi = (prod >> 64) as u64;
        let lo = prod as u64;
        c0 = hi ^ k ^ c1;
        c1 = lo;
        k = k.wrapping_add(PHILOX_W);
    }
    (c0, c1)
}

/// Mark channels attached to each potential edge. Vx and Vy belong to the
/// canonical first and second endpoint (tail and head in directed mode), so
/// the endpoint-keyed auxiliary marks resolve the same way no matter how an
/// edge was written down at the call site.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Channel {
    U,
    Vx,
    Vy,
    W,
    X,
    Priority,
}

impl Channel {
    fn tag(self) -> u64 {
        match self {
            Channel::U => 1,
            Channel::Vx => 2,
            Channel::Vy => 3,
            Channel::W => 4,
            Channel::X => 5,
            Channel::Priority => 6,
        }
    }
}

const DOMAIN_EDGE: u64 = 0xE0;
const DOMAIN_VERTEX: u64 = 0xF0;

/// Replayable uniform mark field, a pure function of its seed.
#[derive(Clone, Copy, Debug)]
pub struct MarkField {
    seed: u64,
}

impl MarkField {
    pub fn new(seed: u64) -> Self {
        MarkField { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn absorb(&self, header: u64, coords: impl Iterator<Item = i32>) -> u64 {
        let (mut s0, mut s1) = philox2x64(header, 0x6C62_272E_07BB_0142, self.seed);
        let mut pending: Option<u64> = None;
        let mut count = 0u64;
        for c in coords {
            count += 1;
            let w = c as u32 as u64;
            match pending.take() {
                None => pending = Some(w),
                Some(prev) => {
                    s0 ^= (prev << 32) | w;
                    let (n0, n1) = philox2x64(s0, s1, self.seed);
                    s0 = n0;
                    s1 = n1;
                }
            }
        }
        if let Some(prev) = pending {
            s0 ^= prev << 32;
        }
        s1 ^= count;
        let (f0, _) = philox2x64(s0, s1, self.seed);
        f0
    }

    #[inline]
    fn word_for_edge(&self, edge: &EdgeKey, channel: Channel) -> u64 {
        let orient = match edge.orientation() {
            Orientation::Undirected => 0u64,
            Orientation::Directed => 1,
        };
        let header = DOMAIN_EDGE
            | (channel.tag() << 8)
            | (orient << 16)
            | ((edge.a().dim() as u64) << 24);
        self.absorb(
            header,
            edge.a()
                .coords()
                .iter()
                .copied()
                .chain(edge.b().coords().iter().copied()),
        )
    }

    /// Uniform mark in (0,1) for one edge channel. Pure: querying never
    /// mutates anything, and the same (seed, edge, channel) always yields
    /// the identical value.
    pub fn mark(&self, edge: &EdgeKey, channel: Channel) -> f64 {
        to_unit(self.word_for_edge(edge, channel))
    }

    /// The auxiliary V mark belonging to the given endpoint of the edge.
    pub fn endpoint_mark(&self, edge: &EdgeKey, endpoint: &Vertex) -> f64 {
        debug_assert!(edge.has_endpoint(endpoint));
        let channel = if edge.a() == endpoint {
            Channel::Vx
        } else {
            Channel::Vy
        };
        self.mark(edge, channel)
    }

    /// Per-vertex mark used for the boundary-reach indicator.
    pub fn vertex_mark(&self, v: &Vertex) -> f64 {
        let header = DOMAIN_VERTEX | ((v.dim() as u64) << 24);
        to_unit(self.absorb(header, v.coords().iter().copied()))
    }

    /// Raw word behind the priority channel; used as a sort key.
    pub fn priority_word(&self, edge: &EdgeKey) -> u64 {
        self.word_for_edge(edge, Channel::Priority)
    }

    /// Uniform random ordering of the given edges, induced by the priority
    /// channel. Ties (impossible in practice at 64 bits) fall back to the
    /// canonical edge order.
    pub fn edge_order(&self, edges: &[EdgeKey]) -> Vec<EdgeKey> {
        let mut keyed: Vec<(u64, &EdgeKey)> =
            edges.iter().map(|e| (self.priority_word(e), e)).collect();
        keyed.sort_by(|(ka, ea), (kb, eb)| ka.cmp(kb).then_with(|| ea.cmp(eb)));
        keyed.into_iter().map(|(_, e)| e.clone()).collect()
    }
}

#[inline]
fn to_unit(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}
