//! Community sequences, uniform half-edge pairings and the two-level graph.
//!
//! Half-edges are numbered `0..ℓ_n` community-major, then vertex, then slot;
//! a half-edge id therefore identifies `(community, vertex, slot)`.
//!
//! Graph text format:
//!
//! ```text
//! hcm-graph 1
//! n N ell_n
//! fix <community> <vertex>            (only when a parity half-edge was added)
//! C s m d_0 .. d_{s-1} u_1 v_1 .. u_m v_m   (one line per community)
//! P a b                                (one line per pair, a < b, sorted by a)
//! ```

use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::community::Community;
use crate::distribution::CommunityDistribution;
use crate::error::{HcmError, Result};
use crate::rng::{derive_seed, purpose, rng_from_seed, HcmRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceMode {
    /// `n` i.i.d. draws from the distribution.
    Iid,
    /// `⌊n w_H⌋` copies of each shape, remaining slots by largest remainder.
    Exact,
    /// The per-entry `count` fields of the distribution; `n` is ignored.
    Fixed,
}

impl std::str::FromStr for SequenceMode {
    type Err = HcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(SequenceMode::Iid),
            "exact" => Ok(SequenceMode::Exact),
            "fixed" => Ok(SequenceMode::Fixed),
            _ => Err(HcmError::InvalidParameter(format!("unknown sequence mode `{s}`"))),
        }
    }
}

/// One extra half-edge added to make `ℓ_n` even.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParityFix {
    pub community: usize,
    pub vertex: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfEdge {
    pub community: usize,
    pub vertex: usize,
    pub slot: usize,
}

#[derive(Debug, Clone)]
pub struct CommunitySequence {
    communities: Vec<Arc<Community>>,
    parity_fix: Option<ParityFix>,
    he_offsets: Vec<usize>,
    he_owner: Vec<u32>,
    he_vertex: Vec<u32>,
    vertex_offsets: Vec<usize>,
    s_max: usize,
    d_max: u32,
}

impl CommunitySequence {
    pub fn new(communities: Vec<Arc<Community>>) -> Self {
        let n = communities.len();
        let mut he_offsets = Vec::with_capacity(n + 1);
        let mut vertex_offsets = Vec::with_capacity(n + 1);
        let ell: usize = communities.iter().map(|c| c.degree() as usize).sum();
        let mut he_owner = Vec::with_capacity(ell);
        let mut he_vertex = Vec::with_capacity(ell);
        let (mut h, mut v) = (0usize, 0usize);
        let (mut s_max, mut d_max) = (0, 0);
        for (i, c) in communities.iter().enumerate() {
            he_offsets.push(h);
            vertex_offsets.push(v);
            for (vx, &d) in c.out_degrees().iter().enumerate() {
                for _ in 0..d {
                    he_owner.push(i as u32);
                    he_vertex.push(vx as u32);
                }
            }
            h += c.degree() as usize;
            v += c.vertex_count();
            s_max = s_max.max(c.vertex_count());
            d_max = d_max.max(c.degree());
        }
        he_offsets.push(h);
        vertex_offsets.push(v);
        CommunitySequence {
            communities,
            parity_fix: None,
            he_offsets,
            he_owner,
            he_vertex,
            vertex_offsets,
            s_max,
            d_max,
        }
    }

    pub fn communities(&self) -> &[Arc<Community>] {
        &self.communities
    }

    pub fn community(&self, i: usize) -> &Community {
        &self.communities[i]
    }

    pub fn len(&self) -> usize {
        self.communities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.communities.is_empty()
    }

    /// `ℓ_n`, the total number of inter-community half-edges.
    pub fn half_edge_count(&self) -> usize {
        self.he_owner.len()
    }

    /// `N`, the total number of vertices.
    pub fn vertex_total(&self) -> usize {
        *self.vertex_offsets.last().unwrap_or(&0)
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn d_max(&self) -> u32 {
        self.d_max
    }

    pub fn parity_fix(&self) -> Option<ParityFix> {
        self.parity_fix
    }

    pub(crate) fn set_parity_fix(&mut self, fix: Option<ParityFix>) {
        self.parity_fix = fix;
    }

    /// Half-edge ids owned by community `i`.
    pub fn half_edges_of(&self, i: usize) -> std::ops::Range<usize> {
        self.he_offsets[i]..self.he_offsets[i + 1]
    }

    #[inline]
    pub fn owner(&self, h: usize) -> usize {
        self.he_owner[h] as usize
    }

    #[inline]
    pub fn owner_vertex(&self, h: usize) -> usize {
        self.he_vertex[h] as usize
    }

    /// Global id of vertex `v` of community `i`.
    #[inline]
    pub fn global_vertex(&self, i: usize, v: usize) -> usize {
        self.vertex_offsets[i] + v
    }

    pub fn vertex_offset(&self, i: usize) -> usize {
        self.vertex_offsets[i]
    }

    /// Community owning global vertex `x`.
    pub fn community_of_vertex(&self, x: usize) -> usize {
        self.vertex_offsets.partition_point(|&o| o <= x) - 1
    }

    pub fn half_edge(&self, h: usize) -> HalfEdge {
        let community = self.owner(h);
        let vertex = self.owner_vertex(h);
        let mut first = h;
        while first > self.he_offsets[community] && self.he_vertex[first - 1] as usize == vertex {
            first -= 1;
        }
        HalfEdge {
            community,
            vertex,
            slot: h - first,
        }
    }

    pub fn half_edge_id(&self, he: HalfEdge) -> Option<usize> {
        let c = self.communities.get(he.community)?;
        if he.vertex >= c.vertex_count() || he.slot >= c.out_degree(he.vertex) as usize {
            return None;
        }
        let before: u32 = c.out_degrees()[..he.vertex].iter().sum();
        Some(self.he_offsets[he.community] + before as usize + he.slot)
    }
}

fn largest_remainder(weights: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Draws a community sequence. The stream is `derive_seed(seed, [SEQUENCE])`.
pub fn realize_sequence(
    dist: &CommunityDistribution,
    n: usize,
    mode: SequenceMode,
    seed: u64,
) -> Result<CommunitySequence> {
    let mut rng = rng_from_seed(derive_seed(seed, &[purpose::SEQUENCE]));
    realize_sequence_with(dist, n, mode, &mut rng)
}

pub(crate) fn realize_sequence_with(
    dist: &CommunityDistribution,
    n: usize,
    mode: SequenceMode,
    rng: &mut HcmRng,
) -> Result<CommunitySequence> {
    if dist.is_empty() {
        return Err(HcmError::InvalidDistribution("empty distribution".into()));
    }
    let entries = dist.entries();
    let communities: Vec<Arc<Community>> = match mode {
        SequenceMode::Iid => {
            if n == 0 {
                return Err(HcmError::InvalidParameter("n must be >= 1".into()));
            }
            let mut cumulative = Vec::with_capacity(entries.len());
            let mut acc = 0.0;
            for w in dist.weights() {
                acc += w;
                cumulative.push(acc);
            }
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random::<f64>() * acc;
                    let i = cumulative.partition_point(|&c| c <= u).min(entries.len() - 1);
                    Arc::clone(&entries[i].community)
                })
                .collect()
        }
        SequenceMode::Exact | SequenceMode::Fixed => {
            let counts: Vec<usize> = if mode == SequenceMode::Exact {
                if n == 0 {
                    return Err(HcmError::InvalidParameter("n must be >= 1".into()));
                }
                let w: Vec<f64> = dist.weights().collect();
                largest_remainder(&w, n)
            } else {
                dist.counts()
                    .ok_or_else(|| {
                        HcmError::InvalidDistribution("fixed mode needs a count on every entry".into())
                    })?
                    .into_iter()
                    .map(|c| c as usize)
                    .collect()
            };
            entries
                .iter()
                .zip(counts)
                .flat_map(|(e, c)| std::iter::repeat_n(Arc::clone(&e.community), c))
                .collect()
        }
    };
    let mut seq = CommunitySequence::new(communities);
    if seq.half_edge_count() % 2 == 1 {
        fix_parity(&mut seq, rng);
    }
    Ok(seq)
}

/// Adds one half-edge to a uniformly chosen vertex with out-degree >= 1.
fn fix_parity(seq: &mut CommunitySequence, rng: &mut HcmRng) {
    let eligible: usize = seq
        .communities
        .iter()
        .map(|c| c.out_degrees().iter().filter(|&&d| d >= 1).count())
        .sum();
    let mut pick = rng.random_range(0..eligible);
    for (i, c) in seq.communities.iter().enumerate() {
        let here = c.out_degrees().iter().filter(|&&d| d >= 1).count();
        if pick < here {
            let v = c
                .out_degrees()
                .iter()
                .enumerate()
                .filter(|(_, &d)| d >= 1)
                .nth(pick)
                .map(|(v, _)| v)
                .expect("pick within range");
            let mut communities = std::mem::take(&mut seq.communities);
            Arc::make_mut(&mut communities[i]).add_half_edge(v);
            *seq = CommunitySequence::new(communities);
            seq.parity_fix = Some(ParityFix { community: i, vertex: v });
            return;
        }
        pick -= here;
    }
}

/// Perfect matching on half-edges, stored as an involution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    partner: Vec<u32>,
}

impl Pairing {
    pub fn from_pairs(half_edges: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut partner = vec![u32::MAX; half_edges];
        for &(a, b) in pairs {
            if a >= half_edges || b >= half_edges {
                return Err(HcmError::InvalidPairing(format!("pair ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(HcmError::InvalidPairing(format!("half-edge {a} paired with itself")));
            }
            if partner[a] != u32::MAX || partner[b] != u32::MAX {
                return Err(HcmError::InvalidPairing(format!("half-edge in ({a}, {b}) matched twice")));
            }
            partner[a] = b as u32;
            partner[b] = a as u32;
        }
        if let Some(h) = partner.iter().position(|&p| p == u32::MAX) {
            return Err(HcmError::InvalidPairing(format!("half-edge {h} is unmatched")));
        }
        Ok(Pairing { partner })
    }

    pub(crate) fn from_partner_unchecked(partner: Vec<u32>) -> Self {
        Pairing { partner }
    }

    #[inline]
    pub fn partner(&self, h: usize) -> usize {
        self.partner[h] as usize
    }

    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }

    /// Pairs `(a, b)` with `a < b`, in increasing `a`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.partner
            .iter()
            .enumerate()
            .filter(|(a, &b)| *a < b as usize)
            .map(|(a, &b)| (a, b as usize))
    }
}

/// Uniform perfect matching: shuffle `0..ℓ` and match consecutive entries.
pub fn pair_half_edges(seq: &CommunitySequence, seed: u64) -> Result<Pairing> {
    pair_with(seq.half_edge_count(), &mut rng_from_seed(seed))
}

pub(crate) fn pair_with(half_edges: usize, rng: &mut HcmRng) -> Result<Pairing> {
    if half_edges % 2 == 1 {
        return Err(HcmError::OddHalfEdges(half_edges as u64));
    }
    let mut order: Vec<u32> = (0..half_edges as u32).collect();
    order.shuffle(rng);
    let mut partner = vec![0u32; half_edges];
    for pair in order.chunks_exact(2) {
        partner[pair[0] as usize] = pair[1];
        partner[pair[1] as usize] = pair[0];
    }
    Ok(Pairing { partner })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    pub node_count: usize,
    pub edges: Vec<(u32, u32)>,
}

impl Multigraph {
    /// Degrees with self-loops counted twice.
    pub fn degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.node_count];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    /// Edge multiset with each edge written `(min, max)`, sorted.
    pub fn canonical_edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = self.edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
        e.sort_unstable();
        e
    }
}

/// A realized HCM: the community sequence, its pairing, the expanded vertex
/// multigraph and the community-level quotient.
#[derive(Debug, Clone)]
pub struct HcmGraph {
    pub sequence: CommunitySequence,
    pub pairing: Pairing,
    pub vertex_graph: Multigraph,
    pub community_graph: Multigraph,
}

pub fn build_graph(sequence: CommunitySequence, pairing: Pairing) -> Result<HcmGraph> {
    let ell = sequence.half_edge_count();
    if pairing.len() != ell {
        return Err(HcmError::InvalidPairing(format!(
            "pairing covers {} half-edges, sequence has {ell}",
            pairing.len()
        )));
    }
    for h in 0..ell {
        let p = pairing.partner(h);
        if p >= ell || pairing.partner(p) != h || p == h {
            return Err(HcmError::InvalidPairing(format!("half-edge {h} has an invalid partner {p}")));
        }
    }
    let internal: usize = sequence.communities().iter().map(|c| c.edge_count()).sum();
    let mut vedges = Vec::with_capacity(internal + ell / 2);
    for (i, c) in sequence.communities().iter().enumerate() {
        let off = sequence.vertex_offset(i) as u32;
        vedges.extend(c.edges().iter().map(|&(u, v)| (off + u, off + v)));
    }
    let mut cedges = Vec::with_capacity(ell / 2);
    for (a, b) in pairing.pairs() {
        let (ca, cb) = (sequence.owner(a), sequence.owner(b));
        vedges.push((
            sequence.global_vertex(ca, sequence.owner_vertex(a)) as u32,
            sequence.global_vertex(cb, sequence.owner_vertex(b)) as u32,
        ));
        cedges.push((ca as u32, cb as u32));
    }
    Ok(HcmGraph {
        vertex_graph: Multigraph {
            node_count: sequence.vertex_total(),
            edges: vedges,
        },
        community_graph: Multigraph {
            node_count: sequence.len(),
            edges: cedges,
        },
        sequence,
        pairing,
    })
}

/// Sequence, pairing and graph from one seed, using the `SEQUENCE` and
/// `PAIRING` sub-streams.
pub fn generate(dist: &CommunityDistribution, n: usize, mode: SequenceMode, seed: u64) -> Result<HcmGraph> {
    let seq = realize_sequence(dist, n, mode, seed)?;
    let pairing = pair_half_edges(&seq, derive_seed(seed, &[purpose::PAIRING]))?;
    build_graph(seq, pairing)
}

/// Configuration-model multigraph on a degree sequence: half-edges are
/// listed vertex by vertex, shuffled with `rng_from_seed(seed)` and matched
/// in consecutive pairs.
pub fn configuration_model(degrees: &[u32], seed: u64) -> Result<Multigraph> {
    let mut stubs: Vec<u32> = Vec::new();
    for (v, &d) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat_n(v as u32, d as usize));
    }
    if stubs.len() % 2 == 1 {
        return Err(HcmError::OddHalfEdges(stubs.len() as u64));
    }
    let mut ids: Vec<u32> = (0..stubs.len() as u32).collect();
    ids.shuffle(&mut rng_from_seed(seed));
    let mut edges: Vec<(u32, u32)> = ids
        .chunks_exact(2)
        .map(|p| (stubs[p[0] as usize], stubs[p[1] as usize]))
        .collect();
    edges.iter_mut().for_each(|e| *e = (e.0.min(e.1), e.0.max(e.1)));
    edges.sort_unstable();
    Ok(Multigraph {
        node_count: degrees.len(),
        edges,
    })
}

impl HcmGraph {
    pub fn to_text(&self) -> String {
        let seq = &self.sequence;
        let mut out = String::with_capacity(32 * (seq.len() + self.pairing.len()));
        out.push_str("hcm-graph 1\n");
        let _ = writeln!(out, "{} {} {}", seq.len(), seq.vertex_total(), seq.half_edge_count());
        if let Some(f) = seq.parity_fix() {
            let _ = writeln!(out, "fix {} {}", f.community, f.vertex);
        }
        for c in seq.communities() {
            let _ = write!(out, "C {} {}", c.vertex_count(), c.edge_count());
            for d in c.out_degrees() {
                let _ = write!(out, " {d}");
            }
            for (u, v) in c.edges() {
                let _ = write!(out, " {u} {v}");
            }
            out.push('\n');
        }
        for (a, b) in self.pairing.pairs() {
            let _ = writeln!(out, "P {a} {b}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "hcm-graph 1")) => {}
            Some((ln, _)) => return Err(HcmError::parse(ln, "expected `hcm-graph 1` header")),
            None => return Err(HcmError::parse(1, "empty graph file")),
        }
        let (hl, header) = lines.next().ok_or_else(|| HcmError::parse(2, "missing size header"))?;
        let head = ints(hl, header)?;
        if head.len() != 3 {
            return Err(HcmError::parse(hl, "expected `n N ell_n`"));
        }
        let (n, big_n, ell) = (head[0], head[1], head[2]);
        let mut communities = Vec::with_capacity(n);
        let mut pairs = Vec::with_capacity(ell / 2);
        let mut fix = None;
        let mut shapes: std::collections::HashMap<String, Arc<Community>> = std::collections::HashMap::new();
        for (ln, line) in lines {
            let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
            match tag {
                "fix" => {
                    let f = ints(ln, rest)?;
                    if f.len() != 2 {
                        return Err(HcmError::parse(ln, "expected `fix community vertex`"));
                    }
                    fix = Some(ParityFix {
                        community: f[0],
                        vertex: f[1],
                    });
                }
                "C" => {
                    if let Some(c) = shapes.get(rest) {
                        communities.push(Arc::clone(c));
                        continue;
                    }
                    let f = ints(ln, rest)?;
                    if f.len() < 2 {
                        return Err(HcmError::parse(ln, "community line too short"));
                    }
                    let (s, m) = (f[0], f[1]);
                    if f.len() != 2 + s + 2 * m {
                        return Err(HcmError::parse(ln, "community line length does not match s and m"));
                    }
                    let out = f[2..2 + s].iter().map(|&x| x as u32).collect();
                    let edges = f[2 + s..].chunks_exact(2).map(|e| (e[0] as u32, e[1] as u32)).collect();
                    let c = Arc::new(Community::new(s, edges, out).map_err(|e| HcmError::parse(ln, e.to_string()))?);
                    shapes.insert(rest.to_string(), Arc::clone(&c));
                    communities.push(c);
                }
                "P" => {
                    let f = ints(ln, rest)?;
                    if f.len() != 2 {
                        return Err(HcmError::parse(ln, "expected `P a b`"));
                    }
                    pairs.push((f[0], f[1]));
                }
                other => return Err(HcmError::parse(ln, format!("unknown record `{other}`"))),
            }
        }
        let mut seq = CommunitySequence::new(communities);
        seq.parity_fix = fix;
        if seq.len() != n || seq.vertex_total() != big_n || seq.half_edge_count() != ell {
            return Err(HcmError::Format("header does not match the community table".into()));
        }
        let pairing = Pairing::from_pairs(ell, &pairs)?;
        build_graph(seq, pairing)
    }
}

fn ints(line: usize, text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| HcmError::parse(line, format!("`{t}` is not an integer"))))
        .collect()
}
