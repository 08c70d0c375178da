//! Bond percolation on the HCM: the intra-percolation / explosion /
//! re-pairing / deletion pipeline, its uniform-deletion variant, and direct
//! edge deletion as a ground-truth oracle.
//!
//! Random streams are derived from the config seed: direct deletion uses
//! tag 0, and the pipeline stages use tags 1 to 4. Direct mode draws one
//! uniform per edge in a fixed order (internal edges community by community,
//! then inter-community edges by smaller half-edge id) and keeps the edge
//! when `U < π`, so runs with the same seed are coupled monotonically in `π`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::community::{Community, ShapeKey};
use crate::distribution::CommunityDistribution;
use crate::error::{HcmError, Result};
use crate::generator::{build_graph, pair_with, CommunitySequence, HcmGraph, Pairing};
use crate::rng::{derive_seed, purpose, rng_from_seed, HcmRng};
use crate::union_find::DisjointSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PercolationMode {
    /// Delete exactly the clone communities.
    CloneDeletion,
    /// Delete `n_{H+}` uniformly chosen degree-1 communities per shape.
    UniformDeletion,
    /// Delete every edge independently.
    Direct,
}

impl std::str::FromStr for PercolationMode {
    type Err = HcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clones" => Ok(PercolationMode::CloneDeletion),
            "uniform" => Ok(PercolationMode::UniformDeletion),
            "direct" => Ok(PercolationMode::Direct),
            _ => Err(HcmError::InvalidParameter(format!("unknown percolation mode `{s}`"))),
        }
    }
}

impl std::fmt::Display for PercolationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PercolationMode::CloneDeletion => "clones",
            PercolationMode::UniformDeletion => "uniform",
            PercolationMode::Direct => "direct",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercolationConfig {
    pub pi: f64,
    pub mode: PercolationMode,
    pub seed: u64,
}

impl PercolationConfig {
    pub fn new(pi: f64, mode: PercolationMode, seed: u64) -> Result<Self> {
        check_pi(pi)?;
        Ok(PercolationConfig { pi, mode, seed })
    }
}

fn check_pi(pi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&pi) {
        Ok(())
    } else {
        Err(HcmError::InvalidParameter(format!("π = {pi} is outside [0, 1]")))
    }
}

/// Which original community, and which of its vertices, each new community
/// came from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    source: Vec<u32>,
    offsets: Vec<usize>,
    vertices: Vec<u32>,
}

impl Provenance {
    fn push(&mut self, source: usize, vertices: &[u32]) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.source.push(source as u32);
        self.vertices.extend_from_slice(vertices);
        self.offsets.push(self.vertices.len());
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// `(old community, old vertex ids)` of new community `j`.
    pub fn get(&self, j: usize) -> (usize, &[u32]) {
        (self.source[j] as usize, &self.vertices[self.offsets[j]..self.offsets[j + 1]])
    }
}

/// Full type of a community: labeled shape plus out-degrees.
pub type TypeKey = (ShapeKey, Vec<u32>);

fn type_key(c: &Community) -> TypeKey {
    (c.shape_key(), c.out_degrees().to_vec())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SourceCount {
    pub degree: u32,
    /// `n̄_H`: communities of this type after intra-percolation.
    pub n_bar: u64,
    /// `n_{H+}`: half-edges of these communities that exploded.
    pub n_plus: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ExplosionRecord {
    /// For each clone, in order: the percolated community it copies and the
    /// vertex carrying its half-edge. Clone `j` has index `n_bar + j`.
    pub clones: Vec<(u32, u32)>,
    pub n_bar: usize,
    pub n_tilde: usize,
    /// Clone counts by labeled shape.
    pub n_plus_by_shape: BTreeMap<ShapeKey, u64>,
    /// Explosion counts by type of the percolated source community.
    pub by_source_type: BTreeMap<TypeKey, SourceCount>,
}

impl ExplosionRecord {
    pub fn n_plus(&self) -> usize {
        self.clones.len()
    }
}

/// Splits communities by kept internal edges and drops half-edges.
///
/// `keep_edge(i, e)` decides internal edge `e` of community `i`. Communities
/// with `drop[i]` vanish together with their vertices. Returns the new
/// sequence, the old-to-new half-edge map (`u32::MAX` when dropped) and the
/// provenance. Pieces are ordered by smallest vertex, vertices relabeled in
/// increasing order.
fn split_sequence(
    seq: &CommunitySequence,
    mut keep_edge: impl FnMut(usize, usize) -> bool,
    keep_he: &[bool],
    drop: Option<&[bool]>,
) -> (CommunitySequence, Vec<u32>, Provenance) {
    let mut communities: Vec<Arc<Community>> = Vec::with_capacity(seq.len());
    let mut he_map = vec![u32::MAX; seq.half_edge_count()];
    let mut prov = Provenance::default();
    let mut next_he = 0u32;
    let mut vstart: Vec<usize> = Vec::new();
    let mut local: Vec<u32> = Vec::new();
    let mut kept_edges: Vec<bool> = Vec::new();
    for (i, com) in seq.communities().iter().enumerate() {
        if drop.is_some_and(|d| d[i]) {
            continue;
        }
        let s = com.vertex_count();
        let range = seq.half_edges_of(i);
        vstart.clear();
        let mut acc = range.start;
        for &d in com.out_degrees() {
            vstart.push(acc);
            acc += d as usize;
        }
        kept_edges.clear();
        kept_edges.extend((0..com.edge_count()).map(|e| keep_edge(i, e)));
        let all_edges = kept_edges.iter().all(|&k| k);
        let all_he = range.clone().all(|h| keep_he[h]);
        if all_edges && all_he {
            for h in range {
                he_map[h] = next_he;
                next_he += 1;
            }
            let all: Vec<u32> = (0..s as u32).collect();
            prov.push(i, &all);
            communities.push(Arc::clone(com));
            continue;
        }
        let mut ds = DisjointSet::new(s);
        for (e, &(u, v)) in com.edges().iter().enumerate() {
            if kept_edges[e] {
                ds.union(u as usize, v as usize);
            }
        }
        let (labels, pieces) = ds.labels();
        let mut members: Vec<Vec<u32>> = vec![Vec::new(); pieces];
        for (v, &l) in labels.iter().enumerate() {
            members[l as usize].push(v as u32);
        }
        let mut piece_edges: Vec<Vec<(u32, u32)>> = vec![Vec::new(); pieces];
        local.clear();
        local.resize(s, 0);
        for m in &members {
            for (j, &v) in m.iter().enumerate() {
                local[v as usize] = j as u32;
            }
        }
        for (e, &(u, v)) in com.edges().iter().enumerate() {
            if kept_edges[e] {
                let l = labels[u as usize] as usize;
                piece_edges[l].push((local[u as usize], local[v as usize]));
            }
        }
        for (l, m) in members.iter().enumerate() {
            let mut out = Vec::with_capacity(m.len());
            for &v in m {
                let start = vstart[v as usize];
                let d = com.out_degree(v as usize) as usize;
                let mut kept = 0;
                for h in start..start + d {
                    if keep_he[h] {
                        he_map[h] = next_he;
                        next_he += 1;
                        kept += 1;
                    }
                }
                out.push(kept);
            }
            let edges = std::mem::take(&mut piece_edges[l]);
            prov.push(i, m);
            communities.push(Arc::new(Community::from_parts_unchecked(m.len(), edges, out)));
        }
    }
    let mut new_seq = CommunitySequence::new(communities);
    new_seq.set_parity_fix(None);
    (new_seq, he_map, prov)
}

/// Applies `split_sequence` to a graph and carries the pairing over.
fn rebuild(
    g: &HcmGraph,
    keep_edge: impl FnMut(usize, usize) -> bool,
    keep_he: &[bool],
    drop: Option<&[bool]>,
) -> Result<HcmGraph> {
    let (seq, he_map, _) = split_sequence(&g.sequence, keep_edge, keep_he, drop);
    let mut partner = vec![0u32; seq.half_edge_count()];
    for h in 0..he_map.len() {
        let nh = he_map[h];
        if nh == u32::MAX {
            continue;
        }
        let np = he_map[g.pairing.partner(h)];
        if np == u32::MAX {
            return Err(HcmError::InvalidPairing(format!("half-edge {h} kept but its partner dropped")));
        }
        partner[nh as usize] = np;
    }
    let mut seq = seq;
    if drop.is_none() && he_map.iter().all(|&m| m != u32::MAX) && seq.len() == g.sequence.len() {
        seq.set_parity_fix(g.sequence.parity_fix());
    }
    build_graph(seq, Pairing::from_partner_unchecked(partner))
}

/// Intra-community percolation: keep each internal edge with probability `π`
/// and turn every surviving piece into its own community.
pub fn percolate_intra(seq: &CommunitySequence, pi: f64, seed: u64) -> Result<(CommunitySequence, Provenance)> {
    check_pi(pi)?;
    let mut rng = rng_from_seed(seed);
    Ok(percolate_intra_with(seq, pi, &mut rng))
}

fn percolate_intra_with(seq: &CommunitySequence, pi: f64, rng: &mut HcmRng) -> (CommunitySequence, Provenance) {
    let keep_he = vec![true; seq.half_edge_count()];
    let (s, _, prov) = split_sequence(seq, |_, _| rng.random::<f64>() < pi, &keep_he, None);
    (s, prov)
}

/// Detaches each half-edge with probability `1 - √π` onto a clone of its
/// community. Clones follow the originals in the output sequence.
pub fn explode(seq: &CommunitySequence, pi: f64, seed: u64) -> Result<(CommunitySequence, ExplosionRecord)> {
    check_pi(pi)?;
    let mut rng = rng_from_seed(seed);
    Ok(explode_with(seq, pi, &mut rng))
}

fn explode_with(seq: &CommunitySequence, pi: f64, rng: &mut HcmRng) -> (CommunitySequence, ExplosionRecord) {
    let p = 1.0 - pi.sqrt();
    let n_bar = seq.len();
    let mut record = ExplosionRecord {
        n_bar,
        ..Default::default()
    };
    let mut originals: Vec<Arc<Community>> = Vec::with_capacity(n_bar);
    let mut clones: Vec<Arc<Community>> = Vec::new();
    let mut clone_shapes: HashMap<(u32, u32), Arc<Community>> = HashMap::new();
    for (i, com) in seq.communities().iter().enumerate() {
        let mut out = com.out_degrees().to_vec();
        let mut exploded = 0u64;
        for (v, &d) in com.out_degrees().iter().enumerate() {
            for _ in 0..d {
                if rng.random::<f64>() < p {
                    out[v] -= 1;
                    exploded += 1;
                    record.clones.push((i as u32, v as u32));
                }
            }
        }
        let entry = record.by_source_type.entry(type_key(com)).or_insert_with(|| SourceCount {
            degree: com.degree(),
            ..Default::default()
        });
        entry.n_bar += 1;
        entry.n_plus += exploded;
        if exploded == 0 {
            originals.push(Arc::clone(com));
        } else {
            originals.push(Arc::new(Community::from_parts_unchecked(
                com.vertex_count(),
                com.edges().to_vec(),
                out,
            )));
        }
    }
    for &(i, v) in &record.clones {
        let com = seq.community(i as usize);
        // Repeated explosions at one vertex share a clone shape.
        let key = (i, v);
        let clone = if com.vertex_count() == 1 && com.edge_count() == 0 {
            Arc::new(Community::single_vertex(1))
        } else {
            Arc::clone(clone_shapes.entry(key).or_insert_with(|| {
                let mut out = vec![0; com.vertex_count()];
                out[v as usize] = 1;
                Arc::new(Community::from_parts_unchecked(com.vertex_count(), com.edges().to_vec(), out))
            }))
        };
        *record.n_plus_by_shape.entry(clone.shape_key()).or_insert(0) += 1;
        clones.push(clone);
    }
    originals.extend(clones);
    record.n_tilde = originals.len();
    (CommunitySequence::new(originals), record)
}

#[derive(Debug, Clone)]
pub struct PercolationOutcome {
    pub graph: HcmGraph,
    /// The re-paired exploded graph before deletion (pipeline modes only).
    pub pre_deletion: Option<HcmGraph>,
    pub record: Option<ExplosionRecord>,
    /// Vertices removed by the deletion step.
    pub deleted_vertices: u64,
}

pub fn percolate_hcm(g: &HcmGraph, cfg: &PercolationConfig) -> Result<PercolationOutcome> {
    check_pi(cfg.pi)?;
    let stream = |tag: u64| rng_from_seed(derive_seed(cfg.seed, &[purpose::PERCOLATION, tag]));
    if cfg.mode == PercolationMode::Direct {
        let mut rng = stream(0);
        let pi = cfg.pi;
        let seq = &g.sequence;
        let mut internal: Vec<Vec<bool>> = Vec::with_capacity(seq.len());
        for com in seq.communities() {
            internal.push((0..com.edge_count()).map(|_| rng.random::<f64>() < pi).collect());
        }
        let mut keep_he = vec![false; seq.half_edge_count()];
        for (a, b) in g.pairing.pairs() {
            if rng.random::<f64>() < pi {
                keep_he[a] = true;
                keep_he[b] = true;
            }
        }
        let graph = rebuild(g, |i, e| internal[i][e], &keep_he, None)?;
        return Ok(PercolationOutcome {
            graph,
            pre_deletion: None,
            record: None,
            deleted_vertices: 0,
        });
    }

    let (intra, _) = percolate_intra_with(&g.sequence, cfg.pi, &mut stream(1));
    let (exploded, record) = explode_with(&intra, cfg.pi, &mut stream(2));
    let pairing = pair_with(exploded.half_edge_count(), &mut stream(3))?;
    let pre = build_graph(exploded, pairing)?;
    let seq = &pre.sequence;

    let mut drop = vec![false; seq.len()];
    match cfg.mode {
        PercolationMode::CloneDeletion => drop[record.n_bar..].iter_mut().for_each(|d| *d = true),
        _ => {
            let mut rng = stream(4);
            let mut by_shape: BTreeMap<ShapeKey, Vec<usize>> = BTreeMap::new();
            for (i, c) in seq.communities().iter().enumerate() {
                if c.degree() == 1 {
                    let key = c.shape_key();
                    if record.n_plus_by_shape.contains_key(&key) {
                        by_shape.entry(key).or_default().push(i);
                    }
                }
            }
            for (key, &count) in &record.n_plus_by_shape {
                let pool = by_shape.get(key).map(Vec::as_slice).unwrap_or(&[]);
                assert!(
                    pool.len() as u64 >= count,
                    "fewer degree-1 communities than clones of one shape"
                );
                for j in sample(&mut rng, pool.len(), count as usize) {
                    drop[pool[j]] = true;
                }
            }
        }
    }
    let mut keep_he = vec![true; seq.half_edge_count()];
    let mut deleted = 0u64;
    for (i, _) in drop.iter().enumerate().filter(|(_, &d)| d) {
        deleted += seq.community(i).vertex_count() as u64;
        for h in seq.half_edges_of(i) {
            keep_he[h] = false;
            keep_he[pre.pairing.partner(h)] = false;
        }
    }
    let graph = rebuild(&pre, |_, _| true, &keep_he, Some(&drop))?;
    Ok(PercolationOutcome {
        graph,
        pre_deletion: Some(pre),
        record: Some(record),
        deleted_vertices: deleted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Monte Carlo moments of a uniformly chosen percolated piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PercolatedMoments {
    pub mean_size: Estimate,
    pub mean_degree: Estimate,
    pub degree_size: Estimate,
    pub degree_3: Estimate,
    /// Expected pieces per original community.
    pub pieces_per_community: Estimate,
}

/// Percolates `reps` copies of every catalog entry and combines them with the
/// catalog weights. Estimates are ratios (sum over pieces / number of pieces)
/// with delta-method standard errors.
pub fn percolated_moments(
    dist: &CommunityDistribution,
    pi: f64,
    reps: usize,
    seed: u64,
) -> Result<PercolatedMoments> {
    check_pi(pi)?;
    if reps == 0 {
        return Err(HcmError::InvalidParameter("reps must be >= 1".into()));
    }
    if dist.moments().mean_degree == 0.0 {
        return Err(HcmError::ZeroMeanDegree);
    }
    // Per entry and replica: [pieces, Σs, Σd, Σds, Σd³].
    let mut samples: Vec<(f64, Vec<[f64; 5]>)> = Vec::with_capacity(dist.len());
    for (idx, e) in dist.entries().iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, &[purpose::PERCOLATION, 10, idx as u64]));
        let seq = CommunitySequence::new(vec![Arc::clone(&e.community)]);
        let rows = (0..reps)
            .map(|_| {
                let (out, _) = percolate_intra_with(&seq, pi, &mut rng);
                let mut row = [0.0; 5];
                for c in out.communities() {
                    let (s, d) = (c.size(), c.degree() as f64);
                    row[0] += 1.0;
                    row[1] += s;
                    row[2] += d;
                    row[3] += d * s;
                    row[4] += d * d * d;
                }
                row
            })
            .collect();
        samples.push((e.weight.value(), rows));
    }
    let mean_of = |k: usize| -> f64 {
        samples
            .iter()
            .map(|(w, rows)| w * rows.iter().map(|r| r[k]).sum::<f64>() / reps as f64)
            .sum()
    };
    let pieces = mean_of(0);
    let ratio = |k: usize| -> Estimate {
        let r = mean_of(k) / pieces;
        let mut var = 0.0;
        for (w, rows) in &samples {
            let resid: Vec<f64> = rows.iter().map(|row| row[k] - r * row[0]).collect();
            let m = resid.iter().sum::<f64>() / reps as f64;
            let v = if reps > 1 {
                resid.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64
            } else {
                0.0
            };
            var += w * w * v / reps as f64;
        }
        Estimate {
            mean: r,
            stderr: var.sqrt() / pieces,
        }
    };
    let pieces_se = {
        let mut var = 0.0;
        for (w, rows) in &samples {
            let m = rows.iter().map(|r| r[0]).sum::<f64>() / reps as f64;
            let v = if reps > 1 {
                rows.iter().map(|r| (r[0] - m).powi(2)).sum::<f64>() / (reps - 1) as f64
            } else {
                0.0
            };
            var += w * w * v / reps as f64;
        }
        var.sqrt()
    };
    Ok(PercolatedMoments {
        mean_size: ratio(1),
        mean_degree: ratio(2),
        degree_size: ratio(3),
        degree_3: ratio(4),
        pieces_per_community: Estimate {
            mean: pieces,
            stderr: pieces_se,
        },
    })
}
