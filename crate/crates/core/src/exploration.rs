//! Depth-first community exploration, component extraction and a union-find
//! oracle.
//!
//! Each step discovers one community. Active half-edges live on a stack with
//! lazy deletion; a newly discovered community pushes its live half-edges in
//! reverse id order so they pop in increasing order. When the stack runs dry
//! a fresh component starts at a uniformly drawn sleeping half-edge, which
//! picks a community with probability proportional to its degree.
//! Communities of degree 0 cannot be reached this way and are appended at
//! the end as singleton components.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::error::{HcmError, Result};
use crate::generator::HcmGraph;
use crate::rng::rng_from_seed;
use crate::union_find::DisjointSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplorationTrace {
    /// Community index discovered at step `i + 1`.
    pub order: Vec<u32>,
    /// `q[i]` is `Q(i)`; `q[0] = 0`.
    pub q: Vec<i64>,
    /// `z[i]` is `Z(i)`; `z[0] = 0`.
    pub z: Vec<u64>,
    /// Cycle, self-loop and multi-edge closures found at each step.
    pub c: Vec<u32>,
    /// `τ_k`, the first step with `Q = -2k`.
    pub tau: Vec<usize>,
    /// Inter-community degree of the community discovered at each step.
    pub degrees: Vec<u32>,
    /// Internal surplus `|E_F| - s + 1` of the community discovered at each step.
    pub internal_surplus: Vec<u32>,
}

impl ExplorationTrace {
    pub fn steps(&self) -> usize {
        self.order.len()
    }

    /// Writes `i,Q,Z` for every step, including `i = 0`.
    pub fn walk_csv(&self) -> String {
        let mut out = String::from("i,Q,Z\n");
        for (i, (q, z)) in self.q.iter().zip(&self.z).enumerate() {
            let _ = writeln!(out, "{i},{q},{z}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ComponentStats {
    pub v: u64,
    pub vh: u64,
    pub sp: u64,
    pub sph: u64,
    /// Number of member communities with each inter-community degree.
    pub vh_by_degree: BTreeMap<u32, u64>,
}

fn sort_desc(stats: &mut [ComponentStats]) {
    stats.sort_by(|a, b| b.cmp(a));
}

struct Sleeping {
    items: Vec<u32>,
    pos: Vec<u32>,
}

impl Sleeping {
    fn new(n: usize) -> Self {
        Sleeping {
            items: (0..n as u32).collect(),
            pos: (0..n as u32).collect(),
        }
    }

    fn remove(&mut self, h: usize) {
        let p = self.pos[h];
        if p == u32::MAX {
            return;
        }
        let last = *self.items.last().expect("nonempty");
        self.items.swap_remove(p as usize);
        if last as usize != h {
            self.pos[last as usize] = p;
        }
        self.pos[h] = u32::MAX;
    }
}

/// Runs the exploration with fresh starts drawn from `rng_from_seed(seed)`.
pub fn explore(g: &HcmGraph, seed: u64) -> ExplorationTrace {
    let seq = &g.sequence;
    let pairing = &g.pairing;
    let n = seq.len();
    let ell = seq.half_edge_count();
    let mut rng = rng_from_seed(seed);

    let mut alive = vec![true; ell];
    let mut discovered = vec![false; n];
    let mut sleeping = Sleeping::new(ell);
    let mut stack: Vec<u32> = Vec::new();
    let mut push_buf: Vec<u32> = Vec::new();

    let mut t = ExplorationTrace {
        order: Vec::with_capacity(n),
        q: Vec::with_capacity(n + 1),
        z: Vec::with_capacity(n + 1),
        c: Vec::with_capacity(n),
        tau: Vec::new(),
        degrees: Vec::with_capacity(n),
        internal_surplus: Vec::with_capacity(n),
    };
    t.q.push(0);
    t.z.push(0);

    let record = |t: &mut ExplorationTrace, h: usize, c: u32| {
        let com = seq.community(h);
        let d = com.degree();
        let q = t.q.last().unwrap() + d as i64 - 2 - 2 * c as i64;
        let z = t.z.last().unwrap() + com.vertex_count() as u64;
        t.order.push(h as u32);
        t.q.push(q);
        t.z.push(z);
        t.c.push(c);
        t.degrees.push(d);
        t.internal_surplus.push(com.surplus() as u32);
        if q == -2 * (t.tau.len() as i64 + 1) {
            t.tau.push(t.order.len());
        }
    };

    // Marks community `com` discovered, kills `entry` if given, closes
    // pairings into the active set and returns the closure count. Surviving
    // half-edges are left in `push_buf` in increasing order.
    let discover = |com: usize,
                        entry: Option<usize>,
                        alive: &mut [bool],
                        discovered: &mut [bool],
                        sleeping: &mut Sleeping,
                        push_buf: &mut Vec<u32>|
     -> u32 {
        let range = seq.half_edges_of(com);
        for h in range.clone() {
            sleeping.remove(h);
        }
        if let Some(b) = entry {
            alive[b] = false;
        }
        push_buf.clear();
        let mut c = 0;
        for h in range {
            if !alive[h] {
                continue;
            }
            let p = pairing.partner(h);
            let owner = seq.owner(p);
            if owner == com || (discovered[owner] && alive[p]) {
                c += 1;
                alive[h] = false;
                alive[p] = false;
            } else {
                push_buf.push(h as u32);
            }
        }
        discovered[com] = true;
        c
    };

    loop {
        let mut top = None;
        while let Some(h) = stack.pop() {
            if alive[h as usize] {
                top = Some(h as usize);
                break;
            }
        }
        match top {
            Some(a) => {
                alive[a] = false;
                let b = pairing.partner(a);
                let com = seq.owner(b);
                debug_assert!(!discovered[com]);
                let c = discover(com, Some(b), &mut alive, &mut discovered, &mut sleeping, &mut push_buf);
                stack.extend(push_buf.iter().rev());
                record(&mut t, com, c);
            }
            None => {
                if sleeping.items.is_empty() {
                    break;
                }
                let a = sleeping.items[rng.random_range(0..sleeping.items.len())] as usize;
                let com = seq.owner(a);
                let c = discover(com, None, &mut alive, &mut discovered, &mut sleeping, &mut push_buf);
                stack.extend(push_buf.iter().rev().filter(|&&h| h as usize != a));
                if alive[a] {
                    stack.push(a as u32);
                }
                record(&mut t, com, c);
            }
        }
    }
    for com in 0..n {
        if !discovered[com] {
            debug_assert_eq!(seq.community(com).degree(), 0);
            record(&mut t, com, 0);
        }
    }
    t
}

/// Components in discovery order, paired with their `τ_k`.
pub fn components_in_order(t: &ExplorationTrace) -> Result<Vec<(usize, ComponentStats)>> {
    let n = t.order.len();
    if t.q.len() != n + 1
        || t.z.len() != n + 1
        || t.c.len() != n
        || t.degrees.len() != n
        || t.internal_surplus.len() != n
    {
        return Err(HcmError::MalformedTrace("array lengths disagree".into()));
    }
    if t.q[0] != 0 || t.z[0] != 0 {
        return Err(HcmError::MalformedTrace("walks must start at 0".into()));
    }
    let mut taus = Vec::new();
    for i in 1..=n {
        let expected = t.q[i - 1] + t.degrees[i - 1] as i64 - 2 - 2 * t.c[i - 1] as i64;
        if t.q[i] != expected {
            return Err(HcmError::MalformedTrace(format!("Q increment wrong at step {i}")));
        }
        if t.q[i] == -2 * (taus.len() as i64 + 1) {
            taus.push(i);
        }
    }
    if taus != t.tau {
        return Err(HcmError::MalformedTrace("recorded τ disagrees with Q".into()));
    }
    if n > 0 && taus.last() != Some(&n) {
        return Err(HcmError::MalformedTrace(format!(
            "Q never returns to -2k after the last component (Q(n) = {})",
            t.q[n]
        )));
    }
    let mut out = Vec::with_capacity(taus.len());
    let mut prev = 0;
    for &tau in &taus {
        let steps = prev..tau;
        let sph: u64 = t.c[steps.clone()].iter().map(|&c| c as u64).sum();
        let internal: u64 = t.internal_surplus[steps.clone()].iter().map(|&s| s as u64).sum();
        let mut by_degree = BTreeMap::new();
        for &d in &t.degrees[steps] {
            *by_degree.entry(d).or_insert(0) += 1;
        }
        out.push((
            tau,
            ComponentStats {
                v: t.z[tau] - t.z[prev],
                vh: (tau - prev) as u64,
                sp: sph + internal,
                sph,
                vh_by_degree: by_degree,
            },
        ));
        prev = tau;
    }
    Ok(out)
}

/// Components from the trace, largest `v` first.
pub fn components_from_trace(t: &ExplorationTrace) -> Result<Vec<ComponentStats>> {
    let mut stats: Vec<ComponentStats> = components_in_order(t)?.into_iter().map(|(_, s)| s).collect();
    sort_desc(&mut stats);
    Ok(stats)
}

/// `k,tau_k,v,vH,SP,SPH` per component in discovery order.
pub fn components_csv(t: &ExplorationTrace) -> Result<String> {
    let mut out = String::from("k,tau_k,v,vH,SP,SPH\n");
    for (k, (tau, s)) in components_in_order(t)?.into_iter().enumerate() {
        let _ = writeln!(out, "{},{tau},{},{},{},{}", k + 1, s.v, s.vh, s.sp, s.sph);
    }
    Ok(out)
}

/// Connected components of the vertex graph, computed directly.
pub fn components_union_find(g: &HcmGraph) -> Vec<ComponentStats> {
    let seq = &g.sequence;
    let mut ds = DisjointSet::new(g.vertex_graph.node_count);
    for &(u, v) in &g.vertex_graph.edges {
        ds.union(u as usize, v as usize);
    }
    let (labels, count) = ds.labels();
    let mut v = vec![0u64; count];
    let mut edges = vec![0u64; count];
    let mut vh = vec![0u64; count];
    let mut inter = vec![0u64; count];
    let mut by_degree = vec![BTreeMap::new(); count];
    for &l in &labels {
        v[l as usize] += 1;
    }
    for &(a, _) in &g.vertex_graph.edges {
        edges[labels[a as usize] as usize] += 1;
    }
    for (i, com) in seq.communities().iter().enumerate() {
        let l = labels[seq.vertex_offset(i)] as usize;
        vh[l] += 1;
        *by_degree[l].entry(com.degree()).or_insert(0) += 1;
    }
    for &(a, _) in &g.community_graph.edges {
        inter[labels[seq.vertex_offset(a as usize)] as usize] += 1;
    }
    let mut stats: Vec<ComponentStats> = by_degree
        .into_iter()
        .enumerate()
        .map(|(l, vh_by_degree)| ComponentStats {
            v: v[l],
            vh: vh[l],
            sp: edges[l] + 1 - v[l],
            sph: inter[l] + 1 - vh[l],
            vh_by_degree,
        })
        .collect();
    sort_desc(&mut stats);
    stats
}

/// Vertex counts of all components, largest first.
pub fn component_sizes(g: &HcmGraph) -> Vec<u64> {
    let mut ds = DisjointSet::new(g.vertex_graph.node_count);
    for &(u, v) in &g.vertex_graph.edges {
        ds.union(u as usize, v as usize);
    }
    let mut sizes = Vec::new();
    for x in 0..g.vertex_graph.node_count {
        if ds.find(x) == x {
            sizes.push(ds.set_size(x) as u64);
        }
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// Vertex sets of the connected components, in order of smallest vertex.
pub fn vertex_components(g: &HcmGraph) -> Vec<Vec<usize>> {
    let mut ds = DisjointSet::new(g.vertex_graph.node_count);
    for &(u, v) in &g.vertex_graph.edges {
        ds.union(u as usize, v as usize);
    }
    let (labels, count) = ds.labels();
    let mut out = vec![Vec::new(); count];
    for (x, &l) in labels.iter().enumerate() {
        out[l as usize].push(x);
    }
    out
}

/// `(SP, SPH)` of the subgraph induced by `component` (global vertex ids).
pub fn surplus(g: &HcmGraph, component: &[usize]) -> Result<(u64, u64)> {
    let seq = &g.sequence;
    let total = g.vertex_graph.node_count;
    let mut local = vec![u32::MAX; total];
    for (i, &x) in component.iter().enumerate() {
        if x >= total {
            return Err(HcmError::InvalidParameter(format!("vertex {x} out of range")));
        }
        local[x] = i as u32;
    }
    let mut ds = DisjointSet::new(component.len());
    let mut edges = 0u64;
    for &(u, v) in &g.vertex_graph.edges {
        let (lu, lv) = (local[u as usize], local[v as usize]);
        if lu != u32::MAX && lv != u32::MAX {
            edges += 1;
            ds.union(lu as usize, lv as usize);
        }
    }
    if component.is_empty() || ds.labels().1 != 1 {
        return Err(HcmError::Disconnected);
    }
    let mut coms: Vec<usize> = component.iter().map(|&x| seq.community_of_vertex(x)).collect();
    coms.sort_unstable();
    coms.dedup();
    let mut inter = 0u64;
    for (a, b) in g.pairing.pairs() {
        let va = seq.global_vertex(seq.owner(a), seq.owner_vertex(a));
        let vb = seq.global_vertex(seq.owner(b), seq.owner_vertex(b));
        if local[va] != u32::MAX && local[vb] != u32::MAX {
            inter += 1;
        }
    }
    let sp = edges + 1 - component.len() as u64;
    let sph = (inter + 1).checked_sub(coms.len() as u64).ok_or(HcmError::Disconnected)?;
    Ok((sp, sph))
}

/// Samples `(t, n^{-1/3} Q(⌊t n^{2/3}⌋), n^{-2/3} Z(⌊t n^{2/3}⌋))` on `grid`.
/// Indices past the end of the walk are clamped.
pub fn rescaled_walks(t: &ExplorationTrace, n: usize, grid: &[f64]) -> Vec<(f64, f64, f64)> {
    let nf = n as f64;
    let scale = nf.powf(2.0 / 3.0);
    let last = t.q.len() - 1;
    grid.iter()
        .map(|&s| {
            let i = ((s * scale).floor().max(0.0) as usize).min(last);
            (s, t.q[i] as f64 / nf.cbrt(), t.z[i] as f64 / scale)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::Community;
    use crate::generator::{build_graph, CommunitySequence, Pairing};
    use std::sync::Arc;

    fn graph(cs: Vec<Community>, pairs: &[(usize, usize)]) -> HcmGraph {
        let seq = CommunitySequence::new(cs.into_iter().map(Arc::new).collect());
        let p = Pairing::from_pairs(seq.half_edge_count(), pairs).unwrap();
        build_graph(seq, p).unwrap()
    }

    #[test]
    fn tree_trace() {
        // Half-edges: 0,1 on community 0; 2 on 1; 3 on 2.
        let g = graph(
            vec![Community::single_vertex(2), Community::single_vertex(1), Community::single_vertex(1)],
            &[(0, 2), (1, 3)],
        );
        let mut found = false;
        for seed in 0..50 {
            let t = explore(&g, seed);
            assert_eq!(t.tau, vec![3]);
            assert_eq!(*t.q.last().unwrap(), -2);
            if t.order[0] == 0 {
                assert_eq!(t.q, vec![0, 0, -1, -2]);
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn three_cycle_trace() {
        let g = graph(vec![Community::single_vertex(2); 3], &[(1, 2), (3, 4), (5, 0)]);
        let t = explore(&g, 11);
        assert_eq!(t.q, vec![0, 0, 0, -2]);
        assert_eq!(t.c, vec![0, 0, 1]);
        let comps = components_from_trace(&t).unwrap();
        assert_eq!((comps[0].sp, comps[0].sph), (1, 1));
    }

    #[test]
    fn z_is_running_sum() {
        let g = graph(
            vec![
                Community::line(2).unwrap(),
                Community::new(3, vec![(0, 1), (1, 2)], vec![1, 0, 1]).unwrap(),
                Community::new(5, vec![(0, 1), (1, 2), (2, 3), (3, 4)], vec![1, 0, 0, 0, 1]).unwrap(),
            ],
            &[(1, 2), (3, 4), (0, 5)],
        );
        for seed in 0..20 {
            let t = explore(&g, seed);
            let sizes: Vec<u64> = t.order.iter().map(|&i| g.sequence.community(i as usize).vertex_count() as u64).collect();
            let mut acc = 0;
            for (i, s) in sizes.iter().enumerate() {
                acc += s;
                assert_eq!(t.z[i + 1], acc);
            }
            assert_eq!(acc, 10);
        }
    }

    #[test]
    fn isolated_communities_are_singletons() {
        let g = graph(vec![Community::single_vertex(0), Community::single_vertex(0)], &[]);
        let t = explore(&g, 0);
        assert_eq!(t.tau, vec![1, 2]);
        let comps = components_from_trace(&t).unwrap();
        assert_eq!(comps.iter().map(|c| c.v).collect::<Vec<_>>(), vec![1, 1]);
    }

    #[test]
    fn self_loop_start() {
        let g = graph(vec![Community::single_vertex(2)], &[(0, 1)]);
        let t = explore(&g, 0);
        assert_eq!(t.q, vec![0, -2]);
        assert_eq!(t.c, vec![1]);
    }

    #[test]
    fn single_community_union_find() {
        let g = graph(vec![Community::household(4).unwrap().clone()], &[(0, 1), (2, 3)]);
        let uf = components_union_find(&g);
        assert_eq!(uf.len(), 1);
        assert_eq!(uf[0].v, 4);
        assert_eq!(uf[0].sph, 2);
        assert_eq!(uf[0].sp, 5);
        assert_eq!(components_from_trace(&explore(&g, 1)).unwrap(), uf);
    }

    #[test]
    fn surplus_examples() {
        let hh = graph(vec![Community::new(4, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], vec![0; 4]).unwrap()], &[]);
        assert_eq!(surplus(&hh, &[0, 1, 2, 3]).unwrap(), (3, 0));
        let cyc = graph(vec![Community::single_vertex(2); 3], &[(1, 2), (3, 4), (5, 0)]);
        assert_eq!(surplus(&cyc, &[0, 1, 2]).unwrap(), (1, 1));
        let tree = graph(vec![Community::single_vertex(1); 2], &[(0, 1)]);
        assert_eq!(surplus(&tree, &[0, 1]).unwrap(), (0, 0));
        let two = graph(vec![Community::single_vertex(0); 2], &[]);
        assert!(matches!(surplus(&two, &[0, 1]), Err(HcmError::Disconnected)));
    }

    #[test]
    fn malformed_trace_rejected() {
        let g = graph(vec![Community::single_vertex(2); 3], &[(1, 2), (3, 4), (5, 0)]);
        let mut t = explore(&g, 0);
        t.q[3] = -1;
        assert!(components_from_trace(&t).is_err());
    }

    #[test]
    fn rescaled_origin() {
        let g = graph(vec![Community::single_vertex(1); 2], &[(0, 1)]);
        let t = explore(&g, 0);
        let w = rescaled_walks(&t, 2, &[0.0, 100.0]);
        assert_eq!((w[0].1, w[0].2), (0.0, 0.0));
        assert!(w[1].2 > 0.0);
    }
}
