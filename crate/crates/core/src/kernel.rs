//! Within-community connectivity kernels.
//!
//! For a community `H`, vertex `v` and retention probability `π`,
//! `g[v][k]` is the probability that the piece containing `v` after keeping
//! each internal edge with probability `π` carries exactly `k` half-edges,
//! and `b[v][k] = Σ_{j≥k} g[v][j]`. Exact tables come from enumerating all
//! edge subsets; the derivative of `b` uses the pivotal-edge form
//! `(1/π) E[# present pivotal edges]`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::Rng;

use crate::community::{Community, ShapeKey};
use crate::error::{HcmError, Result};
use crate::rng::rng_from_seed;

/// Largest internal edge count handled by subset enumeration.
pub const ENUMERATION_CAP: usize = 25;

/// Monte Carlo fallback stops once every table entry has stderr below this.
pub const MC_TARGET_STDERR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    /// `g[v][k]` for `k = 0..=d_H`.
    pub g: Vec<Vec<f64>>,
    /// `b[v][k]` for `k = 0..=d_H + 1`; `b[v][d_H + 1] = 0`.
    pub b: Vec<Vec<f64>>,
    /// `dB/dπ`, same layout as `b`, when requested.
    pub b_prime: Option<Vec<Vec<f64>>>,
    /// Largest standard error over `b`; zero for exact tables.
    pub stderr: f64,
}

impl KernelTable {
    /// `B(H, v, k, π)`, with `B = 1` for `k ≤ 0` and `0` past `d_H`.
    pub fn b_at(&self, v: usize, k: usize) -> f64 {
        self.b[v].get(k).copied().unwrap_or(0.0)
    }

    pub fn b_prime_at(&self, v: usize, k: usize) -> Option<f64> {
        self.b_prime.as_ref().map(|bp| bp[v].get(k).copied().unwrap_or(0.0))
    }

    fn from_g(g: Vec<Vec<f64>>, b_prime: Option<Vec<Vec<f64>>>, stderr: f64) -> Self {
        let b = g
            .iter()
            .map(|row| {
                let mut tail = vec![0.0; row.len() + 1];
                for k in (0..row.len()).rev() {
                    tail[k] = tail[k + 1] + row[k];
                }
                tail
            })
            .collect();
        KernelTable { g, b, b_prime, stderr }
    }
}

fn check_pi(pi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&pi) {
        Ok(())
    } else {
        Err(HcmError::InvalidParameter(format!("π = {pi} is outside [0, 1]")))
    }
}

/// Half-edge count of the piece of every vertex under the kept-edge mask.
fn piece_degrees(h: &Community, mask: u32, skip: Option<usize>, out: &mut [u32]) {
    let s = h.vertex_count();
    let mut adj = [0u32; 32];
    for (e, &(u, v)) in h.edges().iter().enumerate() {
        if mask >> e & 1 == 1 && Some(e) != skip {
            adj[u as usize] |= 1 << v;
            adj[v as usize] |= 1 << u;
        }
    }
    let mut unseen: u32 = if s == 32 { u32::MAX } else { (1u32 << s) - 1 };
    while unseen != 0 {
        let start = unseen.trailing_zeros();
        let mut comp = 1u32 << start;
        let mut frontier = comp;
        while frontier != 0 {
            let mut next = 0;
            let mut f = frontier;
            while f != 0 {
                let x = f.trailing_zeros();
                next |= adj[x as usize];
                f &= f - 1;
            }
            frontier = next & !comp;
            comp |= next;
        }
        unseen &= !comp;
        let mut total = 0;
        let mut c = comp;
        while c != 0 {
            total += h.out_degree(c.trailing_zeros() as usize);
            c &= c - 1;
        }
        let mut c = comp;
        while c != 0 {
            out[c.trailing_zeros() as usize] = total;
            c &= c - 1;
        }
    }
}

/// Exact table by subset enumeration. The derivative needs `π > 0`.
pub fn exact_table(h: &Community, pi: f64, derivative: bool) -> Result<KernelTable> {
    check_pi(pi)?;
    let m = h.edge_count();
    if m > ENUMERATION_CAP {
        return Err(HcmError::EnumerationCap {
            edges: m,
            cap: ENUMERATION_CAP,
        });
    }
    if derivative && pi == 0.0 {
        return Err(HcmError::InvalidParameter("derivative needs π > 0".into()));
    }
    let s = h.vertex_count();
    let d = h.degree() as usize;
    let weights: Vec<f64> = (0..=m)
        .map(|j| pi.powi(j as i32) * (1.0 - pi).powi((m - j) as i32))
        .collect();
    let mut g = vec![vec![0.0; d + 1]; s];
    // Difference arrays over k for the pivotal counts.
    let mut piv = vec![vec![0.0; d + 2]; if derivative { s } else { 0 }];
    let mut with = vec![0u32; s];
    let mut without = vec![0u32; s];
    for mask in 0u32..(1u32 << m) {
        let w = weights[mask.count_ones() as usize];
        if w == 0.0 {
            continue;
        }
        piece_degrees(h, mask, None, &mut with);
        for v in 0..s {
            g[v][with[v] as usize] += w;
        }
        if derivative {
            let mut present = mask;
            while present != 0 {
                let e = present.trailing_zeros() as usize;
                present &= present - 1;
                piece_degrees(h, mask, Some(e), &mut without);
                for v in 0..s {
                    // Pivotal for `≥ k` exactly when without < k ≤ with.
                    if without[v] < with[v] {
                        piv[v][without[v] as usize + 1] += w;
                        piv[v][with[v] as usize + 1] -= w;
                    }
                }
            }
        }
    }
    let b_prime = derivative.then(|| {
        piv.into_iter()
            .map(|row| {
                let mut acc = 0.0;
                let mut out = vec![0.0; d + 2];
                for k in 0..d + 2 {
                    acc += row[k];
                    out[k] = acc / pi;
                }
                out
            })
            .collect()
    });
    Ok(KernelTable::from_g(g, b_prime, 0.0))
}

/// Expected number of pieces with each `(size, half-edge count)` left by
/// intra-percolating `h`, by subset enumeration.
pub fn piece_law(h: &Community, pi: f64) -> Result<Vec<(usize, u32, f64)>> {
    check_pi(pi)?;
    let m = h.edge_count();
    if m > ENUMERATION_CAP {
        return Err(HcmError::EnumerationCap {
            edges: m,
            cap: ENUMERATION_CAP,
        });
    }
    let s = h.vertex_count();
    let mut law: std::collections::BTreeMap<(usize, u32), f64> = std::collections::BTreeMap::new();
    let mut degs = vec![0u32; s];
    for mask in 0u32..(1u32 << m) {
        let j = mask.count_ones() as i32;
        let w = pi.powi(j) * (1.0 - pi).powi(m as i32 - j);
        if w == 0.0 {
            continue;
        }
        piece_degrees(h, mask, None, &mut degs);
        let mut ds = crate::union_find::DisjointSet::new(s);
        for (e, &(u, v)) in h.edges().iter().enumerate() {
            if mask >> e & 1 == 1 {
                ds.union(u as usize, v as usize);
            }
        }
        for x in 0..s {
            if ds.find(x) == x {
                *law.entry((ds.set_size(x), degs[x])).or_insert(0.0) += w;
            }
        }
    }
    Ok(law.into_iter().map(|((size, d), w)| (size, d, w)).collect())
}

/// `B(H, v, k, π)` by enumeration.
pub fn exact_b(h: &Community, v: usize, k: usize, pi: f64) -> Result<f64> {
    check_vertex(h, v)?;
    Ok(exact_table(h, pi, false)?.b_at(v, k))
}

/// `dB(H, v, k, π)/dπ` by the pivotal-edge formula.
pub fn b_prime(h: &Community, v: usize, k: usize, pi: f64) -> Result<f64> {
    check_vertex(h, v)?;
    Ok(exact_table(h, pi, true)?.b_prime_at(v, k).unwrap_or(0.0))
}

fn check_vertex(h: &Community, v: usize) -> Result<()> {
    if v < h.vertex_count() {
        Ok(())
    } else {
        Err(HcmError::InvalidParameter(format!("vertex {v} out of range")))
    }
}

/// Kept-edge mask draw shared by the Monte Carlo estimators. Using the same
/// uniforms for every `π` keeps estimates monotone in `π`.
fn mc_pieces(h: &Community, pi: f64, rng: &mut impl Rng, ds: &mut crate::union_find::DisjointSet, out: &mut [u32]) {
    let s = h.vertex_count();
    *ds = crate::union_find::DisjointSet::new(s);
    for &(u, v) in h.edges() {
        if rng.random::<f64>() < pi {
            ds.union(u as usize, v as usize);
        }
    }
    let mut totals = vec![0u32; s];
    for x in 0..s {
        let r = ds.find(x);
        totals[r] += h.out_degree(x);
    }
    for x in 0..s {
        out[x] = totals[ds.find(x)];
    }
}

/// Frequency estimate of `B(H, v, k, π)` with its binomial standard error.
pub fn monte_carlo_b(h: &Community, v: usize, k: usize, pi: f64, reps: usize, seed: u64) -> Result<(f64, f64)> {
    check_pi(pi)?;
    check_vertex(h, v)?;
    if reps == 0 {
        return Err(HcmError::InvalidParameter("reps must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut ds = crate::union_find::DisjointSet::new(h.vertex_count());
    let mut out = vec![0u32; h.vertex_count()];
    let mut hits = 0usize;
    for _ in 0..reps {
        mc_pieces(h, pi, &mut rng, &mut ds, &mut out);
        if out[v] as usize >= k {
            hits += 1;
        }
    }
    let p = hits as f64 / reps as f64;
    Ok((p, (p * (1.0 - p) / reps as f64).sqrt()))
}

/// Monte Carlo table, doubling the replica count until every entry of `b`
/// has stderr at most `target` (or `max_reps` is reached).
pub fn monte_carlo_table(h: &Community, pi: f64, target: f64, max_reps: usize, seed: u64) -> Result<KernelTable> {
    check_pi(pi)?;
    let s = h.vertex_count();
    let d = h.degree() as usize;
    let mut rng = rng_from_seed(seed);
    let mut ds = crate::union_find::DisjointSet::new(s);
    let mut out = vec![0u32; s];
    let mut counts = vec![vec![0u64; d + 1]; s];
    let mut reps = 0usize;
    let mut batch = 100_000usize.min(max_reps.max(1));
    loop {
        for _ in 0..batch {
            mc_pieces(h, pi, &mut rng, &mut ds, &mut out);
            for v in 0..s {
                counts[v][out[v] as usize] += 1;
            }
        }
        reps += batch;
        let r = reps as f64;
        let g: Vec<Vec<f64>> = counts.iter().map(|row| row.iter().map(|&c| c as f64 / r).collect()).collect();
        let table = KernelTable::from_g(g, None, 0.0);
        let worst = table
            .b
            .iter()
            .flatten()
            .map(|&p| (p * (1.0 - p) / r).sqrt())
            .fold(0.0, f64::max);
        if worst <= target || reps >= max_reps {
            return Ok(KernelTable { stderr: worst, ..table });
        }
        batch = reps.min(max_reps - reps);
    }
}

/// How kernel tables are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelMethod {
    /// Enumeration only; shapes over the cap are an error.
    Exact,
    /// Enumeration up to the cap, Monte Carlo beyond it.
    Auto { seed: u64 },
}

type CacheKey = (ShapeKey, Vec<u32>, u64, bool);

/// Memo of kernel tables keyed by community type, `π` and derivative flag.
/// Safe to share between threads.
#[derive(Debug)]
pub struct KernelCache {
    method: KernelMethod,
    tables: RwLock<HashMap<CacheKey, Arc<KernelTable>>>,
}

impl Default for KernelCache {
    fn default() -> Self {
        KernelCache::new(KernelMethod::Exact)
    }
}

impl KernelCache {
    pub fn new(method: KernelMethod) -> Self {
        KernelCache {
            method,
            tables: RwLock::new(HashMap::new()),
        }
    }

    pub fn method(&self) -> KernelMethod {
        self.method
    }

    pub fn len(&self) -> usize {
        self.tables.read().expect("kernel cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn table(&self, h: &Community, pi: f64, derivative: bool) -> Result<Arc<KernelTable>> {
        let key = (h.shape_key(), h.out_degrees().to_vec(), pi.to_bits(), derivative);
        if let Some(t) = self.tables.read().expect("kernel cache poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let table = match (self.method, h.edge_count() > ENUMERATION_CAP) {
            (KernelMethod::Auto { seed }, true) => {
                if derivative {
                    return Err(HcmError::EnumerationCap {
                        edges: h.edge_count(),
                        cap: ENUMERATION_CAP,
                    });
                }
                monte_carlo_table(h, pi, MC_TARGET_STDERR, 25_000_000, seed)?
            }
            _ => exact_table(h, pi, derivative)?,
        };
        let table = Arc::new(table);
        self.tables
            .write()
            .expect("kernel cache poisoned")
            .insert(key, Arc::clone(&table));
        Ok(table)
    }
}
