//! Communities: small connected simple graphs carrying inter-community
//! half-edges, the built-in families, and the community text format.
//!
//! Text format:
//!
//! ```text
//! s d_total
//! d_0 d_1 ... d_{s-1}
//! u v
//! ...
//! ```
//!
//! Line 1 holds the vertex count and the total number of inter-community
//! half-edges, line 2 the per-vertex out-degrees, and each further line one
//! internal edge with 0-based endpoints. Blank lines and `#` comments are
//! ignored.

use std::fmt::Write as _;

use crate::error::{HcmError, Result};
use crate::union_find::DisjointSet;

/// Labeled internal graph: vertex count and sorted edge list.
pub type ShapeKey = (usize, Vec<(u32, u32)>);

/// A community `H = (F, d)`: a connected simple graph `F` on vertices
/// `0..s` plus an inter-community out-degree for every vertex.
///
/// Edges are stored normalized (`u < v`) and sorted, so equality is
/// equality of labeled graphs.
#[derive(Debug, Clone, PartialEq)]
pub struct Community {
    vertex_count: usize,
    edges: Vec<(u32, u32)>,
    out_degrees: Vec<u32>,
    size_weight: Option<f64>,
}

impl Community {
    pub fn new(vertex_count: usize, edges: Vec<(u32, u32)>, out_degrees: Vec<u32>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(HcmError::InvalidCommunity("a community needs at least one vertex".into()));
        }
        if out_degrees.len() != vertex_count {
            return Err(HcmError::InvalidCommunity(format!(
                "{} out-degrees given for {} vertices",
                out_degrees.len(),
                vertex_count
            )));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for &(u, v) in &edges {
            if u as usize >= vertex_count || v as usize >= vertex_count {
                return Err(HcmError::InvalidCommunity(format!(
                    "edge {u} {v} references a vertex outside 0..{vertex_count}"
                )));
            }
            if u == v {
                return Err(HcmError::InvalidCommunity(format!("self-loop at vertex {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(HcmError::InvalidCommunity(format!(
                "duplicate edge {} {}",
                w[0].0, w[0].1
            )));
        }
        if !is_connected(vertex_count, &normalized) {
            return Err(HcmError::InvalidCommunity("internal graph is not connected".into()));
        }
        Ok(Community {
            vertex_count,
            edges: normalized,
            out_degrees,
            size_weight: None,
        })
    }

    /// Construction for inputs already known to be valid (e.g. pieces of a
    /// percolated community). Edges must be normalized and sorted.
    pub(crate) fn from_parts_unchecked(
        vertex_count: usize,
        edges: Vec<(u32, u32)>,
        out_degrees: Vec<u32>,
    ) -> Self {
        debug_assert_eq!(out_degrees.len(), vertex_count);
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        Community {
            vertex_count,
            edges,
            out_degrees,
            size_weight: None,
        }
    }

    pub fn single_vertex(d: u32) -> Self {
        Community::from_parts_unchecked(1, Vec::new(), vec![d])
    }

    /// Center `0` (out-degree 0) joined to leaves `1..=l`, each with one half-edge.
    pub fn star(l: usize) -> Result<Self> {
        if l == 0 {
            return Err(HcmError::InvalidParameter("star needs l >= 1 leaves".into()));
        }
        let edges = (1..=l as u32).map(|leaf| (0, leaf)).collect();
        let mut out = vec![1; l + 1];
        out[0] = 0;
        Ok(Community::from_parts_unchecked(l + 1, edges, out))
    }

    /// Path on `len` vertices; only the two endpoints carry a half-edge.
    pub fn line(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(HcmError::InvalidParameter("line needs length >= 2".into()));
        }
        let edges = (0..len as u32 - 1).map(|i| (i, i + 1)).collect();
        let mut out = vec![0; len];
        out[0] = 1;
        out[len - 1] = 1;
        Ok(Community::from_parts_unchecked(len, edges, out))
    }

    /// Complete graph on `k` vertices, every vertex with one half-edge.
    pub fn household(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(HcmError::InvalidParameter("household needs k >= 1".into()));
        }
        let mut edges = Vec::with_capacity(k * (k - 1) / 2);
        for u in 0..k as u32 {
            for v in u + 1..k as u32 {
                edges.push((u, v));
            }
        }
        Ok(Community::from_parts_unchecked(k, edges, vec![1; k]))
    }

    /// Parses a built-in family spec: `single:<d>`, `star:<l>`, `line:<L>`,
    /// `household:<k>`.
    pub fn builtin(spec: &str) -> Result<Self> {
        let (name, arg) = spec
            .split_once(':')
            .ok_or_else(|| HcmError::InvalidParameter(format!("built-in `{spec}` needs the form name:param")))?;
        let param: usize = arg
            .trim()
            .parse()
            .map_err(|_| HcmError::InvalidParameter(format!("bad parameter in `{spec}`")))?;
        match name.trim() {
            "single" | "single_vertex" => Ok(Community::single_vertex(param as u32)),
            "star" => Community::star(param),
            "line" => Community::line(param),
            "household" => Community::household(param),
            other => Err(HcmError::InvalidParameter(format!("unknown built-in family `{other}`"))),
        }
    }

    /// Overrides the size used in moment sums (vertex attributes).
    pub fn with_size_weight(mut self, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(HcmError::InvalidParameter(format!("size weight {weight} must be finite and >= 0")));
        }
        self.size_weight = Some(weight);
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn out_degrees(&self) -> &[u32] {
        &self.out_degrees
    }

    pub fn out_degree(&self, v: usize) -> u32 {
        self.out_degrees[v]
    }

    /// Inter-community degree `d_H`.
    pub fn degree(&self) -> u32 {
        self.out_degrees.iter().sum()
    }

    /// Size used by moment sums: the weight override when set, else the vertex count.
    pub fn size(&self) -> f64 {
        self.size_weight.unwrap_or(self.vertex_count as f64)
    }

    pub fn size_weight(&self) -> Option<f64> {
        self.size_weight
    }

    pub fn internal_degrees(&self) -> Vec<u32> {
        let mut deg = vec![0; self.vertex_count];
        for &(u, v) in &self.edges {
            deg[u as usize] += 1;
            deg[v as usize] += 1;
        }
        deg
    }

    pub fn total_degrees(&self) -> Vec<u32> {
        let mut deg = self.internal_degrees();
        for (d, o) in deg.iter_mut().zip(&self.out_degrees) {
            *d += o;
        }
        deg
    }

    /// Internal surplus `|E_F| - s + 1`.
    pub fn surplus(&self) -> u64 {
        (self.edges.len() + 1 - self.vertex_count) as u64
    }

    pub fn shape_key(&self) -> ShapeKey {
        (self.vertex_count, self.edges.clone())
    }

    /// Adds one half-edge at `v`.
    pub(crate) fn add_half_edge(&mut self, v: usize) {
        self.out_degrees[v] += 1;
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (hline, header) = lines.next().ok_or_else(|| HcmError::parse(1, "empty community file"))?;
        let head = parse_ints(hline, header)?;
        if head.len() != 2 {
            return Err(HcmError::parse(hline, "expected `s d_total`"));
        }
        let (s, d_total) = (head[0] as usize, head[1]);
        if s == 0 {
            return Err(HcmError::parse(hline, "community needs at least one vertex"));
        }

        let (dline, degs) = lines
            .next()
            .ok_or_else(|| HcmError::parse(hline + 1, "missing out-degree line"))?;
        let out: Vec<u32> = parse_ints(dline, degs)?.into_iter().map(|x| x as u32).collect();
        if out.len() != s {
            return Err(HcmError::parse(dline, format!("expected {s} out-degrees, found {}", out.len())));
        }
        let sum: u64 = out.iter().map(|&d| d as u64).sum();
        if sum != d_total {
            return Err(HcmError::parse(
                dline,
                format!("out-degrees sum to {sum} but header says {d_total}"),
            ));
        }

        let mut edges = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (ln, l) in lines {
            let e = parse_ints(ln, l)?;
            if e.len() != 2 {
                return Err(HcmError::parse(ln, "edge line must hold exactly two vertices"));
            }
            let (u, v) = (e[0] as u32, e[1] as u32);
            if u as usize >= s || v as usize >= s {
                return Err(HcmError::parse(ln, format!("edge {u} {v} references a vertex outside 0..{s}")));
            }
            if u == v {
                return Err(HcmError::parse(ln, format!("self-loop {u} {v}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(HcmError::parse(ln, format!("duplicate edge {u} {v}")));
            }
            edges.push((u, v));
        }
        let mut sorted: Vec<(u32, u32)> = seen.into_iter().collect();
        sorted.sort_unstable();
        if !is_connected(s, &sorted) {
            return Err(HcmError::parse(dline, "internal graph is not connected"));
        }
        Community::new(s, edges, out)
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", self.vertex_count, self.degree());
        let degs: Vec<String> = self.out_degrees.iter().map(u32::to_string).collect();
        let _ = writeln!(out, "{}", degs.join(" "));
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }
}

fn parse_ints(line: usize, text: &str) -> Result<Vec<u64>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| HcmError::parse(line, format!("`{t}` is not a nonnegative integer")))
        })
        .collect()
}

pub(crate) fn is_connected(n: usize, edges: &[(u32, u32)]) -> bool {
    if n <= 1 {
        return true;
    }
    let mut ds = DisjointSet::new(n);
    let mut merges = 0;
    for &(u, v) in edges {
        if ds.union(u as usize, v as usize) {
            merges += 1;
        }
    }
    merges == n - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_family_invariants(c: &Community) {
        assert!(is_connected(c.vertex_count(), c.edges()));
        assert_eq!(c.degree(), c.out_degrees().iter().sum::<u32>());
        let total = c.total_degrees();
        let internal = c.internal_degrees();
        for v in 0..c.vertex_count() {
            assert_eq!(total[v], internal[v] + c.out_degree(v));
        }
    }

    #[test]
    fn single_vertex_shapes() {
        let c = Community::single_vertex(3);
        assert_eq!((c.vertex_count(), c.degree(), c.edge_count()), (1, 3, 0));
        let iso = Community::single_vertex(0);
        assert_eq!(iso.degree(), 0);
        let leaf = Community::single_vertex(1);
        assert_eq!(leaf.out_degrees(), &[1]);
    }

    #[test]
    fn star_shapes() {
        let s5 = Community::star(5).unwrap();
        assert_eq!((s5.vertex_count(), s5.degree(), s5.edge_count()), (6, 5, 5));
        assert_eq!(s5.out_degree(0), 0);
        let s1 = Community::star(1).unwrap();
        assert_eq!((s1.vertex_count(), s1.edge_count(), s1.degree()), (2, 1, 1));
        let s2 = Community::star(2).unwrap();
        assert_eq!(s2.internal_degrees(), vec![2, 1, 1]);
        assert_eq!(s2.out_degrees(), &[0, 1, 1]);
        assert!(Community::star(0).is_err());
    }

    #[test]
    fn line_shapes() {
        let l5 = Community::line(5).unwrap();
        assert_eq!((l5.vertex_count(), l5.degree(), l5.edge_count()), (5, 2, 4));
        let l2 = Community::line(2).unwrap();
        assert_eq!(l2.out_degrees(), &[1, 1]);
        assert_eq!(l2.edge_count(), 1);
        let l3 = Community::line(3).unwrap();
        assert_eq!(l3.edge_count(), 2);
        assert_eq!(l3.out_degree(1), 0);
        assert!(Community::line(1).is_err());
    }

    #[test]
    fn household_shapes() {
        let h3 = Community::household(3).unwrap();
        assert_eq!((h3.degree(), h3.edge_count()), (3, 3));
        let h1 = Community::household(1).unwrap();
        assert_eq!(h1, Community::single_vertex(1));
        let h4 = Community::household(4).unwrap();
        assert_eq!(h4.edge_count(), 6);
        assert_eq!(h4.surplus(), 3);
        // k vertices of total degree k
        for k in 1..8 {
            let h = Community::household(k).unwrap();
            assert!(h.total_degrees().iter().all(|&d| d as usize == k));
        }
    }

    #[test]
    fn families_satisfy_invariants() {
        for k in 1..7 {
            check_family_invariants(&Community::single_vertex(k as u32));
            check_family_invariants(&Community::star(k).unwrap());
            check_family_invariants(&Community::household(k).unwrap());
            check_family_invariants(&Community::line(k + 1).unwrap());
        }
    }

    #[test]
    fn builtin_specs() {
        assert_eq!(Community::builtin("star:5").unwrap(), Community::star(5).unwrap());
        assert_eq!(Community::builtin("single:2").unwrap(), Community::single_vertex(2));
        assert!(Community::builtin("cube:3").is_err());
        assert!(Community::builtin("star").is_err());
    }

    #[test]
    fn text_round_trip() {
        let s5 = Community::star(5).unwrap();
        assert_eq!(Community::parse(&s5.serialize()).unwrap(), s5);
        let h4 = Community::household(4).unwrap();
        assert_eq!(Community::parse(&h4.serialize()).unwrap(), h4);
    }

    #[test]
    fn parse_rejects_self_loop() {
        let err = Community::parse("3 1\n1 0 0\n0 1\n2 2\n").unwrap_err();
        match err {
            HcmError::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("self-loop"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn parse_rejects_disconnected_and_duplicates() {
        let err = Community::parse("4 0\n0 0 0 0\n0 1\n2 3\n").unwrap_err();
        assert!(err.to_string().contains("not connected"));
        let err = Community::parse("2 0\n0 0\n0 1\n1 0\n").unwrap_err();
        assert!(matches!(err, HcmError::Parse { line: 4, .. }));
        let err = Community::parse("2 3\n1 1\n0 1\n").unwrap_err();
        assert!(err.to_string().contains("sum"));
    }

    #[test]
    fn new_validates() {
        assert!(Community::new(2, vec![(0, 0)], vec![0, 0]).is_err());
        assert!(Community::new(3, vec![(0, 1)], vec![0, 0, 0]).is_err());
        assert!(Community::new(2, vec![(0, 1), (1, 0)], vec![0, 0]).is_err());
        let c = Community::new(3, vec![(2, 1), (0, 1)], vec![1, 0, 1]).unwrap();
        assert_eq!(c, Community::line(3).unwrap());
    }
}
