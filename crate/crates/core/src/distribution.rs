//! Weighted catalogs of community shapes and their moments.
//!
//! A distribution file is TOML with one `[[community]]` table per entry:
//!
//! ```toml
//! [[community]]
//! shape = "line:5"          # built-in family, or
//! # file = "tri.txt"        # community file, relative to this file, or
//! # text = "1 3\n3\n"       # inline community text
//! weight = "1/2"            # exact rational, or a float such as 0.5
//! count = 10                # optional: exact count for fixed sequences
//! size_weight = 2.0         # optional: overrides the community size
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::community::Community;
use crate::error::{HcmError, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Exact(Rational64),
    Float(f64),
}

impl Weight {
    pub fn exact(num: i64, den: i64) -> Self {
        Weight::Exact(Rational64::new(num, den))
    }

    pub fn value(&self) -> f64 {
        match *self {
            Weight::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Weight::Float(x) => x,
        }
    }

    pub fn as_exact(&self) -> Option<Rational64> {
        match *self {
            Weight::Exact(r) => Some(r),
            Weight::Float(_) => None,
        }
    }
}

impl FromStr for Weight {
    type Err = HcmError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let num: i64 = n.trim().parse().map_err(|_| bad_weight(s))?;
            let den: i64 = d.trim().parse().map_err(|_| bad_weight(s))?;
            if den == 0 {
                return Err(bad_weight(s));
            }
            return Ok(Weight::Exact(Rational64::new(num, den)));
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Weight::Exact(Rational64::from_integer(i)));
        }
        s.parse::<f64>().map(Weight::Float).map_err(|_| bad_weight(s))
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::Exact(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Weight::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Weight::Float(x) => write!(f, "{x}"),
        }
    }
}

fn bad_weight(s: &str) -> HcmError {
    HcmError::InvalidDistribution(format!("cannot parse weight `{s}`"))
}

#[derive(Debug, Clone)]
pub struct DistEntry {
    pub community: Arc<Community>,
    pub weight: Weight,
    pub count: Option<u64>,
}

/// Probability distribution over a finite catalog of labeled communities.
#[derive(Debug, Clone)]
pub struct CommunityDistribution {
    entries: Vec<DistEntry>,
}

/// Moments of `(S, D)` for a uniformly chosen community.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean_size: f64,
    pub mean_size_sq: f64,
    pub mean_degree: f64,
    pub degree_2: f64,
    pub degree_3: f64,
    pub degree_size: f64,
    pub degree_sq_size: f64,
    pub p_degree_0: f64,
    pub p_degree_1: f64,
}

impl Moments {
    /// `E[D(D-1)] / E[D]`, undefined when `E[D] = 0`.
    pub fn nu(&self) -> Option<f64> {
        (self.mean_degree > 0.0).then(|| (self.degree_2 - self.mean_degree) / self.mean_degree)
    }

    /// `E[D^3]E[D] - E[D^2]^2`.
    pub fn eta(&self) -> f64 {
        self.degree_3 * self.mean_degree - self.degree_2 * self.degree_2
    }

    /// Moments of an explicit finite sample of `(size, degree)` pairs.
    pub fn from_pairs<I: IntoIterator<Item = (f64, f64, f64)>>(weighted: I) -> Moments {
        let mut m = Moments::zero();
        let mut total = 0.0;
        for (w, s, d) in weighted {
            total += w;
            m.mean_size += w * s;
            m.mean_size_sq += w * s * s;
            m.mean_degree += w * d;
            m.degree_2 += w * d * d;
            m.degree_3 += w * d * d * d;
            m.degree_size += w * d * s;
            m.degree_sq_size += w * d * d * s;
            if d == 0.0 {
                m.p_degree_0 += w;
            }
            if d == 1.0 {
                m.p_degree_1 += w;
            }
        }
        if total > 0.0 {
            m.scale(1.0 / total);
        }
        m
    }

    fn zero() -> Moments {
        Moments {
            mean_size: 0.0,
            mean_size_sq: 0.0,
            mean_degree: 0.0,
            degree_2: 0.0,
            degree_3: 0.0,
            degree_size: 0.0,
            degree_sq_size: 0.0,
            p_degree_0: 0.0,
            p_degree_1: 0.0,
        }
    }

    fn scale(&mut self, f: f64) {
        self.mean_size *= f;
        self.mean_size_sq *= f;
        self.mean_degree *= f;
        self.degree_2 *= f;
        self.degree_3 *= f;
        self.degree_size *= f;
        self.degree_sq_size *= f;
        self.p_degree_0 *= f;
        self.p_degree_1 *= f;
    }
}

impl CommunityDistribution {
    pub fn new(entries: Vec<DistEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(HcmError::InvalidDistribution("empty distribution".into()));
        }
        for e in &entries {
            let w = e.weight.value();
            if !(w >= 0.0 && w.is_finite()) {
                return Err(HcmError::InvalidDistribution(format!("weight {} is negative or not finite", e.weight)));
            }
        }
        let all_exact: Option<Rational64> = entries
            .iter()
            .map(|e| e.weight.as_exact())
            .try_fold(Rational64::from_integer(0), |acc, w| w.map(|w| acc + w));
        match all_exact {
            Some(sum) if sum != Rational64::from_integer(1) => {
                return Err(HcmError::InvalidDistribution(format!("weights sum to {sum}, not 1")));
            }
            Some(_) => {}
            None => {
                let sum: f64 = entries.iter().map(|e| e.weight.value()).sum();
                if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(HcmError::InvalidDistribution(format!("weights sum to {sum}, not 1")));
                }
            }
        }
        Ok(CommunityDistribution { entries })
    }

    pub fn from_weighted(items: Vec<(Community, Weight)>) -> Result<Self> {
        CommunityDistribution::new(
            items
                .into_iter()
                .map(|(c, weight)| DistEntry {
                    community: Arc::new(c),
                    weight,
                    count: None,
                })
                .collect(),
        )
    }

    pub fn single(c: Community) -> Self {
        CommunityDistribution {
            entries: vec![DistEntry {
                community: Arc::new(c),
                weight: Weight::exact(1, 1),
                count: None,
            }],
        }
    }

    pub fn entries(&self) -> &[DistEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.weight.value())
    }

    /// Fixed counts, present only when every entry declares one.
    pub fn counts(&self) -> Option<Vec<u64>> {
        self.entries.iter().map(|e| e.count).collect()
    }

    pub fn moments(&self) -> Moments {
        Moments::from_pairs(self.entries.iter().map(|e| {
            (e.weight.value(), e.community.size(), e.community.degree() as f64)
        }))
    }

    /// `(E[D], E[D(D-1)])` as exact rationals when every weight is exact.
    pub fn exact_degree_moments(&self) -> Option<(Rational64, Rational64)> {
        let mut mean = Rational64::from_integer(0);
        let mut fact2 = Rational64::from_integer(0);
        for e in &self.entries {
            let w = e.weight.as_exact()?;
            let d = e.community.degree() as i64;
            mean += w * d;
            fact2 += w * (d * (d - 1));
        }
        Some((mean, fact2))
    }

    /// Exact `ν_D`, when every weight is exact and `E[D] > 0`.
    pub fn exact_nu(&self) -> Option<Rational64> {
        let (mean, fact2) = self.exact_degree_moments()?;
        (mean != Rational64::from_integer(0)).then(|| fact2 / mean)
    }

    pub fn max_size(&self) -> usize {
        self.entries.iter().map(|e| e.community.vertex_count()).max().unwrap_or(0)
    }

    pub fn max_degree(&self) -> u32 {
        self.entries.iter().map(|e| e.community.degree()).max().unwrap_or(0)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HcmError::io(path, e))?;
        CommunityDistribution::from_toml(&text, path.parent())
    }

    pub fn from_toml(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let file: DistFile =
            toml::from_str(text).map_err(|e| HcmError::InvalidDistribution(e.to_string()))?;
        let mut entries = Vec::with_capacity(file.community.len());
        for (i, spec) in file.community.into_iter().enumerate() {
            let community = match (&spec.shape, &spec.file, &spec.text) {
                (Some(shape), None, None) => Community::builtin(shape)?,
                (None, Some(f), None) => {
                    let p = match base_dir {
                        Some(dir) => dir.join(f),
                        None => f.into(),
                    };
                    let t = std::fs::read_to_string(&p).map_err(|e| HcmError::io(&p, e))?;
                    Community::parse(&t)?
                }
                (None, None, Some(t)) => Community::parse(t)?,
                _ => {
                    return Err(HcmError::InvalidDistribution(format!(
                        "entry {i}: exactly one of `shape`, `file`, `text` is required"
                    )))
                }
            };
            let community = match spec.size_weight {
                Some(w) => community.with_size_weight(w)?,
                None => community,
            };
            let weight = match spec.weight {
                WeightSpec::Int(i) => Weight::Exact(Rational64::from_integer(i)),
                WeightSpec::Float(x) => Weight::Float(x),
                WeightSpec::Text(s) => s.parse()?,
            };
            entries.push(DistEntry {
                community: Arc::new(community),
                weight,
                count: spec.count,
            });
        }
        CommunityDistribution::new(entries)
    }

    /// TOML with inline community text; round-trips through [`Self::from_toml`].
    pub fn to_toml(&self) -> String {
        let file = DistFile {
            community: self
                .entries
                .iter()
                .map(|e| EntrySpec {
                    shape: None,
                    file: None,
                    text: Some(e.community.serialize()),
                    weight: WeightSpec::Text(e.weight.to_string()),
                    count: e.count,
                    size_weight: e.community.size_weight(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("distribution serializes")
    }

    /// Resolves a distribution argument: an existing file, a named catalog
    /// (see [`crate::catalog::named`]) or a single built-in shape such as `star:5`.
    pub fn from_spec(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.is_file() {
            return CommunityDistribution::load(path);
        }
        if let Some(d) = crate::catalog::named(spec) {
            return Ok(d);
        }
        Community::builtin(spec).map(CommunityDistribution::single)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DistFile {
    community: Vec<EntrySpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntrySpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    shape: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    weight: WeightSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size_weight: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum WeightSpec {
    Int(i64),
    Float(f64),
    Text(String),
}

/// Finite-`n` regularity and connectivity report.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub n: u64,
    pub lambda: f64,
    pub mean_size: f64,
    pub mean_degree: f64,
    pub degree_3: f64,
    pub degree_size: f64,
    pub degree_sq_size: f64,
    /// `None` when `E[D] = 0`.
    pub nu: Option<f64>,
    pub nu_undefined: bool,
    pub s_max: usize,
    pub d_max: u32,
    /// `s_max log(n) / n^{2/3}`; the regularity requirement is that this vanishes.
    pub size_ratio: f64,
    pub size_ok: bool,
    pub degree_ok: bool,
    pub p_degree_1_ok: bool,
    pub p_degree_0_ok: bool,
    /// `|ν_D - (1 + λ n^{-1/3})|`.
    pub criticality_gap: Option<f64>,
}

pub fn check_conditions(dist: &CommunityDistribution, n: u64, lambda: f64) -> Result<ConditionReport> {
    if n == 0 {
        return Err(HcmError::InvalidParameter("n must be >= 1".into()));
    }
    let m = dist.moments();
    let nf = n as f64;
    let s_max = dist.max_size();
    let d_max = dist.max_degree();
    let size_ratio = s_max as f64 * nf.ln() / nf.powf(2.0 / 3.0);
    let nu = m.nu();
    let target = 1.0 + lambda * nf.powf(-1.0 / 3.0);
    Ok(ConditionReport {
        n,
        lambda,
        mean_size: m.mean_size,
        mean_degree: m.mean_degree,
        degree_3: m.degree_3,
        degree_size: m.degree_size,
        degree_sq_size: m.degree_sq_size,
        nu,
        nu_undefined: nu.is_none(),
        s_max,
        d_max,
        size_ratio,
        size_ok: size_ratio < 1.0,
        degree_ok: (d_max as f64) <= nf.cbrt(),
        p_degree_1_ok: m.p_degree_1 > 0.0 && m.p_degree_1 < 1.0,
        p_degree_0_ok: m.p_degree_0 < 1.0,
        criticality_gap: nu.map(|v| (v - target).abs()),
    })
}

/// Mixes `a` and `b` as `p·a + (1-p)·b` with `p` chosen so that `ν_D`
/// equals `target` exactly. All weights must be exact.
pub fn tune_mixture(
    a: &CommunityDistribution,
    b: &CommunityDistribution,
    target: Rational64,
) -> Result<(Rational64, CommunityDistribution)> {
    let inexact = || HcmError::InvalidDistribution("mixture tuning needs exact weights".into());
    let (a1, a2) = a.exact_degree_moments().ok_or_else(inexact)?;
    let (b1, b2) = b.exact_degree_moments().ok_or_else(inexact)?;
    // p a2 + (1-p) b2 = t (p a1 + (1-p) b1)
    let denom = (a2 - b2) - target * (a1 - b1);
    if denom == Rational64::from_integer(0) {
        return Err(HcmError::InvalidDistribution("ν does not depend on the mixing weight".into()));
    }
    let p = (target * b1 - b2) / denom;
    let zero = Rational64::from_integer(0);
    let one = Rational64::from_integer(1);
    if p < zero || p > one {
        return Err(HcmError::InvalidDistribution(format!(
            "target ν = {target} needs mixing weight {p} outside [0, 1]"
        )));
    }
    let mut entries = Vec::with_capacity(a.len() + b.len());
    for (src, scale) in [(a, p), (b, one - p)] {
        for e in src.entries() {
            let w = e.weight.as_exact().expect("checked exact");
            entries.push(DistEntry {
                community: Arc::clone(&e.community),
                weight: Weight::Exact(w * scale),
                count: None,
            });
        }
    }
    entries.retain(|e| e.weight.value() > 0.0);
    Ok((p, CommunityDistribution::new(entries)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm13(p1: Weight, p3: Weight) -> CommunityDistribution {
        CommunityDistribution::from_weighted(vec![
            (Community::single_vertex(1), p1),
            (Community::single_vertex(3), p3),
        ])
        .unwrap()
    }

    #[test]
    fn star_moments() {
        let d = CommunityDistribution::single(Community::star(5).unwrap());
        let m = d.moments();
        assert_eq!(m.mean_degree, 5.0);
        assert_eq!(m.mean_size, 6.0);
        assert_eq!(m.nu(), Some(4.0));
        let r = check_conditions(&d, 100_000, 0.0).unwrap();
        assert!(r.criticality_gap.unwrap() > 1.0);
        assert!(!r.p_degree_1_ok);
    }

    #[test]
    fn half_half_nu_by_brute_force() {
        let d = cm13(Weight::exact(1, 2), Weight::exact(1, 2));
        // brute force: E[D(D-1)] = (0 + 6)/2, E[D] = (1 + 3)/2
        let brute = (0.5 * 0.0 + 0.5 * 6.0) / (0.5 * 1.0 + 0.5 * 3.0);
        assert!((d.moments().nu().unwrap() - brute).abs() < 1e-15);
        assert_eq!(d.exact_nu(), Some(Rational64::new(3, 2)));
    }

    #[test]
    fn zero_mean_degree_is_flagged() {
        let d = CommunityDistribution::single(Community::household(3).unwrap().clone());
        assert!(d.moments().nu().is_some());
        let iso = CommunityDistribution::single(Community::single_vertex(0));
        let r = check_conditions(&iso, 1000, 0.0).unwrap();
        assert!(r.nu_undefined);
        assert!(r.nu.is_none());
        assert!(!r.p_degree_0_ok);
    }

    #[test]
    fn mixture_moments_are_weighted_sums() {
        let shapes = [
            Community::star(5).unwrap(),
            Community::line(5).unwrap(),
            Community::household(3).unwrap(),
        ];
        let w = [0.2, 0.5, 0.3];
        let d = CommunityDistribution::from_weighted(
            shapes.iter().cloned().zip(w.iter().map(|&x| Weight::Float(x))).collect(),
        )
        .unwrap();
        let m = d.moments();
        let per: Vec<Moments> = shapes
            .iter()
            .map(|c| CommunityDistribution::single(c.clone()).moments())
            .collect();
        let mix = |f: fn(&Moments) -> f64| per.iter().zip(&w).map(|(p, w)| w * f(p)).sum::<f64>();
        assert!((m.mean_size - mix(|p| p.mean_size)).abs() < 1e-12);
        assert!((m.degree_3 - mix(|p| p.degree_3)).abs() < 1e-12);
        assert!((m.degree_size - mix(|p| p.degree_size)).abs() < 1e-12);
        assert!((m.degree_sq_size - mix(|p| p.degree_sq_size)).abs() < 1e-12);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let bad = CommunityDistribution::from_weighted(vec![
            (Community::single_vertex(1), Weight::exact(1, 2)),
            (Community::single_vertex(3), Weight::exact(1, 3)),
        ]);
        assert!(bad.is_err());
        assert!(CommunityDistribution::new(Vec::new()).is_err());
    }

    #[test]
    fn tuning_hits_target_exactly() {
        let a = CommunityDistribution::single(Community::single_vertex(1));
        let b = CommunityDistribution::single(Community::single_vertex(3));
        let (p, mix) = tune_mixture(&a, &b, Rational64::from_integer(1)).unwrap();
        assert_eq!(p, Rational64::new(3, 4));
        assert_eq!(mix.exact_nu(), Some(Rational64::from_integer(1)));
        assert!(tune_mixture(&a, &b, Rational64::from_integer(5)).is_err());
    }

    #[test]
    fn weight_parsing() {
        assert_eq!("1/2".parse::<Weight>().unwrap(), Weight::exact(1, 2));
        assert_eq!("1".parse::<Weight>().unwrap(), Weight::exact(1, 1));
        assert_eq!("0.25".parse::<Weight>().unwrap(), Weight::Float(0.25));
        assert!("x".parse::<Weight>().is_err());
        assert!("1/0".parse::<Weight>().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
[[community]]
shape = "line:5"
weight = "1/2"

[[community]]
text = "1 3\n3\n"
weight = "1/2"
count = 4
"#;
        let d = CommunityDistribution::from_toml(text, None).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(*d.entries()[1].community, Community::single_vertex(3));
        assert_eq!(d.entries()[1].count, Some(4));
        let again = CommunityDistribution::from_toml(&d.to_toml(), None).unwrap();
        assert_eq!(again.len(), 2);
        assert_eq!(again.entries()[0].weight, Weight::exact(1, 2));
        assert_eq!(*again.entries()[0].community, Community::line(5).unwrap());
    }
}
