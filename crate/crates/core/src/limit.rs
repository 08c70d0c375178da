//! Reflected Brownian motion with parabolic drift, its excursions and marks,
//! and the constants that rescale component sizes onto them.
//!
//! `B(t) = (√η/μ) W(t) + λt - ηt²/(2μ³)` for a standard Brownian motion `W`,
//! reflected as `B(t) - min_{s≤t} B(s)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::distribution::{CommunityDistribution, Moments};
use crate::error::{HcmError, Result};
use crate::kernel::piece_law;
use crate::parallel::map_indexed;
use crate::rng::{derive_seed, purpose, rng_from_seed};
use crate::stats::{ks_two_sample, KsResult};

pub const DEFAULT_HORIZON: f64 = 20.0;

/// Default step: `1e-4 · T`.
pub fn default_dt(t_max: f64) -> f64 {
    1e-4 * t_max
}

/// Default excursion floor: `10 · dt`.
pub fn default_floor(dt: f64) -> f64 {
    10.0 * dt
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitParams {
    pub mu: f64,
    pub eta: f64,
    pub lambda: f64,
}

impl LimitParams {
    pub fn new(mu: f64, eta: f64, lambda: f64) -> Result<Self> {
        if mu.is_nan() || mu <= 0.0 {
            return Err(HcmError::InvalidParameter(format!("μ = {mu} must be positive")));
        }
        if eta.is_nan() || eta < 0.0 {
            return Err(HcmError::InvalidParameter(format!("η = {eta} must be nonnegative")));
        }
        Ok(LimitParams { mu, eta, lambda })
    }

    /// `μ = E[D]`, `η = E[D³]E[D] - E[D²]²`.
    pub fn from_moments(m: &Moments, lambda: f64) -> Result<Self> {
        LimitParams::new(m.mean_degree, m.eta(), lambda)
    }

    /// Deterministic part `λt - ηt²/(2μ³)`.
    pub fn drift(&self, t: f64) -> f64 {
        self.lambda * t - self.eta * t * t / (2.0 * self.mu.powi(3))
    }

    pub fn diffusion(&self) -> f64 {
        self.eta.sqrt() / self.mu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitPath {
    pub dt: f64,
    /// Unreflected process on the grid, `b[0] = 0`.
    pub b: Vec<f64>,
    /// Reflected process.
    pub w: Vec<f64>,
}

fn check_grid(t_max: f64, dt: f64) -> Result<usize> {
    if !(t_max > 0.0 && dt > 0.0) {
        return Err(HcmError::InvalidParameter("T and dt must be positive".into()));
    }
    Ok((t_max / dt).round().max(1.0) as usize)
}

/// Euler path of `B` on `[0, T]` and its reflection. The drift is added
/// exactly per step, so only the Brownian part is discretized.
pub fn simulate_w(params: &LimitParams, t_max: f64, dt: f64, seed: u64) -> Result<LimitPath> {
    let steps = check_grid(t_max, dt)?;
    let mut rng = rng_from_seed(seed);
    let sigma = params.diffusion() * dt.sqrt();
    let mut b = Vec::with_capacity(steps + 1);
    let mut w = Vec::with_capacity(steps + 1);
    let (mut x, mut low) = (0.0f64, 0.0f64);
    b.push(0.0);
    w.push(0.0);
    for i in 1..=steps {
        let z: f64 = rng.sample(StandardNormal);
        x += sigma * z + params.drift(i as f64 * dt) - params.drift((i - 1) as f64 * dt);
        low = low.min(x);
        b.push(x);
        w.push(x - low);
    }
    Ok(LimitPath { dt, b, w })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ExcursionSet {
    /// Lengths, longest first.
    pub lengths: Vec<f64>,
    /// Grid index of the zero before and the zero after each excursion (the
    /// last index for an excursion still open at `T`).
    pub spans: Vec<(usize, usize)>,
}

/// Maximal runs with `W > 0`, measured zero to zero. Runs shorter than
/// `floor` are dropped.
pub fn extract_excursions(w: &[f64], dt: f64, floor: f64) -> ExcursionSet {
    let mut found: Vec<(f64, (usize, usize))> = Vec::new();
    let mut i = 0;
    let n = w.len();
    while i < n {
        if w[i] > 0.0 {
            let start = i.saturating_sub(1);
            let mut j = i;
            while j < n && w[j] > 0.0 {
                j += 1;
            }
            let end = if j < n { j } else { n - 1 };
            let len = (end - start) as f64 * dt;
            if len >= floor {
                found.push((len, (start, end)));
            }
            i = j;
        } else {
            i += 1;
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    ExcursionSet {
        lengths: found.iter().map(|f| f.0).collect(),
        spans: found.iter().map(|f| f.1).collect(),
    }
}

/// Marks with intensity `W/μ`: a mark at grid step `i` with probability
/// `W(t_i) dt / μ`, counted per excursion of `set`.
pub fn simulate_marks(w: &[f64], dt: f64, mu: f64, set: &ExcursionSet, seed: u64) -> Vec<u64> {
    let mut rng = rng_from_seed(seed);
    let mut per_step = vec![false; w.len()];
    for (i, &x) in w.iter().enumerate() {
        let p = (x * dt / mu).clamp(0.0, 1.0);
        per_step[i] = p > 0.0 && rng.random::<f64>() < p;
    }
    set.spans
        .iter()
        .map(|&(a, b)| per_step[a + 1..=b].iter().filter(|&&m| m).count() as u64)
        .collect()
}

/// Longest excursion of each of `paths` independent limit paths. Path `i`
/// uses `derive_seed(seed, [LIMIT_PATH, i])`.
pub fn sample_longest(params: &LimitParams, paths: usize, t_max: f64, dt: f64, seed: u64) -> Result<Vec<f64>> {
    check_grid(t_max, dt)?;
    let floor = default_floor(dt);
    map_indexed(paths, |i| {
        let path = simulate_w(params, t_max, dt, derive_seed(seed, &[purpose::LIMIT_PATH, i as u64]))?;
        Ok(extract_excursions(&path.w, dt, floor).lengths.first().copied().unwrap_or(0.0))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftCheck {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub expected: f64,
    /// `(mean - expected) / stderr`.
    pub z: f64,
}

/// Monte Carlo mean of the unreflected `B(t)` against `λt - ηt²/(2μ³)`.
pub fn drift_check(params: &LimitParams, t: f64, dt: f64, paths: usize, seed: u64) -> Result<DriftCheck> {
    if paths < 2 {
        return Err(HcmError::InvalidParameter("need at least two paths".into()));
    }
    let ends: Vec<f64> = map_indexed(paths, |i| {
        simulate_w(params, t, dt, derive_seed(seed, &[purpose::LIMIT_PATH, i as u64])).map(|p| *p.b.last().unwrap())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mean = crate::stats::mean(&ends);
    let se = crate::stats::stderr(&ends);
    let expected = params.drift(t);
    Ok(DriftCheck {
        t,
        mean,
        stderr: se,
        expected,
        z: if se > 0.0 { (mean - expected) / se } else { 0.0 },
    })
}

/// `E[S]^{-2/3} E[DS] / E[S]`.
pub fn limit_constant(m: &Moments) -> f64 {
    m.mean_size.powf(-2.0 / 3.0) * m.degree_size / m.mean_size
}

/// `E[S]^{-2/3} E[DS] / E[D]`: the factor carrying community-count
/// excursions to vertex counts scaled by `N^{-2/3}`.
pub fn size_scaling_constant(m: &Moments) -> Result<f64> {
    if m.mean_degree <= 0.0 {
        return Err(HcmError::ZeroMeanDegree);
    }
    Ok(m.mean_size.powf(-2.0 / 3.0) * m.degree_size / m.mean_degree)
}

/// `E[S̃]^{-2/3} E[D̃S̃] / E[D̃] · √π`.
pub fn percolated_limit_constant(tilde: &Moments, pi: f64) -> Result<f64> {
    if tilde.mean_degree <= 0.0 || tilde.mean_size <= 0.0 {
        return Err(HcmError::InvalidParameter("exploded moments have a zero denominator".into()));
    }
    Ok(tilde.mean_size.powf(-2.0 / 3.0) * tilde.degree_size / tilde.mean_degree * pi.sqrt())
}

fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut c = 1.0;
    for k in 0..=n {
        if k > 0 {
            c *= (n - k + 1) as f64 / k as f64;
        }
        out.push(c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
    }
    out
}

/// Law of a uniform piece after intra-percolation, without explosion.
pub fn percolated_law(dist: &CommunityDistribution, pi: f64) -> Result<Moments> {
    let mut pairs = Vec::new();
    for e in dist.entries() {
        for (s, j, count) in piece_law(&e.community, pi)? {
            pairs.push((e.weight.value() * count, s as f64, j as f64));
        }
    }
    Ok(Moments::from_pairs(pairs))
}

/// Law of a uniform community after intra-percolation and explosion. A
/// piece with `j` half-edges keeps `Bin(j, √π)` of them and sends each other
/// one to a clone of the same size with a single half-edge.
pub fn exploded_law(dist: &CommunityDistribution, pi: f64) -> Result<Moments> {
    if !(0.0..=1.0).contains(&pi) {
        return Err(HcmError::InvalidParameter(format!("π = {pi} is outside [0, 1]")));
    }
    let q = pi.sqrt();
    let mut pairs = Vec::new();
    for e in dist.entries() {
        let w = e.weight.value();
        for (s, j, count) in piece_law(&e.community, pi)? {
            for (k, pk) in binomial_pmf(j, q).into_iter().enumerate() {
                pairs.push((w * count * pk, s as f64, k as f64));
            }
            if j > 0 && q < 1.0 {
                pairs.push((w * count * j as f64 * (1.0 - q), s as f64, 1.0));
            }
        }
    }
    Ok(Moments::from_pairs(pairs))
}

/// Two-sample KS between scaled empirical sizes and scaled limit lengths.
pub fn compare_distributions(empirical: &[f64], limit: &[f64]) -> KsResult {
    ks_two_sample(empirical, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::community::Community;

    #[test]
    fn deterministic_path() {
        let p = LimitParams::new(2.0, 0.0, 1.5).unwrap();
        let path = simulate_w(&p, 1.0, 0.01, 0).unwrap();
        assert_eq!(path.w[0], 0.0);
        for (i, w) in path.w.iter().enumerate() {
            assert!((w - 1.5 * i as f64 * 0.01).abs() < 1e-12);
        }
    }

    #[test]
    fn reflection_identity() {
        let p = LimitParams::new(1.5, 2.0, -1.0).unwrap();
        let path = simulate_w(&p, 5.0, 1e-3, 3).unwrap();
        let mut low: f64 = 0.0;
        for (b, w) in path.b.iter().zip(&path.w) {
            low = low.min(*b);
            assert_eq!(*w, b - low);
            assert!(*w >= 0.0);
        }
    }

    #[test]
    fn sawtooth_excursions() {
        let w = [0.0, 1.0, 2.0, 0.0, 1.0, 2.0, 3.0, 1.0, 0.0, 0.0];
        let set = extract_excursions(&w, 0.5, 0.0);
        assert_eq!(set.lengths, vec![2.5, 1.5]);
        let bumped = [0.0, 1.0, 2.0, 0.0, 1.0, 7.0, 3.0, 1.0, 0.0, 0.0];
        assert_eq!(extract_excursions(&bumped, 0.5, 0.0).lengths, set.lengths);
        let open = [0.0, 1.0, 1.0, 1.0];
        assert_eq!(extract_excursions(&open, 1.0, 0.0).lengths, vec![3.0]);
        assert!(extract_excursions(&w, 0.5, 2.0).lengths.len() == 1);
    }

    #[test]
    fn marks_follow_intensity() {
        let zero = [0.0; 100];
        let set = ExcursionSet {
            lengths: vec![99.0],
            spans: vec![(0, 99)],
        };
        assert_eq!(simulate_marks(&zero, 1.0, 1.0, &set, 1), vec![0]);
        let mut w = vec![2.0; 1001];
        w[0] = 0.0;
        let set = extract_excursions(&w, 0.01, 0.0);
        let total: u64 = (0..2000).map(|s| simulate_marks(&w, 0.01, 4.0, &set, s)[0]).sum();
        let mean = total as f64 / 2000.0;
        assert!((mean - 5.0).abs() < 3.0 * (5.0f64 / 2000.0).sqrt(), "{mean}");
    }

    #[test]
    fn constants() {
        let cm = catalog::cm_critical().moments();
        assert!((limit_constant(&cm) - cm.mean_degree).abs() < 1e-12);
        assert!((size_scaling_constant(&cm).unwrap() - 1.0).abs() < 1e-12);
        let hh = CommunityDistribution::single(Community::household(3).unwrap()).moments();
        assert!((limit_constant(&hh) - 3f64.cbrt()).abs() < 1e-12);
        let star = catalog::star(5).unwrap().moments();
        assert!((limit_constant(&star) - 6f64.powf(-2.0 / 3.0) * 5.0).abs() < 1e-12);
    }

    #[test]
    fn percolated_constant_at_one() {
        let d = catalog::cm_critical();
        let tilde = exploded_law(&d, 1.0).unwrap();
        assert_eq!(tilde, d.moments());
        let c1 = percolated_limit_constant(&tilde, 1.0).unwrap();
        let c4 = percolated_limit_constant(&tilde, 0.25).unwrap();
        assert!((c4 / c1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exploded_single_vertex_closed_form() {
        // single_vertex(2): a piece keeps Bin(2, q) half-edges and spawns
        // 2(1-q) clones on average.
        let d = CommunityDistribution::single(Community::single_vertex(2));
        let q: f64 = 0.6;
        let m = exploded_law(&d, q * q).unwrap();
        let total = 1.0 + 2.0 * (1.0 - q);
        assert!((m.mean_degree - (2.0 * q + 2.0 * (1.0 - q)) / total).abs() < 1e-12);
        assert!((m.mean_size - 1.0).abs() < 1e-12);
    }
}
