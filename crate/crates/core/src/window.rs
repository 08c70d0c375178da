//! Percolated criticality parameter and the critical window.
//!
//! `ν(π) = Σ_H P(H) Σ_v d_v Σ_{k=1}^{d_H-1} B(H, v, k+1, π) / E[D]`, and the
//! window `π_n(λ)` solves `π ν(π) = 1 + λ n^{-1/3}`.

use serde::Serialize;

use crate::distribution::CommunityDistribution;
use crate::error::{HcmError, Result};
use crate::kernel::KernelCache;

/// Grid used to bracket roots before bisection.
const BRACKET_POINTS: usize = 64;
/// Bisection stops once the bracket is narrower than this.
const BISECTION_WIDTH: f64 = 1e-12;

fn weighted_sum(
    dist: &CommunityDistribution,
    pi: f64,
    derivative: bool,
    cache: &KernelCache,
) -> Result<f64> {
    let mut total = 0.0;
    for e in dist.entries() {
        let h = &e.community;
        let d = h.degree() as usize;
        if d < 2 {
            continue;
        }
        let table = cache.table(h, pi, derivative)?;
        let mut inner = 0.0;
        for (v, &dv) in h.out_degrees().iter().enumerate() {
            if dv == 0 {
                continue;
            }
            let s: f64 = (2..=d)
                .map(|k| {
                    if derivative {
                        table.b_prime_at(v, k).unwrap_or(0.0)
                    } else {
                        table.b_at(v, k)
                    }
                })
                .sum();
            inner += dv as f64 * s;
        }
        total += e.weight.value() * inner;
    }
    Ok(total)
}

fn mean_degree(dist: &CommunityDistribution) -> Result<f64> {
    let ed = dist.moments().mean_degree;
    if ed > 0.0 {
        Ok(ed)
    } else {
        Err(HcmError::ZeroMeanDegree)
    }
}

/// `ν_{D^(π)}` with exact kernels.
pub fn nu_percolated(dist: &CommunityDistribution, pi: f64) -> Result<f64> {
    nu_percolated_with(dist, pi, &KernelCache::default())
}

pub fn nu_percolated_with(dist: &CommunityDistribution, pi: f64, cache: &KernelCache) -> Result<f64> {
    let ed = mean_degree(dist)?;
    Ok(weighted_sum(dist, pi, false, cache)? / ed)
}

/// `dν/dπ`.
pub fn nu_derivative_with(dist: &CommunityDistribution, pi: f64, cache: &KernelCache) -> Result<f64> {
    let ed = mean_degree(dist)?;
    Ok(weighted_sum(dist, pi, true, cache)? / ed)
}

/// Smallest root in `(0, 1]` of the nondecreasing map `f` at level `target`,
/// found by a grid bracket and bisection. `None` when `f(1) < target`.
fn bisect_increasing(mut f: impl FnMut(f64) -> Result<f64>, target: f64) -> Result<Option<f64>> {
    if f(1.0)? < target {
        return Ok(None);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    for j in 1..=BRACKET_POINTS {
        let x = j as f64 / BRACKET_POINTS as f64;
        if f(x)? >= target {
            hi = x;
            break;
        }
        lo = x;
    }
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalWindowSolution {
    pub lambda: f64,
    pub n: u64,
    pub pi: f64,
    pub nu_at_pi: f64,
    pub c_star: f64,
    pub pi_approx: f64,
    /// `|π ν(π) - (1 + λ n^{-1/3})|`.
    pub residual: f64,
    /// Whether `ν(π) > 1`, i.e. intra-percolation alone keeps the graph
    /// supercritical at the solution.
    pub supercritical_inside: bool,
}

fn window_target(n: u64, lambda: f64) -> Result<f64> {
    if n == 0 {
        return Err(HcmError::InvalidParameter("n must be >= 1".into()));
    }
    let target = 1.0 + lambda / (n as f64).cbrt();
    if target <= 0.0 {
        return Err(HcmError::OutsideWindow {
            target,
            reason: "1 + λ n^{-1/3} is not positive".into(),
        });
    }
    Ok(target)
}

/// Root of `π ν(π) = target` in `(0, 1]`.
pub fn solve_fixed_point(dist: &CommunityDistribution, target: f64, cache: &KernelCache) -> Result<f64> {
    let ed = mean_degree(dist)?;
    let root = bisect_increasing(|p| Ok(p * weighted_sum(dist, p, false, cache)? / ed), target)?;
    root.ok_or_else(|| HcmError::OutsideWindow {
        target,
        reason: "target exceeds ν at π = 1".into(),
    })
}

/// `c*` evaluated at a given `π`.
pub fn c_star_at(dist: &CommunityDistribution, pi: f64, cache: &KernelCache) -> Result<f64> {
    let ed = mean_degree(dist)?;
    let deriv = weighted_sum(dist, pi, true, cache)?;
    Ok(ed / (ed + pi * pi * deriv))
}

/// `c*` at the limiting fixed point `π ν(π) = 1`.
pub fn c_star(dist: &CommunityDistribution) -> Result<f64> {
    c_star_with(dist, &KernelCache::default())
}

pub fn c_star_with(dist: &CommunityDistribution, cache: &KernelCache) -> Result<f64> {
    let pi0 = solve_fixed_point(dist, 1.0, cache)?;
    c_star_at(dist, pi0, cache)
}

/// `π_n(0) (1 + c* λ / n^{1/3})`.
pub fn pi_window_approx(dist: &CommunityDistribution, n: u64, lambda: f64) -> Result<f64> {
    pi_window_approx_with(dist, n, lambda, &KernelCache::default())
}

pub fn pi_window_approx_with(dist: &CommunityDistribution, n: u64, lambda: f64, cache: &KernelCache) -> Result<f64> {
    if n == 0 {
        return Err(HcmError::InvalidParameter("n must be >= 1".into()));
    }
    let pi0 = solve_fixed_point(dist, 1.0, cache)?;
    let cs = c_star_at(dist, pi0, cache)?;
    Ok(pi0 * (1.0 + cs * lambda / (n as f64).cbrt()))
}

pub fn solve_pi_critical(dist: &CommunityDistribution, n: u64, lambda: f64) -> Result<CriticalWindowSolution> {
    solve_pi_critical_with(dist, n, lambda, &KernelCache::default())
}

pub fn solve_pi_critical_with(
    dist: &CommunityDistribution,
    n: u64,
    lambda: f64,
    cache: &KernelCache,
) -> Result<CriticalWindowSolution> {
    let target = window_target(n, lambda)?;
    let pi = solve_fixed_point(dist, target, cache)?;
    let nu = nu_percolated_with(dist, pi, cache)?;
    let pi0 = solve_fixed_point(dist, 1.0, cache)?;
    let cs = c_star_at(dist, pi0, cache)?;
    Ok(CriticalWindowSolution {
        lambda,
        n,
        pi,
        nu_at_pi: nu,
        c_star: cs,
        pi_approx: pi0 * (1.0 + cs * lambda / (n as f64).cbrt()),
        residual: (pi * nu - target).abs(),
        supercritical_inside: nu > 1.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PinPoutCurve {
    /// `(π_in, π_out)`; `π_out` is `None` where `ν(π_in) = 0`.
    pub points: Vec<(f64, Option<f64>)>,
    pub intersection: f64,
}

/// `π_out(π_in) = (1 + λ n^{-1/3}) / ν(π_in)` on `grid`, plus the crossing
/// with the diagonal.
pub fn pin_pout_curve(dist: &CommunityDistribution, n: u64, lambda: f64, grid: &[f64]) -> Result<PinPoutCurve> {
    pin_pout_curve_with(dist, n, lambda, grid, &KernelCache::default())
}

pub fn pin_pout_curve_with(
    dist: &CommunityDistribution,
    n: u64,
    lambda: f64,
    grid: &[f64],
    cache: &KernelCache,
) -> Result<PinPoutCurve> {
    let target = window_target(n, lambda)?;
    let mut points = Vec::with_capacity(grid.len());
    for &p in grid {
        if !(p > 0.0 && p <= 1.0) {
            return Err(HcmError::InvalidParameter(format!("grid point {p} is outside (0, 1]")));
        }
        let nu = nu_percolated_with(dist, p, cache)?;
        points.push((p, (nu > 0.0).then(|| target / nu)));
    }
    // π_in - π_out(π_in) is increasing; undefined points count as below zero.
    let gap = |p: f64| -> Result<f64> {
        let nu = nu_percolated_with(dist, p, cache)?;
        Ok(if nu > 0.0 { p - target / nu } else { f64::NEG_INFINITY })
    };
    let root = bisect_increasing(gap, 0.0)?.ok_or_else(|| HcmError::OutsideWindow {
        target,
        reason: "π_out stays above π_in on (0, 1]".into(),
    })?;
    Ok(PinPoutCurve {
        points,
        intersection: root,
    })
}
