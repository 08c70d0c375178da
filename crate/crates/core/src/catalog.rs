//! Named catalogs used by the experiments.

use num_rational::Rational64;

use crate::community::Community;
use crate::distribution::{tune_mixture, CommunityDistribution, Weight};
use crate::error::Result;

/// Every community is `star(l)`.
pub fn star(l: usize) -> Result<CommunityDistribution> {
    Ok(CommunityDistribution::single(Community::star(l)?))
}

/// `line(5)` and `single_vertex(3)`, each with weight 1/2.
pub fn line_mix() -> CommunityDistribution {
    CommunityDistribution::from_weighted(vec![
        (Community::line(5).expect("valid"), Weight::exact(1, 2)),
        (Community::single_vertex(3), Weight::exact(1, 2)),
    ])
    .expect("weights sum to 1")
}

/// Configuration model with degrees in {1, 3} mixed so that `ν_D = target`.
pub fn cm_tuned(target: Rational64) -> Result<CommunityDistribution> {
    let a = CommunityDistribution::single(Community::single_vertex(1));
    let b = CommunityDistribution::single(Community::single_vertex(3));
    tune_mixture(&a, &b, target).map(|(_, d)| d)
}

/// Critical configuration model: `P(D=1) = 3/4`, `P(D=3) = 1/4`.
pub fn cm_critical() -> CommunityDistribution {
    cm_tuned(Rational64::from_integer(1)).expect("ν = 1 is reachable")
}

/// Critical catalog built around `household(3)`: weights 2/11 household(3),
/// 6/11 single_vertex(1), 3/11 line(5). Gives `ν_D = 1` and
/// `E[DS]/E[D] = 3` with sizes 1, 3 and 5.
pub fn household_critical() -> CommunityDistribution {
    CommunityDistribution::from_weighted(vec![
        (Community::household(3).expect("valid"), Weight::exact(2, 11)),
        (Community::single_vertex(1), Weight::exact(6, 11)),
        (Community::line(5).expect("valid"), Weight::exact(3, 11)),
    ])
    .expect("weights sum to 1")
}

/// Critical households of size at most 3: weights 3/5, 1/5, 1/5 on k = 1, 2, 3.
pub fn household_small_critical() -> CommunityDistribution {
    CommunityDistribution::from_weighted(vec![
        (Community::household(1).expect("valid"), Weight::exact(3, 5)),
        (Community::household(2).expect("valid"), Weight::exact(1, 5)),
        (Community::household(3).expect("valid"), Weight::exact(1, 5)),
    ])
    .expect("weights sum to 1")
}

/// `household_small_critical` plus a heavy class of isolated communities
/// (degree 0, all edges of a path so the community is connected) of size
/// `⌈n^{1/3}⌉` and weight `ε n^{-1/3}`, so that `E[S_n^2] ≈ ε n^{1/3}`.
/// Degree-0 communities leave `ν_D` unchanged.
pub fn heavy_size_class(n: u64, epsilon: f64) -> Result<CommunityDistribution> {
    let nf = n as f64;
    let size = nf.cbrt().ceil() as usize;
    let q = (epsilon * nf.powf(-1.0 / 3.0)).min(0.5);
    let heavy = Community::new(
        size,
        (0..size as u32 - 1).map(|i| (i, i + 1)).collect(),
        vec![0; size],
    )?;
    let mut items: Vec<(Community, Weight)> = household_small_critical()
        .entries()
        .iter()
        .map(|e| ((*e.community).clone(), Weight::Float(e.weight.value() * (1.0 - q))))
        .collect();
    items.push((heavy, Weight::Float(q)));
    CommunityDistribution::from_weighted(items)
}

/// Looks up a catalog by name.
pub fn named(name: &str) -> Option<CommunityDistribution> {
    match name {
        "star5" => star(5).ok(),
        "line-mix" => Some(line_mix()),
        "cm-critical" => Some(cm_critical()),
        "household-critical" => Some(household_critical()),
        "household-small" => Some(household_small_critical()),
        _ => None,
    }
}

pub const NAMES: &[&str] = &["star5", "line-mix", "cm-critical", "household-critical", "household-small"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_catalogs_have_unit_nu() {
        let one = Some(Rational64::from_integer(1));
        assert_eq!(cm_critical().exact_nu(), one);
        assert_eq!(household_critical().exact_nu(), one);
        assert_eq!(household_small_critical().exact_nu(), one);
    }

    #[test]
    fn household_critical_size_bias_is_three() {
        let m = household_critical().moments();
        assert!((m.degree_size / m.mean_degree - 3.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_class_second_moment() {
        for n in [10_000u64, 100_000] {
            let d = heavy_size_class(n, 1.0).unwrap();
            let m = d.moments();
            let scaled = m.mean_size_sq / (n as f64).cbrt();
            assert!(scaled > 0.9 && scaled < 1.5, "{scaled}");
            assert!((m.nu().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn names_resolve() {
        for name in NAMES {
            assert!(named(name).is_some(), "{name}");
        }
        assert!(named("nope").is_none());
    }
}
