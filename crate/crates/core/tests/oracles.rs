//! Hand-derived reference values.

use num_rational::Rational64;

use hcm::catalog;
use hcm::community::Community;
use hcm::distribution::{check_conditions, tune_mixture, CommunityDistribution, Weight};
use hcm::exploration::{explore, surplus};
use hcm::generator::{build_graph, CommunitySequence, Pairing};
use hcm::kernel::{exact_b, exact_table};
use hcm::limit::{exploded_law, LimitParams};
use hcm::window::{c_star, nu_percolated, solve_pi_critical};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b}");
}

#[test]
fn star_moments() {
    let m = catalog::star(5).unwrap().moments();
    close(m.mean_degree, 5.0, 0.0);
    close(m.nu().unwrap(), 4.0, 1e-12);
    close(m.mean_size, 6.0, 0.0);
}

#[test]
fn degree_one_three_mixture() {
    let d = CommunityDistribution::from_weighted(vec![
        (Community::single_vertex(1), Weight::exact(1, 2)),
        (Community::single_vertex(3), Weight::exact(1, 2)),
    ])
    .unwrap();
    assert_eq!(d.exact_nu(), Some(Rational64::new(3, 2)));
    let (p, tuned) = tune_mixture(
        &CommunityDistribution::single(Community::single_vertex(1)),
        &CommunityDistribution::single(Community::single_vertex(3)),
        Rational64::from_integer(1),
    )
    .unwrap();
    assert_eq!(p, Rational64::new(3, 4));
    assert_eq!(tuned.exact_nu(), Some(Rational64::from_integer(1)));
}

#[test]
fn zero_degree_is_flagged() {
    let d = CommunityDistribution::single(Community::single_vertex(0));
    let r = check_conditions(&d, 1000, 0.0).unwrap();
    assert!(r.nu_undefined);
    assert!(!r.p_degree_0_ok);
}

#[test]
fn household_k4_surplus() {
    let h = Community::household(4).unwrap();
    assert_eq!(h.edge_count(), 6);
    assert_eq!(h.surplus(), 3);
}

#[test]
fn household_size_bias() {
    let m = CommunityDistribution::single(Community::household(3).unwrap()).moments();
    close(m.degree_size, 9.0, 0.0);
    close(m.degree_size / m.mean_degree, 3.0, 0.0);
}

#[test]
fn star_kernel_closed_form() {
    // A leaf of star(l) reaches the centre with probability π, and from there
    // each of the other l-1 leaves independently with probability π.
    let h = Community::star(5).unwrap();
    let pi: f64 = 0.6;
    // g(leaf, 1) = 1 - π + π (1-π)^4
    let t = exact_table(&h, pi, false).unwrap();
    close(t.g[1][1], 1.0 - pi + pi * (1.0 - pi).powi(4), 1e-12);
    close(exact_b(&h, 1, 5, pi).unwrap(), pi.powi(5), 1e-12);
}

#[test]
fn star_nu_closed_form() {
    // ν for star(5) after percolation is 4π².
    let d = catalog::star(5).unwrap();
    for pi in [0.3, 0.5, 0.9] {
        close(nu_percolated(&d, pi).unwrap(), 4.0 * pi * pi, 1e-12);
    }
}

#[test]
fn star_critical_point() {
    let s = solve_pi_critical(&catalog::star(5).unwrap(), 100_000, 0.0).unwrap();
    close(s.pi, 0.25f64.cbrt(), 1e-10);
    close(c_star(&catalog::star(5).unwrap()).unwrap(), 1.0 / 3.0, 1e-10);
}

#[test]
fn triangle_surplus() {
    // Three single-vertex communities of degree 2 paired into a triangle.
    let seq = CommunitySequence::new((0..3).map(|_| std::sync::Arc::new(Community::single_vertex(2))).collect());
    let pairing = Pairing::from_pairs(6, &[(1, 2), (3, 4), (5, 0)]).unwrap();
    let g = build_graph(seq, pairing).unwrap();
    assert_eq!(surplus(&g, &[0, 1, 2]).unwrap(), (1, 1));
    let t = explore(&g, 0);
    assert_eq!(t.q, vec![0, 0, 0, -2]);
}

#[test]
fn limit_params_for_critical_cm() {
    let m = catalog::cm_critical().moments();
    // P(D=1) = 3/4, P(D=3) = 1/4: E[D] = 3/2, E[D²] = 3, E[D³] = 15/2.
    let p = LimitParams::from_moments(&m, 0.0).unwrap();
    close(p.mu, 1.5, 1e-12);
    close(p.eta, 7.5 * 1.5 - 9.0, 1e-12);
}

#[test]
fn explosion_at_one_is_identity_law() {
    let d = catalog::household_critical();
    let a = exploded_law(&d, 1.0).unwrap();
    let b = d.moments();
    close(a.mean_size, b.mean_size, 1e-12);
    close(a.degree_size, b.degree_size, 1e-12);
}
