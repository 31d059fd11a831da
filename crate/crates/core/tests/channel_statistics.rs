//! Monte Carlo and structural checks on channel synthesis.

use nalgebra::{DMatrix, RowDVector};
use num_complex::Complex64 as C64;
use rand::Rng;
use ris_linear::channel::{
    align_phases_to_los, cascade, cascade_terms, complex_gaussian, los_component, ula_steering, upa_steering,
    Angles, ArrayGeometry, JakesFading, ReflectionPattern, RicianLink,
};
use ris_linear::harness::engine::{stream, Purpose};

const LAMBDA: f64 = 0.05;

fn steering_link(rows: usize, cols: usize, k: f64, gain: f64) -> RicianLink {
    let rx = ula_steering(0.4, rows, LAMBDA / 2.0, LAMBDA).unwrap();
    let tx = ula_steering(-1.1, cols, LAMBDA / 2.0, LAMBDA).unwrap();
    RicianLink::new(los_component(&rx, &tx).unwrap(), k, gain).unwrap()
}

#[test]
fn scattered_only_link_has_path_gain_variance() {
    let link = steering_link(2, 2, 0.0, 0.3);
    let rng = &mut stream(1, 0, Purpose::Channel);
    let n = 100_000;
    let mut power = 0.0;
    for _ in 0..n {
        power += link.draw(rng)[(0, 1)].norm_sqr();
    }
    let var = power / n as f64;
    assert!((var / 0.09 - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn rician_mean_is_weighted_los() {
    let link = steering_link(2, 2, 10.0, 0.5);
    let rng = &mut stream(2, 0, Purpose::Channel);
    let n = 100_000;
    let mut sum = C64::new(0.0, 0.0);
    for _ in 0..n {
        sum += link.draw(rng)[(1, 0)];
    }
    let mean = sum / n as f64;
    let want = link.los()[(1, 0)] * (10.0f64 / 11.0).sqrt() * 0.5;
    // per-component std of the mean: 0.5·√(1/11)/√(2n)
    let se = 0.5 * (1.0f64 / 11.0).sqrt() / (2.0 * n as f64).sqrt();
    assert!((mean.re - want.re).abs() < 3.0 * se && (mean.im - want.im).abs() < 3.0 * se);
}

#[test]
fn mixing_preserves_total_power_for_any_factor() {
    for (i, k) in [0.0, 1.0, 10.0, 1000.0].into_iter().enumerate() {
        let link = steering_link(3, 4, k, 0.2);
        let rng = &mut stream(3, i as u64, Purpose::Channel);
        let n = 20_000;
        let p: f64 = (0..n).map(|_| link.draw(rng).norm_squared()).sum::<f64>() / n as f64;
        let want = 0.04 * 12.0;
        assert!((p / want - 1.0).abs() < 0.03, "K={k}: {p}");
    }
}

#[test]
fn planar_los_is_rank_one() {
    let geom = ArrayGeometry::upa(8, 8, LAMBDA / 2.0, LAMBDA).unwrap();
    let rng = &mut stream(4, 0, Purpose::Geometry);
    let rx = upa_steering(Angles::random(rng), &geom).unwrap();
    let tx = ula_steering(0.7, 128, LAMBDA / 2.0, LAMBDA).unwrap();
    let m = los_component(&rx, &tx).unwrap();
    assert_eq!(m.shape(), (64, 128));
    let mut worst = 0.0f64;
    for i in 0..63 {
        for j in (0..127).step_by(7) {
            let det = m[(i, j)] * m[(i + 1, j + 1)] - m[(i, j + 1)] * m[(i + 1, j)];
            worst = worst.max(det.norm());
        }
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn four_terms_recompose_the_cascade() {
    let rng = &mut stream(5, 0, Purpose::Channel);
    let row = steering_link(1, 64, 10.0, 0.1);
    let mat = steering_link(64, 128, 10.0, 0.01);
    let row_nlos = complex_gaussian(1, 64, rng);
    let mat_nlos = complex_gaussian(64, 128, rng);
    let omega = ReflectionPattern::random(64, rng);
    let terms = cascade_terms(&row, &row_nlos, &omega, &mat, &mat_nlos).unwrap();

    let full_row = row.mix(&row_nlos).unwrap();
    let full_mat = mat.mix(&mat_nlos).unwrap();
    let direct = cascade(&RowDVector::from_iterator(64, full_row.iter().copied()), &omega, &full_mat).unwrap();
    let sum = terms.sum();
    let err = (0..128).map(|j| (sum[(0, j)] - direct[j]).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12, "{err}");

    // LoS·LoS term by independent evaluation
    let w = (10.0f64 / 11.0).sqrt() * (10.0f64 / 11.0).sqrt() * 0.1 * 0.01;
    let by_hand = row.los() * omega.matrix() * mat.los() * C64::from(w);
    assert!((&terms.los_los - by_hand).camax() < 1e-14);
}

#[test]
fn alignment_reaches_the_triangle_bound() {
    let rng = &mut stream(6, 0, Purpose::Surface);
    let q = RowDVector::from_fn(16, |_, _| C64::from_polar(rng.random_range(0.1..2.0), rng.random_range(0.0..std::f64::consts::TAU)));
    let g = DMatrix::from_fn(16, 5, |_, _| C64::from_polar(rng.random_range(0.1..2.0), rng.random_range(0.0..std::f64::consts::TAU)));
    let omega = align_phases_to_los(&q, &g, 3).unwrap();
    let aligned = cascade(&q, &omega, &g).unwrap()[3].norm();
    let bound: f64 = (0..16).map(|n| q[n].norm() * g[(n, 3)].norm()).sum();
    assert!((aligned - bound).abs() < 1e-10);
    let flat = cascade(&q, &ReflectionPattern::identity(16), &g).unwrap()[3].norm();
    assert!(flat <= aligned);
}

// ensemble autocorrelation and power over independent fading processes
fn jakes_stats(f_max: f64, tau: f64, n: u64) -> (f64, f64) {
    let mut corr = 0.0;
    let mut power = 0.0;
    for i in 0..n {
        let j = JakesFading::new(1, 1, f_max, &mut stream(7, i, Purpose::Channel)).unwrap();
        let t0 = 0.013 * i as f64;
        let (a, b) = (j.at(t0)[(0, 0)], j.at(t0 + tau)[(0, 0)]);
        corr += (b * a.conj()).re;
        power += a.norm_sqr();
    }
    (corr / n as f64, power / n as f64)
}

#[test]
fn jakes_lag_one_correlation() {
    // f_max = 1 kHz, one 8 µs symbol
    let want = libm::j0(std::f64::consts::TAU * 1e3 * 8e-6);
    let (c, p) = jakes_stats(1e3, 8e-6, 20_000);
    assert!((c / p - want).abs() < 0.01 * want, "{c} vs {want}");
    assert!((p - 1.0).abs() < 0.03);
}

#[test]
fn jakes_decorrelates_at_first_bessel_zero() {
    let first_zero = 2.404_825_557_695_773;
    let tau = first_zero / (std::f64::consts::TAU * 1e3);
    let (c, _) = jakes_stats(1e3, tau, 20_000);
    assert!(c.abs() < 0.02, "{c}");
}

#[test]
fn jakes_marginal_stays_unit_power() {
    let mut j = JakesFading::new(4, 4, 800.0, &mut stream(8, 0, Purpose::Channel)).unwrap();
    let mut mean = C64::new(0.0, 0.0);
    let mut power = 0.0;
    let blocks = 2000;
    for _ in 0..blocks {
        let h = j.evolve_nlos(2e-4).unwrap();
        mean += h.sum();
        power += h.norm_squared();
    }
    let n = (blocks * 16) as f64;
    assert!((mean / n).norm() < 0.05);
    assert!((power / n - 1.0).abs() < 0.05);
}
