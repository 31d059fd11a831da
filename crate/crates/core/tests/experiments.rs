//! Behaviour of the closed forms and the experiment runners on small cases.

use ris_linear::analysis::{
    closed_form_ser, diff_gamma_pdf, gamma_pdf, rician_envelope_pdf, GammaParams, SeriesControl,
};
use ris_linear::harness::ber::{run_downlink_ber, Scheme, Sweep};
use ris_linear::harness::engine::Engine;
use ris_linear::harness::pdf::{ks_distance, PdfPoint};
use ris_linear::harness::scenario::{uplink_instance, LinkParams};
use ris_linear::harness::snr::run_output_snr;
use ris_linear::harness::{parse_scenario, run_pdf_fit, ScenarioConfig};
use ris_linear::uplink::rho_exact;
use ris_linear::waveform::NoiseModel;

fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|i| f(a + i as f64 * h) * if i == 0 || i == n { 0.5 } else { 1.0 })
        .sum::<f64>()
        * h
}

fn normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / std::f64::consts::SQRT_2)
}

#[test]
fn densities_integrate_to_one() {
    let p = GammaParams::new(0.5, 2.0).unwrap();
    let gam = trapezoid(|x| gamma_pdf(x, &p), 0.0, 60.0, 200_000);
    assert!((gam - 1.0).abs() < 1e-8, "{gam}");

    let env = trapezoid(|t| rician_envelope_pdf(t, 1.4, 0.25), 0.0, 12.0, 200_000);
    assert!((env - 1.0).abs() < 1e-8, "{env}");
    let rayleigh = trapezoid(|t| rician_envelope_pdf(t, 0.0, 0.25), 0.0, 12.0, 200_000);
    assert!((rayleigh - 1.0).abs() < 1e-8, "{rayleigh}");

    let (a, b) = (GammaParams::new(0.5, 1.0).unwrap(), GammaParams::new(0.5, 2.0).unwrap());
    let ctl = SeriesControl::sized_for(&a, &b, 1e-14);
    // the density has a kink at 0; integrate each side separately
    let f = |x| diff_gamma_pdf(x, &a, &b, &ctl).unwrap();
    let total = trapezoid(f, -40.0, 0.0, 100_000) + trapezoid(f, 0.0, 40.0, 100_000);
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn gaussian_fit_improves_with_snr() {
    // same gamma, shrinking σ_v²
    let errs: Vec<f64> = [0.1f64, 0.01, 0.001]
        .iter()
        .map(|&sv2| {
            let snr_db = 10.0 * (1.0 / (2.0 * sv2)).log10();
            let pt = PdfPoint::new(1.0, 0.0, snr_db).unwrap();
            let norm = (2.0 * std::f64::consts::PI).sqrt();
            (0..241)
                .map(|i| -6.0 + 0.05 * i as f64)
                .map(|u| (pt.exact_density(u).unwrap() - (-0.5 * u * u).exp() / norm).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn standardized_moments_at_moderate_noise() {
    let snr_db = 10.0 * (1.0f64 / 0.02).log10(); // σ_v² = 0.01
    let pt = PdfPoint::new(1.0, 0.0, snr_db).unwrap();
    let u = pt.sample(5, 0, 400_000);
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    let var = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.01, "{mean}");
    assert!((var - 1.0).abs() < 0.01, "{var}");
}

#[test]
fn fitted_curves_are_densities() {
    let mut cfg = ScenarioConfig::default();
    cfg.pdf_samples = 100_000;
    let r = run_pdf_fit(&cfg, &[7.0, 27.0], &Engine::new(1).unwrap()).unwrap();
    let width = 2.0 * cfg.pdf_span / cfg.pdf_bins as f64;
    for s in &r.series {
        let mass: f64 = s.values.iter().sum::<f64>() * width;
        assert!((mass - 1.0).abs() < 1e-3, "{}: {mass}", s.name);
    }
}

#[test]
fn exact_density_beats_gaussian_at_low_snr() {
    let pt = PdfPoint::new(1.0, 0.0, 7.0).unwrap();
    let mut u = pt.sample(9, 0, 50_000);
    u.sort_unstable_by(f64::total_cmp);
    let step = 0.01;
    let grid: Vec<f64> = (0..=1600).map(|i| -8.0 + step * i as f64).collect();
    let dens: Vec<f64> = grid.iter().map(|&x| pt.exact_density(x).unwrap()).collect();
    let mut cdf = vec![0.0; grid.len()];
    for i in 1..grid.len() {
        cdf[i] = cdf[i - 1] + 0.5 * step * (dens[i] + dens[i - 1]);
    }
    let exact_cdf = |x: f64| {
        let t = ((x + 8.0) / step).clamp(0.0, 1599.999);
        let i = t as usize;
        cdf[i] + (t - i as f64) * (cdf[i + 1] - cdf[i])
    };
    let ks_exact = ks_distance(&u, exact_cdf);
    let ks_gauss = ks_distance(&u, normal_cdf);
    assert!(ks_exact <= ks_gauss, "{ks_exact} vs {ks_gauss}");
}

#[test]
fn closed_form_ser_falls_with_snr() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_users = 3;
    cfg.n_bs_antennas = 16;
    let set = uplink_instance(&cfg, &LinkParams::from_config(&cfg), 0).unwrap();
    let rho = rho_exact(&set);
    let power = set.c().norm_squared() / set.c().len() as f64;
    let sers: Vec<f64> = [0.0, 10.0, 20.0, 30.0]
        .iter()
        .map(|db: &f64| {
            let noise = NoiseModel::new(power / 10f64.powf(db / 10.0)).unwrap();
            closed_form_ser(&rho, &noise, &set).unwrap().ser
        })
        .collect();
    assert!(sers.windows(2).all(|w| w[1] <= w[0]), "{sers:?}");
    assert!(sers.iter().all(|s| (0.0..=1.0).contains(s)));
}

#[test]
fn output_snr_tracks_antennas_and_noise() {
    let mut cfg = ScenarioConfig::default();
    cfg.n_users = 4;
    cfg.snr_draws = 100;
    let e = Engine::new(1).unwrap();
    let grid = [16.0, 32.0, 64.0, 128.0];
    let at = |s2: f64| {
        let mut c = cfg.clone();
        c.noise_sigma2 = Some(s2);
        run_output_snr(&c, &grid, &e).unwrap().series("exact").unwrap().values.clone()
    };
    let lo = at(0.01);
    // about 3 dB per doubling of the array once N_t ≫ N_k
    for w in lo.windows(2).skip(1) {
        assert!((w[1] - w[0] - 3.0).abs() < 0.5, "{lo:?}");
    }
    let hi = at(0.1);
    for (a, b) in lo.iter().zip(&hi) {
        assert!((a - b - 10.0).abs() < 0.2, "{a} vs {b}");
    }
}

#[test]
fn static_noiseless_precoding_makes_no_errors() {
    let mut cfg = ScenarioConfig::default();
    cfg.apply_desk_scale();
    cfg.noise_sigma2 = Some(0.0);
    cfg.speed = 0.0;
    cfg.max_trials = 20_000;
    let r = run_downlink_ber(&cfg, Scheme::LinearPrecoded, Sweep::Ebn0, &[0.0, 6.0], &Engine::new(1).unwrap()).unwrap();
    assert_eq!(r.series[0].values, vec![0.0, 0.0]);
}

#[test]
fn qam_degrades_with_speed() {
    let mut cfg = ScenarioConfig::default();
    cfg.apply_desk_scale();
    cfg.target_errors = 500;
    let r = run_downlink_ber(&cfg, Scheme::QamMlBaseline, Sweep::Speed, &[10.0, 50.0], &Engine::new(1).unwrap()).unwrap();
    let v = &r.series[0].values;
    assert!(v[1] > v[0], "{v:?}");
}

#[test]
fn empty_scenario_is_the_default() {
    let cfg = parse_scenario("# nothing\n\n").unwrap();
    assert_eq!(cfg, ScenarioConfig::default());
    let still = parse_scenario("speed = 0\n").unwrap();
    assert_eq!(still.speed, 0.0);
    still.validate().unwrap();
}
