//! Density of the detector output against the exact series and the
//! Gaussian approximation.
//!
//! For each SNR point `γ/β` (dB) the run samples
//! `z̃ = |√γ + v₁|² − |√γ′ + v₂|²` and reports three densities on the
//! standardized axis `u = (z̃ − μ)/σ`: the histogram, the series density and
//! the standard normal.

use super::config::ScenarioConfig;
use super::engine::{stream, Engine, Purpose};
use super::result::{format_float, CurveResult, Series};
use crate::analysis::{diff_gamma_pdf, GammaParams, SeriesControl};
use crate::channel::complex_normal;
use crate::error::{Error, Result};
use crate::special::normal_cdf;
use num_complex::Complex64;

/// Samples drawn per work item.
pub const SAMPLES_PER_ITEM: usize = 1 << 16;

/// Model of one SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdfPoint {
    pub p: GammaParams,
    pub q: GammaParams,
    pub mu: f64,
    pub sigma: f64,
}

impl PdfPoint {
    /// `SNR = γ/β` with `γ = pdf_gamma`.
    pub fn new(gamma: f64, gamma_prime: f64, snr_db: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::config_key("pdf_gamma", "must be positive to define an SNR"));
        }
        let beta = gamma / 10f64.powf(snr_db / 10.0);
        let p = GammaParams::new(beta, gamma)?;
        let q = GammaParams::new(beta, gamma_prime)?;
        let sv2 = beta / 2.0;
        let sigma2 = 4.0 * sv2 * (gamma + gamma_prime) + 8.0 * sv2 * sv2;
        Ok(PdfPoint {
            p,
            q,
            mu: gamma - gamma_prime,
            sigma: sigma2.sqrt(),
        })
    }

    pub fn sigma_v2(&self) -> f64 {
        self.p.beta() / 2.0
    }

    /// Standardized samples `(z̃ − μ)/σ`.
    pub fn sample(&self, seed: u64, key: u64, n: usize) -> Vec<f64> {
        let rng = &mut stream(seed, key, Purpose::Noise);
        let s = self.p.beta().sqrt();
        let a = Complex64::from(self.p.gamma().sqrt());
        let b = Complex64::from(self.q.gamma().sqrt());
        (0..n)
            .map(|_| {
                let z = (a + complex_normal(rng) * s).norm_sqr() - (b + complex_normal(rng) * s).norm_sqr();
                (z - self.mu) / self.sigma
            })
            .collect()
    }

    /// Series density on the standardized axis.
    pub fn exact_density(&self, u: f64) -> Result<f64> {
        let ctl = SeriesControl::sized_for(&self.p, &self.q, 1e-12);
        Ok(self.sigma * diff_gamma_pdf(self.mu + self.sigma * u, &self.p, &self.q, &ctl)?)
    }
}

/// Kolmogorov–Smirnov distance between sorted samples and a CDF.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

fn snr_label(x: f64) -> String {
    format!("{x}").replace('-', "m")
}

/// Histogram, series and Gaussian densities for every SNR point.
pub fn run_pdf_fit(cfg: &ScenarioConfig, snr_points: &[f64], engine: &Engine) -> Result<CurveResult> {
    cfg.validate()?;
    super::config::check_increasing("grid", snr_points)?;
    let bins = cfg.pdf_bins;
    let span = cfg.pdf_span;
    let width = 2.0 * span / bins as f64;
    let centers: Vec<f64> = (0..bins).map(|i| -span + (i as f64 + 0.5) * width).collect();
    let mut out = CurveResult::new("u", centers.clone());
    out.meta("experiment", "pdf-fit");
    out.meta("seed", cfg.seed.to_string());
    out.meta("axis", "u = (z - mu)/sigma; densities are per unit u");
    out.meta("snr", "gamma/beta with beta = 2 sigma_v^2");
    out.meta("gamma", format_float(cfg.pdf_gamma));
    out.meta("gamma_prime", format_float(cfg.pdf_gamma_prime));

    for (pi, &x) in snr_points.iter().enumerate() {
        let pt = PdfPoint::new(cfg.pdf_gamma, cfg.pdf_gamma_prime, x)?;
        let n_items = cfg.pdf_samples.div_ceil(SAMPLES_PER_ITEM) as u64;
        let chunks = engine.map(n_items, |k| {
            let take = SAMPLES_PER_ITEM.min(cfg.pdf_samples - k as usize * SAMPLES_PER_ITEM);
            Ok(pt.sample(cfg.seed, ((pi as u64) << 40) | k, take))
        })?;
        let mut samples: Vec<f64> = chunks.into_iter().flatten().collect();
        let n = samples.len();
        let mut counts = vec![0u64; bins];
        for &u in &samples {
            let b = ((u + span) / width).floor();
            if b >= 0.0 && (b as usize) < bins {
                counts[b as usize] += 1;
            }
        }
        samples.sort_unstable_by(f64::total_cmp);
        let ks = ks_distance(&samples, normal_cdf);

        let exact = engine
            .map(bins as u64, |i| pt.exact_density(centers[i as usize]))
            .map_err(|e| e.at_point("snr_db", x))?;
        let label = snr_label(x);
        let mut emp = Series::new(format!("empirical_snr{label}"));
        let mut ser = Series::new(format!("exact_snr{label}"));
        let mut gau = Series::new(format!("gaussian_snr{label}"));
        let norm = (2.0 * std::f64::consts::PI).sqrt();
        for (i, &u) in centers.iter().enumerate() {
            let p = counts[i] as f64 / n as f64;
            emp.push(p / width, n as u64, super::result::binomial_ci95(p, n as u64) / width);
            ser.push(exact[i], 0, 0.0);
            gau.push((-0.5 * u * u).exp() / norm, 0, 0.0);
        }
        out.series.extend([emp, ser, gau]);
        out.meta(format!("sigma_v2_snr{label}"), format_float(pt.sigma_v2()));
        out.meta(format!("ks_gaussian_snr{label}"), format_float(ks));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_moments() {
        // SNR 27 dB with γ = 1 → β ≈ 0.002
        let pt = PdfPoint::new(1.0, 0.0, 10.0 * 500f64.log10()).unwrap();
        assert!((pt.sigma_v2() - 0.001).abs() < 1e-15);
        assert!((pt.sigma * pt.sigma - (0.004 + 8e-6)).abs() < 1e-12);
    }

    #[test]
    fn ks_of_perfect_grid() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn small_run_shapes() {
        let mut cfg = ScenarioConfig::default();
        cfg.pdf_samples = 5000;
        cfg.pdf_bins = 20;
        let e = Engine::new(2).unwrap();
        let r = run_pdf_fit(&cfg, &[10.0, 20.0], &e).unwrap();
        assert_eq!(r.series.len(), 6);
        assert_eq!(r.x_values.len(), 20);
        r.validate().unwrap();
    }
}
