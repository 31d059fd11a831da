//! Output SNR of the precoded linear model against its closed forms.
//!
//! Each work item draws an equivalent channel with i.i.d. `N(0, 1)`
//! entries, builds the unit-power ZF precoder and sends `snr_symbols`
//! symbol vectors. The simulated SNR of a draw is `ρ²` over the empirical
//! variance of `z − ρx̄`; curves report the mean over draws in dB.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::config::ScenarioConfig;
use super::engine::{stream, Engine, Purpose};
use super::result::{format_float, CurveResult, Series};
use crate::channel::complex_normal;
use crate::downlink::{output_snr_asymptotic, output_snr_exact, precoded_observation, zf_precoder, EquivalentLinearChannel};
use crate::error::{Error, Result};
use rand::Rng;

/// Noise variance used when the scenario does not fix one.
pub const DEFAULT_SNR_SIGMA2: f64 = 0.01;

fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Per-draw linear SNRs `(simulated, exact)`.
pub fn simulate_draw(cfg: &ScenarioConfig, n_t: usize, sigma2: f64, item: u64) -> Result<(f64, f64)> {
    let n_k = cfg.n_users;
    let rng = &mut stream(cfg.seed, item, Purpose::Channel);
    let h = DMatrix::from_fn(n_k, n_t, |_, _| StandardNormal.sample(rng));
    let chan = EquivalentLinearChannel::new(h)?;
    let prec = zf_precoder(&chan, 1.0)?;
    let b = chan.h_bar() * prec.p();
    let rho = prec.rho();
    let sigma = sigma2.sqrt();
    let data = &mut stream(cfg.seed, item, Purpose::Data);
    let noise = &mut stream(cfg.seed, item, Purpose::Noise);
    let rows: Vec<Vec<f64>> = (0..n_k).map(|m| b.row(m).iter().copied().collect()).collect();
    let mut err2 = 0.0;
    let mut count = 0usize;
    for _ in 0..cfg.snr_symbols {
        let amps: Vec<f64> = (0..n_k).map(|_| if data.random::<bool>() { 1.0 } else { 0.0 }).collect();
        for (m, row) in rows.iter().enumerate() {
            let n1 = complex_normal(noise) * sigma;
            let n2 = complex_normal(noise) * sigma;
            let z = precoded_observation(row, rho, &amps, 0.0, n1, n2);
            let x = 2.0 * amps[m] - 1.0;
            err2 += (z - rho * x).powi(2);
            count += 1;
        }
    }
    let simulated = rho * rho / (err2 / count as f64);
    Ok((simulated, output_snr_exact(&prec, sigma2)?))
}

/// Output SNR over a grid of antenna counts.
pub fn run_output_snr(cfg: &ScenarioConfig, nt_grid: &[f64], engine: &Engine) -> Result<CurveResult> {
    cfg.validate()?;
    super::config::check_increasing("grid", nt_grid)?;
    let sigma2 = cfg.noise_sigma2.unwrap_or(DEFAULT_SNR_SIGMA2);
    if !(sigma2 > 0.0) {
        return Err(Error::config_key("noise_sigma2", "output SNR needs positive noise"));
    }
    let n_k = cfg.n_users;
    let mut sim = Series::new("simulated");
    let mut exact = Series::new("exact");
    let mut asym = Series::new("asymptotic");
    for &x in nt_grid {
        if x.fract() != 0.0 || x < 1.0 {
            return Err(Error::config_key("grid", format!("antenna count {x} is not a positive integer")));
        }
        let n_t = x as usize;
        if n_t <= n_k + 1 {
            return Err(Error::config_key(
                "grid",
                format!("antenna count {n_t} must exceed n_users + 1 = {}", n_k + 1),
            ));
        }
        let draws = cfg.snr_draws as u64;
        let vals = engine
            .map(draws, |i| simulate_draw(cfg, n_t, sigma2, i))
            .map_err(|e| e.at_point("n_bs_antennas", x))?;
        let n = vals.len() as f64;
        let mean_sim = vals.iter().map(|v| v.0).sum::<f64>() / n;
        let var_sim = vals.iter().map(|v| (v.0 - mean_sim).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let mean_exact = vals.iter().map(|v| v.1).sum::<f64>() / n;
        // delta method: half-width of the mean, converted to dB
        let ci_db = 10.0 / std::f64::consts::LN_10 * 1.96 * (var_sim / n).sqrt() / mean_sim;
        sim.push(to_db(mean_sim), draws, ci_db);
        exact.push(to_db(mean_exact), draws, 0.0);
        asym.push(to_db(output_snr_asymptotic(n_t, n_k, sigma2)?), 0, 0.0);
    }
    let mut out = CurveResult::new("n_bs_antennas", nt_grid.to_vec());
    out.series = vec![sim, exact, asym];
    out.meta("experiment", "output-snr");
    out.meta("seed", cfg.seed.to_string());
    out.meta("unit", "dB");
    out.meta("noise_sigma2", format_float(sigma2));
    out.meta("n_users", n_k.to_string());
    out.meta("channel", "equivalent channel with i.i.d. N(0,1) entries, unit power budget");
    out.meta("trials", "channel draws");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_arrays() {
        let mut cfg = ScenarioConfig::default();
        cfg.n_users = 8;
        let e = Engine::new(1).unwrap();
        assert!(run_output_snr(&cfg, &[9.0], &e).is_err());
        assert!(run_output_snr(&cfg, &[32.5], &e).is_err());
    }

    #[test]
    fn simulated_close_to_exact_for_one_draw() {
        let mut cfg = ScenarioConfig::default();
        cfg.n_users = 4;
        cfg.snr_symbols = 2000;
        let (sim, exact) = simulate_draw(&cfg, 32, 0.01, 0).unwrap();
        assert!((to_db(sim) - to_db(exact)).abs() < 0.5, "{sim} vs {exact}");
    }
}
