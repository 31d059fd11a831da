//! Uplink symbol-error-rate sweeps: Monte Carlo against the closed form.
//!
//! `uplink_instances` channel instances are drawn once and shared by every
//! grid point. Work item `k` sends a chunk of symbols over instance
//! `k mod instances`; batches cover all instances equally. A symbol is the
//! joint binary vector of all users, detected from `ξ` by the midpoint
//! regions of the exact coefficients.

use num_complex::Complex64;
use rand::Rng;

use super::config::ScenarioConfig;
use super::engine::{stream, Engine, Purpose, BATCH_ITEMS};
use super::result::{CurveResult, Series};
use super::scenario::{uplink_instance, LinkParams};
use crate::analysis::closed_form_ser;
use crate::channel::complex_normal;
use crate::error::{Error, Result};
use crate::uplink::{build_regions, region_detect, rho_exact, DecisionRegions, UplinkChannelSet, MAX_ENUMERATED_USERS};
use crate::waveform::{tone_sums, ComplementarySymbol, NoiseModel};

/// Symbols sent per work item.
pub const SYMBOLS_PER_ITEM: usize = 4096;

/// Which uplink curves to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerMode {
    MonteCarlo,
    ClosedForm,
    Both,
}

impl SerMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "monte_carlo" => Ok(SerMode::MonteCarlo),
            "closed_form" => Ok(SerMode::ClosedForm),
            "both" => Ok(SerMode::Both),
            _ => Err(Error::config_key("scheme", format!("unknown uplink mode `{s}`"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SerMode::MonteCarlo => "monte_carlo",
            SerMode::ClosedForm => "closed_form",
            SerMode::Both => "both",
        }
    }
}

/// A channel instance with everything detection needs.
#[derive(Debug, Clone)]
pub struct PreparedInstance {
    pub set: UplinkChannelSet,
    pub regions: DecisionRegions,
    /// `(c_m s, c_m s̄)` for every constellation point and antenna.
    tones: Vec<Vec<(Complex64, Complex64)>>,
    /// `mean |c_mn|²`.
    pub mean_power: f64,
}

impl PreparedInstance {
    pub fn new(set: UplinkChannelSet) -> Result<Self> {
        let n_k = set.n_users();
        if n_k > MAX_ENUMERATED_USERS {
            return Err(Error::SearchTooLarge {
                candidates: 1u128 << n_k,
                cap: 1u128 << MAX_ENUMERATED_USERS,
            });
        }
        let regions = build_regions(&rho_exact(&set))?;
        let rows: Vec<Vec<Complex64>> = (0..set.n_antennas()).map(|m| set.row(m)).collect();
        let tones = (0..1usize << n_k)
            .map(|i| {
                let amps = ComplementarySymbol::from_index(i as u64, n_k, 2)?.amplitudes();
                Ok(rows.iter().map(|r| tone_sums(r, &amps)).collect())
            })
            .collect::<Result<_>>()?;
        let mean_power = set.c().norm_squared() / set.c().len() as f64;
        Ok(PreparedInstance {
            set,
            regions,
            tones,
            mean_power,
        })
    }

    /// Symbol errors over `n` random symbols.
    pub fn count_errors<R: Rng>(&self, noise: &NoiseModel, n: usize, data: &mut R, rng: &mut R) -> u64 {
        let size = self.tones.len();
        let sigma = noise.sigma2().sqrt();
        let n_t = self.set.n_antennas() as f64;
        let mut errors = 0;
        for _ in 0..n {
            let idx = data.random_range(0..size);
            let mut acc = 0.0;
            for &(on, off) in &self.tones[idx] {
                let v1 = complex_normal(rng) * sigma;
                let v2 = complex_normal(rng) * sigma;
                acc += (on + v1).norm_sqr() - (off + v2).norm_sqr();
            }
            let r = region_detect(acc / n_t, &self.regions);
            errors += u64::from(self.regions.representative(r) != idx);
        }
        errors
    }
}

#[derive(Default)]
struct Tally {
    errors: u64,
    symbols: u64,
}

/// SER vs Eb/N0 for the configured uplink.
pub fn run_uplink_ser(cfg: &ScenarioConfig, mode: SerMode, grid: &[f64], engine: &Engine) -> Result<CurveResult> {
    cfg.validate()?;
    super::config::check_increasing("grid", grid)?;
    let link = LinkParams::from_config(cfg);
    let n_inst = cfg.uplink_instances as u64;
    let instances = engine.map(n_inst, |i| PreparedInstance::new(uplink_instance(cfg, &link, i)?))?;
    let flagged = instances.iter().any(|p| p.regions.has_indistinguishable());

    let noise_for = |inst: &PreparedInstance, ebn0_db: f64| {
        NoiseModel::new(cfg.noise_sigma2.unwrap_or(inst.mean_power / 10f64.powf(ebn0_db / 10.0)))
    };
    let mut mc = Series::new("monte_carlo");
    let mut cf = Series::new("closed_form");
    let batch = n_inst * BATCH_ITEMS.div_ceil(n_inst);
    let per_item = SYMBOLS_PER_ITEM as u64;
    let max_items = (cfg.max_trials.div_ceil(per_item)).div_ceil(n_inst) * n_inst;
    let min_symbols = cfg.min_trials;
    for (pi, &x) in grid.iter().enumerate() {
        if mode != SerMode::ClosedForm {
            let mut t = Tally::default();
            engine
                .run_until(
                    batch,
                    max_items.max(n_inst),
                    &mut t,
                    |k| {
                        let inst = &instances[(k % n_inst) as usize];
                        let noise = noise_for(inst, x)?;
                        let key = ((pi as u64) << 40) | k;
                        let data = &mut stream(cfg.seed, key, Purpose::Data);
                        let rng = &mut stream(cfg.seed, key, Purpose::Noise);
                        Ok(inst.count_errors(&noise, SYMBOLS_PER_ITEM, data, rng))
                    },
                    |t, e| {
                        t.errors += e;
                        t.symbols += per_item;
                    },
                    |t| t.errors >= cfg.target_errors && t.symbols >= min_symbols,
                )
                .map_err(|e| e.at_point("ebn0", x))?;
            mc.push_rate(t.errors, t.symbols, t.symbols);
        }
        if mode != SerMode::MonteCarlo {
            let sers = engine
                .map(n_inst, |i| {
                    let inst = &instances[i as usize];
                    let rho = rho_exact(&inst.set);
                    Ok(closed_form_ser(&rho, &noise_for(inst, x)?, &inst.set)?.ser)
                })
                .map_err(|e| e.at_point("ebn0", x))?;
            cf.push(sers.iter().sum::<f64>() / sers.len() as f64, n_inst, 0.0);
        }
    }
    let mut out = CurveResult::new("ebn0", grid.to_vec());
    if mode != SerMode::ClosedForm {
        out.series.push(mc);
    }
    if mode != SerMode::MonteCarlo {
        out.series.push(cf);
    }
    out.meta("experiment", "uplink-ser");
    out.meta("mode", mode.name());
    out.meta("seed", cfg.seed.to_string());
    out.meta("ebn0_mapping", "sigma2 = mean|c_mn|^2 / EbN0 per correlator branch, per channel instance");
    out.meta(
        "arrays",
        format!("N_t={} N_k={} N={}", cfg.n_bs_antennas, cfg.n_users, cfg.n_ris_elements()),
    );
    out.meta("instances", n_inst.to_string());
    out.meta("indistinguishable_points", flagged.to_string());
    out.meta("trials", "symbols for monte_carlo, channel instances for closed_form");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_desk_scale();
        cfg.uplink_instances = 2;
        cfg.min_trials = 8192;
        cfg.max_trials = 8192;
        cfg
    }

    #[test]
    fn vanishing_noise_gives_zero_ser() {
        let mut cfg = small();
        cfg.noise_sigma2 = Some(1e-30);
        let e = Engine::new(2).unwrap();
        let r = run_uplink_ser(&cfg, SerMode::Both, &[0.0], &e).unwrap();
        assert_eq!(r.series("monte_carlo").unwrap().values[0], 0.0);
        assert!(r.series("closed_form").unwrap().values[0] < 1e-12);
    }

    #[test]
    fn mode_selects_series() {
        let cfg = small();
        let e = Engine::new(1).unwrap();
        let r = run_uplink_ser(&cfg, SerMode::ClosedForm, &[5.0, 10.0], &e).unwrap();
        assert_eq!(r.series.len(), 1);
        assert!(r.series("closed_form").is_some());
        assert!(SerMode::parse("exact").is_err());
    }
}
