//! Downlink bit-error-rate sweeps.
//!
//! One work item is one frame: `pilot_len` training symbols followed by
//! `blocks × symbols_per_block` data symbols. CSI is taken at the start of
//! each block and reused for the rest of it while the true channel keeps
//! evolving, so intra-block Doppler and fading hit every scheme.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use super::config::ScenarioConfig;
use super::engine::{stream, Engine, Purpose, BATCH_ITEMS};
use super::result::{CurveResult, Series};
use super::scenario::{DownlinkFrame, LinkParams};
use crate::channel::complex_normal;
use crate::downlink::{
    build_equiv_channel, hadamard_pilots, joint_detect, ls_estimate, precoded_observation, slice_sign,
    zf_precoder, PilotBlock, JOINT_SEARCH_CAP,
};
use crate::error::{Error, Result};
use crate::waveform::{correlator_outputs, detect_z};

/// Transmission scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// ZF precoding on the real linear model, per-user sign slicing.
    LinearPrecoded,
    /// No precoding; LS-estimated equivalent channel and joint search.
    LinearJoint,
    /// 4-QAM over complex ZF precoding with coherent detection.
    QamMlBaseline,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::LinearPrecoded => "linear_precoded",
            Scheme::LinearJoint => "linear_joint",
            Scheme::QamMlBaseline => "qam_ml_baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear_precoded" => Ok(Scheme::LinearPrecoded),
            "linear_joint" => Ok(Scheme::LinearJoint),
            "qam_ml_baseline" => Ok(Scheme::QamMlBaseline),
            _ => Err(Error::config_key("scheme", format!("unknown scheme `{s}`"))),
        }
    }

    /// Relation between Eb/N0 and the noise variance, written into outputs.
    pub fn ebn0_mapping(self) -> &'static str {
        match self {
            Scheme::LinearPrecoded => "sigma2 = rho / EbN0 per correlator branch, rho from block-start ZF",
            Scheme::LinearJoint => "sigma2 = mean|h_mn|^2 / EbN0 per correlator branch",
            Scheme::QamMlBaseline => "sigma2 = rho_c / (2 EbN0), rho_c = 1/tr(W^H W) from block-start complex ZF",
        }
    }
}

/// Sweep axis of a BER run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sweep {
    Speed,
    Ebn0,
    /// Sets both Rician factors to the grid value.
    RicianK,
}

impl Sweep {
    pub fn name(self) -> &'static str {
        match self {
            Sweep::Speed => "speed",
            Sweep::Ebn0 => "ebn0",
            Sweep::RicianK => "rician_k",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(Sweep::Speed),
            "ebn0" => Ok(Sweep::Ebn0),
            "rician_k" => Ok(Sweep::RicianK),
            _ => Err(Error::config_key("sweep", format!("unknown sweep axis `{s}`"))),
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Sweep::Speed => vec![10.0, 20.0, 30.0, 40.0, 50.0],
            Sweep::Ebn0 => vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            Sweep::RicianK => vec![1.0, 10.0, 100.0],
        }
    }
}

/// Error tally of a set of frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ErrorCount {
    pub errors: u64,
    pub bits: u64,
    /// Symbol vectors sent.
    pub trials: u64,
    pub frames: u64,
}

impl ErrorCount {
    fn add(&mut self, o: ErrorCount) {
        self.errors += o.errors;
        self.bits += o.bits;
        self.trials += o.trials;
        self.frames += o.frames;
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// One grid point of a BER run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub link: LinkParams,
    pub ebn0_db: f64,
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn random_bits<R: Rng>(n: usize, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.random::<bool>()).collect()
}

fn amplitudes(bits: &[bool]) -> Vec<f64> {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

fn precoded_frame(cfg: &ScenarioConfig, pt: &BerPoint, frame: &DownlinkFrame, item: u64) -> Result<ErrorCount> {
    let ts = cfg.symbol_period;
    let ebn0 = db_to_linear(pt.ebn0_db);
    let data = &mut stream(cfg.seed, item, Purpose::Data);
    let noise = &mut stream(cfg.seed, item, Purpose::Noise);
    let mut c = ErrorCount {
        frames: 1,
        ..Default::default()
    };
    for b in 0..cfg.frame.blocks {
        let t0 = cfg.frame.block_start(b) as f64 * ts;
        let chan0 = build_equiv_channel(&frame.channel_at(t0))?;
        let prec = zf_precoder(&chan0, 1.0)?;
        let sigma = cfg.noise_sigma2.unwrap_or(prec.rho() / ebn0).sqrt();
        for k in 0..cfg.frame.symbols_per_block {
            let t = t0 + k as f64 * ts;
            let bmat = build_equiv_channel(&frame.channel_at(t))?.h_bar() * prec.p();
            let nu = frame.doppler_phase(t);
            let bits = random_bits(cfg.n_users, data);
            let amps = amplitudes(&bits);
            for (m, &bit) in bits.iter().enumerate() {
                let row: Vec<f64> = bmat.row(m).iter().copied().collect();
                let n1 = complex_normal(noise) * sigma;
                let n2 = complex_normal(noise) * sigma;
                let z = precoded_observation(&row, prec.rho(), &amps, nu, n1, n2);
                c.errors += u64::from(slice_sign(z) != bit);
            }
            c.bits += cfg.n_users as u64;
            c.trials += 1;
        }
    }
    Ok(c)
}

fn mean_power(h: &DMatrix<Complex64>) -> f64 {
    h.norm_squared() / h.len() as f64
}

fn joint_frame(cfg: &ScenarioConfig, pt: &BerPoint, frame: &DownlinkFrame, item: u64) -> Result<ErrorCount> {
    let ts = cfg.symbol_period;
    let n_t = cfg.n_bs_antennas;
    let ebn0 = db_to_linear(pt.ebn0_db);
    let pilots = hadamard_pilots(n_t, cfg.frame.pilot_len)?;
    let data = &mut stream(cfg.seed, item, Purpose::Data);
    let noise = &mut stream(cfg.seed, item, Purpose::Noise);
    let pilot_noise = &mut stream(cfg.seed, item, Purpose::Pilot);
    let mut c = ErrorCount {
        frames: 1,
        ..Default::default()
    };
    let observe = |h: &DMatrix<Complex64>, amps: &[f64], nu: f64, sigma: f64, rng: &mut rand_chacha::ChaCha8Rng| {
        (0..h.nrows())
            .map(|m| {
                let row: Vec<Complex64> = h.row(m).iter().copied().collect();
                let n1 = complex_normal(rng) * sigma;
                let n2 = complex_normal(rng) * sigma;
                detect_z(&correlator_outputs(&row, amps, nu, n1, n2))
            })
            .collect::<Vec<f64>>()
    };
    for b in 0..cfg.frame.blocks {
        let t0 = cfg.frame.block_start(b) as f64 * ts;
        let h0 = frame.channel_at(t0);
        let sigma = cfg.noise_sigma2.unwrap_or(mean_power(&h0) / ebn0).sqrt();
        let nu0 = frame.doppler_phase(t0);
        let mut z_t = DMatrix::zeros(cfg.n_users, pilots.ncols());
        for j in 0..pilots.ncols() {
            let amps: Vec<f64> = pilots.column(j).iter().map(|x| (x + 1.0) / 2.0).collect();
            z_t.set_column(j, &DVector::from_vec(observe(&h0, &amps, nu0, sigma, pilot_noise)));
        }
        let est = ls_estimate(&PilotBlock {
            x_bar_t: pilots.clone(),
            z_t,
        })?;
        for k in 0..cfg.frame.symbols_per_block {
            let t = t0 + k as f64 * ts;
            let bits = random_bits(n_t, data);
            let z = observe(&frame.channel_at(t), &amplitudes(&bits), frame.doppler_phase(t), sigma, noise);
            let got = joint_detect(&z, &est, 2)?.bits();
            c.errors += bits.iter().zip(&got).filter(|(a, b)| a != b).count() as u64;
            c.bits += n_t as u64;
            c.trials += 1;
        }
    }
    Ok(c)
}

fn complex_zf(h: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let gram = h * h.adjoint();
    let sv = gram.singular_values();
    let ratio = sv.min() / sv.max();
    if !(ratio >= crate::downlink::RANK_TOLERANCE) {
        return Err(Error::RankDeficientChannel {
            ratio,
            tolerance: crate::downlink::RANK_TOLERANCE,
        });
    }
    let inv = gram.try_inverse().ok_or(Error::RankDeficientChannel {
        ratio,
        tolerance: crate::downlink::RANK_TOLERANCE,
    })?;
    Ok(h.adjoint() * inv)
}

fn qam_frame(cfg: &ScenarioConfig, pt: &BerPoint, frame: &DownlinkFrame, item: u64) -> Result<ErrorCount> {
    let ts = cfg.symbol_period;
    let ebn0 = db_to_linear(pt.ebn0_db);
    let n_k = cfg.n_users;
    let data = &mut stream(cfg.seed, item, Purpose::BaselineData);
    let noise = &mut stream(cfg.seed, item, Purpose::BaselineNoise);
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut c = ErrorCount {
        frames: 1,
        ..Default::default()
    };
    for b in 0..cfg.frame.blocks {
        let t0 = cfg.frame.block_start(b) as f64 * ts;
        // block-start CSI includes the Doppler phase at that instant
        let h0 = frame.channel_at(t0) * Complex64::cis(frame.doppler_phase(t0));
        let w = complex_zf(&h0)?;
        let rho = 1.0 / w.norm_squared();
        let sigma = cfg.noise_sigma2.unwrap_or(rho / (2.0 * ebn0)).sqrt();
        let g = rho.sqrt();
        for k in 0..cfg.frame.symbols_per_block {
            let t = t0 + k as f64 * ts;
            let ht = frame.channel_at(t) * Complex64::cis(frame.doppler_phase(t));
            let bits = random_bits(2 * n_k, data);
            let q = DVector::from_fn(n_k, |m, _| {
                let re = if bits[2 * m] { 1.0 } else { -1.0 };
                let im = if bits[2 * m + 1] { 1.0 } else { -1.0 };
                Complex64::new(re, im) * scale
            });
            let y = (&ht * (&w * q)) * Complex64::from(g);
            for m in 0..n_k {
                let r = (y[m] + complex_normal(noise) * sigma) / g;
                c.errors += u64::from((r.re >= 0.0) != bits[2 * m]);
                c.errors += u64::from((r.im >= 0.0) != bits[2 * m + 1]);
            }
            c.bits += 2 * n_k as u64;
            c.trials += 1;
        }
    }
    Ok(c)
}

/// Simulates frame `item` at one grid point.
pub fn simulate_frame(cfg: &ScenarioConfig, scheme: Scheme, pt: &BerPoint, item: u64) -> Result<ErrorCount> {
    let frame = DownlinkFrame::build(cfg, &pt.link, item)?;
    match scheme {
        Scheme::LinearPrecoded => precoded_frame(cfg, pt, &frame, item),
        Scheme::LinearJoint => joint_frame(cfg, pt, &frame, item),
        Scheme::QamMlBaseline => qam_frame(cfg, pt, &frame, item),
    }
}

/// Runs frames until `target_errors` errors and `min_trials` symbol
/// vectors are reached, or `max_trials` is exhausted.
pub fn run_point(cfg: &ScenarioConfig, scheme: Scheme, pt: &BerPoint, engine: &Engine) -> Result<ErrorCount> {
    let per_frame = cfg.frame.data_symbols() as u64;
    let max_frames = cfg.max_trials.div_ceil(per_frame).max(1);
    let min_frames = cfg.min_trials.div_ceil(per_frame).max(1);
    let mut acc = ErrorCount::default();
    engine.run_until(
        BATCH_ITEMS,
        max_frames,
        &mut acc,
        |i| simulate_frame(cfg, scheme, pt, i),
        |a, c| a.add(c),
        |a| a.errors >= cfg.target_errors && a.frames >= min_frames,
    )?;
    Ok(acc)
}

fn check_scheme(cfg: &ScenarioConfig, scheme: Scheme) -> Result<()> {
    if scheme == Scheme::LinearJoint {
        let candidates = 1u128.checked_shl(cfg.n_bs_antennas as u32).unwrap_or(u128::MAX);
        if cfg.n_bs_antennas >= 128 || candidates > JOINT_SEARCH_CAP {
            return Err(Error::SearchTooLarge {
                candidates: if cfg.n_bs_antennas >= 128 { u128::MAX } else { candidates },
                cap: JOINT_SEARCH_CAP,
            });
        }
    }
    if scheme != Scheme::LinearJoint && cfg.n_bs_antennas < cfg.n_users {
        return Err(Error::config_key("n_bs_antennas", "zero-forcing needs at least as many antennas as users"));
    }
    Ok(())
}

/// BER of `scheme` over `grid` on the chosen axis.
pub fn run_downlink_ber(
    cfg: &ScenarioConfig,
    scheme: Scheme,
    sweep: Sweep,
    grid: &[f64],
    engine: &Engine,
) -> Result<CurveResult> {
    cfg.validate()?;
    check_scheme(cfg, scheme)?;
    super::config::check_increasing("grid", grid)?;
    let mut series = Series::new(scheme.name());
    for &x in grid {
        let mut pt = BerPoint {
            link: LinkParams::from_config(cfg),
            ebn0_db: cfg.ebn0_db,
        };
        match sweep {
            Sweep::Speed => {
                if x < 0.0 {
                    return Err(Error::config_key("grid", "speeds must be non-negative"));
                }
                pt.link.speed = x;
            }
            Sweep::Ebn0 => pt.ebn0_db = x,
            Sweep::RicianK => {
                if x < 0.0 {
                    return Err(Error::config_key("grid", "Rician factors must be non-negative"));
                }
                pt.link.rician_k = x;
                pt.link.rician_v = x;
            }
        }
        let c = run_point(cfg, scheme, &pt, engine)?;
        series.push_rate(c.errors, c.bits, c.trials);
    }
    let mut out = CurveResult::new(sweep.name(), grid.to_vec());
    out.series.push(series);
    out.meta("experiment", "downlink-ber");
    out.meta("scheme", scheme.name());
    out.meta("seed", cfg.seed.to_string());
    out.meta("ebn0_mapping", scheme.ebn0_mapping());
    if let Some(s) = cfg.noise_sigma2 {
        out.meta("noise_sigma2", super::result::format_float(s));
    }
    if sweep != Sweep::Ebn0 {
        out.meta("ebn0_db", super::result::format_float(cfg.ebn0_db));
    }
    out.meta(
        "arrays",
        format!("N_t={} N_k={} N={}", cfg.n_bs_antennas, cfg.n_users, cfg.n_ris_elements()),
    );
    out.meta("trials", "symbol vectors; ci95 is the binomial half-width over bits");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_desk_scale();
        cfg.frame.blocks = 4;
        cfg.min_trials = 100;
        cfg.max_trials = 100;
        cfg
    }

    #[test]
    fn noiseless_precoded_has_no_errors_without_motion() {
        let mut cfg = tiny();
        cfg.noise_sigma2 = Some(0.0);
        cfg.speed = 0.0;
        let pt = BerPoint {
            link: LinkParams::from_config(&cfg),
            ebn0_db: 0.0,
        };
        let c = simulate_frame(&cfg, Scheme::LinearPrecoded, &pt, 0).unwrap();
        assert_eq!(c.errors, 0);
        assert_eq!(c.bits, 4 * 100);
        let c = simulate_frame(&cfg, Scheme::QamMlBaseline, &pt, 0).unwrap();
        assert_eq!(c.errors, 0);
    }

    #[test]
    fn joint_scheme_needs_small_array() {
        let cfg = tiny();
        let e = Engine::new(1).unwrap();
        assert!(matches!(
            run_downlink_ber(&cfg, Scheme::LinearJoint, Sweep::Ebn0, &[0.0], &e),
            Err(Error::SearchTooLarge { .. })
        ));
    }

    #[test]
    fn joint_scheme_noiseless_static() {
        let mut cfg = tiny();
        cfg.n_bs_antennas = 4;
        cfg.n_users = 4;
        cfg.noise_sigma2 = Some(0.0);
        cfg.speed = 0.0;
        let pt = BerPoint {
            link: LinkParams::from_config(&cfg),
            ebn0_db: 0.0,
        };
        let c = simulate_frame(&cfg, Scheme::LinearJoint, &pt, 2).unwrap();
        assert_eq!(c.errors, 0);
    }

    #[test]
    fn names_round_trip() {
        for s in [Scheme::LinearPrecoded, Scheme::LinearJoint, Scheme::QamMlBaseline] {
            assert_eq!(Scheme::parse(s.name()).unwrap(), s);
        }
        for s in [Sweep::Speed, Sweep::Ebn0, Sweep::RicianK] {
            assert_eq!(Sweep::parse(s.name()).unwrap(), s);
        }
        assert!(Scheme::parse("bpsk").is_err());
    }
}
