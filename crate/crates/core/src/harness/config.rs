//! Scenario files: flat `key = value` lines, `#` starts a comment.
//!
//! Absent keys take the full-size defaults. Vectors are comma separated
//! (`bs_position = 20, -15, 25`), the surface size is either a square count
//! (`n_ris_elements = 64`) or `NxM` (`n_ris_elements = 8x8`).

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

/// How the surface phases are chosen for each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseMode {
    /// Co-phase the LoS cascade towards user 0.
    Aligned,
    /// All phases zero.
    Fixed,
    /// Uniform random phases, redrawn per frame.
    Random,
}

impl PhaseMode {
    pub fn name(self) -> &'static str {
        match self {
            PhaseMode::Aligned => "aligned",
            PhaseMode::Fixed => "fixed",
            PhaseMode::Random => "random",
        }
    }
}

/// Pilot and data layout of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLayout {
    pub blocks: usize,
    pub symbols_per_block: usize,
    pub pilot_len: usize,
}

impl FrameLayout {
    pub fn data_symbols(&self) -> usize {
        self.blocks * self.symbols_per_block
    }

    pub fn total_symbols(&self) -> usize {
        self.pilot_len + self.data_symbols()
    }

    /// Symbol index at which data block `b` starts.
    pub fn block_start(&self, b: usize) -> usize {
        self.pilot_len + b * self.symbols_per_block
    }
}

/// Everything an experiment needs besides the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub bs_position: [f64; 3],
    pub ris_position: [f64; 3],
    /// Length of the road segment covered by the surface, centred on it.
    pub coverage_length: f64,
    pub n_users: usize,
    pub ris_nx: usize,
    pub ris_ny: usize,
    pub n_bs_antennas: usize,
    pub rician_k: f64,
    pub rician_v: f64,
    /// Exponents for BS–user, BS–surface and surface–user paths.
    pub pathloss_exponents: [f64; 3],
    pub carrier_f1: f64,
    pub symbol_period: f64,
    pub speed: f64,
    pub frame: FrameLayout,
    /// Fixed correlator noise; overrides the Eb/N0 mapping when set.
    pub noise_sigma2: Option<f64>,
    /// Eb/N0 used when the sweep axis is not Eb/N0.
    pub ebn0_db: f64,
    pub ebn0_grid: Vec<f64>,
    pub seed: u64,
    pub ris_phase_mode: PhaseMode,
    /// Include the (NLoS only) direct BS–user path.
    pub direct_link: bool,
    /// Stop a grid point once this many bit/symbol errors are counted.
    pub target_errors: u64,
    pub min_trials: u64,
    pub max_trials: u64,
    /// Channel draws for the output-SNR experiment.
    pub snr_draws: usize,
    /// Symbol vectors per channel draw in the output-SNR experiment.
    pub snr_symbols: usize,
    /// Channel instances averaged in the uplink experiment.
    pub uplink_instances: usize,
    /// Samples per point in the pdf experiment.
    pub pdf_samples: usize,
    pub pdf_gamma: f64,
    pub pdf_gamma_prime: f64,
    /// Half-width of the standardized grid, in standard deviations.
    pub pdf_span: f64,
    pub pdf_bins: usize,
    explicit: BTreeSet<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            bs_position: [20.0, -15.0, 25.0],
            ris_position: [-5.0, 45.0, 10.0],
            coverage_length: 100.0,
            n_users: 8,
            ris_nx: 8,
            ris_ny: 8,
            n_bs_antennas: 128,
            rician_k: 10.0,
            rician_v: 10.0,
            pathloss_exponents: [2.5, 2.3, 2.1],
            carrier_f1: 5.9e9,
            symbol_period: 8e-6,
            speed: 50.0,
            frame: FrameLayout {
                blocks: 40,
                symbols_per_block: 25,
                pilot_len: 20,
            },
            noise_sigma2: None,
            ebn0_db: 6.0,
            ebn0_grid: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0],
            seed: 1,
            ris_phase_mode: PhaseMode::Aligned,
            direct_link: false,
            target_errors: 100,
            min_trials: 1000,
            max_trials: 2_000_000,
            snr_draws: 200,
            snr_symbols: 200,
            uplink_instances: 8,
            pdf_samples: 1_000_000,
            pdf_gamma: 1.0,
            pdf_gamma_prime: 0.0,
            pdf_span: 6.0,
            pdf_bins: 240,
            explicit: BTreeSet::new(),
        }
    }
}

/// Array sizes used unless a run asks for the full-size system.
pub const DESK_SCALE: (usize, usize, usize, usize) = (32, 4, 4, 4);

impl ScenarioConfig {
    pub fn n_ris_elements(&self) -> usize {
        self.ris_nx * self.ris_ny
    }

    pub fn wavelength(&self) -> f64 {
        crate::channel::SPEED_OF_LIGHT / self.carrier_f1
    }

    pub fn carrier_f2(&self) -> f64 {
        self.carrier_f1 + 1.0 / self.symbol_period
    }

    /// Whether `key` was given in the parsed text.
    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Shrinks the arrays to `N_t = 32`, `N_k = 4`, `N = 4×4`, leaving any
    /// size that was set explicitly.
    pub fn apply_desk_scale(&mut self) {
        let (n_t, n_k, nx, ny) = DESK_SCALE;
        if !self.is_explicit("n_bs_antennas") {
            self.n_bs_antennas = n_t;
        }
        if !self.is_explicit("n_users") {
            self.n_users = n_k;
        }
        if !self.is_explicit("n_ris_elements") {
            self.ris_nx = nx;
            self.ris_ny = ny;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let count = |key: &str, v: usize| {
            if v == 0 {
                Err(Error::config_key(key, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        count("n_users", self.n_users)?;
        count("n_ris_elements", self.n_ris_elements())?;
        count("n_bs_antennas", self.n_bs_antennas)?;
        count("blocks_per_frame", self.frame.blocks)?;
        count("symbols_per_block", self.frame.symbols_per_block)?;
        count("pilot_length", self.frame.pilot_len)?;
        count("snr_draws", self.snr_draws)?;
        count("snr_symbols", self.snr_symbols)?;
        count("uplink_instances", self.uplink_instances)?;
        count("pdf_samples", self.pdf_samples)?;
        count("pdf_bins", self.pdf_bins)?;
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config_key(key, format!("must be positive and finite, got {v}")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config_key(key, format!("must be non-negative and finite, got {v}")))
            }
        };
        positive("coverage_length", self.coverage_length)?;
        positive("carrier_f1", self.carrier_f1)?;
        positive("symbol_period", self.symbol_period)?;
        positive("pdf_span", self.pdf_span)?;
        non_negative("rician_K", self.rician_k)?;
        non_negative("rician_V", self.rician_v)?;
        non_negative("speed", self.speed)?;
        non_negative("pdf_gamma", self.pdf_gamma)?;
        non_negative("pdf_gamma_prime", self.pdf_gamma_prime)?;
        for e in self.pathloss_exponents {
            non_negative("pathloss_exponents", e)?;
        }
        if let Some(s) = self.noise_sigma2 {
            non_negative("noise_sigma2", s)?;
        }
        if !self.ebn0_db.is_finite() {
            return Err(Error::config_key("ebn0_db", "must be finite"));
        }
        check_increasing("ebn0_grid", &self.ebn0_grid)?;
        if self.min_trials > self.max_trials {
            return Err(Error::config_key("min_trials", "must not exceed max_trials"));
        }
        if self.max_trials == 0 {
            return Err(Error::config_key("max_trials", "must be at least 1"));
        }
        for (i, p) in [self.bs_position, self.ris_position].iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                let key = if i == 0 { "bs_position" } else { "ris_position" };
                return Err(Error::config_key(key, "coordinates must be finite"));
            }
        }
        Ok(())
    }
}

/// Errors unless `grid` is strictly increasing and finite.
pub fn check_increasing(key: &str, grid: &[f64]) -> Result<()> {
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::config_key(key, "grid values must be finite"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config_key(key, "grid must be strictly increasing"));
    }
    Ok(())
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(key: &str, text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::config_key(key, format!("`{}` is not a number", t.trim())))
        })
        .collect()
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| Error::config_key(key, format!("`{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::config_key(key, format!("`{v}` is not a non-negative integer")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse::<u64>()
        .map_err(|_| Error::config_key(key, format!("`{v}` is not a non-negative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config_key(key, format!("`{v}` is not a boolean"))),
    }
}

fn parse_vec3(key: &str, v: &str) -> Result<[f64; 3]> {
    let xs = parse_list(key, v)?;
    xs.try_into()
        .map_err(|xs: Vec<f64>| Error::config_key(key, format!("expected 3 values, got {}", xs.len())))
}

fn parse_surface(key: &str, v: &str) -> Result<(usize, usize)> {
    if let Some((a, b)) = v.split_once(['x', 'X', '*']) {
        return Ok((parse_usize(key, a.trim())?, parse_usize(key, b.trim())?));
    }
    let n = parse_usize(key, v)?;
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::config_key(key, format!("{n} is not a square; write it as NxM")));
    }
    Ok((side, side))
}

impl ScenarioConfig {
    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "bs_position" => self.bs_position = parse_vec3(key, v)?,
            "ris_position" => self.ris_position = parse_vec3(key, v)?,
            "coverage_length" => self.coverage_length = parse_f64(key, v)?,
            "n_users" => self.n_users = parse_usize(key, v)?,
            "n_ris_elements" => (self.ris_nx, self.ris_ny) = parse_surface(key, v)?,
            "n_bs_antennas" => self.n_bs_antennas = parse_usize(key, v)?,
            "rician_K" | "rician_k" => self.rician_k = parse_f64(key, v)?,
            "rician_V" | "rician_v" => self.rician_v = parse_f64(key, v)?,
            "pathloss_exponents" => self.pathloss_exponents = parse_vec3(key, v)?,
            "carrier_f1" => self.carrier_f1 = parse_f64(key, v)?,
            "symbol_period" => self.symbol_period = parse_f64(key, v)?,
            "speed" => self.speed = parse_f64(key, v)?,
            "blocks_per_frame" => self.frame.blocks = parse_usize(key, v)?,
            "symbols_per_block" => self.frame.symbols_per_block = parse_usize(key, v)?,
            "pilot_length" => self.frame.pilot_len = parse_usize(key, v)?,
            "noise_sigma2" => self.noise_sigma2 = Some(parse_f64(key, v)?),
            "ebn0_db" => self.ebn0_db = parse_f64(key, v)?,
            "ebn0_grid" => self.ebn0_grid = parse_list(key, v)?,
            "seed" => self.seed = parse_u64(key, v)?,
            "ris_phase_mode" => {
                self.ris_phase_mode = match v {
                    "aligned" => PhaseMode::Aligned,
                    "fixed" => PhaseMode::Fixed,
                    "random" => PhaseMode::Random,
                    _ => return Err(Error::config_key(key, format!("unknown mode `{v}`"))),
                }
            }
            "direct_link" => self.direct_link = parse_bool(key, v)?,
            "target_errors" => self.target_errors = parse_u64(key, v)?,
            "min_trials" => self.min_trials = parse_u64(key, v)?,
            "max_trials" => self.max_trials = parse_u64(key, v)?,
            "snr_draws" => self.snr_draws = parse_usize(key, v)?,
            "snr_symbols" => self.snr_symbols = parse_usize(key, v)?,
            "uplink_instances" => self.uplink_instances = parse_usize(key, v)?,
            "pdf_samples" => self.pdf_samples = parse_usize(key, v)?,
            "pdf_gamma" => self.pdf_gamma = parse_f64(key, v)?,
            "pdf_gamma_prime" => self.pdf_gamma_prime = parse_f64(key, v)?,
            "pdf_span" => self.pdf_span = parse_f64(key, v)?,
            "pdf_bins" => self.pdf_bins = parse_usize(key, v)?,
            _ => return Err(Error::config_key(key, "unknown key")),
        }
        Ok(())
    }

    /// Sets one key as if it appeared in a scenario file.
    pub fn set_value(&mut self, key: &str, value: &str) -> Result<()> {
        self.set(key, value.trim())?;
        let canonical = match key {
            "rician_k" => "rician_K",
            "rician_v" => "rician_V",
            k => k,
        };
        self.explicit.insert(canonical.to_string());
        Ok(())
    }
}

/// Parses scenario text; the result is validated.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at_line = |e: Error| match e {
            Error::Config { key, message, .. } => Error::Config {
                line: Some(line_no),
                key,
                message,
            },
            other => other,
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                line: Some(line_no),
                key: None,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        if cfg.explicit.contains(key) {
            return Err(at_line(Error::config_key(key, "duplicate key")));
        }
        cfg.set_value(key, value).map_err(at_line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_scenario("").unwrap();
        assert_eq!(cfg.n_users, 8);
        assert_eq!(cfg.n_ris_elements(), 64);
        assert_eq!(cfg.n_bs_antennas, 128);
        assert_eq!(cfg.rician_k, 10.0);
        assert_eq!(cfg.speed, 50.0);
        assert_eq!(cfg.carrier_f1, 5.9e9);
        assert_eq!(cfg.symbol_period, 8e-6);
        assert_eq!(cfg.frame.total_symbols(), 1020);
        assert!((cfg.carrier_f2() - (5.9e9 + 125e3)).abs() < 1e-3);
    }

    #[test]
    fn parses_values_and_comments() {
        let cfg = parse_scenario(
            "# scenario\nspeed = 0\nn_ris_elements = 4x8  # planar\nbs_position = 1, 2, 3\nris_phase_mode = random\n",
        )
        .unwrap();
        assert_eq!(cfg.speed, 0.0);
        assert_eq!((cfg.ris_nx, cfg.ris_ny), (4, 8));
        assert_eq!(cfg.bs_position, [1.0, 2.0, 3.0]);
        assert_eq!(cfg.ris_phase_mode, PhaseMode::Random);
    }

    #[test]
    fn rejects_zero_antennas() {
        match parse_scenario("n_bs_antennas = 0") {
            Err(Error::Config { key, .. }) => assert_eq!(key.as_deref(), Some("n_bs_antennas")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reports_line_and_key() {
        match parse_scenario("speed = 1\n\nrician_K = abc\n") {
            Err(Error::Config { line, key, .. }) => {
                assert_eq!(line, Some(3));
                assert_eq!(key.as_deref(), Some("rician_K"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_scenario("speed 3"), Err(Error::Config { line: Some(1), .. })));
        assert!(parse_scenario("colour = red").is_err());
        assert!(parse_scenario("speed = 1\nspeed = 2").is_err());
        assert!(parse_scenario("n_ris_elements = 10").is_err());
        assert!(parse_scenario("ebn0_grid = 1, 1").is_err());
    }

    #[test]
    fn desk_scale_respects_explicit_sizes() {
        let mut cfg = parse_scenario("n_users = 6").unwrap();
        cfg.apply_desk_scale();
        assert_eq!(cfg.n_users, 6);
        assert_eq!(cfg.n_bs_antennas, 32);
        assert_eq!(cfg.n_ris_elements(), 16);
    }
}
