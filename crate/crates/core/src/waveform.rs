//! Dual-frequency complementary amplitude signalling and the
//! magnitude-difference detector.
//!
//! Antenna `n` sends amplitude `s_n` on tone `f₁` and the complement
//! `s̄_n = A−1−s_n` on `f₂ = f₁ + 1/T_s`. The receiver correlates against both
//! tones and forms `z = |y⁽¹⁾|² − |y⁽²⁾|²`. A common phase rotation `e^{jν}`
//! (the Doppler term) leaves `z` untouched, and for `A = 2` the noiseless
//! `z` is linear in the bipolar symbol `x̄ = 2s − 1`.
//!
//! Tones are simulated at baseband: `f₁` maps to 0 Hz and `f₂` to `1/T_s`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::complex_normal;
use crate::error::{Error, Result};

/// Smallest supported number of samples per symbol.
pub const MIN_SAMPLES_PER_SYMBOL: usize = 8;

/// Default number of samples per symbol for sample-level simulation.
pub const DEFAULT_SAMPLES_PER_SYMBOL: usize = 16;

/// Amplitude symbol with its complement.
///
/// Amplitudes are integers in `[0, A−1]`; the bipolar form is
/// `x̄ = (s − s̄)/(A−1)`, i.e. `2s − 1` for `A = 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComplementarySymbol {
    levels: u32,
    s: Vec<u32>,
}

impl ComplementarySymbol {
    pub fn new(levels: u32, s: Vec<u32>) -> Result<Self> {
        if levels < 2 {
            return Err(Error::invalid(format!("need at least 2 amplitude levels, got {levels}")));
        }
        if let Some(bad) = s.iter().find(|&&v| v >= levels) {
            return Err(Error::invalid(format!("amplitude {bad} outside [0, {}]", levels - 1)));
        }
        Ok(ComplementarySymbol { levels, s })
    }

    /// Binary (`A = 2`) symbol from bits.
    pub fn from_bits(bits: &[bool]) -> Self {
        ComplementarySymbol {
            levels: 2,
            s: bits.iter().map(|&b| b as u32).collect(),
        }
    }

    /// Symbol number `index` of the lexicographically ordered set of all
    /// `A^n` symbols; `s[0]` is the most significant digit.
    pub fn from_index(index: u64, n: usize, levels: u32) -> Result<Self> {
        if levels < 2 {
            return Err(Error::invalid("need at least 2 amplitude levels"));
        }
        let total = (levels as u128).checked_pow(n as u32);
        if total.is_none_or(|t| index as u128 >= t) {
            return Err(Error::invalid(format!("symbol index {index} out of range")));
        }
        let mut s = vec![0u32; n];
        let mut rest = index;
        for slot in s.iter_mut().rev() {
            *slot = (rest % levels as u64) as u32;
            rest /= levels as u64;
        }
        Ok(ComplementarySymbol { levels, s })
    }

    /// Inverse of [`ComplementarySymbol::from_index`].
    pub fn index(&self) -> u64 {
        self.s.iter().fold(0u64, |acc, &v| acc * self.levels as u64 + v as u64)
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn s(&self) -> &[u32] {
        &self.s
    }

    /// `s̄ = (A−1)·1 − s`.
    pub fn s_bar(&self) -> Vec<u32> {
        self.s.iter().map(|&v| self.levels - 1 - v).collect()
    }

    /// Bipolar symbol, in `{−1, +1}` for `A = 2`.
    pub fn x_bar(&self) -> Vec<f64> {
        let top = (self.levels - 1) as f64;
        self.s.iter().map(|&v| (2.0 * v as f64 - top) / top).collect()
    }

    /// Tone-1 amplitudes `s/(A−1)` in `[0, 1]`.
    pub fn amplitudes(&self) -> Vec<f64> {
        let top = (self.levels - 1) as f64;
        self.s.iter().map(|&v| v as f64 / top).collect()
    }

    /// Bits of a binary symbol.
    pub fn bits(&self) -> Vec<bool> {
        self.s.iter().map(|&v| v != 0).collect()
    }
}

/// The orthogonal tone pair; `f₂ − f₁ = 1/T_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TonePair {
    pub f1: f64,
    pub f2: f64,
    pub symbol_period: f64,
}

impl TonePair {
    /// Places `f₂` exactly one symbol rate above `f₁`.
    pub fn new(f1: f64, symbol_period: f64) -> Result<Self> {
        if !(symbol_period > 0.0 && symbol_period.is_finite()) {
            return Err(Error::invalid(format!("symbol period must be > 0, got {symbol_period}")));
        }
        if !f1.is_finite() {
            return Err(Error::invalid("tone frequency must be finite"));
        }
        Ok(TonePair {
            f1,
            f2: f1 + 1.0 / symbol_period,
            symbol_period,
        })
    }

    /// Baseband tone offsets `(0, 1/T_s)`.
    pub fn baseband(&self) -> (f64, f64) {
        (0.0, 1.0 / self.symbol_period)
    }
}

fn samples_per_symbol(tones: &TonePair, sample_rate: f64) -> Result<usize> {
    let exact = sample_rate * tones.symbol_period;
    let rounded = exact.round();
    if !(exact.is_finite() && (exact - rounded).abs() <= 1e-9 * exact.max(1.0)) {
        return Err(Error::invalid(format!(
            "sample_rate·symbol_period = {exact} is not an integer"
        )));
    }
    let n = rounded as usize;
    if n < MIN_SAMPLES_PER_SYMBOL {
        return Err(Error::invalid(format!(
            "{n} samples per symbol, need at least {MIN_SAMPLES_PER_SYMBOL}"
        )));
    }
    Ok(n)
}

/// Baseband samples of one symbol, one row per transmit antenna.
pub fn modulate(sym: &ComplementarySymbol, tones: &TonePair, sample_rate: f64) -> Result<nalgebra::DMatrix<Complex64>> {
    modulate_amplitudes(&sym.amplitudes(), tones, sample_rate)
}

/// Same as [`modulate`] for raw amplitudes in `[0, 1]` (pilot patterns such
/// as `s = 1/2` that sit outside the data alphabet).
pub fn modulate_amplitudes(
    amplitudes: &[f64],
    tones: &TonePair,
    sample_rate: f64,
) -> Result<nalgebra::DMatrix<Complex64>> {
    let n = samples_per_symbol(tones, sample_rate)?;
    let (w1, w2) = tones.baseband();
    Ok(nalgebra::DMatrix::from_fn(amplitudes.len(), n, |ant, i| {
        let t = i as f64 / sample_rate;
        let a = amplitudes[ant];
        Complex64::cis(TAU * w1 * t) * a + Complex64::cis(TAU * w2 * t) * (1.0 - a)
    }))
}

/// `(1/T_s)∫ y(t) e^{−j2πft} dt` as a Riemann sum over one symbol.
pub fn correlate(samples: &[Complex64], tone_freq: f64, symbol_period: f64) -> Complex64 {
    let n = samples.len();
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let dt = symbol_period / n as f64;
    let sum: Complex64 = samples
        .iter()
        .enumerate()
        .map(|(i, &y)| y * Complex64::cis(-TAU * tone_freq * i as f64 * dt))
        .sum();
    sum / n as f64
}

/// Outputs of the two tone correlators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorPair {
    pub y1: Complex64,
    pub y2: Complex64,
}

impl CorrelatorPair {
    pub fn new(y1: Complex64, y2: Complex64) -> Self {
        CorrelatorPair { y1, y2 }
    }

    /// Correlates one received symbol against both tones.
    pub fn from_samples(samples: &[Complex64], tones: &TonePair) -> Self {
        let (w1, w2) = tones.baseband();
        CorrelatorPair {
            y1: correlate(samples, w1, tones.symbol_period),
            y2: correlate(samples, w2, tones.symbol_period),
        }
    }

    /// Common Doppler rotation `e^{jν}` applied to both branches.
    pub fn apply_doppler(self, nu: f64) -> Self {
        let r = Complex64::cis(nu);
        CorrelatorPair {
            y1: self.y1 * r,
            y2: self.y2 * r,
        }
    }
}

/// Rotates a block of samples by `e^{jν}` in place.
pub fn apply_doppler(samples: &mut [Complex64], nu: f64) {
    let r = Complex64::cis(nu);
    samples.iter_mut().for_each(|s| *s *= r);
}

/// `z = |y⁽¹⁾|² − |y⁽²⁾|²`.
#[inline]
pub fn detect_z(pair: &CorrelatorPair) -> f64 {
    pair.y1.norm_sqr() - pair.y2.norm_sqr()
}

/// Correlator outputs for a flat channel row `h`, tone-1 amplitudes `amps`,
/// Doppler phase `nu` and branch noises `n1`, `n2`.
pub fn correlator_outputs(
    h: &[Complex64],
    amps: &[f64],
    nu: f64,
    n1: Complex64,
    n2: Complex64,
) -> CorrelatorPair {
    let (hs, hsb) = tone_sums(h, amps);
    let r = Complex64::cis(nu);
    CorrelatorPair {
        y1: r * hs + n1,
        y2: r * hsb + n2,
    }
}

/// `(h·s, h·s̄)` with `s̄ = 1 − s` on the amplitude scale.
pub fn tone_sums(h: &[Complex64], amps: &[f64]) -> (Complex64, Complex64) {
    h.iter().zip(amps).fold(
        (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
        |(a, b), (&hn, &sn)| (a + hn * sn, b + hn * (1.0 - sn)),
    )
}

/// Equivalent noise `u = 2Re(hs·n₁*) + |n₁|² − 2Re(hs̄·n₂*) − |n₂|²`.
pub fn equivalent_noise(h: &[Complex64], amps: &[f64], n1: Complex64, n2: Complex64) -> f64 {
    let (hs, hsb) = tone_sums(h, amps);
    2.0 * (hs * n1.conj()).re + n1.norm_sqr() - 2.0 * (hsb * n2.conj()).re - n2.norm_sqr()
}

/// Correlator-output noise, `CN(0, σ²)` per branch.
///
/// `sigma2` is the total complex variance `E|n|²`; the per-component
/// variance used by the closed-form statistics is `σ_v² = σ²/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma2: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64) -> Result<Self> {
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!("noise variance must be finite and >= 0, got {sigma2}")));
        }
        Ok(NoiseModel { sigma2 })
    }

    pub fn noiseless() -> Self {
        NoiseModel { sigma2: 0.0 }
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Per-component variance `σ_v² = σ²/2`.
    pub fn sigma_v2(&self) -> f64 {
        self.sigma2 / 2.0
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        if self.sigma2 == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        complex_normal(rng) * self.sigma2.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tones() -> TonePair {
        TonePair::new(5.9e9, 8e-6).unwrap()
    }

    fn fs(spp: usize) -> f64 {
        spp as f64 / 8e-6
    }

    #[test]
    fn complement_and_bipolar() {
        let s = ComplementarySymbol::new(4, vec![0, 1, 2, 3]).unwrap();
        assert_eq!(s.s_bar(), vec![3, 2, 1, 0]);
        let b = ComplementarySymbol::from_bits(&[true, false]);
        assert_eq!(b.x_bar(), vec![1.0, -1.0]);
        assert_eq!(b.s_bar(), vec![0, 1]);
        assert!(ComplementarySymbol::new(1, vec![0]).is_err());
        assert!(ComplementarySymbol::new(2, vec![2]).is_err());
    }

    #[test]
    fn index_roundtrip_is_lexicographic() {
        let first = ComplementarySymbol::from_index(0, 3, 2).unwrap();
        assert_eq!(first.s(), &[0, 0, 0]);
        let one = ComplementarySymbol::from_index(1, 3, 2).unwrap();
        assert_eq!(one.s(), &[0, 0, 1]);
        for i in 0..27 {
            assert_eq!(ComplementarySymbol::from_index(i, 3, 3).unwrap().index(), i);
        }
        assert!(ComplementarySymbol::from_index(8, 3, 2).is_err());
    }

    #[test]
    fn tone_pair_is_orthogonal() {
        let t = tones();
        assert!((t.f2 - t.f1 - 125_000.0).abs() < 1e-3);
    }

    #[test]
    fn modulate_a2_single_tones() {
        let t = tones();
        let on = modulate(&ComplementarySymbol::from_bits(&[true]), &t, fs(16)).unwrap();
        for i in 0..16 {
            assert!((on[(0, i)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let off = modulate(&ComplementarySymbol::from_bits(&[false]), &t, fs(16)).unwrap();
        for i in 0..16 {
            let want = Complex64::cis(TAU * i as f64 / 16.0);
            assert!((off[(0, i)] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn modulate_a4_matches_formula() {
        let t = tones();
        let sym = ComplementarySymbol::new(4, vec![2]).unwrap();
        let x = modulate(&sym, &t, fs(16)).unwrap();
        for i in 0..16 {
            let time = i as f64 * 8e-6 / 16.0;
            let want = (Complex64::new(2.0, 0.0) + Complex64::cis(TAU * 125_000.0 * time)) / 3.0;
            assert!((x[(0, i)] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn modulate_rejects_fractional_or_sparse_grids() {
        let t = tones();
        let sym = ComplementarySymbol::from_bits(&[true]);
        assert!(modulate(&sym, &t, 10.5 / 8e-6).is_err());
        assert!(modulate(&sym, &t, fs(4)).is_err());
    }

    #[test]
    fn correlate_matched_and_orthogonal() {
        let t = tones();
        let (w1, w2) = t.baseband();
        let n = 16;
        let tone = |f: f64| -> Vec<Complex64> {
            (0..n).map(|i| Complex64::cis(TAU * f * i as f64 * 8e-6 / n as f64)).collect()
        };
        assert!((correlate(&tone(w1), w1, 8e-6) - Complex64::new(1.0, 0.0)).norm() < 1e-10);
        assert!(correlate(&tone(w2), w1, 8e-6).norm() < 1e-10);
        let mix: Vec<Complex64> = tone(w1)
            .iter()
            .zip(tone(w2))
            .map(|(a, b)| a * 0.7 + b * 0.3)
            .collect();
        assert!((correlate(&mix, w2, 8e-6) - Complex64::new(0.3, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn doppler_rotation_cases() {
        let p = CorrelatorPair::new(Complex64::new(0.3, -0.2), Complex64::new(-1.1, 0.4));
        assert_eq!(p.apply_doppler(0.0), p);
        let flipped = p.apply_doppler(std::f64::consts::PI);
        assert!((flipped.y1 + p.y1).norm() < 1e-15 && (flipped.y2 + p.y2).norm() < 1e-15);
        let r = p.apply_doppler(0.37);
        assert!((r.y1.norm() - p.y1.norm()).abs() < 1e-15);
        assert!((r.y2.norm() - p.y2.norm()).abs() < 1e-15);
    }

    #[test]
    fn detect_z_simple() {
        let p = CorrelatorPair::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        assert_eq!(detect_z(&p), 1.0);
        let h = [Complex64::cis(2.1)];
        let pair = correlator_outputs(&h, &[1.0], 0.0, Complex64::default(), Complex64::default());
        assert!((detect_z(&pair) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equivalent_noise_hand_case() {
        let h = [Complex64::new(1.0, 0.0)];
        assert_eq!(equivalent_noise(&h, &[1.0], Complex64::default(), Complex64::default()), 0.0);
        let u = equivalent_noise(&h, &[1.0], Complex64::new(0.0, 1.0), Complex64::default());
        assert!((u - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noise_model_rejects_negative() {
        assert!(NoiseModel::new(-1.0).is_err());
        assert_eq!(NoiseModel::new(0.5).unwrap().sigma_v2(), 0.25);
    }
}
