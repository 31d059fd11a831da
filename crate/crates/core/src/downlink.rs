//! Downlink real-domain linear model.
//!
//! After the magnitude-difference detector every user sees
//! `z_m = h̄_m·x̄ + u_m` with `h̄_m = Re(h_m* 1 · h_m)`. Stacking users gives
//! the real matrix `H̄ = Re(ΛH)`, which supports least-squares estimation
//! from bipolar pilots, exhaustive joint detection for small arrays, and
//! zero-forcing precoding `P = H̄ᵀ(H̄H̄ᵀ)⁻¹` for large ones.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::waveform::{detect_z, ComplementarySymbol, CorrelatorPair};

/// Largest constellation searched by [`joint_detect`].
pub const JOINT_SEARCH_CAP: u128 = 1 << 16;

/// Minimum ratio of smallest to largest singular value accepted before
/// inverting a Gram matrix.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// `Re(conj(Σ_k h_k)·h_n)` for every `n`: one row of `H̄`.
pub fn equivalent_row(h: &[Complex64]) -> Vec<f64> {
    let lambda = h.iter().sum::<Complex64>().conj();
    h.iter().map(|&hn| (lambda * hn).re).collect()
}

/// The real matrix `H̄` (`N_k × N_t`) of the linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentLinearChannel {
    h_bar: DMatrix<f64>,
}

impl EquivalentLinearChannel {
    pub fn new(h_bar: DMatrix<f64>) -> Result<Self> {
        if h_bar.is_empty() {
            return Err(Error::invalid("equivalent channel must be non-empty"));
        }
        if h_bar.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("equivalent channel has non-finite entries"));
        }
        Ok(EquivalentLinearChannel { h_bar })
    }

    pub fn h_bar(&self) -> &DMatrix<f64> {
        &self.h_bar
    }

    /// Number of receivers (rows).
    pub fn n_rx(&self) -> usize {
        self.h_bar.nrows()
    }

    /// Number of transmit antennas (columns).
    pub fn n_tx(&self) -> usize {
        self.h_bar.ncols()
    }

    /// Noiseless observation `H̄ x̄`.
    pub fn response(&self, x_bar: &[f64]) -> Result<DVector<f64>> {
        if x_bar.len() != self.n_tx() {
            return Err(Error::DimensionMismatch {
                what: "bipolar symbol length",
                expected: self.n_tx(),
                got: x_bar.len(),
            });
        }
        Ok(&self.h_bar * DVector::from_column_slice(x_bar))
    }
}

/// `H̄ = Re(ΛH)` with `Λ_mm = conj(Σ_n h_mn)`.
pub fn build_equiv_channel(h: &DMatrix<Complex64>) -> Result<EquivalentLinearChannel> {
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("channel has non-finite entries"));
    }
    let mut h_bar = DMatrix::zeros(h.nrows(), h.ncols());
    let mut row = Vec::with_capacity(h.ncols());
    for m in 0..h.nrows() {
        row.clear();
        row.extend(h.row(m).iter().copied());
        for (n, v) in equivalent_row(&row).into_iter().enumerate() {
            h_bar[(m, n)] = v;
        }
    }
    EquivalentLinearChannel::new(h_bar)
}

/// Sylvester–Hadamard matrix of a power-of-two order.
pub fn sylvester_hadamard(order: usize) -> Result<DMatrix<f64>> {
    if order == 0 || !order.is_power_of_two() {
        return Err(Error::invalid(format!("Hadamard order must be a power of two, got {order}")));
    }
    Ok(DMatrix::from_fn(order, order, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }))
}

/// Bipolar training sequence of `len` symbols for `n_t` antennas.
///
/// Rows are the first `n_t` rows of the Hadamard matrix of order
/// `next_power_of_two(n_t)`, repeated cyclically along time. The Gram
/// matrix is invertible whenever `len` reaches that order.
pub fn hadamard_pilots(n_t: usize, len: usize) -> Result<DMatrix<f64>> {
    if n_t == 0 {
        return Err(Error::invalid("need at least one transmit antenna"));
    }
    let order = n_t.next_power_of_two();
    let h = sylvester_hadamard(order)?;
    Ok(DMatrix::from_fn(n_t, len, |i, j| h[(i, j % order)]))
}

/// Training block: bipolar pilots and the observations they produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotBlock {
    /// `N_t × L` bipolar pilot symbols.
    pub x_bar_t: DMatrix<f64>,
    /// `N_k × L` observations.
    pub z_t: DMatrix<f64>,
}

/// Least-squares estimate `Ĥ̄ = z_t x̄_tᵀ (x̄_t x̄_tᵀ)⁻¹`.
pub fn ls_estimate(pilots: &PilotBlock) -> Result<EquivalentLinearChannel> {
    let x = &pilots.x_bar_t;
    if pilots.z_t.ncols() != x.ncols() {
        return Err(Error::DimensionMismatch {
            what: "pilot observation length",
            expected: x.ncols(),
            got: pilots.z_t.ncols(),
        });
    }
    let gram = x * x.transpose();
    let rank_err = Error::RankDeficientPilots {
        rows: x.nrows(),
        cols: x.ncols(),
    };
    if x.ncols() < x.nrows() || singular_ratio(&gram) < RANK_TOLERANCE {
        return Err(rank_err);
    }
    let inv = gram.try_inverse().ok_or(rank_err)?;
    EquivalentLinearChannel::new(&pilots.z_t * x.transpose() * inv)
}

fn singular_ratio(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    if !(max > 0.0) {
        return 0.0;
    }
    sv.min() / max
}

/// Exhaustive minimum-distance detection `argmin_s Σ_m (z_m − h̄_m x̄)²`.
///
/// Candidates are visited in lexicographic order and only a strictly
/// smaller residual replaces the incumbent, so ties resolve to the
/// lexicographically smallest symbol.
pub fn joint_detect(z: &[f64], chan: &EquivalentLinearChannel, levels: u32) -> Result<ComplementarySymbol> {
    if z.len() != chan.n_rx() {
        return Err(Error::DimensionMismatch {
            what: "observation length",
            expected: chan.n_rx(),
            got: z.len(),
        });
    }
    if levels < 2 {
        return Err(Error::invalid("need at least 2 amplitude levels"));
    }
    let n_t = chan.n_tx();
    let candidates = (levels as u128)
        .checked_pow(n_t as u32)
        .unwrap_or(u128::MAX);
    if candidates > JOINT_SEARCH_CAP {
        return Err(Error::SearchTooLarge {
            candidates,
            cap: JOINT_SEARCH_CAP,
        });
    }
    let top = (levels - 1) as f64;
    let alphabet: Vec<f64> = (0..levels).map(|v| (2.0 * v as f64 - top) / top).collect();
    let h = chan.h_bar();
    let mut best = (f64::INFINITY, 0u64);
    let mut x = vec![0.0; n_t];
    for idx in 0..candidates as u64 {
        let mut rest = idx;
        for slot in x.iter_mut().rev() {
            *slot = alphabet[(rest % levels as u64) as usize];
            rest /= levels as u64;
        }
        let mut cost = 0.0;
        for (m, &zm) in z.iter().enumerate() {
            let pred: f64 = h.row(m).iter().zip(&x).map(|(a, b)| a * b).sum();
            cost += (zm - pred) * (zm - pred);
        }
        if cost < best.0 {
            best = (cost, idx);
        }
    }
    ComplementarySymbol::from_index(best.1, n_t, levels)
}

/// Zero-forcing precoder on the linear model.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    p: DMatrix<f64>,
    rho: f64,
    power_budget: f64,
}

impl Precoder {
    /// `N_t × N_k` precoding matrix.
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Power gain `ρ = p_s / (2·tr(R⁻¹))`.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    /// `tr(R⁻¹) = tr(PᵀP)`.
    pub fn trace_inv_correlation(&self) -> f64 {
        self.p.norm_squared()
    }

    /// Post-precoding matrix `B = H̄P` for a (possibly newer) channel.
    pub fn effective(&self, chan: &EquivalentLinearChannel) -> Result<DMatrix<f64>> {
        if chan.n_tx() != self.p.nrows() {
            return Err(Error::DimensionMismatch {
                what: "channel width vs precoder height",
                expected: self.p.nrows(),
                got: chan.n_tx(),
            });
        }
        Ok(chan.h_bar() * &self.p)
    }
}

/// `P = H̄ᵀ(H̄H̄ᵀ)⁻¹` with `ρ = power_budget / (2·tr(PᵀP))`.
pub fn zf_precoder(chan: &EquivalentLinearChannel, power_budget: f64) -> Result<Precoder> {
    if !(power_budget > 0.0 && power_budget.is_finite()) {
        return Err(Error::invalid(format!("power budget must be > 0, got {power_budget}")));
    }
    let h = chan.h_bar();
    let gram = h * h.transpose();
    let ratio = if chan.n_tx() < chan.n_rx() {
        0.0
    } else {
        singular_ratio(&gram)
    };
    let rank_err = Error::RankDeficientChannel {
        ratio,
        tolerance: RANK_TOLERANCE,
    };
    if ratio < RANK_TOLERANCE {
        return Err(rank_err);
    }
    let inv = gram.try_inverse().ok_or(rank_err)?;
    let p = h.transpose() * inv;
    let trace = p.norm_squared();
    Ok(Precoder {
        p,
        rho: power_budget / (2.0 * trace),
        power_budget,
    })
}

/// Noiseless precoded detector output
/// `|B(1+x̄)/2|² − |B(1−x̄)/2|²` (element-wise), equal to `x̄` when `B = I`.
pub fn precoded_roundtrip(
    chan: &EquivalentLinearChannel,
    precoder: &Precoder,
    sym: &ComplementarySymbol,
) -> Result<Vec<f64>> {
    if sym.levels() != 2 {
        return Err(Error::invalid("precoded detection is defined for A = 2"));
    }
    let b = precoder.effective(chan)?;
    if sym.len() != b.ncols() {
        return Err(Error::DimensionMismatch {
            what: "symbol length vs number of users",
            expected: b.ncols(),
            got: sym.len(),
        });
    }
    let s = DVector::from_vec(sym.amplitudes());
    let s_bar = s.map(|v| 1.0 - v);
    let on = &b * s;
    let off = &b * s_bar;
    Ok(on.iter().zip(off.iter()).map(|(a, c)| a * a - c * c).collect())
}

/// Correlator outputs at precoded user `m`: both tones scaled by `√ρ`,
/// passed through row `m` of `B`, rotated by the Doppler phase and hit by
/// the branch noises.
pub fn precoded_pair(
    b_row: &[f64],
    rho: f64,
    amps: &[f64],
    nu: f64,
    n1: Complex64,
    n2: Complex64,
) -> CorrelatorPair {
    let (on, off) = b_row
        .iter()
        .zip(amps)
        .fold((0.0, 0.0), |(a, c), (&bk, &sk)| (a + bk * sk, c + bk * (1.0 - sk)));
    let g = rho.sqrt();
    let r = Complex64::cis(nu);
    CorrelatorPair::new(r * (g * on) + n1, r * (g * off) + n2)
}

/// Per-user decision: `z ≥ 0 → x̄ = +1`.
pub fn slice_sign(z: f64) -> bool {
    z >= 0.0
}

/// Which output-SNR expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnrMode {
    /// `ρ / (2σ² + 3σ⁴/4)` with `ρ` from the actual channel.
    Exact,
    /// `(N_t − N_k − 1) / (4 N_k σ²)`.
    Asymptotic,
}

/// `ρ/(2σ² + 3σ⁴/4)`.
pub fn output_snr_exact(precoder: &Precoder, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("noise variance must be > 0, got {sigma2}")));
    }
    Ok(precoder.rho() / (2.0 * sigma2 + 0.75 * sigma2 * sigma2))
}

/// `(N_t − N_k − 1)/(4 N_k σ²)`; valid for `N_t > N_k + 1` in the
/// high-SNR regime (`σ⁴ ≪ σ²`).
pub fn output_snr_asymptotic(n_t: usize, n_k: usize, sigma2: f64) -> Result<f64> {
    if n_k == 0 || n_t <= n_k + 1 {
        return Err(Error::invalid(format!(
            "asymptotic output SNR needs N_t > N_k + 1 (N_t = {n_t}, N_k = {n_k})"
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::invalid(format!("noise variance must be > 0, got {sigma2}")));
    }
    Ok((n_t - n_k - 1) as f64 / (4.0 * n_k as f64 * sigma2))
}

/// Output SNR for a channel with unit power budget.
pub fn output_snr(chan: &EquivalentLinearChannel, sigma2: f64, mode: SnrMode) -> Result<f64> {
    match mode {
        SnrMode::Exact => output_snr_exact(&zf_precoder(chan, 1.0)?, sigma2),
        SnrMode::Asymptotic => output_snr_asymptotic(chan.n_tx(), chan.n_rx(), sigma2),
    }
}

/// `z` at a precoded user, see [`precoded_pair`].
pub fn precoded_observation(
    b_row: &[f64],
    rho: f64,
    amps: &[f64],
    nu: f64,
    n1: Complex64,
    n2: Complex64,
) -> f64 {
    detect_z(&precoded_pair(b_row, rho, amps, nu, n1, n2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn equivalent_of_scalar_channels() {
        let one = build_equiv_channel(&DMatrix::from_element(1, 1, c(1.0, 0.0))).unwrap();
        assert_eq!(one.h_bar()[(0, 0)], 1.0);
        let rot = build_equiv_channel(&DMatrix::from_element(1, 1, Complex64::cis(1.9))).unwrap();
        assert!((rot.h_bar()[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hadamard_rows_orthogonal() {
        let h = sylvester_hadamard(8).unwrap();
        let g = &h * h.transpose();
        assert_eq!(g, DMatrix::identity(8, 8) * 8.0);
        assert!(sylvester_hadamard(12).is_err());
        let p = hadamard_pilots(3, 20).unwrap();
        assert_eq!(p.shape(), (3, 20));
        assert_eq!(p.column(0), p.column(4));
    }

    #[test]
    fn ls_recovers_noiseless_channel() {
        let h_bar = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 0.25, 0.3, 2.0, -1.0]);
        let x = hadamard_pilots(3, 8).unwrap();
        let z = &h_bar * &x;
        let est = ls_estimate(&PilotBlock { x_bar_t: x, z_t: z }).unwrap();
        assert!((est.h_bar() - &h_bar).abs().max() < 1e-10);
    }

    #[test]
    fn ls_rejects_short_or_singular_pilots() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let z = DMatrix::zeros(1, 2);
        assert!(matches!(
            ls_estimate(&PilotBlock { x_bar_t: x, z_t: z }),
            Err(Error::RankDeficientPilots { .. })
        ));
        let x = DMatrix::from_element(3, 2, 1.0);
        let z = DMatrix::zeros(1, 2);
        assert!(ls_estimate(&PilotBlock { x_bar_t: x, z_t: z }).is_err());
    }

    #[test]
    fn joint_detect_tie_breaks_lexicographically() {
        let chan = EquivalentLinearChannel::new(DMatrix::identity(2, 2)).unwrap();
        let got = joint_detect(&[0.0, 0.0], &chan, 2).unwrap();
        assert_eq!(got.s(), &[0, 0]);
    }

    #[test]
    fn joint_detect_cap() {
        let chan = EquivalentLinearChannel::new(DMatrix::from_element(1, 17, 1.0)).unwrap();
        assert!(matches!(
            joint_detect(&[0.0], &chan, 2),
            Err(Error::SearchTooLarge { .. })
        ));
    }

    #[test]
    fn zf_identity_and_scaled_identity() {
        let eye = EquivalentLinearChannel::new(DMatrix::identity(4, 4)).unwrap();
        let p = zf_precoder(&eye, 1.0).unwrap();
        assert!((p.p() - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-15);
        assert!((p.rho() - 1.0 / 8.0).abs() < 1e-15);

        let two = EquivalentLinearChannel::new(DMatrix::identity(4, 4) * 2.0).unwrap();
        let p = zf_precoder(&two, 3.0).unwrap();
        assert!((p.p() - DMatrix::<f64>::identity(4, 4) * 0.5).abs().max() < 1e-15);
        assert!((p.trace_inv_correlation() - 1.0).abs() < 1e-15);
        assert!((p.rho() - 2.0 * 3.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn zf_rejects_rank_deficient() {
        let chan = EquivalentLinearChannel::new(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0])).unwrap();
        assert!(matches!(zf_precoder(&chan, 1.0), Err(Error::RankDeficientChannel { .. })));
        let tall = EquivalentLinearChannel::new(DMatrix::from_element(3, 2, 1.0)).unwrap();
        assert!(zf_precoder(&tall, 1.0).is_err());
    }

    #[test]
    fn roundtrip_all_ones_and_minus_ones() {
        let chan = EquivalentLinearChannel::new(DMatrix::from_row_slice(2, 3, &[1.0, 0.2, -0.3, 0.1, 0.9, 0.4])).unwrap();
        let p = zf_precoder(&chan, 1.0).unwrap();
        let up = precoded_roundtrip(&chan, &p, &ComplementarySymbol::from_bits(&[true, true])).unwrap();
        let down = precoded_roundtrip(&chan, &p, &ComplementarySymbol::from_bits(&[false, false])).unwrap();
        assert!(up.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(down.iter().all(|v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn asymptotic_snr_values() {
        assert!((output_snr_asymptotic(128, 8, 1.0).unwrap() - 3.71875).abs() < 1e-15);
        assert!((output_snr_asymptotic(10, 8, 1.0).unwrap() - 1.0 / 32.0).abs() < 1e-15);
        assert!(output_snr_asymptotic(9, 8, 1.0).is_err());
    }

    #[test]
    fn exact_snr_formula() {
        let eye = EquivalentLinearChannel::new(DMatrix::identity(2, 2)).unwrap();
        let got = output_snr(&eye, 0.1, SnrMode::Exact).unwrap();
        assert!((got - 0.25 / (0.2 + 0.0075)).abs() < 1e-14);
    }

    #[test]
    fn precoded_pair_identity_noiseless() {
        let z = precoded_observation(&[1.0, 0.0], 4.0, &[1.0, 0.0], 0.7, c(0.0, 0.0), c(0.0, 0.0));
        assert!((z - 4.0).abs() < 1e-12);
        let z = precoded_observation(&[0.0, 1.0], 4.0, &[1.0, 0.0], 0.7, c(0.0, 0.0), c(0.0, 0.0));
        assert!((z + 4.0).abs() < 1e-12);
    }
}
