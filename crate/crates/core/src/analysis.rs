//! Closed-form statistics of the magnitude-difference detector.
//!
//! With per-component noise variance `σ_v²`, `|c s + v|²` is a noncentral
//! gamma variable with shape 1, scale `β = 2σ_v²` and noncentrality
//! `γ = |c s|²`. The detector output `z̃ = |c s + v₁|² − |c s̄ + v₂|²` is the
//! difference of two such variables; its exact density is a Poisson-mixed
//! double series, its Gaussian approximation drives the SER expression.

use libm::lgamma as ln_gamma;

use crate::error::{Error, Result};
use crate::special::{bessel_i0_scaled, log_add_exp, normal_interval};
use crate::uplink::{build_regions, DecisionRegions, RhoCoefficients, UplinkChannelSet};
use crate::waveform::{tone_sums, ComplementarySymbol, NoiseModel};
use num_complex::Complex64;

/// Shape, scale and noncentrality of a generalized gamma variable.
///
/// Only shape 1 is supported.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    alpha: f64,
    beta: f64,
    gamma: f64,
}

impl GammaParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("gamma scale must be positive, got {beta}")));
        }
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("noncentrality must be non-negative, got {gamma}")));
        }
        Ok(GammaParams { alpha: 1.0, beta, gamma })
    }

    /// Parameters of `|a + v|²` for `v ~ CN(0, 2σ_v²)`.
    pub fn from_signal(signal_power: f64, sigma_v2: f64) -> Result<Self> {
        Self::new(2.0 * sigma_v2, signal_power)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Mean `γ + β`.
    pub fn mean(&self) -> f64 {
        self.gamma + self.beta
    }

    /// Variance `2βγ + β²`.
    pub fn variance(&self) -> f64 {
        2.0 * self.beta * self.gamma + self.beta * self.beta
    }
}

/// Density of the shape-1 generalized gamma variable.
///
/// `(1/β) I₀(2√(γx)/β) e^{−(γ+x)/β}`, evaluated through the scaled Bessel
/// function. Zero for `x < 0`.
pub fn gamma_pdf(x: f64, p: &GammaParams) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let b = p.beta;
    let arg = 2.0 * (p.gamma * x).sqrt() / b;
    let gap = x.sqrt() - p.gamma.sqrt();
    bessel_i0_scaled(arg) * (-gap * gap / b).exp() / b
}

/// Rician envelope density `(t/σ_v²) I₀(r̄t/σ_v²) e^{−(r̄²+t²)/2σ_v²}`.
pub fn rician_envelope_pdf(t: f64, r_bar: f64, sigma_v2: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let arg = r_bar * t / sigma_v2;
    let gap = t - r_bar;
    t / sigma_v2 * bessel_i0_scaled(arg) * (-gap * gap / (2.0 * sigma_v2)).exp()
}

/// Density of the squared envelope `|a + v|²`; identical to [`gamma_pdf`]
/// with `β = 2σ_v²`, `γ = r̄²`.
pub fn rician_power_pdf(x: f64, r_bar: f64, sigma_v2: f64) -> f64 {
    if x <= 0.0 {
        return if x == 0.0 { (-r_bar * r_bar / (2.0 * sigma_v2)).exp() / (2.0 * sigma_v2) } else { 0.0 };
    }
    let t = x.sqrt();
    rician_envelope_pdf(t, r_bar, sigma_v2) / (2.0 * t)
}

/// Ceiling on [`SeriesControl::sized_for`]; the series costs `O(D²)`.
pub const MAX_SIZED_TERMS: usize = 4000;

/// Truncation control for the difference-of-gammas series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    /// Largest number of diagonals `k + m` summed.
    pub max_terms: usize,
    /// Absolute bound on the neglected density.
    pub tail_tol: f64,
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            max_terms: 200,
            tail_tol: 1e-12,
        }
    }
}

impl SeriesControl {
    pub fn new(max_terms: usize, tail_tol: f64) -> Result<Self> {
        let c = SeriesControl { max_terms, tail_tol };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.max_terms == 0 {
            return Err(Error::invalid("max_terms must be at least 1"));
        }
        if !(self.tail_tol > 0.0) {
            return Err(Error::invalid("tail_tol must be positive"));
        }
        Ok(())
    }

    /// Enough diagonals for Poisson rates `λ + λ′ = (γ + γ′)/β`, capped at
    /// [`MAX_SIZED_TERMS`]; past the cap evaluation fails with a truncation
    /// error instead of running for minutes.
    pub fn sized_for(p: &GammaParams, q: &GammaParams, tail_tol: f64) -> Self {
        let lam = (p.gamma + q.gamma) / p.beta;
        let max_terms = (lam + 12.0 * lam.sqrt() + 50.0).min(MAX_SIZED_TERMS as f64).ceil() as usize;
        SeriesControl {
            max_terms: max_terms.max(200),
            tail_tol,
        }
    }
}

fn ln_factorial(k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

// ln(λ^k / k!) with the 0^0 = 1 convention
fn ln_poisson_kernel(k: usize, ln_lam: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * ln_lam - ln_factorial(k)
    }
}

/// Density of `X − X′` for independent shape-1 generalized gamma variables
/// sharing one scale.
///
/// `X` is a Poisson(`γ/β`) mixture of Gamma(`k+1`, `β`) variables, so the
/// difference is a double Poisson mixture of differences of integer-shape
/// gammas. The series is summed along diagonals `k + m = D` until the mass
/// of the remaining Poisson weights, times the `1/β` bound on each
/// component density, falls below `ctl.tail_tol`.
pub fn diff_gamma_pdf(x: f64, p: &GammaParams, p_prime: &GammaParams, ctl: &SeriesControl) -> Result<f64> {
    ctl.validate()?;
    if p.alpha != 1.0 || p_prime.alpha != 1.0 {
        return Err(Error::invalid("only shape 1 is supported"));
    }
    if (p.beta - p_prime.beta).abs() > 1e-12 * p.beta {
        return Err(Error::invalid("both variables must share one scale"));
    }
    if !x.is_finite() {
        return Ok(0.0);
    }
    if x < 0.0 {
        return diff_gamma_positive(-x, p_prime, p, ctl);
    }
    diff_gamma_positive(x, p, p_prime, ctl)
}

fn diff_gamma_positive(x: f64, p: &GammaParams, q: &GammaParams, ctl: &SeriesControl) -> Result<f64> {
    let beta = p.beta;
    let t = x / beta;
    let lam = p.gamma / beta;
    let lam_q = q.gamma / beta;
    let lam_tot = lam + lam_q;
    let ln_lam = lam.ln();
    let ln_lam_q = lam_q.ln();
    let ln_t = t.ln();

    // ln h_{k, D-k} for the previous and current diagonal
    let mut prev: Vec<f64> = Vec::with_capacity(ctl.max_terms + 1);
    let mut cur: Vec<f64> = Vec::with_capacity(ctl.max_terms + 1);
    let mut total = f64::NEG_INFINITY;
    let mut bound = f64::INFINITY;
    let ln_norm = -lam_tot;

    for d in 0..ctl.max_terms {
        cur.clear();
        // h_{0,D} = e^{−t} / 2^{D+1}
        cur.push(-t - (d as f64 + 1.0) * std::f64::consts::LN_2);
        for k in 1..=d {
            let lk = (k as f64).ln();
            let from_prev = ln_t - lk + prev[k - 1];
            let from_cur = ((d - k + 1) as f64).ln() - lk + cur[k - 1];
            cur.push(log_add_exp(from_prev, from_cur));
        }
        for (k, &lh) in cur.iter().enumerate() {
            let m = d - k;
            if (lam == 0.0 && k > 0) || (lam_q == 0.0 && m > 0) {
                continue;
            }
            let lw = ln_norm + ln_poisson_kernel(k, ln_lam) + ln_poisson_kernel(m, ln_lam_q);
            total = log_add_exp(total, lw + lh);
        }
        std::mem::swap(&mut prev, &mut cur);

        // P(Poisson(λ_tot) > d) ≤ p(d+1) / (1 − λ_tot/(d+2))
        let next = (d + 2) as f64;
        if lam_tot == 0.0 {
            bound = 0.0;
        } else if lam_tot < next {
            let ln_p = -lam_tot + ln_poisson_kernel(d + 1, lam_tot.ln());
            bound = ln_p.exp() / (1.0 - lam_tot / next) / beta;
        }
        if bound < ctl.tail_tol {
            return Ok(total.exp() / beta);
        }
    }
    Err(Error::Truncation {
        partial: total.exp() / beta,
        bound,
        terms: ctl.max_terms,
    })
}

/// Mean and variance of a Gaussian approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSerModel {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianSerModel {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let d = x - self.mu;
        (-d * d / (2.0 * self.sigma2)).exp() / (2.0 * std::f64::consts::PI * self.sigma2).sqrt()
    }
}

/// Gaussian model of `z̃_m` for a binary symbol.
///
/// `μ = |c s|² − |c s̄|²`, `σ² = 4σ_v²(|c s|² + |c s̄|²) + 8σ_v⁴`.
pub fn gaussian_approx(c_row: &[Complex64], sym: &ComplementarySymbol, sigma_v2: f64) -> Result<GaussianSerModel> {
    if sym.levels() != 2 {
        return Err(Error::invalid("the Gaussian model is derived for binary symbols"));
    }
    gaussian_approx_amplitudes(c_row, &sym.amplitudes(), sigma_v2)
}

/// [`gaussian_approx`] for arbitrary amplitudes `s ∈ [0, 1]`, `s̄ = 1 − s`.
pub fn gaussian_approx_amplitudes(c_row: &[Complex64], amps: &[f64], sigma_v2: f64) -> Result<GaussianSerModel> {
    if c_row.len() != amps.len() {
        return Err(Error::DimensionMismatch {
            what: "channel row vs symbol",
            expected: c_row.len(),
            got: amps.len(),
        });
    }
    if !(sigma_v2 >= 0.0) {
        return Err(Error::invalid("noise variance must be non-negative"));
    }
    let (a, b) = tone_sums(c_row, amps);
    let (pa, pb) = (a.norm_sqr(), b.norm_sqr());
    Ok(GaussianSerModel {
        mu: pa - pb,
        sigma2: 4.0 * sigma_v2 * (pa + pb) + 8.0 * sigma_v2 * sigma_v2,
    })
}

/// Gaussian model of `ξ` from the per-antenna models.
pub fn xi_gaussian(per_antenna: &[GaussianSerModel], n_t: usize) -> Result<GaussianSerModel> {
    if per_antenna.is_empty() || n_t == 0 {
        return Err(Error::invalid("need at least one antenna"));
    }
    let n = n_t as f64;
    Ok(GaussianSerModel {
        mu: per_antenna.iter().map(|m| m.mu).sum::<f64>() / n,
        sigma2: per_antenna.iter().map(|m| m.sigma2).sum::<f64>() / (n * n),
    })
}

/// Probability that `ξ ~ N(μ_ξ, σ_ξ²)` falls in region `r`.
pub fn symbol_prob(r: usize, regions: &DecisionRegions, model: &GaussianSerModel) -> Result<f64> {
    if !(model.sigma2 > 0.0) {
        return Err(Error::invalid("variance must be positive"));
    }
    if r >= regions.len() {
        return Err(Error::invalid(format!("region {r} out of range")));
    }
    let (lo, hi) = regions.interval(r);
    Ok(normal_interval(lo, hi, model.mu, model.sigma()))
}

/// Closed-form average SER and a flag for merged constellation points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerEstimate {
    pub ser: f64,
    /// Some points share a decision region and always count as errors.
    pub indistinguishable: bool,
}

/// Average SER over the equiprobable binary constellation of all users.
///
/// Region boundaries come from `rho`; the conditional `ξ` model for each
/// point comes from the per-antenna Gaussian approximation on `chans`.
pub fn closed_form_ser(rho: &RhoCoefficients, noise: &NoiseModel, chans: &UplinkChannelSet) -> Result<SerEstimate> {
    if rho.len() != chans.n_users() {
        return Err(Error::DimensionMismatch {
            what: "coefficients vs users",
            expected: chans.n_users(),
            got: rho.len(),
        });
    }
    let regions = build_regions(rho)?;
    let n_k = chans.n_users();
    let n_t = chans.n_antennas();
    let rows: Vec<Vec<Complex64>> = (0..n_t).map(|m| chans.row(m)).collect();
    let sigma_v2 = noise.sigma_v2();
    let size = regions.constellation_size();
    let mut correct = 0.0;
    let mut per_antenna = Vec::with_capacity(n_t);
    for idx in 0..size {
        let r = regions.region_of(idx);
        if regions.representative(r) != idx {
            continue;
        }
        let sym = ComplementarySymbol::from_index(idx as u64, n_k, 2)?;
        let amps = sym.amplitudes();
        per_antenna.clear();
        for row in &rows {
            per_antenna.push(gaussian_approx_amplitudes(row, &amps, sigma_v2)?);
        }
        let model = xi_gaussian(&per_antenna, n_t)?;
        correct += if model.sigma2 > 0.0 {
            symbol_prob(r, &regions, &model)?
        } else {
            1.0
        };
    }
    Ok(SerEstimate {
        ser: (1.0 - correct / size as f64).max(0.0),
        indistinguishable: regions.has_indistinguishable(),
    })
}
