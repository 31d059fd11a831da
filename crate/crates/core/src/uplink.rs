//! Uplink model with antenna averaging.
//!
//! Each base-station antenna `m` observes `z̃_m = |c_m s + v₁|² − |c_m s̄ + v₂|²`
//! where `c_m = q_m Ω G` is the cascaded user→surface→antenna row. Averaging
//! over the `N_t` antennas gives the scalar
//!
//! ```text
//! ξ = (1/N_t) Σ_m z̃_m = Σ_n ϱ_n x̄_n + noise
//! ```
//!
//! so the whole multi-user symbol is read off one real number. The
//! coefficients `ϱ_n` split into a LoS·LoS part and three parts driven by
//! the scattered components; the LoS part dominates for strong Rician
//! factors and large arrays.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::analysis::GaussianSerModel;
use crate::channel::CascadeTerms;
use crate::error::{Error, Result};
use crate::waveform::{correlator_outputs, detect_z, ComplementarySymbol, NoiseModel};

/// Largest number of users for which the `2^N_k` constellation is enumerated.
pub const MAX_ENUMERATED_USERS: usize = 16;

/// Cascaded uplink channels with the LoS/NLoS decomposition `c = a + b + o`.
///
/// Row `m` belongs to base-station antenna `m`, column `n` to user `n`.
/// `a` is LoS·LoS, `b` the two mixed products and `o` NLoS·NLoS.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkChannelSet {
    c: DMatrix<Complex64>,
    a: DMatrix<Complex64>,
    b: DMatrix<Complex64>,
    o: DMatrix<Complex64>,
}

impl UplinkChannelSet {
    pub fn new(a: DMatrix<Complex64>, b: DMatrix<Complex64>, o: DMatrix<Complex64>) -> Result<Self> {
        if a.shape() != b.shape() || a.shape() != o.shape() {
            return Err(Error::invalid("decomposition terms must share one shape"));
        }
        if a.is_empty() {
            return Err(Error::invalid("uplink channel set must be non-empty"));
        }
        let c = &a + &b + &o;
        Ok(UplinkChannelSet { c, a, b, o })
    }

    /// From the four-term cascade split (`b` collects both mixed terms).
    pub fn from_terms(terms: &CascadeTerms) -> Result<Self> {
        Self::new(terms.los_los.clone(), terms.mixed(), terms.nlos_nlos.clone())
    }

    /// A channel without decomposition: everything is booked as `a`.
    pub fn from_matrix(c: DMatrix<Complex64>) -> Result<Self> {
        let z = DMatrix::zeros(c.nrows(), c.ncols());
        Self::new(c, z.clone(), z)
    }

    pub fn c(&self) -> &DMatrix<Complex64> {
        &self.c
    }

    pub fn a(&self) -> &DMatrix<Complex64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<Complex64> {
        &self.b
    }

    pub fn o(&self) -> &DMatrix<Complex64> {
        &self.o
    }

    /// Number of base-station antennas `N_t`.
    pub fn n_antennas(&self) -> usize {
        self.c.nrows()
    }

    /// Number of users `N_k`.
    pub fn n_users(&self) -> usize {
        self.c.ncols()
    }

    /// Row `m` as a plain vector.
    pub fn row(&self, m: usize) -> Vec<Complex64> {
        self.c.row(m).iter().copied().collect()
    }
}

/// `z̃_m` for one antenna with amplitudes `amps` (`s̄ = 1 − s`).
pub fn uplink_observe(c_row: &[Complex64], amps: &[f64], v1: Complex64, v2: Complex64) -> f64 {
    detect_z(&correlator_outputs(c_row, amps, 0.0, v1, v2))
}

/// `ξ = (1/N_t) Σ z̃_m`.
pub fn average_xi(z_tilde: &[f64]) -> Result<f64> {
    if z_tilde.is_empty() {
        return Err(Error::invalid("need at least one antenna observation"));
    }
    Ok(z_tilde.iter().sum::<f64>() / z_tilde.len() as f64)
}

/// `ξ` for the whole array given per-antenna noise pairs.
pub fn observe_xi(set: &UplinkChannelSet, amps: &[f64], noise: &[(Complex64, Complex64)]) -> Result<f64> {
    if noise.len() != set.n_antennas() {
        return Err(Error::DimensionMismatch {
            what: "noise pairs vs antennas",
            expected: set.n_antennas(),
            got: noise.len(),
        });
    }
    if amps.len() != set.n_users() {
        return Err(Error::DimensionMismatch {
            what: "amplitudes vs users",
            expected: set.n_users(),
            got: amps.len(),
        });
    }
    let z: Vec<f64> = (0..set.n_antennas())
        .map(|m| uplink_observe(&set.row(m), amps, noise[m].0, noise[m].1))
        .collect();
    average_xi(&z)
}

/// Coefficients `ϱ_n` and their four parts.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoCoefficients {
    rho: Vec<f64>,
    parts: [Vec<f64>; 4],
}

impl RhoCoefficients {
    /// Coefficients without a part breakdown (all booked in part 1).
    pub fn from_values(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() || rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("coefficients must be finite and non-empty"));
        }
        let zeros = vec![0.0; rho.len()];
        Ok(RhoCoefficients {
            parts: [rho.clone(), zeros.clone(), zeros.clone(), zeros],
            rho,
        })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Parts in order: LoS·LoS, mixed·mixed, NLoS·NLoS, cross terms.
    pub fn parts(&self) -> &[Vec<f64>; 4] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Noiseless `ξ = Σ ϱ_n x̄_n`.
    pub fn noiseless_xi(&self, x_bar: &[f64]) -> f64 {
        self.rho.iter().zip(x_bar).map(|(r, x)| r * x).sum()
    }
}

// (1/N_t) Σ_m Re(conj(Σ_j x_mj) · y_mn) for each n
fn pair_part(x: &DMatrix<Complex64>, y: &DMatrix<Complex64>) -> Vec<f64> {
    let n_t = x.nrows() as f64;
    let mut out = vec![0.0; x.ncols()];
    for m in 0..x.nrows() {
        let lam = x.row(m).iter().sum::<Complex64>().conj();
        for (n, slot) in out.iter_mut().enumerate() {
            *slot += (lam * y[(m, n)]).re;
        }
    }
    out.iter_mut().for_each(|v| *v /= n_t);
    out
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// Exact coefficients with the split
/// ϱ⁽¹⁾ from `a·a`, ϱ⁽²⁾ from `b·b`, ϱ⁽³⁾ from `o·o` and ϱ⁽⁴⁾ from every cross
/// product between different terms.
pub fn rho_exact(set: &UplinkChannelSet) -> RhoCoefficients {
    let (a, b, o) = (set.a(), set.b(), set.o());
    let p1 = pair_part(a, a);
    let p2 = pair_part(b, b);
    let p3 = pair_part(o, o);
    let mut p4 = vec![0.0; set.n_users()];
    for (x, y) in [(a, b), (b, a), (a, o), (o, a), (b, o), (o, b)] {
        add_into(&mut p4, &pair_part(x, y));
    }
    let rho = (0..set.n_users()).map(|n| p1[n] + p2[n] + p3[n] + p4[n]).collect();
    RhoCoefficients {
        rho,
        parts: [p1, p2, p3, p4],
    }
}

/// Pilot pattern that isolates user `n`: amplitude 1 for `n`, 1/2 for the
/// others so their bipolar symbols vanish.
pub fn pilot_amplitudes(n_users: usize, user: usize) -> Result<Vec<f64>> {
    if user >= n_users {
        return Err(Error::invalid(format!("user {user} out of range for {n_users} users")));
    }
    Ok((0..n_users).map(|j| if j == user { 1.0 } else { 0.5 }).collect())
}

/// Pilot-based estimate of `ϱ_n`: mean of `ξ` over `repetitions` pilot
/// symbols sent with [`pilot_amplitudes`].
pub fn rho_pilot_estimate<R: Rng + ?Sized>(
    set: &UplinkChannelSet,
    user: usize,
    noise: &NoiseModel,
    repetitions: usize,
    rng: &mut R,
) -> Result<f64> {
    if repetitions == 0 {
        return Err(Error::invalid("need at least one pilot repetition"));
    }
    let amps = pilot_amplitudes(set.n_users(), user)?;
    let mut acc = 0.0;
    let mut pairs = vec![(Complex64::default(), Complex64::default()); set.n_antennas()];
    for _ in 0..repetitions {
        for p in pairs.iter_mut() {
            *p = (noise.draw(rng), noise.draw(rng));
        }
        acc += observe_xi(set, &amps, &pairs)?;
    }
    Ok(acc / repetitions as f64)
}

/// Decision regions on `ξ` built from the noiseless constellation means.
///
/// Region `r` is `[d_{r−1}, d_r)` with `d_0 = −∞` and `d_R = +∞`. Points
/// whose noiseless means coincide share one region; the lowest constellation
/// index in a shared region is its representative, the others cannot be
/// told apart.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRegions {
    boundaries: Vec<f64>,
    means: Vec<f64>,
    members: Vec<Vec<usize>>,
    point_region: Vec<usize>,
}

impl DecisionRegions {
    /// Finite boundaries `d_1 … d_{R−1}`, strictly increasing.
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    /// Sorted distinct noiseless means, one per region.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Constellation indices mapped to region `r`.
    pub fn members(&self, r: usize) -> &[usize] {
        &self.members[r]
    }

    /// Region holding constellation point `index`.
    pub fn region_of(&self, index: usize) -> usize {
        self.point_region[index]
    }

    /// Detected constellation index for region `r`.
    pub fn representative(&self, r: usize) -> usize {
        self.members[r][0]
    }

    /// Number of constellation points.
    pub fn constellation_size(&self) -> usize {
        self.point_region.len()
    }

    /// Whether any two constellation points share a region.
    pub fn has_indistinguishable(&self) -> bool {
        self.members.iter().any(|m| m.len() > 1)
    }

    /// Points that can never be detected because another point owns their
    /// region.
    pub fn indistinguishable_points(&self) -> Vec<usize> {
        self.members
            .iter()
            .flat_map(|m| m.iter().skip(1).copied())
            .collect()
    }

    /// `(d_{r−1}, d_r)` with infinite outer bounds.
    pub fn interval(&self, r: usize) -> (f64, f64) {
        let lo = if r == 0 { f64::NEG_INFINITY } else { self.boundaries[r - 1] };
        let hi = if r == self.boundaries.len() { f64::INFINITY } else { self.boundaries[r] };
        (lo, hi)
    }
}

/// Bipolar symbol of constellation point `index` for `n_users` binary users.
pub fn constellation_point(index: usize, n_users: usize) -> Vec<f64> {
    ComplementarySymbol::from_index(index as u64, n_users, 2)
        .expect("index checked by caller")
        .x_bar()
}

/// Midpoint regions for the binary constellation of `rho.len()` users.
pub fn build_regions(rho: &RhoCoefficients) -> Result<DecisionRegions> {
    let n_k = rho.len();
    if n_k > MAX_ENUMERATED_USERS {
        return Err(Error::SearchTooLarge {
            candidates: 1u128 << n_k,
            cap: 1u128 << MAX_ENUMERATED_USERS,
        });
    }
    let size = 1usize << n_k;
    let mut points: Vec<(f64, usize)> = (0..size)
        .map(|i| (rho.noiseless_xi(&constellation_point(i, n_k)), i))
        .collect();
    points.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));

    let scale: f64 = rho.rho().iter().map(|v| v.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    let tie = 1e-12 * scale;
    let mut means: Vec<f64> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (mean, idx) in points {
        match means.last() {
            Some(&last) if (mean - last).abs() <= tie => members.last_mut().unwrap().push(idx),
            _ => {
                means.push(mean);
                members.push(vec![idx]);
            }
        }
    }
    for m in members.iter_mut() {
        m.sort_unstable();
    }
    let boundaries = means.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut point_region = vec![0; size];
    for (r, m) in members.iter().enumerate() {
        for &i in m {
            point_region[i] = r;
        }
    }
    Ok(DecisionRegions {
        boundaries,
        means,
        members,
        point_region,
    })
}

/// Region `r` with `d_{r−1} ≤ ξ < d_r` (binary search).
pub fn region_detect(xi: f64, regions: &DecisionRegions) -> usize {
    regions.boundaries.partition_point(|&d| d <= xi)
}

/// Maximum-likelihood choice `argmin ln σ² + (ξ − μ)²/σ²`; ties go to the
/// lowest index.
pub fn ml_detect(xi: f64, models: &[GaussianSerModel]) -> Result<usize> {
    if models.is_empty() {
        return Err(Error::invalid("need at least one candidate model"));
    }
    let mut best = (f64::INFINITY, 0);
    for (i, m) in models.iter().enumerate() {
        if !(m.sigma2 > 0.0) {
            return Err(Error::invalid(format!("candidate {i} has non-positive variance")));
        }
        let cost = m.sigma2.ln() + (xi - m.mu).powi(2) / m.sigma2;
        if cost < best.0 {
            best = (cost, i);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn observe_trivial_rows() {
        let z = uplink_observe(&[c(1.0, 0.0)], &[1.0], c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!(z, 1.0);
        let z = uplink_observe(&[Complex64::cis(2.2)], &[1.0], c(0.0, 0.0), c(0.0, 0.0));
        assert!((z - 1.0).abs() < 1e-15);
    }

    #[test]
    fn average_cases() {
        assert_eq!(average_xi(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(average_xi(&[2.0, 0.0]).unwrap(), 1.0);
        assert!(average_xi(&[]).is_err());
    }

    #[test]
    fn regions_single_user() {
        let rho = RhoCoefficients::from_values(vec![1.0]).unwrap();
        let r = build_regions(&rho).unwrap();
        assert_eq!(r.means(), &[-1.0, 1.0]);
        assert_eq!(r.boundaries(), &[0.0]);
    }

    #[test]
    fn regions_two_users() {
        let rho = RhoCoefficients::from_values(vec![1.0, 0.5]).unwrap();
        let r = build_regions(&rho).unwrap();
        assert_eq!(r.means(), &[-1.5, -0.5, 0.5, 1.5]);
        assert_eq!(r.boundaries(), &[-1.0, 0.0, 1.0]);
        // s = (0,0) → x̄ = (−1,−1) is index 0
        assert_eq!(r.region_of(0), 0);
        assert_eq!(r.region_of(3), 3);
    }

    #[test]
    fn regions_collapse_ties() {
        let rho = RhoCoefficients::from_values(vec![1.0, 1.0]).unwrap();
        let r = build_regions(&rho).unwrap();
        assert_eq!(r.len(), 3);
        assert_eq!(r.means(), &[-2.0, 0.0, 2.0]);
        assert_eq!(r.members(1), &[1, 2]);
        assert!(r.has_indistinguishable());
        assert_eq!(r.indistinguishable_points(), vec![2]);
    }

    #[test]
    fn region_detect_edges() {
        let rho = RhoCoefficients::from_values(vec![1.0, 0.5]).unwrap();
        let r = build_regions(&rho).unwrap();
        assert_eq!(region_detect(-100.0, &r), 0);
        assert_eq!(region_detect(0.0, &r), 2);
        assert_eq!(region_detect(-1.0, &r), 1);
        assert_eq!(region_detect(7.0, &r), 3);
    }

    #[test]
    fn ml_equal_variance_is_nearest_mean() {
        let models = [
            GaussianSerModel { mu: -1.0, sigma2: 0.5 },
            GaussianSerModel { mu: 1.0, sigma2: 0.5 },
        ];
        assert_eq!(ml_detect(0.2, &models).unwrap(), 1);
        assert_eq!(ml_detect(-0.2, &models).unwrap(), 0);
        assert_eq!(ml_detect(0.0, &models).unwrap(), 0);
    }

    #[test]
    fn ml_direct_objective() {
        let models = [
            GaussianSerModel { mu: -1.0, sigma2: 1.0 },
            GaussianSerModel { mu: 1.0, sigma2: 100.0 },
        ];
        let xi = 0.9_f64;
        let c0 = (1.9_f64).powi(2);
        let c1 = 100.0_f64.ln() + (0.1_f64).powi(2) / 100.0;
        let want = if c1 < c0 { 1 } else { 0 };
        assert_eq!(ml_detect(xi, &models).unwrap(), want);
        assert!(ml_detect(0.0, &[GaussianSerModel { mu: 0.0, sigma2: 0.0 }]).is_err());
    }

    #[test]
    fn pilot_pattern() {
        assert_eq!(pilot_amplitudes(3, 1).unwrap(), vec![0.5, 1.0, 0.5]);
        assert!(pilot_amplitudes(3, 3).is_err());
    }
}
