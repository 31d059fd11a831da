//! Geometric Rician channels for the BS–RIS–user links.
//!
//! Every link is the Rician mix of a rank-one line-of-sight matrix built
//! from steering vectors and a zero-mean complex Gaussian scattered part:
//!
//! ```text
//! Q = √(K/(1+K)) Q_los + √(1/(1+K)) Q_nlos
//! ```
//!
//! The scattered part of a moving terminal evolves in time with a Jakes
//! (Clarke) spectrum, realized as a sum of sinusoids so that a seed fixes
//! the whole trajectory. Cascades through the surface are products
//! `row · Ω · matrix` with `Ω` a diagonal unit-modulus reflection matrix.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Sinusoids per entry in the Jakes generator.
pub const JAKES_OSCILLATORS: usize = 16;

/// Layout of an antenna array or of the reflecting surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArrayGeometry {
    /// Uniform linear array (base station).
    Ula {
        n: usize,
        spacing: f64,
        wavelength: f64,
    },
    /// Uniform planar array of `nx` × `ny` elements (surface).
    Upa {
        nx: usize,
        ny: usize,
        spacing: f64,
        wavelength: f64,
    },
}

impl ArrayGeometry {
    pub fn ula(n: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        let g = ArrayGeometry::Ula {
            n,
            spacing,
            wavelength,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn upa(nx: usize, ny: usize, spacing: f64, wavelength: f64) -> Result<Self> {
        let g = ArrayGeometry::Upa {
            nx,
            ny,
            spacing,
            wavelength,
        };
        g.validate()?;
        Ok(g)
    }

    /// Number of elements.
    pub fn len(&self) -> usize {
        match *self {
            ArrayGeometry::Ula { n, .. } => n,
            ArrayGeometry::Upa { nx, ny, .. } => nx * ny,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        let (count_ok, spacing, wavelength) = match *self {
            ArrayGeometry::Ula {
                n,
                spacing,
                wavelength,
            } => (n >= 1, spacing, wavelength),
            ArrayGeometry::Upa {
                nx,
                ny,
                spacing,
                wavelength,
            } => (nx >= 1 && ny >= 1, spacing, wavelength),
        };
        if !count_ok {
            return Err(Error::invalid("array element counts must be at least 1"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!("element spacing must be positive, got {spacing}")));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::invalid(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(())
    }
}

/// Elevation `theta ∈ [0, π]` and azimuth `phi ∈ [0, 2π)` in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angles {
    pub theta: f64,
    pub phi: f64,
}

impl Angles {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid(format!("elevation {theta} outside [0, π]")));
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(Error::invalid(format!("azimuth {phi} outside [0, 2π)")));
        }
        Ok(Angles { theta, phi })
    }

    /// Uniform draw over the full angular ranges.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Angles {
            theta: rng.random_range(0.0..=PI),
            phi: rng.random_range(0.0..TAU),
        }
    }
}

/// One-dimensional array response `[1, e^{j2π(d/λ)sinθ}, …]` (unnormalized).
pub fn ula_steering(theta: f64, n: usize, spacing: f64, wavelength: f64) -> Result<DVector<Complex64>> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("steering angle must be finite, got {theta}")));
    }
    ArrayGeometry::ula(n, spacing, wavelength)?;
    let step = TAU * (spacing / wavelength) * theta.sin();
    Ok(DVector::from_fn(n, |k, _| Complex64::cis(step * k as f64)))
}

/// Planar array response, unit Euclidean norm.
///
/// Element `(m, n)` sits at index `m·N_y + n` and carries phase
/// `(2π/λ)·d·(m sinφ sinθ + n cosθ)`.
pub fn upa_steering(angles: Angles, geom: &ArrayGeometry) -> Result<DVector<Complex64>> {
    let ArrayGeometry::Upa {
        nx,
        ny,
        spacing,
        wavelength,
    } = *geom
    else {
        return Err(Error::invalid("upa_steering requires a planar geometry"));
    };
    geom.validate()?;
    if !angles.theta.is_finite() || !angles.phi.is_finite() {
        return Err(Error::invalid("steering angles must be finite"));
    }
    let k = TAU * spacing / wavelength;
    let ux = k * angles.phi.sin() * angles.theta.sin();
    let uy = k * angles.theta.cos();
    let norm = 1.0 / ((nx * ny) as f64).sqrt();
    Ok(DVector::from_fn(nx * ny, |idx, _| {
        let (m, n) = (idx / ny, idx % ny);
        Complex64::from_polar(norm, ux * m as f64 + uy * n as f64)
    }))
}

/// Rank-one line-of-sight matrix `rx · txᴴ`.
pub fn los_component(rx: &DVector<Complex64>, tx: &DVector<Complex64>) -> Result<DMatrix<Complex64>> {
    if rx.is_empty() || tx.is_empty() {
        return Err(Error::invalid("steering vectors must be non-empty"));
    }
    Ok(rx * tx.adjoint())
}

/// Amplitude gain of the monomial path-loss model `d^(−α/2)` (1 m reference).
pub fn path_gain(distance: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::invalid(format!("distance must be positive, got {distance}")));
    }
    if !(exponent >= 0.0 && exponent.is_finite()) {
        return Err(Error::invalid(format!("path-loss exponent must be non-negative, got {exponent}")));
    }
    Ok(distance.powf(-exponent / 2.0))
}

/// Matrix of i.i.d. `CN(0, 1)` entries.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// One `CN(0, 1)` sample.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// A Rician link: deterministic LoS matrix, Rician factor and path gain.
///
/// The stored LoS matrix is rescaled to unit-modulus power
/// (`‖los‖²_F = rows·cols`), which keeps the LoS/NLoS power ratio equal to
/// the Rician factor when the steering vectors themselves are normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct RicianLink {
    los: DMatrix<Complex64>,
    rician_factor: f64,
    path_gain: f64,
}

impl RicianLink {
    pub fn new(los: DMatrix<Complex64>, rician_factor: f64, path_gain: f64) -> Result<Self> {
        if !(rician_factor >= 0.0) {
            return Err(Error::invalid(format!("rician factor must be >= 0, got {rician_factor}")));
        }
        if !(path_gain >= 0.0 && path_gain.is_finite()) {
            return Err(Error::invalid(format!("path gain must be finite and >= 0, got {path_gain}")));
        }
        if los.is_empty() {
            return Err(Error::invalid("LoS matrix must be non-empty"));
        }
        let power = los.norm_squared();
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::invalid("LoS matrix must have finite non-zero power"));
        }
        let scale = ((los.nrows() * los.ncols()) as f64 / power).sqrt();
        Ok(RicianLink {
            los: los * Complex64::from(scale),
            rician_factor,
            path_gain,
        })
    }

    pub fn los(&self) -> &DMatrix<Complex64> {
        &self.los
    }

    pub fn rician_factor(&self) -> f64 {
        self.rician_factor
    }

    pub fn path_gain(&self) -> f64 {
        self.path_gain
    }

    pub fn shape(&self) -> (usize, usize) {
        self.los.shape()
    }

    /// `√(K/(1+K))`, equal to 1 for an infinite factor.
    pub fn los_weight(&self) -> f64 {
        if self.rician_factor.is_infinite() {
            1.0
        } else {
            (self.rician_factor / (1.0 + self.rician_factor)).sqrt()
        }
    }

    /// `√(1/(1+K))`.
    pub fn nlos_weight(&self) -> f64 {
        (1.0 / (1.0 + self.rician_factor)).sqrt()
    }

    /// Rician mix with a given scattered realization, scaled by the path gain.
    pub fn mix(&self, nlos: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if nlos.shape() != self.los.shape() {
            return Err(Error::DimensionMismatch {
                what: "NLoS realization entries",
                expected: self.los.len(),
                got: nlos.len(),
            });
        }
        let a = Complex64::from(self.path_gain * self.los_weight());
        let b = Complex64::from(self.path_gain * self.nlos_weight());
        Ok(self.los.map(|v| v * a) + nlos.map(|v| v * b))
    }

    /// Fresh draw with i.i.d. scattered entries.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<Complex64> {
        let (r, c) = self.los.shape();
        let nlos = complex_gaussian(r, c, rng);
        self.mix(&nlos).expect("shapes agree by construction")
    }
}

/// Draws one realization of a Rician link.
pub fn draw_rician<R: Rng + ?Sized>(link: &RicianLink, rng: &mut R) -> DMatrix<Complex64> {
    link.draw(rng)
}

/// Mobility state: common Doppler rotation `ν(t) = 2π f_d t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerState {
    pub speed: f64,
    pub carrier_freq: f64,
    pub current_phase: f64,
}

impl DopplerState {
    pub fn new(speed: f64, carrier_freq: f64) -> Result<Self> {
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(Error::invalid(format!("speed must be >= 0, got {speed}")));
        }
        if !(carrier_freq > 0.0 && carrier_freq.is_finite()) {
            return Err(Error::invalid(format!("carrier frequency must be > 0, got {carrier_freq}")));
        }
        Ok(DopplerState {
            speed,
            carrier_freq,
            current_phase: 0.0,
        })
    }

    /// `f_max = v·f_c/c` in Hz.
    pub fn max_shift(&self) -> f64 {
        self.speed * self.carrier_freq / SPEED_OF_LIGHT
    }

    /// Advances the rotation by `2π f_max dt`, wrapped to `[0, 2π)`.
    pub fn advance(&mut self, dt: f64) {
        self.current_phase = (self.current_phase + TAU * self.max_shift() * dt).rem_euclid(TAU);
    }

    /// Rotation phase at absolute time `t`.
    pub fn phase_at(&self, t: f64) -> f64 {
        (TAU * self.max_shift() * t).rem_euclid(TAU)
    }

    pub fn rotation(&self) -> Complex64 {
        Complex64::cis(self.current_phase)
    }
}

#[derive(Debug, Clone, Copy)]
struct Oscillator {
    // cos of the arrival angle
    direction: f64,
    phase: f64,
}

/// Time-correlated scattered entries with the Jakes spectrum.
///
/// Each entry is `(1/√M) Σ_i exp(j(2π f_max cos(α_i) t + φ_i))` with the
/// arrival angles stratified over `[0, 2π)`, which gives an ensemble
/// autocorrelation of exactly `J₀(2π f_max τ)` and unit power.
#[derive(Debug, Clone)]
pub struct JakesFading {
    rows: usize,
    cols: usize,
    max_doppler: f64,
    time: f64,
    oscillators: Vec<Oscillator>,
}

impl JakesFading {
    pub fn new<R: Rng + ?Sized>(rows: usize, cols: usize, max_doppler: f64, rng: &mut R) -> Result<Self> {
        if !(max_doppler >= 0.0 && max_doppler.is_finite()) {
            return Err(Error::invalid(format!("maximum Doppler must be >= 0, got {max_doppler}")));
        }
        let m = JAKES_OSCILLATORS;
        let mut oscillators = Vec::with_capacity(rows * cols * m);
        for _ in 0..rows * cols {
            for i in 0..m {
                let u: f64 = rng.random();
                let alpha = TAU * (i as f64 + u) / m as f64;
                oscillators.push(Oscillator {
                    direction: alpha.cos(),
                    phase: rng.random_range(0.0..TAU),
                });
            }
        }
        Ok(JakesFading {
            rows,
            cols,
            max_doppler,
            time: 0.0,
            oscillators,
        })
    }

    pub fn max_doppler(&self) -> f64 {
        self.max_doppler
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Entries at absolute time `t`, without moving the internal clock.
    pub fn at(&self, t: f64) -> DMatrix<Complex64> {
        let m = JAKES_OSCILLATORS;
        let norm = 1.0 / (m as f64).sqrt();
        let w = TAU * self.max_doppler * t;
        DMatrix::from_fn(self.rows, self.cols, |r, c| {
            let base = (r * self.cols + c) * m;
            let sum: Complex64 = self.oscillators[base..base + m]
                .iter()
                .map(|o| Complex64::cis(w * o.direction + o.phase))
                .sum();
            sum * norm
        })
    }

    /// Entries at the current time.
    pub fn sample(&self) -> DMatrix<Complex64> {
        self.at(self.time)
    }

    /// Moves the clock forward by `dt` seconds and returns the new entries.
    pub fn evolve_nlos(&mut self, dt: f64) -> Result<DMatrix<Complex64>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be > 0, got {dt}")));
        }
        self.time += dt;
        Ok(self.sample())
    }
}

/// Phase configuration of the surface, one phase per element.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionPattern {
    phases: Vec<f64>,
}

impl ReflectionPattern {
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::invalid("reflection pattern needs at least one element"));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("reflection phases must be finite"));
        }
        Ok(ReflectionPattern { phases })
    }

    /// All-zero phases (`Ω = I`).
    pub fn identity(n: usize) -> Self {
        ReflectionPattern { phases: vec![0.0; n.max(1)] }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        ReflectionPattern {
            phases: (0..n.max(1)).map(|_| rng.random_range(0.0..TAU)).collect(),
        }
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Diagonal of `Ω`.
    pub fn coefficients(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.phases.len(), self.phases.iter().map(|&p| Complex64::cis(p)))
    }

    /// `Ω` as a dense diagonal matrix.
    pub fn matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&self.coefficients())
    }
}

/// `rows · Ω · mat` for a stack of row channels (one row per receiver).
pub fn cascade_rows(
    rows: &DMatrix<Complex64>,
    omega: &ReflectionPattern,
    mat: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    let n = omega.len();
    if rows.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "row channel width vs surface size",
            expected: n,
            got: rows.ncols(),
        });
    }
    if mat.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "matrix channel height vs surface size",
            expected: n,
            got: mat.nrows(),
        });
    }
    let w = omega.coefficients();
    let mut scaled = rows.clone();
    for (mut col, &wk) in scaled.column_iter_mut().zip(w.iter()) {
        col *= wk;
    }
    Ok(scaled * mat)
}

/// Cascaded channel `g · Ω · Q` for a single row.
pub fn cascade(
    row: &RowDVector<Complex64>,
    omega: &ReflectionPattern,
    mat: &DMatrix<Complex64>,
) -> Result<RowDVector<Complex64>> {
    let rows = DMatrix::from_row_slice(1, row.len(), row.as_slice());
    let out = cascade_rows(&rows, omega, mat)?;
    Ok(RowDVector::from_iterator(out.ncols(), out.iter().copied()))
}

/// Four-way split of a cascade into LoS/NLoS products.
///
/// `los_los` is `√(V/(1+V))√(K/(1+K))·g_los·Ω·Q_los`, the other terms follow
/// the same pattern; path gains of both links are included.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTerms {
    pub los_los: DMatrix<Complex64>,
    pub los_nlos: DMatrix<Complex64>,
    pub nlos_los: DMatrix<Complex64>,
    pub nlos_nlos: DMatrix<Complex64>,
}

impl CascadeTerms {
    pub fn sum(&self) -> DMatrix<Complex64> {
        &self.los_los + &self.los_nlos + &self.nlos_los + &self.nlos_nlos
    }

    /// The cross terms `los_nlos + nlos_los`.
    pub fn mixed(&self) -> DMatrix<Complex64> {
        &self.los_nlos + &self.nlos_los
    }
}

/// Splits `row_link · Ω · mat_link` into its four LoS/NLoS products.
pub fn cascade_terms(
    row_link: &RicianLink,
    row_nlos: &DMatrix<Complex64>,
    omega: &ReflectionPattern,
    mat_link: &RicianLink,
    mat_nlos: &DMatrix<Complex64>,
) -> Result<CascadeTerms> {
    if row_nlos.shape() != row_link.shape() {
        return Err(Error::DimensionMismatch {
            what: "row NLoS entries",
            expected: row_link.los().len(),
            got: row_nlos.len(),
        });
    }
    if mat_nlos.shape() != mat_link.shape() {
        return Err(Error::DimensionMismatch {
            what: "matrix NLoS entries",
            expected: mat_link.los().len(),
            got: mat_nlos.len(),
        });
    }
    let gain = row_link.path_gain() * mat_link.path_gain();
    let term = |row: &DMatrix<Complex64>, rw: f64, mat: &DMatrix<Complex64>, mw: f64| {
        cascade_rows(row, omega, mat).map(|m| m * Complex64::from(gain * rw * mw))
    };
    let (rl, rn) = (row_link.los_weight(), row_link.nlos_weight());
    let (ml, mn) = (mat_link.los_weight(), mat_link.nlos_weight());
    Ok(CascadeTerms {
        los_los: term(row_link.los(), rl, mat_link.los(), ml)?,
        los_nlos: term(row_link.los(), rl, mat_nlos, mn)?,
        nlos_los: term(row_nlos, rn, mat_link.los(), ml)?,
        nlos_nlos: term(row_nlos, rn, mat_nlos, mn)?,
    })
}

/// Co-phases the LoS cascade `q_los · Ω · G_los[:, target_col]`.
///
/// Each element's phase cancels the phase of `q_n G_{n,target}`, so every
/// term of the sum lands on the positive real axis and the magnitude
/// reaches `Σ_n |q_n||G_{n,target}|`.
pub fn align_phases_to_los(
    q_los: &RowDVector<Complex64>,
    g_los: &DMatrix<Complex64>,
    target_col: usize,
) -> Result<ReflectionPattern> {
    if g_los.nrows() != q_los.len() {
        return Err(Error::DimensionMismatch {
            what: "LoS matrix height vs row length",
            expected: q_los.len(),
            got: g_los.nrows(),
        });
    }
    if target_col >= g_los.ncols() {
        return Err(Error::invalid(format!(
            "target column {target_col} out of range for {} columns",
            g_los.ncols()
        )));
    }
    let phases = q_los
        .iter()
        .zip(g_los.column(target_col).iter())
        .map(|(q, g)| {
            let p = q * g;
            if p.norm() == 0.0 {
                0.0
            } else {
                (-p.arg()).rem_euclid(TAU)
            }
        })
        .collect();
    ReflectionPattern::new(phases)
}
