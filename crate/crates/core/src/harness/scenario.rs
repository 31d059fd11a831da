//! Per-frame channel synthesis from a scenario.
//!
//! Users sit on a straight road (`y = 0`, height 1.5 m) within
//! `coverage_length` of the surface's projection. Path gains follow the
//! positions; arrival and departure angles are drawn uniformly per frame.
//! The BS–surface link is static over a frame, the surface–user scattered
//! part follows Jakes fading and the LoS part of every path picks up the
//! common Doppler rotation.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::FRAC_PI_2;

use super::config::{PhaseMode, ScenarioConfig};
use super::engine::{stream, Purpose};
use crate::channel::{
    align_phases_to_los, cascade_rows, cascade_terms, complex_gaussian, los_component, path_gain, ula_steering,
    upa_steering, Angles, ArrayGeometry, DopplerState, JakesFading, ReflectionPattern, RicianLink,
};
use crate::error::Result;
use crate::uplink::UplinkChannelSet;

const USER_HEIGHT: f64 = 1.5;

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Link parameters that a sweep may override.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub rician_k: f64,
    pub rician_v: f64,
    pub speed: f64,
}

impl LinkParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        LinkParams {
            rician_k: cfg.rician_k,
            rician_v: cfg.rician_v,
            speed: cfg.speed,
        }
    }
}

struct Layout {
    users: Vec<[f64; 3]>,
    bs_theta: f64,
    ris_arrival: Angles,
    user_angles: Vec<Angles>,
}

fn draw_layout<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Layout {
    let half = cfg.coverage_length / 2.0;
    let users = (0..cfg.n_users)
        .map(|_| [cfg.ris_position[0] + rng.random_range(-half..=half), 0.0, USER_HEIGHT])
        .collect();
    let bs_theta = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
    let ris_arrival = Angles::random(rng);
    let user_angles = (0..cfg.n_users).map(|_| Angles::random(rng)).collect();
    Layout {
        users,
        bs_theta,
        ris_arrival,
        user_angles,
    }
}

struct Links {
    bs_ris: RicianLink,
    users: Vec<RicianLink>,
    direct_gains: Vec<f64>,
}

fn build_links(cfg: &ScenarioConfig, layout: &Layout, p: &LinkParams) -> Result<Links> {
    let lambda = cfg.wavelength();
    let spacing = lambda / 2.0;
    let surface = ArrayGeometry::upa(cfg.ris_nx, cfg.ris_ny, spacing, lambda)?;
    let [e_direct, e_bs_ris, e_ris_user] = cfg.pathloss_exponents;
    let bs = ula_steering(layout.bs_theta, cfg.n_bs_antennas, spacing, lambda)?;
    let arrival = upa_steering(layout.ris_arrival, &surface)?;
    let bs_ris = RicianLink::new(
        los_component(&arrival, &bs)?,
        p.rician_k,
        path_gain(distance(cfg.bs_position, cfg.ris_position), e_bs_ris)?,
    )?;
    let mut users = Vec::with_capacity(cfg.n_users);
    let mut direct_gains = Vec::with_capacity(cfg.n_users);
    for (pos, ang) in layout.users.iter().zip(&layout.user_angles) {
        let dep = upa_steering(*ang, &surface)?;
        let row = DMatrix::from_row_slice(1, dep.len(), dep.adjoint().as_slice());
        users.push(RicianLink::new(
            row,
            p.rician_v,
            path_gain(distance(*pos, cfg.ris_position), e_ris_user)?,
        )?);
        direct_gains.push(path_gain(distance(*pos, cfg.bs_position), e_direct)?);
    }
    Ok(Links {
        bs_ris,
        users,
        direct_gains,
    })
}

fn surface_pattern(cfg: &ScenarioConfig, links: &Links, item: u64) -> Result<ReflectionPattern> {
    let n = cfg.n_ris_elements();
    match cfg.ris_phase_mode {
        PhaseMode::Fixed => Ok(ReflectionPattern::identity(n)),
        PhaseMode::Random => Ok(ReflectionPattern::random(n, &mut stream(cfg.seed, item, Purpose::Surface))),
        PhaseMode::Aligned => {
            let row = links.users[0].los();
            let q = RowDVector::from_iterator(row.ncols(), row.iter().copied());
            align_phases_to_los(&q, links.bs_ris.los(), 0)
        }
    }
}

/// Downlink channel of one frame, evaluated at any time inside it.
#[derive(Debug, Clone)]
pub struct DownlinkFrame {
    los_part: DMatrix<Complex64>,
    omega_q: DMatrix<Complex64>,
    nlos_scale: DVector<Complex64>,
    jakes: JakesFading,
    direct: Option<(DVector<Complex64>, JakesFading)>,
    doppler: DopplerState,
}

impl DownlinkFrame {
    /// Frame `item` of the run seeded by `cfg.seed`. Draws are identical for
    /// every value of `p`, which keeps sweep points on common channels.
    pub fn build(cfg: &ScenarioConfig, p: &LinkParams, item: u64) -> Result<Self> {
        let layout = draw_layout(cfg, &mut stream(cfg.seed, item, Purpose::Geometry));
        let links = build_links(cfg, &layout, p)?;
        let omega = surface_pattern(cfg, &links, item)?;
        let rng = &mut stream(cfg.seed, item, Purpose::Channel);
        let q = links.bs_ris.draw(rng);
        let omega_q = cascade_rows(&DMatrix::identity(omega.len(), omega.len()), &omega, &q)?;

        let n_k = cfg.n_users;
        let n = cfg.n_ris_elements();
        let mut g_los = DMatrix::zeros(n_k, n);
        let mut nlos_scale = DVector::zeros(n_k);
        for (m, link) in links.users.iter().enumerate() {
            let w = link.path_gain() * link.los_weight();
            g_los.row_mut(m).copy_from(&(link.los().row(0) * Complex64::from(w)));
            nlos_scale[m] = Complex64::from(link.path_gain() * link.nlos_weight());
        }
        let los_part = &g_los * &omega_q;
        let doppler = DopplerState::new(p.speed, cfg.carrier_f1)?;
        let jakes = JakesFading::new(n_k, n, doppler.max_shift(), rng)?;
        let direct_jakes = JakesFading::new(n_k, cfg.n_bs_antennas, doppler.max_shift(), rng)?;
        let direct = cfg.direct_link.then(|| {
            let g = DVector::from_iterator(n_k, links.direct_gains.iter().map(|&v| Complex64::from(v)));
            (g, direct_jakes)
        });
        Ok(DownlinkFrame {
            los_part,
            omega_q,
            nlos_scale,
            jakes,
            direct,
            doppler,
        })
    }

    /// `H(t)`, `N_k × N_t`, without the common Doppler rotation.
    pub fn channel_at(&self, t: f64) -> DMatrix<Complex64> {
        let mut g = self.jakes.at(t);
        for (mut row, s) in g.row_iter_mut().zip(self.nlos_scale.iter()) {
            row *= *s;
        }
        let mut h = &self.los_part + g * &self.omega_q;
        if let Some((gains, jk)) = &self.direct {
            let mut d = jk.at(t);
            for (mut row, s) in d.row_iter_mut().zip(gains.iter()) {
                row *= *s;
            }
            h += d;
        }
        h
    }

    /// Common Doppler phase `ν(t)`.
    pub fn doppler_phase(&self, t: f64) -> f64 {
        self.doppler.phase_at(t)
    }

    pub fn max_doppler(&self) -> f64 {
        self.doppler.max_shift()
    }
}

/// Uplink channel instance `item`: `c_n = q_n Ω G` split into LoS/NLoS
/// products, with `G` the BS–surface link and `q_n` the user links.
pub fn uplink_instance(cfg: &ScenarioConfig, p: &LinkParams, item: u64) -> Result<UplinkChannelSet> {
    let layout = draw_layout(cfg, &mut stream(cfg.seed, item, Purpose::Geometry));
    let links = build_links(cfg, &layout, p)?;
    let omega = surface_pattern(cfg, &links, item)?;
    let rng = &mut stream(cfg.seed, item, Purpose::Channel);
    let (rows, cols) = links.bs_ris.shape();
    let g_nlos = complex_gaussian(rows, cols, rng);
    let n_t = cfg.n_bs_antennas;
    let n_k = cfg.n_users;
    let mut a = DMatrix::zeros(n_t, n_k);
    let mut b = DMatrix::zeros(n_t, n_k);
    let mut o = DMatrix::zeros(n_t, n_k);
    for (n, link) in links.users.iter().enumerate() {
        let q_nlos = complex_gaussian(1, link.los().ncols(), rng);
        let terms = cascade_terms(link, &q_nlos, &omega, &links.bs_ris, &g_nlos)?;
        a.column_mut(n).copy_from(&terms.los_los.transpose());
        b.column_mut(n).copy_from(&terms.mixed().transpose());
        o.column_mut(n).copy_from(&terms.nlos_nlos.transpose());
    }
    UplinkChannelSet::new(a, b, o)
}
