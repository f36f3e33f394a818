//! Delay-Doppler-angle multipath channel.
//!
//! The uplink operator maps `MN` transmit samples to `N_r` stacked receive
//! frames: `H = sum_p h_p [a_r(theta_p) kron (Pi^{l_p} Delta^{nu_p})]`, with
//! `Pi` the forward cyclic shift and `Delta^nu = diag(exp(j 2 pi nu q / MN))`
//! for any real `nu`. It is never materialized; each path acts as a phase ramp,
//! a cyclic shift, and a steering weight.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{deg_to_rad, ChannelConfig, ValidConfig};
use crate::error::{Error, Result};
use crate::modem::OtfsModem;

/// Receive steering vector of a half-wavelength ULA.
pub fn steering_vector(theta: f64, antennas: usize) -> Vec<Complex64> {
    let step = PI * theta.sin();
    (0..antennas)
        .map(|n| Complex64::from_polar(1.0, step * n as f64))
        .collect()
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Path {
    pub gain: Complex64,
    /// Integer delay tap `l_p`.
    pub delay: usize,
    /// Integer Doppler tap `k_p`.
    pub doppler_int: i32,
    /// Fractional Doppler `kappa_p` in `[-1/2, 1/2]`.
    pub doppler_frac: f64,
    /// Angle of arrival, radians.
    pub aoa: f64,
}

impl Path {
    /// Total normalized Doppler `k_p + kappa_p`.
    pub fn doppler(&self) -> f64 {
        self.doppler_int as f64 + self.doppler_frac
    }

    /// Splits a normalized Doppler into its nearest integer tap and remainder.
    pub fn split_doppler(nu: f64) -> (i32, f64) {
        let k = nu.round();
        (k as i32, nu - k)
    }
}

/// The `P` paths of one channel draw; path 0 is line of sight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
    /// Power-delay-profile variances `xi_p`, summing to one.
    pub pdp: Vec<f64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// `sum_p |h_p|^2`, the per-antenna receive power for unit-energy symbols.
    pub fn power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// Builds a set from explicit paths with a flat profile, mostly for tests.
    pub fn from_paths(paths: Vec<Path>) -> Self {
        let p = paths.len().max(1) as f64;
        let pdp = vec![1.0 / p; paths.len()];
        Self { paths, pdp }
    }
}

/// Normalized exponential power-delay profile `exp(-mu l) / sum exp(-mu l)`.
pub fn exponential_pdp(decay: f64, delays: &[usize]) -> Vec<f64> {
    let w: Vec<f64> = delays.iter().map(|&l| (-decay * l as f64).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Draws a complex Gaussian `CN(0, variance)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sd * re, sd * im)
}

/// Random channel draw: exponential PDP gains, Jakes Doppler, LoS at `theta0`.
///
/// Delays are `l_p = p + 1`. NLoS angles are uniform over the configured
/// sector, redrawn while inside the guard band around the LoS angle.
pub fn sample_paths<R: Rng + ?Sized>(cfg: &ValidConfig, channel: &ChannelConfig, theta0: f64, rng: &mut R) -> PathSet {
    let delays: Vec<usize> = (1..=cfg.paths).collect();
    let pdp = exponential_pdp(channel.pdp_decay, &delays);
    let k_max = channel.k_max(cfg);
    let sector = deg_to_rad(channel.nlos_sector_deg);
    let guard = deg_to_rad(channel.aoa_guard_deg);
    let paths = delays
        .iter()
        .zip(&pdp)
        .enumerate()
        .map(|(p, (&delay, &xi))| {
            let gain = complex_normal(rng, xi);
            let nu = k_max * (2.0 * PI * rng.random::<f64>()).cos();
            let (doppler_int, doppler_frac) = Path::split_doppler(nu);
            let aoa = if p == 0 {
                theta0
            } else {
                loop {
                    let cand = rng.random_range(-sector..=sector);
                    if (cand - theta0).abs() >= guard {
                        break cand;
                    }
                }
            };
            Path {
                gain,
                delay,
                doppler_int,
                doppler_frac,
                aoa,
            }
        })
        .collect();
    PathSet { paths, pdp }
}

/// `Pi^{shift} Delta^{nu} s` followed by an optional per-sample weight
/// inserted between the phase ramp and the shift.
pub(crate) fn shift_and_ramp(
    s: &[Complex64],
    shift: usize,
    nu: f64,
    weight: Option<&dyn Fn(usize) -> Complex64>,
) -> Vec<Complex64> {
    let len = s.len();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let step = 2.0 * PI * nu / len as f64;
    let shift = shift % len.max(1);
    // phase recurrence, re-anchored every 32 samples
    let rot = Complex64::from_polar(1.0, step);
    let mut ramp = Complex64::new(1.0, 0.0);
    for (q, &v) in s.iter().enumerate() {
        if q % 32 == 0 {
            ramp = Complex64::from_polar(1.0, step * q as f64);
        }
        let mut val = v * ramp;
        ramp *= rot;
        if let Some(w) = weight {
            val *= w(q);
        }
        out[(q + shift) % len] = val;
    }
    out
}

/// Factored linear map `r = H s`.
#[derive(Debug, Clone)]
pub struct ChannelOperator {
    paths: Vec<Path>,
    frame_len: usize,
    antennas: usize,
}

impl ChannelOperator {
    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    /// Applies `H` to one transmit frame; output is `N_r` stacked frames.
    pub fn apply(&self, s: &[Complex64]) -> Result<Vec<Complex64>> {
        if s.len() != self.frame_len {
            return Err(Error::DimensionMismatch {
                expected: self.frame_len,
                actual: s.len(),
            });
        }
        let mut r = vec![Complex64::new(0.0, 0.0); self.frame_len * self.antennas];
        for path in &self.paths {
            let t = shift_and_ramp(s, path.delay, path.doppler(), None);
            let a = steering_vector(path.aoa, self.antennas);
            for (block, an) in r.chunks_exact_mut(self.frame_len).zip(&a) {
                let w = path.gain * an;
                for (o, v) in block.iter_mut().zip(&t) {
                    *o += w * v;
                }
            }
        }
        Ok(r)
    }
}

/// Builds the factored uplink operator for `antennas` receive elements.
pub fn build_channel(paths: &PathSet, frame_len: usize, antennas: usize) -> Result<ChannelOperator> {
    if let Some(p) = paths.paths.iter().find(|p| p.delay >= frame_len) {
        return Err(Error::DelayOutOfRange {
            delay: p.delay,
            len: frame_len,
        });
    }
    Ok(ChannelOperator {
        paths: paths.paths.clone(),
        frame_len,
        antennas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkDirection {
    Uplink,
    Downlink,
}

/// Dense DD-domain channel: `G_U = (I kron F_N kron I_M) H (F_N^H kron I_M)`
/// for the uplink, `G_D = G_U^T` for the downlink.
pub fn effective_dd_channel(
    op: &ChannelOperator,
    modem: &OtfsModem,
    direction: LinkDirection,
) -> Result<DMatrix<Complex64>> {
    let mn = modem.frame_len();
    if op.frame_len != mn {
        return Err(Error::DimensionMismatch {
            expected: mn,
            actual: op.frame_len,
        });
    }
    let rows = mn * op.antennas;
    let mut g = DMatrix::zeros(rows, mn);
    let mut unit = vec![Complex64::new(0.0, 0.0); mn];
    for col in 0..mn {
        unit.fill(Complex64::new(0.0, 0.0));
        unit[col] = Complex64::new(1.0, 0.0);
        modem.frame_to_time(&mut unit);
        let y = modem.demodulate(&op.apply(&unit)?, op.antennas)?;
        g.column_mut(col).copy_from_slice(&y);
    }
    Ok(match direction {
        LinkDirection::Uplink => g,
        LinkDirection::Downlink => g.transpose(),
    })
}
