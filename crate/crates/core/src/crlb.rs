//! Fisher information and Cramér-Rao bounds for the channel parameters and
//! the user position.
//!
//! Each complex gain is split into real and imaginary parts, so the real
//! parameter vector has `4P` entries ordered group-major:
//! `[Re h_0.., Im h_0.., theta_0.., nu_0..]` with `nu_p = k_p + kappa_p`.
//! The effective noise covariance does not depend on the parameters, so only
//! mean-derivative terms enter: `J_ij = 2 Re{(alpha mu_i)^H Sigma^-1 (alpha mu_j)}`
//! with `mu_i = (dH/dI_i) s`.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{shift_and_ramp, steering_vector, PathSet};
use crate::config::Geometry;
use crate::error::{Error, Result};

/// Physical parameter family of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Gain,
    Angle,
    Doppler,
}

impl FromStr for ParamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gain" => Ok(ParamKind::Gain),
            "angle" | "aoa" => Ok(ParamKind::Angle),
            "doppler" => Ok(ParamKind::Doppler),
            other => Err(Error::UnknownParameter(other.to_string())),
        }
    }
}

/// Real-valued parameter group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RealParam {
    GainRe = 0,
    GainIm = 1,
    Angle = 2,
    Doppler = 3,
}

impl RealParam {
    pub const ALL: [RealParam; 4] = [
        RealParam::GainRe,
        RealParam::GainIm,
        RealParam::Angle,
        RealParam::Doppler,
    ];

    /// Position of `(self, path)` in the `4P` parameter vector.
    pub fn index(self, path: usize, paths: usize) -> usize {
        self as usize * paths + path
    }

    /// Inverse of [`RealParam::index`].
    pub fn from_index(index: usize, paths: usize) -> (RealParam, usize) {
        (Self::ALL[index / paths], index % paths)
    }
}

/// `dH/dI_p` in factored form: steering-side vector kron
/// `Pi^l [D] Delta^nu`, where `D = diag(j 2 pi q / MN)` is present only for
/// the Doppler derivative.
#[derive(Debug, Clone)]
pub struct DerivativeOperator {
    steering: Vec<Complex64>,
    delay: usize,
    doppler: f64,
    doppler_weight: bool,
}

impl DerivativeOperator {
    pub fn apply(&self, s: &[Complex64]) -> Vec<Complex64> {
        let len = s.len();
        let t = if self.doppler_weight {
            let scale = 2.0 * PI / len as f64;
            let w = move |q: usize| Complex64::new(0.0, scale * q as f64);
            shift_and_ramp(s, self.delay, self.doppler, Some(&w))
        } else {
            shift_and_ramp(s, self.delay, self.doppler, None)
        };
        let mut out = Vec::with_capacity(len * self.steering.len());
        for a in &self.steering {
            out.extend(t.iter().map(|v| a * v));
        }
        out
    }
}

/// Derivative of `H` with respect to the gain, angle, or Doppler of path `p`.
pub fn channel_derivative(paths: &PathSet, p: usize, kind: ParamKind, antennas: usize) -> Result<DerivativeOperator> {
    let path = paths
        .paths
        .get(p)
        .ok_or_else(|| Error::UnknownParameter(format!("path {p} of {}", paths.len())))?;
    let a = steering_vector(path.aoa, antennas);
    let steering = match kind {
        ParamKind::Gain | ParamKind::Doppler => {
            let scale = if kind == ParamKind::Gain {
                Complex64::new(1.0, 0.0)
            } else {
                path.gain
            };
            a.into_iter().map(|v| scale * v).collect()
        }
        ParamKind::Angle => {
            let d = Complex64::new(0.0, PI * path.aoa.cos());
            a.into_iter()
                .enumerate()
                .map(|(n, v)| path.gain * d * n as f64 * v)
                .collect()
        }
    };
    Ok(DerivativeOperator {
        steering,
        delay: path.delay,
        doppler: path.doppler(),
        doppler_weight: kind == ParamKind::Doppler,
    })
}

/// Mean derivatives `alpha (dH/dI_i) s` for all `4P` real parameters.
pub fn mean_derivatives(paths: &PathSet, s: &[Complex64], antennas: usize, alpha: f64) -> Result<Vec<Vec<Complex64>>> {
    let p_count = paths.len();
    let mut mus = vec![Vec::new(); 4 * p_count];
    for p in 0..p_count {
        let gain = channel_derivative(paths, p, ParamKind::Gain, antennas)?.apply(s);
        let re: Vec<Complex64> = gain.iter().map(|v| alpha * v).collect();
        let im: Vec<Complex64> = gain.iter().map(|v| Complex64::new(0.0, alpha) * v).collect();
        mus[RealParam::GainRe.index(p, p_count)] = re;
        mus[RealParam::GainIm.index(p, p_count)] = im;
        for (kind, group) in [
            (ParamKind::Angle, RealParam::Angle),
            (ParamKind::Doppler, RealParam::Doppler),
        ] {
            let mut mu = channel_derivative(paths, p, kind, antennas)?.apply(s);
            mu.iter_mut().for_each(|v| *v *= alpha);
            mus[group.index(p, p_count)] = mu;
        }
    }
    Ok(mus)
}

/// Fisher information matrix over the `4P` real parameters.
///
/// `s` is the transmitted (modulated) pilot and `sigma_diag` the effective
/// noise covariance diagonal over all `MN N_r` receive samples.
pub fn fisher_matrix(
    paths: &PathSet,
    s: &[Complex64],
    antennas: usize,
    alpha: f64,
    sigma_diag: &[f64],
) -> Result<DMatrix<f64>> {
    let len = s.len() * antennas;
    if sigma_diag.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            actual: sigma_diag.len(),
        });
    }
    if sigma_diag.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::SingularCovariance);
    }
    let mus = mean_derivatives(paths, s, antennas, alpha)?;
    let inv: Vec<f64> = sigma_diag.iter().map(|v| 1.0 / v).collect();
    let dim = mus.len();
    let mut j = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let acc: f64 = mus[a]
                .iter()
                .zip(&mus[b])
                .zip(&inv)
                .map(|((x, y), w)| (x.conj() * y).re * w)
                .sum();
            j[(a, b)] = 2.0 * acc;
            j[(b, a)] = 2.0 * acc;
        }
    }
    Ok(j)
}

/// Per-path bounds derived from the inverse FIM.
#[derive(Debug, Clone, Serialize)]
pub struct FimResult {
    #[serde(skip)]
    pub fim: DMatrix<f64>,
    #[serde(skip)]
    pub inverse: DMatrix<f64>,
    /// `CRLB(Re h_p) + CRLB(Im h_p)`.
    pub gain: Vec<f64>,
    /// AoA bound, rad^2. Infinite when the angle carries no information.
    pub angle: Vec<f64>,
    /// Doppler bound, bins^2.
    pub doppler: Vec<f64>,
}

impl FimResult {
    /// Inverts `fim`; parameters with an all-zero information row get an
    /// infinite bound and are left out of the inversion.
    pub fn from_fim(fim: DMatrix<f64>) -> Result<Self> {
        let dim = fim.nrows();
        if dim == 0 || !dim.is_multiple_of(4) || fim.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: 4,
                actual: dim,
            });
        }
        let paths = dim / 4;
        let scale = fim.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let keep: Vec<usize> = (0..dim)
            .filter(|&i| fim.row(i).iter().any(|v| v.abs() > 1e-14 * scale))
            .collect();
        let sub = fim.select_rows(&keep).select_columns(&keep);
        let sub_inv = sub
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| sub.try_inverse())
            .ok_or(Error::SingularFim)?;
        let mut inverse = DMatrix::from_element(dim, dim, 0.0);
        for i in 0..dim {
            if !keep.contains(&i) {
                inverse[(i, i)] = f64::INFINITY;
            }
        }
        for (a, &i) in keep.iter().enumerate() {
            for (b, &k) in keep.iter().enumerate() {
                inverse[(i, k)] = sub_inv[(a, b)];
            }
        }
        let diag = |group: RealParam, p: usize| inverse[(group.index(p, paths), group.index(p, paths))];
        let gain = (0..paths)
            .map(|p| diag(RealParam::GainRe, p) + diag(RealParam::GainIm, p))
            .collect();
        let angle = (0..paths).map(|p| diag(RealParam::Angle, p)).collect();
        let doppler = (0..paths).map(|p| diag(RealParam::Doppler, p)).collect();
        Ok(Self {
            fim,
            inverse,
            gain,
            angle,
            doppler,
        })
    }

    pub fn paths(&self) -> usize {
        self.gain.len()
    }

    /// Marginal information on the LoS angle, `1 / [J^-1]_{theta0, theta0}`.
    pub fn los_angle_information(&self) -> f64 {
        1.0 / self.angle[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PositionBound {
    /// Variance along the direction excited by AoA error, m^2.
    Finite(f64),
    /// The LoS angle carries no information (endfire).
    Unbounded,
}

impl PositionBound {
    pub fn value(self) -> f64 {
        match self {
            PositionBound::Finite(v) => v,
            PositionBound::Unbounded => f64::INFINITY,
        }
    }
}

/// Jacobian of the LoS angle with respect to the user position,
/// `z^T (I - eta eta^T) / (d sqrt(1 - (eta^T z)^2))` with `z = [0, 1]`.
pub fn angle_position_jacobian(geom: &Geometry) -> Result<[f64; 2]> {
    geom.derive_los()?;
    let d = geom.distance();
    let [x, y] = geom.user_position_m;
    let eta = [x / d, y / d];
    let cos_ref = eta[1];
    let denom = (1.0 - cos_ref * cos_ref).max(0.0).sqrt();
    if denom < 1e-12 {
        return Err(Error::SingularGeometry);
    }
    // z^T (I - eta eta^T) = [-eta_y eta_x, 1 - eta_y^2]
    let row = [-eta[1] * eta[0], 1.0 - eta[1] * eta[1]];
    Ok([row[0] / (d * denom), row[1] / (d * denom)])
}

/// Position FIM `J(u) = g^T J(theta0) g`; rank one.
pub fn position_fim(angle_information: f64, geom: &Geometry) -> Result<[[f64; 2]; 2]> {
    let g = angle_position_jacobian(geom)?;
    Ok([
        [g[0] * g[0] * angle_information, g[0] * g[1] * angle_information],
        [g[1] * g[0] * angle_information, g[1] * g[1] * angle_information],
    ])
}

/// Position bound from the marginal LoS-angle variance `[J^-1]_{theta0}`.
///
/// `J(u)` is rank one, so the bound is the variance along its range space,
/// `1 / (||g||^2 J(theta0))`, which equals `d^2 [J^-1]_{theta0}`.
pub fn position_crlb_from_angle(angle_variance: f64, geom: &Geometry) -> Result<PositionBound> {
    let g = angle_position_jacobian(geom)?;
    if !angle_variance.is_finite() {
        return Ok(PositionBound::Unbounded);
    }
    let g2 = g[0] * g[0] + g[1] * g[1];
    Ok(PositionBound::Finite(angle_variance / g2))
}

/// Position bound from a full FIM result.
pub fn position_crlb(fim: &FimResult, geom: &Geometry) -> Result<PositionBound> {
    position_crlb_from_angle(fim.angle[0], geom)
}
