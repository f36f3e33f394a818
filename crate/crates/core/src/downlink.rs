//! Zero-forcing precoded downlink with LMMSE detection.
//!
//! Under TDD reciprocity the downlink DD channel is `G_D = G_U^T`, where
//! `G_U` is built with the `N_t` transmit elements. The base station only
//! knows the estimated paths, so it precodes with
//! `W = gamma G_hat^H (G_hat G_hat^H)^-1`, normalized to `||W||_F^2 = MN`.
//!
//! Besides the dense construction, [`CompactDownlink`] forms the `MN x MN`
//! effective channel `G_D W` directly from the path lists without ever
//! building the `MN x MN N_t` matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::channel::{complex_normal, steering_vector, Path, PathSet};
use crate::config::AdcBits;
use crate::error::{Error, Result};
use crate::modem::{qpsk_bits, qpsk_symbol, OtfsModem};

/// ZF precoder and its power normalization.
#[derive(Debug, Clone)]
pub struct Precoder {
    pub w: DMatrix<Complex64>,
    pub gamma: f64,
    /// The Gram matrix was rank deficient and a ridge was added.
    pub regularized: bool,
}

/// Inverse of a Hermitian positive-definite matrix, with a small ridge when
/// the matrix is numerically rank deficient.
fn hermitian_inverse(a: &DMatrix<Complex64>) -> (DMatrix<Complex64>, bool) {
    let n = a.nrows();
    if let Some(ch) = a.clone().cholesky() {
        let diag_min = ch
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.re)
            .fold(f64::INFINITY, f64::min);
        let diag_max = ch.l_dirty().diagonal().iter().map(|v| v.re).fold(0.0, f64::max);
        if diag_min > 1e-7 * diag_max {
            return (ch.inverse(), false);
        }
    }
    let trace: f64 = a.diagonal().iter().map(|v| v.re).sum();
    let ridge = 1e-8 * trace / n as f64;
    let mut reg = a.clone();
    for i in 0..n {
        reg[(i, i)] += ridge;
    }
    let inv = reg
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| reg.try_inverse())
        .unwrap_or_else(|| DMatrix::zeros(n, n));
    (inv, true)
}

/// `W0 = G^H (G G^H)^-1`, `gamma = sqrt(MN) / ||W0||_F`, `W = gamma W0`.
pub fn build_precoder(g_hat_d: &DMatrix<Complex64>) -> Precoder {
    let mn = g_hat_d.nrows();
    let gram = g_hat_d * g_hat_d.adjoint();
    let (inv, regularized) = hermitian_inverse(&gram);
    let w0 = g_hat_d.adjoint() * inv;
    let norm = w0.norm();
    let gamma = (mn as f64).sqrt() / norm;
    Precoder {
        w: w0 * Complex64::new(gamma, 0.0),
        gamma,
        regularized,
    }
}

/// `y = G_D W x + n`, `n ~ CN(0, sigma^2 I)`.
pub fn downlink_transmit<R: Rng + ?Sized>(
    precoder: &Precoder,
    g_d: &DMatrix<Complex64>,
    x: &[Complex64],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if precoder.w.ncols() != x.len() || g_d.ncols() != precoder.w.nrows() {
        return Err(Error::DimensionMismatch {
            expected: precoder.w.ncols(),
            actual: x.len(),
        });
    }
    let tx = &precoder.w * DVector::from_column_slice(x);
    let clean = g_d * tx;
    Ok(clean.iter().map(|v| v + complex_normal(rng, sigma2)).collect())
}

/// `y = G_eff x + n` for a precomputed effective channel.
pub fn transmit_effective<R: Rng + ?Sized>(
    g_eff: &DMatrix<Complex64>,
    x: &[Complex64],
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if g_eff.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: g_eff.ncols(),
            actual: x.len(),
        });
    }
    let clean = g_eff * DVector::from_column_slice(x);
    Ok(clean.iter().map(|v| v + complex_normal(rng, sigma2)).collect())
}

/// Linear MMSE equalizer `(G^H G + sigma^2 I)^-1 G^H`, factored once and
/// reused across frames.
#[derive(Debug, Clone)]
pub struct LmmseDetector {
    g_adj: DMatrix<Complex64>,
    solver: NormalSolver,
}

#[derive(Debug, Clone)]
enum NormalSolver {
    Cholesky(nalgebra::Cholesky<Complex64, nalgebra::Dyn>),
    Lu(nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl LmmseDetector {
    pub fn new(g_eff: &DMatrix<Complex64>, sigma2: f64) -> Result<Self> {
        let n = g_eff.ncols();
        let g_adj = g_eff.adjoint();
        let mut normal = &g_adj * g_eff;
        for i in 0..n {
            normal[(i, i)] += sigma2;
        }
        let solver = match normal.clone().cholesky() {
            Some(ch) => NormalSolver::Cholesky(ch),
            None => {
                let lu = normal.lu();
                if !lu.is_invertible() {
                    return Err(Error::SingularCovariance);
                }
                NormalSolver::Lu(lu)
            }
        };
        Ok(Self { g_adj, solver })
    }

    pub fn detect(&self, y: &[Complex64]) -> Result<Detection> {
        if y.len() != self.g_adj.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.g_adj.ncols(),
                actual: y.len(),
            });
        }
        let rhs = &self.g_adj * DVector::from_column_slice(y);
        let x = match &self.solver {
            NormalSolver::Cholesky(ch) => ch.solve(&rhs),
            NormalSolver::Lu(lu) => lu.solve(&rhs).ok_or(Error::SingularCovariance)?,
        };
        let x_hat: Vec<Complex64> = x.iter().copied().collect();
        let bits = x_hat.iter().map(|&v| qpsk_bits(v)).collect();
        Ok(Detection { x_hat, bits })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub x_hat: Vec<Complex64>,
    pub bits: Vec<(bool, bool)>,
}

/// One-shot LMMSE detection and hard QPSK demapping.
pub fn lmmse_detect(y: &[Complex64], g_eff: &DMatrix<Complex64>, sigma2: f64) -> Result<Detection> {
    LmmseDetector::new(g_eff, sigma2)?.detect(y)
}

/// Random QPSK data frame with its bit labels.
pub fn random_qpsk_frame<R: Rng + ?Sized>(len: usize, rng: &mut R) -> (Vec<Complex64>, Vec<(bool, bool)>) {
    let bits: Vec<(bool, bool)> = (0..len).map(|_| (rng.random(), rng.random())).collect();
    let symbols = bits.iter().map(|&(a, b)| qpsk_symbol(a, b)).collect();
    (symbols, bits)
}

pub fn count_bit_errors(sent: &[(bool, bool)], detected: &[(bool, bool)]) -> u64 {
    sent.iter()
        .zip(detected)
        .map(|(a, b)| u64::from(a.0 != b.0) + u64::from(a.1 != b.1))
        .sum()
}

/// Bit-error statistics of one link configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkResult {
    pub ber: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub snr_db: f64,
    #[serde(serialize_with = "display")]
    pub adc_bits: AdcBits,
}

fn display<S: serde::Serializer>(b: &AdcBits, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(b)
}

impl LinkResult {
    pub fn new(bit_errors: u64, bits: u64, snr_db: f64, adc_bits: AdcBits) -> Self {
        let ber = if bits == 0 {
            0.0
        } else {
            bit_errors as f64 / bits as f64
        };
        Self {
            ber,
            bit_errors,
            bits,
            snr_db,
            adc_bits,
        }
    }
}

/// Cross-Gram `G_U(a)^H G_U(b)` of two uplink DD channels with the same
/// array, computed from their path lists.
pub fn dd_cross_gram(a: &PathSet, b: &PathSet, modem: &OtfsModem, antennas: usize) -> DMatrix<Complex64> {
    let mn = modem.frame_len();
    let mut t = DMatrix::zeros(mn, mn);
    let steer = |p: &Path| steering_vector(p.aoa, antennas);
    let sb: Vec<Vec<Complex64>> = b.paths.iter().map(steer).collect();
    let step = 2.0 * std::f64::consts::PI / mn as f64;
    for pa in &a.paths {
        let aa = steer(pa);
        for (pb, ab) in b.paths.iter().zip(&sb) {
            let array: Complex64 = aa.iter().zip(ab).map(|(x, y)| x.conj() * y).sum();
            let w = pa.gain.conj() * pb.gain * array;
            if w.norm() == 0.0 {
                continue;
            }
            // (Pi^la Delta^nua)^H (Pi^lb Delta^nub): entry (i, j) with
            // i = j + lb - la, value exp(-j nua i step) exp(j nub j step)
            let offset = (pb.delay + mn - pa.delay % mn) % mn;
            for j in 0..mn {
                let i = (j + offset) % mn;
                let phase = step * (pb.doppler() * j as f64 - pa.doppler() * i as f64);
                t[(i, j)] += w * Complex64::from_polar(1.0, phase);
            }
        }
    }
    // (F_N kron I_M) T (F_N^H kron I_M); the right factor is symmetric, so
    // each row is mapped like a column vector.
    let mut col = vec![Complex64::new(0.0, 0.0); mn];
    for j in 0..mn {
        col.copy_from_slice(t.column(j).as_slice());
        modem.frame_to_dd(&mut col);
        t.column_mut(j).copy_from_slice(&col);
    }
    let mut row = vec![Complex64::new(0.0, 0.0); mn];
    for i in 0..mn {
        for (j, r) in row.iter_mut().enumerate() {
            *r = t[(i, j)];
        }
        modem.frame_to_time(&mut row);
        for (j, r) in row.iter().enumerate() {
            t[(i, j)] = *r;
        }
    }
    t
}

/// Effective downlink channel `G_D W` for precoding on estimated paths.
#[derive(Debug, Clone)]
pub struct CompactDownlink {
    pub g_eff: DMatrix<Complex64>,
    pub gamma: f64,
    pub regularized: bool,
}

impl CompactDownlink {
    /// `true_paths` define `G_D`; `estimated` define the precoder.
    pub fn new(true_paths: &PathSet, estimated: &PathSet, modem: &OtfsModem, tx_antennas: usize) -> Self {
        // G_hat_D G_hat_D^H = conj(G_hat_U^H G_hat_U), G_D G_hat_D^H = conj(G_U^H G_hat_U)
        let gram = dd_cross_gram(estimated, estimated, modem, tx_antennas).map(|v| v.conj());
        let cross = dd_cross_gram(true_paths, estimated, modem, tx_antennas).map(|v| v.conj());
        let (inv, regularized) = hermitian_inverse(&gram);
        // ||W0||_F^2 = tr(A^-1 G G^H A^-H), which is tr(A^-1) without a ridge
        let w_norm2: f64 = if regularized {
            (&inv * &gram * inv.adjoint()).trace().re
        } else {
            inv.trace().re
        };
        let gamma = (modem.frame_len() as f64).sqrt() / w_norm2.sqrt();
        let g_eff = cross * inv * Complex64::new(gamma, 0.0);
        Self {
            g_eff,
            gamma,
            regularized,
        }
    }
}
