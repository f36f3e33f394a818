//! Oracle checks shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use otfs_ipac::adc::{quantize, AdcModel};
use otfs_ipac::channel::{build_channel, complex_normal, steering_vector, Path, PathSet};
use otfs_ipac::config::AdcBits;
use otfs_ipac::crlb::{channel_derivative, fisher_matrix, ParamKind};
use otfs_ipac::modem::{random_qpsk_grid, DdGrid, OtfsModem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_frame(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len).map(|_| complex_normal(rng, 1.0)).collect()
}

/// Arbitrary paths over the whole delay range and a wide Doppler span.
pub fn random_paths(count: usize, frame_len: usize, n: usize, rng: &mut ChaCha8Rng) -> PathSet {
    let paths = (0..count)
        .map(|_| {
            let nu = rng.random_range(-(n as f64) / 2.0..=n as f64 / 2.0);
            let (doppler_int, doppler_frac) = Path::split_doppler(nu);
            Path {
                gain: complex_normal(rng, 1.0),
                delay: rng.random_range(0..frame_len),
                doppler_int,
                doppler_frac,
                aoa: rng.random_range(-1.4..1.4),
            }
        })
        .collect();
    PathSet::from_paths(paths)
}

/// `sum_p h_p a_r(theta_p) kron (Pi^l Delta^nu)` written out entry by entry.
pub fn dense_channel(paths: &PathSet, frame_len: usize, antennas: usize) -> DMatrix<Complex64> {
    let mut h = DMatrix::zeros(frame_len * antennas, frame_len);
    for p in &paths.paths {
        let a = steering_vector(p.aoa, antennas);
        let mut pi = DMatrix::<Complex64>::zeros(frame_len, frame_len);
        for q in 0..frame_len {
            pi[((q + p.delay) % frame_len, q)] = Complex64::new(1.0, 0.0);
        }
        let delta = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(frame_len, |q, _| {
            Complex64::from_polar(1.0, 2.0 * PI * p.doppler() * q as f64 / frame_len as f64)
        }));
        let block = pi * delta;
        let av = DMatrix::from_fn(antennas, 1, |i, _| a[i]);
        h += (av.kronecker(&block)) * p.gain;
    }
    h
}

/// Largest entry error between the factored operator and the dense matrix.
pub fn channel_oracle_error(m: usize, n: usize, antennas: usize, cases: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let len = m * n;
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let count = rng.random_range(1..=4);
        let paths = random_paths(count, len, n, &mut rng);
        let op = build_channel(&paths, len, antennas).expect("delays in range");
        let dense = dense_channel(&paths, len, antennas);
        for col in 0..len {
            let mut e = vec![Complex64::new(0.0, 0.0); len];
            e[col] = Complex64::new(1.0, 0.0);
            let r = op.apply(&e).expect("frame length");
            for (row, v) in r.iter().enumerate() {
                worst = worst.max((v - dense[(row, col)]).norm());
            }
        }
    }
    worst
}

/// Round trip through modulation, identity channel, demodulation, plus norm
/// preservation of both transforms. Returns the worst absolute deviation.
pub fn transform_error(cases: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst = 0.0f64;
    for (m, n) in [(16, 8), (4, 2), (8, 4), (5, 3)] {
        let modem = OtfsModem::new(m, n);
        let identity = PathSet::from_paths(vec![Path {
            gain: Complex64::new(1.0, 0.0),
            delay: 0,
            doppler_int: 0,
            doppler_frac: 0.0,
            aoa: 0.0,
        }]);
        let op = build_channel(&identity, m * n, 1).expect("valid");
        for _ in 0..cases {
            let data: Vec<Complex64> = random_frame(m * n, &mut rng);
            let grid = DdGrid::from_vec(m, n, data.clone()).expect("shape");
            let s = modem.modulate(&grid).expect("shape");
            let back = modem.demodulate(&op.apply(&s).expect("len"), 1).expect("len");
            for (a, b) in data.iter().zip(&back) {
                worst = worst.max((a - b).norm());
            }
            let e_in: f64 = data.iter().map(|v| v.norm_sqr()).sum();
            let e_mod: f64 = s.iter().map(|v| v.norm_sqr()).sum();
            worst = worst.max((e_in - e_mod).abs() / e_in);
            let mut t = s.clone();
            modem.frame_to_dd(&mut t);
            let e_dd: f64 = t.iter().map(|v| v.norm_sqr()).sum();
            worst = worst.max((e_dd - e_mod).abs() / e_in);
        }
    }
    worst
}

/// Outcome of the derivative and FIM checks.
#[derive(Debug, Clone, Copy)]
pub struct DerivativeReport {
    pub worst_relative: f64,
    pub worst_asymmetry: f64,
    /// Smallest eigenvalue relative to the largest, over all scenarios.
    pub min_eigen_ratio: f64,
}

fn perturbed(paths: &PathSet, p: usize, kind: usize, h: f64) -> PathSet {
    let mut out = paths.clone();
    let path = &mut out.paths[p];
    match kind {
        0 => path.gain += Complex64::new(h, 0.0),
        1 => path.gain += Complex64::new(0.0, h),
        2 => path.aoa += h,
        _ => {
            let (k, kappa) = Path::split_doppler(path.doppler() + h);
            path.doppler_int = k;
            path.doppler_frac = kappa;
        }
    }
    out
}

/// Compares every analytic `dH/dI` action against central differences and
/// checks the FIM for symmetry and positive semi-definiteness.
pub fn derivative_report(scenarios: usize, seed: u64) -> DerivativeReport {
    let mut rng = rng(seed);
    let (m, n, antennas) = (16usize, 8usize, 16usize);
    let len = m * n;
    let modem = OtfsModem::new(m, n);
    let step = 1e-6;
    let mut report = DerivativeReport {
        worst_relative: 0.0,
        worst_asymmetry: 0.0,
        min_eigen_ratio: f64::INFINITY,
    };
    for _ in 0..scenarios {
        let count = rng.random_range(1..=3);
        let paths = random_paths(count, len, n, &mut rng);
        let s = modem.modulate(&random_qpsk_grid(m, n, &mut rng)).expect("shape");
        for p in 0..count {
            for kind in 0..4 {
                let analytic = match kind {
                    0 => channel_derivative(&paths, p, ParamKind::Gain, antennas)
                        .unwrap()
                        .apply(&s),
                    1 => channel_derivative(&paths, p, ParamKind::Gain, antennas)
                        .unwrap()
                        .apply(&s)
                        .into_iter()
                        .map(|v| Complex64::new(0.0, 1.0) * v)
                        .collect(),
                    2 => channel_derivative(&paths, p, ParamKind::Angle, antennas)
                        .unwrap()
                        .apply(&s),
                    _ => channel_derivative(&paths, p, ParamKind::Doppler, antennas)
                        .unwrap()
                        .apply(&s),
                };
                let plus = build_channel(&perturbed(&paths, p, kind, step), len, antennas)
                    .unwrap()
                    .apply(&s)
                    .unwrap();
                let minus = build_channel(&perturbed(&paths, p, kind, -step), len, antennas)
                    .unwrap()
                    .apply(&s)
                    .unwrap();
                let (mut num, mut den) = (0.0, 0.0);
                for ((a, b), d) in plus.iter().zip(&minus).zip(&analytic) {
                    num += ((a - b) / (2.0 * step) - d).norm_sqr();
                    den += d.norm_sqr();
                }
                if den > 1e-20 {
                    report.worst_relative = report.worst_relative.max((num / den).sqrt());
                }
            }
        }
        let sigma: Vec<f64> = (0..len * antennas).map(|_| rng.random_range(0.1..2.0)).collect();
        let alpha = rng.random_range(0.6..=1.0);
        let j = fisher_matrix(&paths, &s, antennas, alpha, &sigma).expect("valid inputs");
        let scale = j.amax();
        report.worst_asymmetry = report.worst_asymmetry.max((&j - j.transpose()).amax() / scale);
        let eig = j.symmetric_eigenvalues();
        report.min_eigen_ratio = report.min_eigen_ratio.min(eig.min() / eig.max());
    }
    report
}

/// Relative deviation of the empirical quantization-noise power, and of its
/// lag-one correlation, from `alpha beta diag(E[r r^H])`.
///
/// The quantizer draws channel noise before distortion noise from the same
/// stream for every resolution, so with a shared seed the distortion term is
/// `r_b - alpha r_inf` exactly.
pub fn aqnm_deviation(bits: u32, samples: usize, seed: u64) -> (f64, f64) {
    let mut src = rng(seed);
    let antennas = 4;
    let len = samples / antennas;
    let paths = PathSet::from_paths(vec![
        Path {
            gain: Complex64::new(0.7, -0.2),
            delay: 1,
            doppler_int: 1,
            doppler_frac: 0.2,
            aoa: 0.4,
        },
        Path {
            gain: Complex64::new(-0.3, 0.5),
            delay: 3,
            doppler_int: -2,
            doppler_frac: -0.1,
            aoa: -0.7,
        },
    ]);
    let sigma2 = 0.3;
    let s = random_frame(len, &mut src);
    let clean = build_channel(&paths, len, antennas).unwrap().apply(&s).unwrap();
    let ideal = AdcModel::new(AdcBits::Infinite).unwrap();
    let coarse = AdcModel::new(AdcBits::Finite(bits)).unwrap();
    let r_inf = quantize(&clean, &paths, &ideal, sigma2, &mut rng(seed + 1)).r_ad;
    let r_b = quantize(&clean, &paths, &coarse, sigma2, &mut rng(seed + 1)).r_ad;
    let q: Vec<Complex64> = r_b.iter().zip(&r_inf).map(|(b, i)| b - coarse.alpha * i).collect();
    let input_power = r_inf.iter().map(|v| v.norm_sqr()).sum::<f64>() / r_inf.len() as f64;
    let expected = coarse.alpha * coarse.beta * input_power;
    let measured = q.iter().map(|v| v.norm_sqr()).sum::<f64>() / q.len() as f64;
    let lag: Complex64 = q.windows(2).map(|w| w[0] * w[1].conj()).sum::<Complex64>() / (q.len() - 1) as f64;
    ((measured - expected).abs() / expected, lag.norm() / expected)
}
