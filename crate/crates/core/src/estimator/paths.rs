//! Path-wise Doppler and gain estimation by successive interference
//! cancellation.
//!
//! For path `p` (delay `l_p = p + 1`) the dictionary atom is
//! `Gamma(theta, nu) x = a_r(theta) kron (F_N kron I_M) Pi^{l_p} Delta^nu s`.
//! Each step picks the unused AoA candidate and integer Doppler maximizing the
//! normalized correlation `|(Gamma x)^H y_r|^2 / ||Gamma x||^2`, refines the
//! fractional Doppler by golden-section search, solves the gain in closed
//! form, and subtracts the path from the residual.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::golden::golden_section_max;
use crate::channel::{shift_and_ramp, steering_vector, Path, PathSet};
use crate::config::{CancellationOrder, EstimatorConfig};
use crate::error::{Error, Result};
use crate::modem::{norm_sqr, DdGrid, OtfsModem};

/// `(theta, k, kappa)` of one fitted path.
type Fit = (f64, i32, f64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEstimate {
    pub delay: usize,
    pub aoa: f64,
    pub doppler_int: i32,
    pub doppler_frac: f64,
    pub gain: Complex64,
    /// `||y_r||^2` after this path was cancelled.
    pub residual_energy: f64,
}

impl PathEstimate {
    pub fn doppler(&self) -> f64 {
        self.doppler_int as f64 + self.doppler_frac
    }

    pub fn as_path(&self) -> Path {
        Path {
            gain: self.gain,
            delay: self.delay,
            doppler_int: self.doppler_int,
            doppler_frac: self.doppler_frac,
            aoa: self.aoa,
        }
    }
}

/// Converts estimates into a path set usable by the channel model.
pub fn estimates_to_paths(estimates: &[PathEstimate]) -> PathSet {
    PathSet::from_paths(estimates.iter().map(PathEstimate::as_path).collect())
}

/// Integer Doppler search set `{-N/2, ..., N/2 - 1}`.
pub fn doppler_search_set(n: usize) -> std::ops::Range<i32> {
    let half = (n / 2) as i32;
    -half..(n as i32 - half)
}

/// Fixed inputs of the estimator.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorSetup<'a> {
    pub modem: &'a OtfsModem,
    pub antennas: usize,
    /// ADC scaling gain, known to the receiver.
    pub alpha: f64,
    pub settings: &'a EstimatorConfig,
}

struct Correlator<'a> {
    setup: EstimatorSetup<'a>,
    s: Vec<Complex64>,
}

/// Per-antenna correlations of one delay-Doppler atom with the residual.
struct Projection {
    z: Vec<Complex64>,
    atom: Vec<Complex64>,
    energy: f64,
}

impl Projection {
    fn score(&self, theta: f64) -> (f64, Complex64) {
        self.score_step(Complex64::from_polar(1.0, -PI * theta.sin()))
    }

    /// Score for the conjugate inter-element phase step of an angle.
    fn score_step(&self, step: Complex64) -> (f64, Complex64) {
        let mut w = Complex64::new(1.0, 0.0);
        let mut c = Complex64::new(0.0, 0.0);
        for z in &self.z {
            c += w * z;
            w *= step;
        }
        (c.norm_sqr() / (self.z.len() as f64 * self.energy), c)
    }
}

impl Correlator<'_> {
    fn project(&self, delay: usize, nu: f64, residual: &[Complex64]) -> Projection {
        let atom = shift_and_ramp(&self.s, delay, nu, None);
        let energy = norm_sqr(&atom);
        let z = residual
            .chunks_exact(atom.len())
            .map(|y| atom.iter().zip(y).map(|(t, v)| t.conj() * v).sum())
            .collect();
        Projection { z, atom, energy }
    }

    fn golden_doppler(&self, delay: usize, theta: f64, k: i32, residual: &[Complex64]) -> (f64, f64) {
        let tol = self.setup.settings.golden_tol_bins;
        let centre = k as f64;
        golden_section_max(
            |nu| self.project(delay, nu, residual).score(theta).0,
            centre - 0.5,
            centre + 0.5,
            tol,
        )
    }

    fn refine_angle(&self, proj: &Projection, theta: f64) -> (f64, f64) {
        let antennas = self.setup.antennas as f64;
        let half_width = (1.0 / antennas) / theta.cos().abs().max(0.25);
        let lo = (theta - half_width).max(-PI / 2.0);
        let hi = (theta + half_width).min(PI / 2.0);
        golden_section_max(|t| proj.score(t).0, lo, hi, 1e-7)
    }

    /// Fits one path at `delay` with AoA starting from `theta` against the
    /// residual. Integer Doppler is searched over the whole set.
    fn fit(&self, delay: usize, theta: f64, residual: &[Complex64]) -> Fit {
        let mut best = (f64::NEG_INFINITY, 0);
        for k in doppler_search_set(self.setup.modem.n()) {
            let m = self.project(delay, k as f64, residual).score(theta).0;
            if m > best.0 {
                best = (m, k);
            }
        }
        self.refine(delay, theta, best.1, best.0, residual)
    }

    /// Joint argmax over unused candidates and integer Doppler, then the
    /// fractional refinement of the winner.
    fn select_integer(
        &self,
        delay: usize,
        candidates: &[f64],
        used: &[bool],
        residual: &[Complex64],
    ) -> Option<(f64, usize, Fit)> {
        let mut best: Option<(f64, usize, i32)> = None;
        for k in doppler_search_set(self.setup.modem.n()) {
            let proj = self.project(delay, k as f64, residual);
            for (ci, &theta) in candidates.iter().enumerate() {
                if used[ci] {
                    continue;
                }
                let m = proj.score(theta).0;
                if best.is_none_or(|(bm, _, _)| m > bm) {
                    best = Some((m, ci, k));
                }
            }
        }
        best.map(|(m, ci, k)| (m, ci, self.refine(delay, candidates[ci], k, m, residual)))
    }

    /// Best integer Doppler per unused candidate, refined, then the candidate
    /// with the largest refined metric.
    fn select_refined(
        &self,
        delay: usize,
        candidates: &[f64],
        used: &[bool],
        residual: &[Complex64],
    ) -> Option<(f64, usize, Fit)> {
        let projections: Vec<Projection> = doppler_search_set(self.setup.modem.n())
            .map(|k| self.project(delay, k as f64, residual))
            .collect();
        let mut best: Option<(f64, usize, Fit)> = None;
        for (ci, &theta) in candidates.iter().enumerate() {
            if used[ci] {
                continue;
            }
            let (mut base, mut k_best) = (f64::NEG_INFINITY, 0);
            for (proj, k) in projections.iter().zip(doppler_search_set(self.setup.modem.n())) {
                let m = proj.score(theta).0;
                if m > base {
                    (base, k_best) = (m, k);
                }
            }
            let fit = self.refine(delay, theta, k_best, base, residual);
            let value = self.project(delay, fit.1 as f64 + fit.2, residual).score(fit.0).0;
            if best.is_none_or(|(v, _, _)| value > v) {
                best = Some((value, ci, fit));
            }
        }
        best
    }

    /// Joint scan of AoA (grid of `step` over the whole field of view) and
    /// integer Doppler at a known delay, then refinement.
    fn fit_global(&self, delay: usize, step: f64, residual: &[Complex64]) -> Fit {
        let count = (PI / step).round().max(2.0) as usize;
        let grid: Vec<(f64, Complex64)> = (0..=count)
            .map(|i| {
                let theta = -PI / 2.0 + PI * i as f64 / count as f64;
                (theta, Complex64::from_polar(1.0, -PI * theta.sin()))
            })
            .collect();
        let mut best = (f64::NEG_INFINITY, 0.0, 0);
        for k in doppler_search_set(self.setup.modem.n()) {
            let proj = self.project(delay, k as f64, residual);
            for &(theta, phase) in &grid {
                let m = proj.score_step(phase).0;
                if m > best.0 {
                    best = (m, theta, k);
                }
            }
        }
        let (base, theta, k) = best;
        let proj = self.project(delay, k as f64, residual);
        let lo = (theta - step).max(-PI / 2.0);
        let hi = (theta + step).min(PI / 2.0);
        let (theta, _) = golden_section_max(|t| proj.score(t).0, lo, hi, 1e-9);
        let base = base.max(proj.score(theta).0);
        self.refine(delay, theta, k, base, residual)
    }

    /// Golden-section refinement of the fractional Doppler (and optionally
    /// the AoA) around integer tap `k`. Never returns a worse metric than the
    /// integer-grid value `base`.
    fn refine(&self, delay: usize, theta: f64, k: i32, base: f64, residual: &[Complex64]) -> Fit {
        let mut theta = theta;
        let (mut nu, mut value) = self.golden_doppler(delay, theta, k, residual);
        if value < base {
            nu = k as f64;
            value = base;
        }
        if self.setup.settings.refine_aoa {
            for _ in 0..2 {
                let proj = self.project(delay, nu, residual);
                let (t, v) = self.refine_angle(&proj, theta);
                if v >= value {
                    theta = t;
                    value = v;
                }
                let (n2, v2) = self.golden_doppler(delay, theta, k, residual);
                if v2 >= value {
                    nu = n2;
                    value = v2;
                }
            }
        }
        let k_hat = nu.round() as i32;
        (theta, k_hat, nu - k_hat as f64)
    }

    /// Closed-form gain for a fixed atom; subtracts `alpha h Gamma x` from
    /// the residual.
    fn cancel(&self, delay: usize, theta: f64, nu: f64, residual: &mut [Complex64]) -> Complex64 {
        let proj = self.project(delay, nu, residual);
        let (_, c) = proj.score(theta);
        let alpha = self.setup.alpha;
        let gain = c / (alpha * self.setup.antennas as f64 * proj.energy);
        let a = steering_vector(theta, self.setup.antennas);
        for (y, an) in residual.chunks_exact_mut(proj.atom.len()).zip(&a) {
            let w = alpha * gain * an;
            for (v, t) in y.iter_mut().zip(&proj.atom) {
                *v -= w * t;
            }
        }
        gain
    }

    fn restore(&self, est: &PathEstimate, residual: &mut [Complex64]) {
        let atom = shift_and_ramp(&self.s, est.delay, est.doppler(), None);
        let a = steering_vector(est.aoa, self.setup.antennas);
        for (y, an) in residual.chunks_exact_mut(atom.len()).zip(&a) {
            let w = self.setup.alpha * est.gain * an;
            for (v, t) in y.iter_mut().zip(&atom) {
                *v += w * t;
            }
        }
    }
}

/// Estimates `paths` paths from the DD-domain observation `y_ad`.
///
/// `candidates` are AoA hypotheses (typically MUSIC peaks); each is assigned
/// to at most one path. Delays `1..=paths`, the pilot, and `alpha` are known.
pub fn estimate_paths(
    y_ad: &[Complex64],
    pilot: &DdGrid,
    candidates: &[f64],
    paths: usize,
    setup: EstimatorSetup<'_>,
) -> Result<Vec<PathEstimate>> {
    let frame_len = setup.modem.frame_len();
    let expected = frame_len * setup.antennas;
    if y_ad.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: y_ad.len(),
        });
    }
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let corr = Correlator {
        setup,
        s: setup.modem.modulate(pilot)?,
    };
    // The DD transform is unitary per antenna, so correlations and
    // cancellation are carried out on the time-domain frames.
    let mut residual = y_ad.to_vec();
    for frame in residual.chunks_exact_mut(frame_len) {
        setup.modem.frame_to_time(frame);
    }
    let mut used = vec![false; candidates.len()];
    let mut estimates: Vec<PathEstimate> = Vec::with_capacity(paths);

    let mut remaining: Vec<usize> = (1..=paths).collect();
    for p in 0..paths {
        let order: &[usize] = match setup.settings.order {
            CancellationOrder::Delay => &remaining[..1],
            CancellationOrder::Strongest => &remaining,
        };
        let mut best: Option<(f64, usize, usize, Fit)> = None;
        for &delay in order {
            let selected = if setup.settings.refined_selection {
                corr.select_refined(delay, candidates, &used, &residual)
            } else {
                corr.select_integer(delay, candidates, &used, &residual)
            };
            if let Some((value, ci, fit)) = selected {
                if best.is_none_or(|(v, ..)| value > v) {
                    best = Some((value, delay, ci, fit));
                }
            }
        }
        let (_, delay, ci, (theta, k_hat, kappa)) = best.ok_or(Error::CandidatesExhausted(p))?;
        used[ci] = true;
        remaining.retain(|&d| d != delay);
        let gain = corr.cancel(delay, theta, k_hat as f64 + kappa, &mut residual);
        estimates.push(PathEstimate {
            delay,
            aoa: theta,
            doppler_int: k_hat,
            doppler_frac: kappa,
            gain,
            residual_energy: norm_sqr(&residual),
        });
    }
    estimates.sort_by_key(|e| e.delay);

    for _ in 0..setup.settings.refit_passes {
        for est in estimates.iter_mut() {
            corr.restore(est, &mut residual);
            let (theta, k_hat, kappa) = if setup.settings.refit_scan {
                corr.fit_global(est.delay, setup.settings.music_grid_deg.to_radians(), &residual)
            } else {
                corr.fit(est.delay, est.aoa, &residual)
            };
            let gain = corr.cancel(est.delay, theta, k_hat as f64 + kappa, &mut residual);
            *est = PathEstimate {
                delay: est.delay,
                aoa: theta,
                doppler_int: k_hat,
                doppler_frac: kappa,
                gain,
                residual_energy: norm_sqr(&residual),
            };
        }
    }
    Ok(estimates)
}
