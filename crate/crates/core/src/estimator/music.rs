//! Spatial-smoothing MUSIC.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use super::golden::golden_section_max;
use crate::error::{Error, Result};

/// Forward-smoothed spatial covariance over `K = N_r - L + 1` subarrays.
#[derive(Debug, Clone)]
pub struct SmoothedCovariance {
    pub matrix: DMatrix<Complex64>,
    pub subarrays: usize,
    pub snapshots: usize,
}

/// `R_ss = (1/K) sum_k Y_k Y_k^H / T`, `Y_k` the rows `k..k+L` of the
/// `N_r x T` snapshot matrix.
pub fn smoothed_covariance(snapshots: &DMatrix<Complex64>, subarray: usize) -> Result<SmoothedCovariance> {
    let (antennas, count) = snapshots.shape();
    if subarray == 0 || subarray > antennas {
        return Err(Error::InvalidConfig(vec![format!(
            "subarray length {subarray} outside 1..={antennas}"
        )]));
    }
    if count < subarray {
        return Err(Error::InsufficientSnapshots {
            snapshots: count,
            subarray,
        });
    }
    let full = snapshots * snapshots.adjoint() / Complex64::new(count as f64, 0.0);
    let k = antennas - subarray + 1;
    let mut r = DMatrix::zeros(subarray, subarray);
    for start in 0..k {
        r += full.view((start, start), (subarray, subarray));
    }
    r /= Complex64::new(k as f64, 0.0);
    let herm = (&r + r.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(SmoothedCovariance {
        matrix: herm,
        subarrays: k,
        snapshots: count,
    })
}

/// MUSIC pseudo-spectrum on a uniform angle grid with its strongest peaks.
#[derive(Debug, Clone, Serialize)]
pub struct MusicSpectrum {
    pub grid: Vec<f64>,
    pub spectrum: Vec<f64>,
    /// Refined peak angles, strongest first.
    pub peaks: Vec<f64>,
    /// Fewer local maxima than requested sources were found.
    pub insufficient_peaks: bool,
}

/// Eigen-decomposes `R_ss`, scans `[-pi/2, pi/2]` with step `grid_step`, and
/// returns up to `sources` peaks refined by parabolic interpolation of the
/// log-spectrum and a local golden-section search.
pub fn music_aoa(cov: &SmoothedCovariance, sources: usize, grid_step: f64) -> Result<MusicSpectrum> {
    music_aoa_with(cov, sources, grid_step, true)
}

/// As [`music_aoa`]; with `polish` the interpolated peaks are refined by a
/// golden-section search of the pseudo-spectrum within one grid step.
pub fn music_aoa_with(cov: &SmoothedCovariance, sources: usize, grid_step: f64, polish: bool) -> Result<MusicSpectrum> {
    let l = cov.matrix.nrows();
    if sources == 0 {
        return Err(Error::NoSources);
    }
    if sources >= l {
        return Err(Error::TooManySources { sources, subarray: l });
    }
    let eig = SymmetricEigen::new(cov.matrix.clone());
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let noise: Vec<usize> = order[..l - sources].to_vec();
    let en = eig.eigenvectors.select_columns(&noise);

    let pseudo = |theta: f64| {
        let step = Complex64::from_polar(1.0, PI * theta.sin());
        let mut denom = 0.0;
        for col in en.column_iter() {
            let mut v = Complex64::new(1.0, 0.0);
            let mut proj = Complex64::new(0.0, 0.0);
            for e in col.iter() {
                proj += e.conj() * v;
                v *= step;
            }
            denom += proj.norm_sqr();
        }
        1.0 / denom.max(f64::MIN_POSITIVE)
    };

    let steps = (PI / grid_step).round().max(2.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| -PI / 2.0 + PI * i as f64 / steps as f64).collect();
    let spectrum: Vec<f64> = grid.iter().map(|&theta| pseudo(theta)).collect();

    let n = spectrum.len();
    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = i == 0 || spectrum[i] > spectrum[i - 1];
            let right = i + 1 == n || spectrum[i] >= spectrum[i + 1];
            left && right
        })
        .collect();
    maxima.sort_by(|&a, &b| spectrum[b].total_cmp(&spectrum[a]));
    let insufficient_peaks = maxima.len() < sources;
    let peaks = maxima
        .iter()
        .take(sources)
        .map(|&i| {
            if i == 0 || i + 1 == n {
                return grid[i];
            }
            let (y0, y1, y2) = (spectrum[i - 1].ln(), spectrum[i].ln(), spectrum[i + 1].ln());
            let curv = y0 - 2.0 * y1 + y2;
            let offset = if curv < 0.0 { 0.5 * (y0 - y2) / curv } else { 0.0 };
            let start = grid[i] + offset.clamp(-0.5, 0.5) * (grid[i + 1] - grid[i]);
            if !polish {
                return start;
            }
            // the quadratic fit of a sharp peak is pulled toward the grid point
            let (theta, q) = golden_section_max(pseudo, grid[i - 1], grid[i + 1], 1e-10);
            if q >= pseudo(start) {
                theta
            } else {
                start
            }
        })
        .collect();
    Ok(MusicSpectrum {
        grid,
        spectrum,
        peaks,
        insufficient_peaks,
    })
}
