//! Delay-Doppler <-> time-domain lattice transforms.
//!
//! Vectors are column-major over the `M x N` grid: entry `(m, n)` lives at
//! `m + n * M`. With a rectangular pulse the ISFFT followed by the Heisenberg
//! transform reduces to an inverse N-point DFT along the Doppler axis, so the
//! transmit frame is `s = (F_N^H kron I_M) x`. The receiver applies
//! `(I_{N_r} kron F_N kron I_M)` to the stacked antenna frames. All DFTs are
//! unitary.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// An `M x N` delay-Doppler symbol grid, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DdGrid {
    m: usize,
    n: usize,
    data: Vec<Complex64>,
}

impl DdGrid {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            data: vec![Complex64::new(0.0, 0.0); m * n],
        }
    }

    /// Wraps a vectorized grid `x = vec(X)`.
    pub fn from_vec(m: usize, n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                actual: data.len(),
            });
        }
        Ok(Self { m, n, data })
    }

    /// Builds a grid from rows indexed by delay, each of length `N`.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut grid = Self::zeros(m, n);
        for (mi, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            for (ni, &v) in row.iter().enumerate() {
                grid.set(mi, ni, v);
            }
        }
        Ok(grid)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, delay: usize, doppler: usize) -> Complex64 {
        self.data[delay + doppler * self.m]
    }

    pub fn set(&mut self, delay: usize, doppler: usize, value: Complex64) {
        self.data[delay + doppler * self.m] = value;
    }

    /// The vectorized form `x`.
    pub fn as_vec(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn mean_energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.data.len().max(1) as f64
    }
}

/// Cached N-point unitary DFTs for one frame shape.
#[derive(Clone)]
pub struct OtfsModem {
    m: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for OtfsModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OtfsModem")
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl OtfsModem {
    pub fn new(m: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            m,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn frame_len(&self) -> usize {
        self.m * self.n
    }

    /// `s = (F_N^H kron I_M) x`.
    pub fn modulate(&self, grid: &DdGrid) -> Result<Vec<Complex64>> {
        if grid.m != self.m || grid.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.frame_len(),
                actual: grid.m * grid.n,
            });
        }
        let mut s = grid.data.clone();
        self.doppler_axis_inplace(&mut s, false);
        Ok(s)
    }

    /// `y = (I_{N_r} kron F_N kron I_M) r` for `r` holding `N_r` stacked frames.
    pub fn demodulate(&self, r: &[Complex64], antennas: usize) -> Result<Vec<Complex64>> {
        let expected = self.frame_len() * antennas;
        if r.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: r.len(),
            });
        }
        let mut y = r.to_vec();
        for block in y.chunks_exact_mut(self.frame_len()) {
            self.doppler_axis_inplace(block, true);
        }
        Ok(y)
    }

    /// `(F_N kron I_M) v` on one frame, in place.
    pub fn frame_to_dd(&self, v: &mut [Complex64]) {
        debug_assert_eq!(v.len(), self.frame_len());
        self.doppler_axis_inplace(v, true);
    }

    /// `(F_N^H kron I_M) v` on one frame, in place.
    pub fn frame_to_time(&self, v: &mut [Complex64]) {
        debug_assert_eq!(v.len(), self.frame_len());
        self.doppler_axis_inplace(v, false);
    }

    fn doppler_axis_inplace(&self, frame: &mut [Complex64], forward: bool) {
        let fft = if forward { &self.forward } else { &self.inverse };
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for delay in 0..self.m {
            for (slot, b) in buf.iter_mut().enumerate() {
                *b = frame[delay + slot * self.m];
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for (slot, b) in buf.iter().enumerate() {
                frame[delay + slot * self.m] = b * self.scale;
            }
        }
    }
}

const QPSK_AMPLITUDE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Maps two bits to a Gray-labelled unit-energy QPSK symbol.
pub fn qpsk_symbol(b0: bool, b1: bool) -> Complex64 {
    let re = if b0 { -QPSK_AMPLITUDE } else { QPSK_AMPLITUDE };
    let im = if b1 { -QPSK_AMPLITUDE } else { QPSK_AMPLITUDE };
    Complex64::new(re, im)
}

/// Quadrant decision, inverse of [`qpsk_symbol`].
pub fn qpsk_bits(symbol: Complex64) -> (bool, bool) {
    (symbol.re < 0.0, symbol.im < 0.0)
}

/// Random QPSK grid drawn from `rng`.
pub fn random_qpsk_grid<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> DdGrid {
    let data = (0..m * n).map(|_| qpsk_symbol(rng.random(), rng.random())).collect();
    DdGrid { m, n, data }
}

/// Pilot grid known to both ends, reproducible from `seed`.
pub fn generate_pilot_grid(m: usize, n: usize, seed: u64) -> DdGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_qpsk_grid(m, n, &mut rng)
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
