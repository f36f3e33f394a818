//! Additive quantization noise model (AQNM) of a low-resolution ADC.
//!
//! A `b`-bit converter scales its input by `alpha = 1 - beta` and adds
//! independent Gaussian distortion with covariance
//! `alpha * beta * diag(E[r r^H])`.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::channel::{complex_normal, PathSet};
use crate::config::AdcBits;
use crate::error::{Error, Result};

/// Distortion factors for 1..=5 bits (optimal non-uniform quantizer).
const BETA_TABLE: [f64; 5] = [0.3634, 0.1175, 0.03454, 0.009497, 0.002499];

pub fn beta_for_bits(bits: AdcBits) -> Result<f64> {
    match bits {
        AdcBits::Infinite => Ok(0.0),
        AdcBits::Finite(0) => Err(Error::InvalidBits("bit count must be at least 1".into())),
        AdcBits::Finite(b) if b <= 5 => Ok(BETA_TABLE[b as usize - 1]),
        AdcBits::Finite(b) => Ok(3f64.sqrt() * std::f64::consts::PI / 2.0 * 2f64.powi(-2 * b as i32)),
    }
}

/// Scaling gain `alpha = 1 - beta`.
pub fn alpha_for_bits(bits: AdcBits) -> Result<f64> {
    beta_for_bits(bits).map(|beta| 1.0 - beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdcModel {
    #[serde(serialize_with = "serialize_bits")]
    pub bits: AdcBits,
    pub alpha: f64,
    pub beta: f64,
}

fn serialize_bits<S: serde::Serializer>(b: &AdcBits, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(b)
}

impl AdcModel {
    pub fn new(bits: AdcBits) -> Result<Self> {
        let beta = beta_for_bits(bits)?;
        Ok(Self {
            bits,
            alpha: 1.0 - beta,
            beta,
        })
    }

    /// Quantization-noise variance per sample for input power `input_power`.
    pub fn distortion_variance(&self, input_power: f64) -> f64 {
        self.alpha * self.beta * input_power
    }

    /// Effective noise variance `alpha^2 sigma^2 + alpha beta (P_s + sigma^2)`.
    pub fn effective_variance(&self, signal_power: f64, sigma2: f64) -> f64 {
        self.alpha * self.alpha * sigma2 + self.distortion_variance(signal_power + sigma2)
    }
}

/// Output of the ADC stage.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedObservation {
    pub r_ad: Vec<Complex64>,
    pub sigma2: f64,
    /// Quantization-noise covariance diagonal `C_ad`.
    pub c_ad_diag: Vec<f64>,
    /// Effective noise covariance diagonal `alpha^2 sigma^2 + C_ad`.
    pub sigma_diag: Vec<f64>,
    pub model: AdcModel,
}

/// Per-sample receive power `diag(E[r r^H])` for unit-energy symbols.
///
/// Steering entries have unit modulus and distinct delays see independent
/// symbols, so the value is the same on every antenna.
pub fn receive_power(paths: &PathSet, sigma2: f64) -> f64 {
    paths.power() + sigma2
}

/// Applies the AQNM to the noiseless receive frames `clean = H s`.
///
/// Channel noise and quantization noise are drawn here, in that order, from
/// `rng`; the distortion draws happen even for an ideal converter so the
/// random stream does not depend on the resolution.
pub fn quantize<R: Rng + ?Sized>(
    clean: &[Complex64],
    paths: &PathSet,
    model: &AdcModel,
    sigma2: f64,
    rng: &mut R,
) -> QuantizedObservation {
    let c_ad = model.distortion_variance(receive_power(paths, sigma2));
    let alpha = model.alpha;
    let mut r_ad: Vec<Complex64> = clean
        .iter()
        .map(|&v| alpha * (v + complex_normal(rng, sigma2)))
        .collect();
    for v in r_ad.iter_mut() {
        *v += complex_normal(rng, 1.0) * c_ad.sqrt();
    }
    let len = clean.len();
    QuantizedObservation {
        r_ad,
        sigma2,
        c_ad_diag: vec![c_ad; len],
        sigma_diag: vec![alpha * alpha * sigma2 + c_ad; len],
        model: *model,
    }
}

/// Diagonal of the effective noise covariance, the same on every sample.
pub fn effective_sigma(paths: &PathSet, model: &AdcModel, sigma2: f64) -> f64 {
    model.effective_variance(paths.power(), sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Path;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_power_paths() -> PathSet {
        PathSet::from_paths(vec![Path {
            gain: Complex64::new(0.6, 0.8),
            delay: 1,
            doppler_int: 0,
            doppler_frac: 0.0,
            aoa: 0.0,
        }])
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn alpha_table_lookup() {
        assert!((alpha_for_bits(AdcBits::Finite(1)).unwrap() - 0.6366).abs() < 1e-12);
        assert!((alpha_for_bits(AdcBits::Finite(5)).unwrap() - 0.997501).abs() < 1e-12);
        assert_eq!(alpha_for_bits(AdcBits::Infinite).unwrap(), 1.0);
        assert!(alpha_for_bits(AdcBits::Finite(0)).is_err());
        let b6 = beta_for_bits(AdcBits::Finite(6)).unwrap();
        assert!((b6 - 3f64.sqrt() * std::f64::consts::PI / 2.0 / 4096.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_increases_with_resolution() {
        let mut prev = 0.0;
        for b in 1..=16 {
            let a = alpha_for_bits(AdcBits::Finite(b)).unwrap();
            assert!(a > prev, "alpha not increasing at b={b}");
            assert!(a < 1.0);
            prev = a;
        }
        assert!(1.0 - prev < 1e-8);
    }

    #[test]
    fn effective_sigma_examples() {
        let paths = unit_power_paths();
        let ideal = AdcModel::new(AdcBits::Infinite).unwrap();
        assert!((effective_sigma(&paths, &ideal, 0.01) - 0.01).abs() < 1e-15);
        let three = AdcModel::new(AdcBits::Finite(3)).unwrap();
        let got = effective_sigma(&paths, &three, 0.01);
        let alpha = 1.0 - 0.03454;
        let want = alpha * alpha * 0.01 + alpha * 0.03454 * 1.01;
        assert!((got - want).abs() < 1e-15);
        assert!((got - 0.04300).abs() < 5e-5, "{got}");
    }

    #[test]
    fn effective_sigma_monotone_in_bits() {
        let paths = unit_power_paths();
        let mut prev = f64::INFINITY;
        for b in 1..=10 {
            let v = effective_sigma(&paths, &AdcModel::new(AdcBits::Finite(b)).unwrap(), 0.05);
            assert!(v <= prev);
            prev = v;
        }
        let ideal = effective_sigma(&paths, &AdcModel::new(AdcBits::Infinite).unwrap(), 0.05);
        assert!(ideal <= prev);
    }

    #[test]
    fn ideal_converter_adds_only_channel_noise() {
        let paths = unit_power_paths();
        let model = AdcModel::new(AdcBits::Infinite).unwrap();
        let clean: Vec<Complex64> = (0..64).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs = quantize(&clean, &paths, &model, 0.5, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (i, v) in obs.r_ad.iter().enumerate() {
            let w = complex_normal(&mut rng, 0.5);
            assert_eq!(*v, clean[i] + w);
        }
        assert!(obs.c_ad_diag.iter().all(|&c| c == 0.0));
        assert!(obs.sigma_diag.iter().all(|&c| c == 0.5));
    }

    #[test]
    fn quantize_is_deterministic() {
        let paths = unit_power_paths();
        let model = AdcModel::new(AdcBits::Finite(2)).unwrap();
        let clean = vec![Complex64::new(0.3, 0.1); 32];
        let a = quantize(&clean, &paths, &model, 0.1, &mut ChaCha8Rng::seed_from_u64(9));
        let b = quantize(&clean, &paths, &model, 0.1, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn one_bit_output_power_on_pure_noise() {
        // Hs = 0, sigma^2 = 1: E|r_ad|^2 = alpha^2 + alpha beta = alpha.
        let empty = PathSet::from_paths(vec![]);
        let model = AdcModel::new(AdcBits::Finite(1)).unwrap();
        let clean = vec![Complex64::new(0.0, 0.0); 100_000];
        let obs = quantize(&clean, &empty, &model, 1.0, &mut ChaCha8Rng::seed_from_u64(17));
        let power = obs.r_ad.iter().map(|v| v.norm_sqr()).sum::<f64>() / clean.len() as f64;
        assert!((power / model.alpha - 1.0).abs() < 0.02, "power {power}");
    }
}
