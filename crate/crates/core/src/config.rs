//! Scenario constants, geometry, and the plain-text configuration file.
//!
//! The configuration file is TOML with one section per concern. Every key is
//! optional and falls back to the reference scenario (16 subcarriers, 8 slots,
//! 16-element array, 3 paths, user at (883, 883) m); unknown keys and unknown
//! sections are rejected.
//!
//! ```toml
//! [frame]
//! m = 16
//! n = 8
//! subcarrier_spacing_hz = 15000.0
//! carrier_hz = 4.0e9
//! tx_antennas = 16
//! rx_antennas = 16
//! adc_bits = 5          # or "inf"
//! subarray_len = 8
//! paths = 3
//! snr_db = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0]
//! seed = 1
//!
//! [geometry]
//! user_position_m = [883.0, 883.0]
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// ADC resolution: a finite bit count or an ideal (unquantized) converter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdcBits {
    Finite(u32),
    Infinite,
}

impl AdcBits {
    pub fn is_infinite(self) -> bool {
        matches!(self, AdcBits::Infinite)
    }
}

impl fmt::Display for AdcBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdcBits::Finite(b) => write!(f, "{b}"),
            AdcBits::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for AdcBits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinite" | "infinity" => Ok(AdcBits::Infinite),
            other => match other.parse::<u32>() {
                Ok(0) => Err(Error::InvalidBits("bit count must be at least 1".into())),
                Ok(b) => Ok(AdcBits::Finite(b)),
                Err(_) => Err(Error::InvalidBits(format!("`{t}` is neither an integer nor `inf`"))),
            },
        }
    }
}

impl Serialize for AdcBits {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AdcBits::Finite(b) => s.serialize_u32(*b),
            AdcBits::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for AdcBits {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct BitsVisitor;

        impl Visitor<'_> for BitsVisitor {
            type Value = AdcBits;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive bit count or \"inf\"")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<AdcBits, E> {
                match u32::try_from(v) {
                    Ok(b) if b >= 1 => Ok(AdcBits::Finite(b)),
                    _ => Err(E::custom(format!("invalid bit count {v}"))),
                }
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<AdcBits, E> {
                self.visit_i64(i64::try_from(v).unwrap_or(-1))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<AdcBits, E> {
                v.parse().map_err(|e: Error| E::custom(e.to_string()))
            }
        }

        d.deserialize_any(BitsVisitor)
    }
}

/// How the SNR knob maps to the channel-noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnrConvention {
    /// SNR per receive antenna: sigma^2 = 10^(-snr/10) * sum_p |h_p|^2.
    #[default]
    Receive,
    /// SNR per transmitted sample: sigma^2 = 10^(-snr/10).
    Transmit,
}

impl SnrConvention {
    pub fn noise_variance(self, snr_db: f64, signal_power: f64) -> f64 {
        let scale = 10f64.powf(-snr_db / 10.0);
        match self {
            SnrConvention::Receive => scale * signal_power,
            SnrConvention::Transmit => scale,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SnrConvention::Receive => "receive-per-antenna",
            SnrConvention::Transmit => "transmit-per-sample",
        }
    }
}

impl FromStr for SnrConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "receive" | "receive-per-antenna" => Ok(SnrConvention::Receive),
            "transmit" | "transmit-per-sample" => Ok(SnrConvention::Transmit),
            other => Err(Error::ConfigParse(format!("unknown SNR convention `{other}`"))),
        }
    }
}

/// One SNR point in dB; must be finite.
pub fn parse_snr_db(s: &str) -> Result<f64> {
    let t = s.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::ConfigParse(format!("SNR `{t}` is not finite"))),
        Err(_) => Err(Error::ConfigParse(format!("SNR `{t}` is not a number"))),
    }
}

/// Comma-separated SNR points, e.g. `0,10,20.5`.
pub fn parse_snr_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(Error::ConfigParse("empty SNR list".into()));
    }
    s.split(',').map(parse_snr_db).collect()
}

/// OTFS grid, carrier, array, and ADC parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    /// Subcarriers (delay bins).
    pub m: usize,
    /// Time slots (Doppler bins).
    pub n: usize,
    #[serde(rename = "subcarrier_spacing_hz")]
    pub delta_f: f64,
    pub carrier_hz: f64,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub adc_bits: AdcBits,
    /// Spatial-smoothing subarray length.
    pub subarray_len: usize,
    pub paths: usize,
    pub snr_db: Vec<f64>,
    pub seed: u64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            m: 16,
            n: 8,
            delta_f: 15e3,
            carrier_hz: 4e9,
            tx_antennas: 16,
            rx_antennas: 16,
            adc_bits: AdcBits::Finite(5),
            subarray_len: 8,
            paths: 3,
            snr_db: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            seed: 1,
        }
    }
}

impl FrameConfig {
    /// Samples per frame, `M * N`.
    pub fn frame_len(&self) -> usize {
        self.m * self.n
    }

    /// OTFS symbol duration `T = 1 / delta_f`.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Sample period `T_s = 1 / (M delta_f)`, also the delay resolution.
    pub fn sample_period(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f)
    }

    /// Doppler resolution `1 / (N T)` in Hz.
    pub fn doppler_resolution(&self) -> f64 {
        self.delta_f / self.n as f64
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    /// Delay of an integer delay tap, in seconds.
    pub fn tap_delay(&self, tap: usize) -> f64 {
        tap as f64 * self.sample_period()
    }
}

/// Checked configuration with derived quantities. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidConfig {
    frame: FrameConfig,
    subarrays: usize,
}

impl ValidConfig {
    pub fn frame(&self) -> &FrameConfig {
        &self.frame
    }

    /// Number of overlapping subarrays `K = N_r - L + 1`.
    pub fn subarrays(&self) -> usize {
        self.subarrays
    }

    pub fn into_inner(self) -> FrameConfig {
        self.frame
    }
}

impl std::ops::Deref for ValidConfig {
    type Target = FrameConfig;

    fn deref(&self) -> &FrameConfig {
        &self.frame
    }
}

/// Checks every frame invariant and reports all violations at once.
pub fn validate(cfg: &FrameConfig) -> Result<ValidConfig> {
    let mut issues = Vec::new();
    if cfg.m < 1 {
        issues.push("m: at least one subcarrier required".to_string());
    }
    if cfg.n < 1 {
        issues.push("n: at least one time slot required".to_string());
    }
    if cfg.rx_antennas < 2 {
        issues.push("rx_antennas: array needs at least two elements".to_string());
    }
    if cfg.tx_antennas < 1 {
        issues.push("tx_antennas: at least one transmit antenna required".to_string());
    }
    if cfg.subarray_len < 1 {
        issues.push("subarray_len: must be at least 1".to_string());
    } else if cfg.subarray_len > cfg.rx_antennas {
        issues.push("subarray_len: subarray longer than array".to_string());
    }
    if cfg.paths < 1 {
        issues.push("paths: at least one path required".to_string());
    }
    if cfg.paths >= cfg.m {
        issues.push("paths: delay grid overflow (integer delays 1..=P must fit below M)".to_string());
    }
    let subarrays = (cfg.rx_antennas + 1).saturating_sub(cfg.subarray_len);
    if cfg.paths >= 1 && cfg.subarray_len >= 1 && cfg.subarray_len <= cfg.rx_antennas {
        if cfg.paths >= cfg.subarray_len {
            issues.push("paths: subarray must be longer than the path count for a noise subspace".to_string());
        }
        if cfg.paths > subarrays {
            issues.push("paths: more paths than smoothing subarrays".to_string());
        }
    }
    if !(cfg.delta_f.is_finite() && cfg.delta_f > 0.0) {
        issues.push("subcarrier_spacing_hz: must be positive".to_string());
    }
    if !(cfg.carrier_hz.is_finite() && cfg.carrier_hz > 0.0) {
        issues.push("carrier_hz: must be positive".to_string());
    }
    if cfg.snr_db.iter().any(|s| !s.is_finite()) {
        issues.push("snr_db: SNR points must be finite".to_string());
    }
    if issues.is_empty() {
        Ok(ValidConfig {
            frame: cfg.clone(),
            subarrays,
        })
    } else {
        Err(Error::InvalidConfig(issues))
    }
}

/// Base station at the origin, user in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub user_position_m: [f64; 2],
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            user_position_m: [883.0, 883.0],
        }
    }
}

impl Geometry {
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            user_position_m: [x, y],
        }
    }

    pub fn distance(&self) -> f64 {
        let [x, y] = self.user_position_m;
        x.hypot(y)
    }

    /// Line-of-sight delay (s) and angle of arrival (rad) of the user.
    pub fn derive_los(&self) -> Result<(f64, f64)> {
        let [x, y] = self.user_position_m;
        let d = self.distance();
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "user position ({x}, {y}) must be finite and away from the base station"
            )));
        }
        Ok((d / SPEED_OF_LIGHT, y.atan2(x)))
    }

    /// Position on the same bearing whose range equals the delay of tap `l0`.
    ///
    /// Simulated frames only carry integer delays, so this is the truth the
    /// position estimate is scored against.
    pub fn grid_consistent(&self, cfg: &FrameConfig, los_tap: usize) -> Result<Geometry> {
        let (_, theta0) = self.derive_los()?;
        let range = SPEED_OF_LIGHT * cfg.tap_delay(los_tap);
        Ok(Geometry::new(range * theta0.cos(), range * theta0.sin()))
    }
}

/// Forward position model `u = c tau [cos theta, sin theta]`.
pub fn position_from_los(tau0: f64, theta0: f64) -> [f64; 2] {
    let r = SPEED_OF_LIGHT * tau0;
    [r * theta0.cos(), r * theta0.sin()]
}

/// Channel statistics used by the path sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// User speed; only its magnitude matters (sets the maximum Doppler).
    pub max_speed_kmh: f64,
    /// Exponential power-delay-profile decay `mu`.
    pub pdp_decay: f64,
    /// Half-width of the sector NLoS angles are drawn from, degrees.
    pub nlos_sector_deg: f64,
    /// NLoS angles closer than this to the LoS angle are redrawn, degrees.
    pub aoa_guard_deg: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            max_speed_kmh: 300.0,
            pdp_decay: 0.1,
            nlos_sector_deg: 60.0,
            aoa_guard_deg: 5.0,
        }
    }
}

impl ChannelConfig {
    /// Maximum Doppler in bins of `1/(N T)`: `v f_c / c * N T`.
    pub fn k_max(&self, frame: &FrameConfig) -> f64 {
        let v = self.max_speed_kmh / 3.6;
        let nu_max = v * frame.carrier_hz / SPEED_OF_LIGHT;
        nu_max / frame.doppler_resolution()
    }
}

/// Uplink estimator knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// MUSIC scan step, degrees.
    pub music_grid_deg: f64,
    /// Golden-section tolerance on the fractional Doppler, bins.
    pub golden_tol_bins: f64,
    /// Extra cancellation sweeps re-estimating each path against all others.
    pub refit_passes: usize,
    /// Refine each AoA around its MUSIC candidate with the pilot correlation.
    pub refine_aoa: bool,
    /// Pick the AoA candidate by its Doppler-refined metric rather than the
    /// integer-Doppler metric.
    pub refined_selection: bool,
    /// Order in which paths are fitted and cancelled.
    pub order: CancellationOrder,
    /// During refit passes, re-acquire each AoA by scanning the whole field
    /// of view instead of starting from the current estimate.
    pub refit_scan: bool,
}

/// Path order of the interference-cancellation loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CancellationOrder {
    /// Delays `1, 2, ..., P` in turn.
    Delay,
    /// Each step takes the remaining delay with the largest metric.
    #[default]
    Strongest,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            music_grid_deg: 0.1,
            golden_tol_bins: 1e-6,
            refit_passes: 2,
            refine_aoa: true,
            refined_selection: true,
            order: CancellationOrder::Strongest,
            refit_scan: true,
        }
    }
}

/// Monte-Carlo sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub bits: Vec<AdcBits>,
    pub trials: usize,
    pub metrics: Vec<String>,
    pub snr_convention: SnrConvention,
    /// Downlink data frames sent per channel realization.
    pub downlink_frames: usize,
    /// Effective channel the downlink detector assumes.
    pub detector: DetectorModel,
}

/// Effective channel handed to the downlink LMMSE detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorModel {
    /// The user knows the true `G_D W`.
    #[default]
    Genie,
    /// The user assumes the precoder worked, i.e. `G_eff = gamma I`.
    Nominal,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            bits: vec![
                AdcBits::Finite(3),
                AdcBits::Finite(4),
                AdcBits::Finite(5),
                AdcBits::Infinite,
            ],
            trials: 500,
            metrics: [
                "position_mse",
                "crlb_position",
                "doppler_mse",
                "crlb_doppler",
                "gain_mse",
                "crlb_gain",
                "ber",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            snr_convention: SnrConvention::Receive,
            downlink_frames: 1,
            detector: DetectorModel::Genie,
        }
    }
}

/// Everything read from a configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub frame: FrameConfig,
    pub geometry: Geometry,
    pub channel: ChannelConfig,
    pub estimator: EstimatorConfig,
    pub sweep: SweepConfig,
}

impl SimConfig {
    /// Parses the TOML configuration text. Never panics on malformed input.
    pub fn parse(text: &str) -> Result<SimConfig> {
        toml::from_str(text).map_err(|e| Error::ConfigParse(e.message().to_string()))
    }

    pub fn from_file(path: &std::path::Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Validates frame, geometry, and channel settings together.
    pub fn validate(&self) -> Result<ValidConfig> {
        let mut issues = match validate(&self.frame) {
            Ok(v) => return self.validate_rest().map(|_| v),
            Err(Error::InvalidConfig(list)) => list,
            Err(e) => return Err(e),
        };
        if let Err(Error::InvalidConfig(more)) = self.validate_rest() {
            issues.extend(more);
        }
        Err(Error::InvalidConfig(issues))
    }

    fn validate_rest(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.geometry.derive_los().is_err() {
            issues.push("user_position_m: user must be away from the base station".to_string());
        }
        if !(self.channel.max_speed_kmh.is_finite() && self.channel.max_speed_kmh >= 0.0) {
            issues.push("max_speed_kmh: must be non-negative".to_string());
        }
        if !(self.channel.pdp_decay.is_finite() && self.channel.pdp_decay >= 0.0) {
            issues.push("pdp_decay: must be non-negative".to_string());
        }
        let sector = self.channel.nlos_sector_deg;
        let guard = self.channel.aoa_guard_deg;
        if !(sector.is_finite() && sector > 0.0 && sector <= 90.0) {
            issues.push("nlos_sector_deg: must lie in (0, 90]".to_string());
        }
        if !(guard.is_finite() && guard >= 0.0 && guard < sector) {
            issues.push("aoa_guard_deg: must be non-negative and narrower than the sector".to_string());
        }
        if !(self.estimator.music_grid_deg.is_finite() && self.estimator.music_grid_deg > 0.0) {
            issues.push("music_grid_deg: must be positive".to_string());
        }
        let tol = self.estimator.golden_tol_bins;
        if !(tol.is_finite() && tol > 0.0 && tol < 0.5) {
            issues.push("golden_tol_bins: must lie in (0, 0.5)".to_string());
        }
        if self.sweep.trials < 1 {
            issues.push("trials: at least one trial required".to_string());
        }
        if self.sweep.downlink_frames < 1 {
            issues.push("downlink_frames: at least one frame required".to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(issues))
        }
    }
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn los_of_reference_user() {
        let (tau0, theta0) = Geometry::new(883.0, 883.0).derive_los().unwrap();
        assert!((theta0 - PI / 4.0).abs() < 1e-15);
        let expected = 2f64.sqrt() * 883.0 / SPEED_OF_LIGHT;
        assert!((tau0 - expected).abs() < 1e-18);
        assert!((tau0 * 1e6 - 4.165).abs() < 1e-3);
    }

    #[test]
    fn los_on_axes() {
        let (_, theta) = Geometry::new(250.0, 0.0).derive_los().unwrap();
        assert_eq!(theta, 0.0);
        let (tau, theta) = Geometry::new(0.0, 400.0).derive_los().unwrap();
        assert!((theta - PI / 2.0).abs() < 1e-15);
        let [x, y] = position_from_los(tau, theta);
        assert!(x.abs() < 1e-10);
        assert!((y - 400.0).abs() < 1e-10);
    }

    #[test]
    fn zero_position_is_rejected() {
        assert!(matches!(
            Geometry::new(0.0, 0.0).derive_los(),
            Err(Error::InvalidGeometry(_))
        ));
    }

    #[test]
    fn reference_defaults_are_valid() {
        let v = validate(&FrameConfig::default()).unwrap();
        assert_eq!(v.subarrays(), 9);
        assert_eq!(v.m, 16);
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn subarray_longer_than_array() {
        let cfg = FrameConfig {
            subarray_len: 17,
            ..FrameConfig::default()
        };
        let Err(Error::InvalidConfig(issues)) = validate(&cfg) else {
            panic!("expected failure")
        };
        assert!(issues.iter().any(|i| i.contains("subarray longer than array")));
    }

    #[test]
    fn delay_grid_overflow() {
        let cfg = FrameConfig {
            m: 3,
            paths: 3,
            ..FrameConfig::default()
        };
        let Err(Error::InvalidConfig(issues)) = validate(&cfg) else {
            panic!("expected failure")
        };
        assert!(issues.iter().any(|i| i.contains("delay grid overflow")));
    }

    #[test]
    fn every_violation_is_reported() {
        let cfg = FrameConfig {
            m: 0,
            n: 0,
            rx_antennas: 1,
            delta_f: -1.0,
            ..FrameConfig::default()
        };
        let Err(Error::InvalidConfig(issues)) = validate(&cfg) else {
            panic!("expected failure")
        };
        assert!(issues.len() >= 4, "{issues:?}");
    }

    #[test]
    fn max_doppler_of_reference_scenario() {
        let k = ChannelConfig::default().k_max(&FrameConfig::default());
        assert!((k - 0.59).abs() < 0.005, "k_max = {k}");
    }

    #[test]
    fn parse_full_file() {
        let text = r#"
            [frame]
            m = 8
            n = 4
            adc_bits = "inf"
            snr_db = [10.0, 20.0]
            [geometry]
            user_position_m = [100.0, 50.0]
            [sweep]
            bits = [3, "inf"]
            trials = 7
            snr_convention = "transmit"
        "#;
        let cfg = SimConfig::parse(text).unwrap();
        assert_eq!(cfg.frame.m, 8);
        assert_eq!(cfg.frame.adc_bits, AdcBits::Infinite);
        assert_eq!(cfg.sweep.bits, vec![AdcBits::Finite(3), AdcBits::Infinite]);
        assert_eq!(cfg.sweep.snr_convention, SnrConvention::Transmit);
        assert_eq!(cfg.frame.rx_antennas, 16);
        let again = SimConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn unknown_keys_fail_fast() {
        assert!(SimConfig::parse("[frame]\nmm = 3\n").is_err());
        assert!(SimConfig::parse("[radar]\nm = 3\n").is_err());
        assert!(SimConfig::parse("[frame]\nadc_bits = 0\n").is_err());
        assert!(SimConfig::parse("[frame]\nadc_bits = \"lots\"\n").is_err());
    }

    #[test]
    fn bits_from_str() {
        assert_eq!("inf".parse::<AdcBits>().unwrap(), AdcBits::Infinite);
        assert_eq!(" 4 ".parse::<AdcBits>().unwrap(), AdcBits::Finite(4));
        assert!("0".parse::<AdcBits>().is_err());
        assert!("-2".parse::<AdcBits>().is_err());
    }

    #[test]
    fn snr_lists() {
        assert_eq!(parse_snr_list("0, 10,-20.5").unwrap(), vec![0.0, 10.0, -20.5]);
        assert!(parse_snr_list("").is_err());
        assert!(parse_snr_list("10,,20").is_err());
        assert!(parse_snr_list("inf").is_err());
        assert!(parse_snr_db("NaN").is_err());
    }

    proptest! {
        #[test]
        fn los_round_trip(x in 1e-3f64..1e5, y in 1e-3f64..1e5) {
            let (tau, theta) = Geometry::new(x, y).derive_los().unwrap();
            let [xr, yr] = position_from_los(tau, theta);
            prop_assert!((xr - x).abs() <= 1e-9 * x.max(y));
            prop_assert!((yr - y).abs() <= 1e-9 * x.max(y));
        }

        #[test]
        fn validate_is_idempotent(m in 0usize..20, n in 0usize..10, nr in 0usize..20, l in 0usize..20, p in 0usize..6) {
            let cfg = FrameConfig { m, n, rx_antennas: nr, subarray_len: l, paths: p, ..FrameConfig::default() };
            let a = validate(&cfg).map(ValidConfig::into_inner).map_err(|e| e.to_string());
            let b = validate(&cfg).map(ValidConfig::into_inner).map_err(|e| e.to_string());
            prop_assert_eq!(&a, &b);
            if let Ok(inner) = a {
                prop_assert_eq!(validate(&inner).unwrap().into_inner(), inner);
            }
        }
    }
}
