//! Monte-Carlo driver: one uplink positioning plus downlink data exchange per
//! trial, swept over SNR and ADC resolution, aggregated into a long-format CSV.

use std::fmt;
use std::io::Write;
use std::path::Path as FsPath;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::adc::{quantize, AdcModel};
use crate::channel::{build_channel, sample_paths, PathSet};
use crate::config::{AdcBits, DetectorModel, Geometry, SimConfig, SnrConvention, ValidConfig};
use crate::crlb::{fisher_matrix, position_crlb, FimResult};
use crate::downlink::{count_bit_errors, random_qpsk_frame, transmit_effective, CompactDownlink, LmmseDetector};
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_paths, estimates_to_paths, music_aoa, position_fix, smoothed_covariance, EstimatorSetup, MusicSpectrum,
    PathEstimate,
};
use crate::modem::{generate_pilot_grid, DdGrid, OtfsModem};

/// Environment variable overriding the worker-pool size.
pub const WORKERS_ENV: &str = "OTFS_IPAC_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PositionMse,
    CrlbPosition,
    DopplerMse,
    CrlbDoppler,
    GainMse,
    CrlbGain,
    Ber,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::PositionMse,
        Metric::CrlbPosition,
        Metric::DopplerMse,
        Metric::CrlbDoppler,
        Metric::GainMse,
        Metric::CrlbGain,
        Metric::Ber,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PositionMse => "position_mse",
            Metric::CrlbPosition => "crlb_position",
            Metric::DopplerMse => "doppler_mse",
            Metric::CrlbDoppler => "crlb_doppler",
            Metric::GainMse => "gain_mse",
            Metric::CrlbGain => "crlb_gain",
            Metric::Ber => "ber",
        }
    }

    /// Only the bounds are needed, no estimation or downlink.
    pub fn is_bound(self) -> bool {
        matches!(self, Metric::CrlbPosition | Metric::CrlbDoppler | Metric::CrlbGain)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::UnknownMetric(s.to_string()))
    }
}

/// Experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub snr_db: Vec<f64>,
    pub bits: Vec<AdcBits>,
    pub trials: usize,
    pub metrics: Vec<Metric>,
    pub seed: u64,
}

impl SweepSpec {
    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        let metrics = cfg
            .sweep
            .metrics
            .iter()
            .map(|m| m.parse())
            .collect::<Result<Vec<Metric>>>()?;
        let spec = Self {
            snr_db: cfg.frame.snr_db.clone(),
            bits: cfg.sweep.bits.clone(),
            trials: cfg.sweep.trials,
            metrics,
            seed: cfg.frame.seed,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<()> {
        if self.metrics.is_empty() {
            return Err(Error::NoMetrics);
        }
        let mut issues = Vec::new();
        if self.trials < 1 {
            issues.push("trials: at least one trial required".to_string());
        }
        if self.snr_db.is_empty() {
            issues.push("snr_db: at least one SNR point required".to_string());
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) {
            issues.push("snr_db: values must be finite".to_string());
        }
        if self.bits.is_empty() {
            issues.push("bits: at least one ADC resolution required".to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(issues))
        }
    }

    fn bounds_only(&self) -> bool {
        self.metrics.iter().all(|m| m.is_bound())
    }
}

/// One aggregated CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub snr_db: f64,
    #[serde(serialize_with = "as_display")]
    pub bits: AdcBits,
    pub metric: Metric,
    pub value: f64,
    pub trials: usize,
    pub seed: u64,
}

fn as_display<T: fmt::Display, S: serde::Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Squared errors and bounds of a single trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialMetrics {
    /// m^2 against the grid-consistent user position.
    pub position_se: f64,
    /// Mean over paths, bins^2.
    pub doppler_se: f64,
    /// Mean over paths of `|h_hat - h|^2`.
    pub gain_se: f64,
    pub crlb_position: f64,
    pub crlb_doppler: f64,
    pub crlb_gain: f64,
    pub bit_errors: u64,
    pub bits_sent: u64,
    /// MUSIC found fewer peaks than paths and candidates were padded.
    pub padded_candidates: bool,
    /// The ZF Gram matrix needed a ridge.
    pub regularized_precoder: bool,
}

/// Intermediate results of one trial, for `single-trial --dump`.
#[derive(Debug, Clone, Serialize)]
pub struct TrialDump {
    pub trial: u64,
    pub snr_db: f64,
    #[serde(serialize_with = "as_display")]
    pub bits: AdcBits,
    pub sigma2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub true_paths: PathSet,
    pub pilot: Vec<Complex64>,
    pub r_ad: Vec<Complex64>,
    pub y_ad: Vec<Complex64>,
    pub music: MusicSpectrum,
    pub candidates: Vec<f64>,
    pub estimates: Vec<PathEstimate>,
    pub position_estimate: [f64; 2],
    pub position_truth: [f64; 2],
    pub crlb: FimResult,
    pub precoder_gamma: f64,
    pub metrics: TrialMetrics,
}

/// Precomputed per-configuration state shared by every trial.
pub struct Simulator {
    cfg: SimConfig,
    valid: ValidConfig,
    modem: OtfsModem,
    pilot: DdGrid,
    pilot_time: Vec<Complex64>,
    truth: Geometry,
    theta0: f64,
    tau0: f64,
}

impl fmt::Debug for Simulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Simulator")
            .field("cfg", &self.cfg)
            .finish_non_exhaustive()
    }
}

/// Tap carrying the line-of-sight path.
const LOS_TAP: usize = 1;

impl Simulator {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let valid = cfg.validate()?;
        let modem = OtfsModem::new(valid.m, valid.n);
        let pilot = generate_pilot_grid(valid.m, valid.n, valid.seed);
        let pilot_time = modem.modulate(&pilot)?;
        let truth = cfg.geometry.grid_consistent(&valid, LOS_TAP)?;
        let (_, theta0) = cfg.geometry.derive_los()?;
        let tau0 = valid.tap_delay(LOS_TAP);
        Ok(Self {
            cfg: cfg.clone(),
            valid,
            modem,
            pilot,
            pilot_time,
            truth,
            theta0,
            tau0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Position the errors are scored against.
    pub fn truth(&self) -> &Geometry {
        &self.truth
    }

    /// Independent random stream of trial `trial` under master seed `seed`.
    pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        rng
    }

    fn convention(&self) -> SnrConvention {
        self.cfg.sweep.snr_convention
    }

    fn bounds(&self, paths: &PathSet, model: &AdcModel, sigma2: f64) -> Result<(FimResult, f64)> {
        let len = self.modem.frame_len() * self.valid.rx_antennas;
        let sigma = model.effective_variance(paths.power(), sigma2);
        let fim = fisher_matrix(
            paths,
            &self.pilot_time,
            self.valid.rx_antennas,
            model.alpha,
            &vec![sigma; len],
        )?;
        let result = FimResult::from_fim(fim)?;
        let pos = position_crlb(&result, &self.truth)?.value();
        Ok((result, pos))
    }

    /// Bounds for the channel draw of one trial, without any estimation.
    pub fn crlb_only(&self, snr_db: f64, bits: AdcBits, seed: u64, trial: u64) -> Result<TrialMetrics> {
        let ctx = |e| with_context(e, trial, snr_db, bits);
        let model = AdcModel::new(bits).map_err(ctx)?;
        let mut rng = Self::trial_rng(seed, trial);
        let paths = sample_paths(&self.valid, &self.cfg.channel, self.theta0, &mut rng);
        let sigma2 = self.convention().noise_variance(snr_db, paths.power());
        let (fim, pos) = self.bounds(&paths, &model, sigma2).map_err(ctx)?;
        Ok(TrialMetrics {
            position_se: f64::NAN,
            doppler_se: f64::NAN,
            gain_se: f64::NAN,
            crlb_position: pos,
            crlb_doppler: mean(&fim.doppler),
            crlb_gain: mean(&fim.gain),
            bit_errors: 0,
            bits_sent: 0,
            padded_candidates: false,
            regularized_precoder: false,
        })
    }

    pub fn run_trial(&self, snr_db: f64, bits: AdcBits, seed: u64, trial: u64) -> Result<TrialMetrics> {
        self.run_trial_full(snr_db, bits, seed, trial)
            .map(|d| d.metrics)
            .map_err(|e| with_context(e, trial, snr_db, bits))
    }

    pub fn dump_trial(&self, snr_db: f64, bits: AdcBits, seed: u64, trial: u64) -> Result<TrialDump> {
        self.run_trial_full(snr_db, bits, seed, trial)
            .map_err(|e| with_context(e, trial, snr_db, bits))
    }

    fn run_trial_full(&self, snr_db: f64, bits: AdcBits, seed: u64, trial: u64) -> Result<TrialDump> {
        let cfg = &self.valid;
        let model = AdcModel::new(bits)?;
        let mut rng = Self::trial_rng(seed, trial);
        let nr = cfg.rx_antennas;
        let mn = self.modem.frame_len();

        let paths = sample_paths(cfg, &self.cfg.channel, self.theta0, &mut rng);
        let sigma2 = self.convention().noise_variance(snr_db, paths.power());
        let op = build_channel(&paths, mn, nr)?;
        let clean = op.apply(&self.pilot_time)?;
        let obs = quantize(&clean, &paths, &model, sigma2, &mut rng);
        let y_ad = self.modem.demodulate(&obs.r_ad, nr)?;

        let snapshots = DMatrix::from_fn(nr, mn, |a, q| obs.r_ad[a * mn + q]);
        let cov = smoothed_covariance(&snapshots, cfg.subarray_len)?;
        let music = music_aoa(&cov, cfg.paths, self.cfg.estimator.music_grid_deg.to_radians())?;
        let mut candidates = music.peaks.clone();
        let padded_candidates = candidates.len() < cfg.paths;
        if let Some(&strongest) = candidates.first() {
            candidates.resize(cfg.paths, strongest);
        }
        let setup = EstimatorSetup {
            modem: &self.modem,
            antennas: nr,
            alpha: model.alpha,
            settings: &self.cfg.estimator,
        };
        let estimates = estimate_paths(&y_ad, &self.pilot, &candidates, cfg.paths, setup)?;
        let position = position_fix(estimates[0].aoa, self.tau0);
        let [tx, ty] = self.truth.user_position_m;
        let position_se = (position[0] - tx).powi(2) + (position[1] - ty).powi(2);
        let p = paths.len() as f64;
        let doppler_se = paths
            .paths
            .iter()
            .zip(&estimates)
            .map(|(t, e)| (t.doppler() - e.doppler()).powi(2))
            .sum::<f64>()
            / p;
        let gain_se = paths
            .paths
            .iter()
            .zip(&estimates)
            .map(|(t, e)| (t.gain - e.gain).norm_sqr())
            .sum::<f64>()
            / p;

        let (fim, crlb_position) = self.bounds(&paths, &model, sigma2)?;

        // Downlink over the reciprocal channel, precoded on the estimates.
        let est_paths = estimates_to_paths(&estimates);
        let link = CompactDownlink::new(&paths, &est_paths, &self.modem, cfg.tx_antennas);
        let signal = link.g_eff.norm_squared() / mn as f64;
        let sigma2_dl = self.convention().noise_variance(snr_db, signal);
        let assumed = match self.cfg.sweep.detector {
            DetectorModel::Genie => link.g_eff.clone(),
            DetectorModel::Nominal => DMatrix::identity(mn, mn) * Complex64::new(link.gamma, 0.0),
        };
        let detector = LmmseDetector::new(&assumed, sigma2_dl)?;
        let mut bit_errors = 0;
        let mut bits_sent = 0;
        for _ in 0..self.cfg.sweep.downlink_frames {
            let (x, sent) = random_qpsk_frame(mn, &mut rng);
            let y = transmit_effective(&link.g_eff, &x, sigma2_dl, &mut rng)?;
            bit_errors += count_bit_errors(&sent, &detector.detect(&y)?.bits);
            bits_sent += 2 * mn as u64;
        }

        let metrics = TrialMetrics {
            position_se,
            doppler_se,
            gain_se,
            crlb_position,
            crlb_doppler: mean(&fim.doppler),
            crlb_gain: mean(&fim.gain),
            bit_errors,
            bits_sent,
            padded_candidates,
            regularized_precoder: link.regularized,
        };
        Ok(TrialDump {
            trial,
            snr_db,
            bits,
            sigma2,
            alpha: model.alpha,
            beta: model.beta,
            true_paths: paths,
            pilot: self.pilot.as_vec().to_vec(),
            r_ad: obs.r_ad,
            y_ad,
            music,
            candidates,
            estimates,
            position_estimate: position,
            position_truth: self.truth.user_position_m,
            crlb: fim,
            precoder_gamma: link.gamma,
            metrics,
        })
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn with_context(e: Error, trial: u64, snr_db: f64, bits: AdcBits) -> Error {
    match e {
        Error::Trial { .. } => e,
        other => Error::Trial {
            trial,
            snr_db,
            bits: bits.to_string(),
            source: Box::new(other),
        },
    }
}

/// Worker count from [`WORKERS_ENV`], else the rayon default.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| {
            Error::InvalidConfig(vec![format!("{WORKERS_ENV}: expected a positive integer, got `{v}`")])
        }),
        Err(_) => Ok(rayon::current_num_threads()),
    }
}

/// Per-trial metrics of one (SNR, bits) cell, ordered by trial index.
pub fn run_cell(sim: &Simulator, spec: &SweepSpec, snr_db: f64, bits: AdcBits) -> Result<Vec<TrialMetrics>> {
    let bounds_only = spec.bounds_only();
    (0..spec.trials as u64)
        .into_par_iter()
        .map(|t| {
            if bounds_only {
                sim.crlb_only(snr_db, bits, spec.seed, t)
            } else {
                sim.run_trial(snr_db, bits, spec.seed, t)
            }
        })
        .collect()
}

/// Linear-domain aggregate of one metric over a cell.
pub fn aggregate(metric: Metric, trials: &[TrialMetrics]) -> f64 {
    let pick = |f: fn(&TrialMetrics) -> f64| trials.iter().map(f).sum::<f64>() / trials.len() as f64;
    match metric {
        Metric::PositionMse => pick(|t| t.position_se),
        Metric::CrlbPosition => pick(|t| t.crlb_position),
        Metric::DopplerMse => pick(|t| t.doppler_se),
        Metric::CrlbDoppler => pick(|t| t.crlb_doppler),
        Metric::GainMse => pick(|t| t.gain_se),
        Metric::CrlbGain => pick(|t| t.crlb_gain),
        Metric::Ber => {
            let errors: u64 = trials.iter().map(|t| t.bit_errors).sum();
            let sent: u64 = trials.iter().map(|t| t.bits_sent).sum();
            if sent == 0 {
                0.0
            } else {
                errors as f64 / sent as f64
            }
        }
    }
}

/// Runs the whole grid on a pool of [`worker_count`] threads.
pub fn run_sweep(sim: &Simulator, spec: &SweepSpec) -> Result<Vec<ResultRow>> {
    run_sweep_with_workers(sim, spec, worker_count()?)
}

pub fn run_sweep_with_workers(sim: &Simulator, spec: &SweepSpec, workers: usize) -> Result<Vec<ResultRow>> {
    spec.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(vec![format!("worker pool: {e}")]))?;
    let mut rows = Vec::with_capacity(spec.snr_db.len() * spec.bits.len() * spec.metrics.len());
    for &snr_db in &spec.snr_db {
        for &bits in &spec.bits {
            let trials = pool.install(|| run_cell(sim, spec, snr_db, bits))?;
            for &metric in &spec.metrics {
                rows.push(ResultRow {
                    snr_db,
                    bits,
                    metric,
                    value: aggregate(metric, &trials),
                    trials: spec.trials,
                    seed: spec.seed,
                });
            }
        }
    }
    Ok(rows)
}

/// Provenance written as `#` comment lines above the CSV header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMetadata {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub snr_convention: SnrConvention,
    pub created_unix: u64,
}

impl CsvMetadata {
    pub fn for_config(cfg: &SimConfig, seed: u64) -> Self {
        let hash = Sha256::digest(cfg.to_toml().as_bytes());
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hash.iter().map(|b| format!("{b:02x}")).collect(),
            seed,
            snr_convention: cfg.sweep.snr_convention,
            created_unix,
        }
    }
}

pub fn write_csv<W: Write>(mut out: W, rows: &[ResultRow], meta: &CsvMetadata) -> std::io::Result<()> {
    writeln!(out, "# otfs-ipac {}", meta.version)?;
    writeln!(out, "# config_hash sha256:{}", meta.config_hash)?;
    writeln!(out, "# seed {}", meta.seed)?;
    writeln!(out, "# snr_convention {}", meta.snr_convention.label())?;
    writeln!(out, "# precoder_normalization frobenius")?;
    writeln!(out, "# created_unix {}", meta.created_unix)?;
    writeln!(out, "snr_db,bits,metric,value,trials,seed")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.snr_db, r.bits, r.metric, r.value, r.trials, r.seed
        )?;
    }
    out.flush()
}

pub fn write_csv_file(path: &FsPath, rows: &[ResultRow], meta: &CsvMetadata) -> Result<()> {
    let io = |source| Error::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_csv(std::io::BufWriter::new(file), rows, meta).map_err(io)
}
