//! Uplink channel-parameter estimation and positioning.

mod golden;
pub mod music;
pub mod paths;

pub use golden::golden_section_max;
pub use music::{music_aoa, smoothed_covariance, MusicSpectrum, SmoothedCovariance};
pub use paths::{doppler_search_set, estimate_paths, estimates_to_paths, EstimatorSetup, PathEstimate};

use crate::config::position_from_los;

/// Position fix from the estimated LoS angle and the known LoS delay.
pub fn position_fix(theta0_hat: f64, tau0: f64) -> [f64; 2] {
    position_from_los(tau0, theta0_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Geometry, SPEED_OF_LIGHT};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn reference_fix() {
        let range = 1248.8;
        let u = position_fix(PI / 4.0, range / SPEED_OF_LIGHT);
        assert!((u[0] - 883.0).abs() < 0.1 && (u[1] - 883.0).abs() < 0.1);
    }

    #[test]
    fn exact_angle_reproduces_position() {
        let g = Geometry::new(-120.0, 431.0);
        let (tau, theta) = g.derive_los().unwrap();
        let u = position_fix(theta, tau);
        assert!((u[0] + 120.0).abs() < 1e-9 && (u[1] - 431.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn angular_error_maps_to_chord(theta in -1.5f64..1.5, delta in -0.2f64..0.2, d in 10.0f64..5000.0) {
            let tau = d / SPEED_OF_LIGHT;
            let u = position_fix(theta, tau);
            let v = position_fix(theta + delta, tau);
            let err = ((u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2)).sqrt();
            let chord = 2.0 * d * (delta / 2.0).sin().abs();
            prop_assert!((err - chord).abs() <= 1e-9 * d);
            prop_assert!((err - d * delta.abs()).abs() <= d * delta.abs().powi(3) / 20.0 + 1e-9 * d);
        }
    }
}
