//! Shared inputs for the benchmarks in `benches/`.

use spingate_core::calibration::SaturationPoint;
use spingate_core::CoincidenceCounts;

/// Counts close to the measured Z-basis and equatorial statistics.
pub fn sample_counts() -> CoincidenceCounts {
    CoincidenceCounts {
        e_up: 40,
        e_down: 430,
        l_up: 410,
        l_down: 60,
        mid_x_plus: 120,
        mid_x_minus: 380,
        mid_y_plus: 370,
        mid_y_minus: 130,
    }
}

/// Noiseless saturation curve for the reference fit parameters.
pub fn sample_saturation() -> Vec<SaturationPoint> {
    [0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
        .iter()
        .map(|&p| SaturationPoint {
            power: p,
            counts: 7.7e4 * 0.64 * p / (1.0 + 1.03 * 0.64 * p),
        })
        .collect()
}
