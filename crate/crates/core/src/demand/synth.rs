use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DemandProfile, HOURS_PER_YEAR};
use crate::error::{Error, Result};
use crate::grid::RegionTable;
use crate::seed::derive_seed;

/// Relative demand by hour of day: a morning shoulder, an evening maximum at
/// 19:00 and an overnight minimum at 03:00.
pub const DIURNAL_SHAPE: [f64; 24] = [
    0.80, 0.72, 0.66, 0.62, 0.66, 0.72, 0.85, 1.00, 1.08, 1.06, 1.04, 1.03, //
    1.03, 1.01, 0.99, 1.00, 1.08, 1.20, 1.27, 1.32, 1.24, 1.12, 1.00, 0.90,
];

#[derive(Clone, Debug, PartialEq)]
pub struct ShapeParams {
    /// Amplitude of the yearly cosine, relative to the mean.
    pub seasonal_amplitude: f64,
    /// Day of year (0-based) with the highest seasonal factor.
    pub peak_day: u32,
    pub diurnal: [f64; 24],
    /// Half-width of the uniform multiplicative noise.
    pub noise: f64,
}

impl Default for ShapeParams {
    fn default() -> Self {
        ShapeParams {
            seasonal_amplitude: 0.2,
            peak_day: 15,
            diurnal: DIURNAL_SHAPE,
            noise: 0.01,
        }
    }
}

impl ShapeParams {
    /// Noise-free relative demand at an hour of the year, mean 1 over a year.
    pub fn shape(&self, hour: u32) -> f64 {
        let mean_diurnal = self.diurnal.iter().sum::<f64>() / 24.0;
        let day = f64::from(hour / 24);
        let phase = 2.0 * std::f64::consts::PI * (day - f64::from(self.peak_day)) / 365.0;
        (1.0 + self.seasonal_amplitude * phase.cos()) * self.diurnal[(hour % 24) as usize] / mean_diurnal
    }
}

/// A full-year hourly profile per district, scaled so each district's
/// annual energy matches its table entry.
pub fn synthesize_current(regions: &RegionTable, params: &ShapeParams, seed: u64) -> Result<DemandProfile> {
    if !(0.0..1.0).contains(&params.seasonal_amplitude) || !(0.0..0.5).contains(&params.noise) {
        return Err(Error::Validation("shape amplitude and noise must lie in [0, 1) and [0, 0.5)".into()));
    }
    if params.diurnal.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Validation("diurnal factors must be positive".into()));
    }
    let base: Vec<f64> = (0..HOURS_PER_YEAR).map(|h| params.shape(h)).collect();
    let mut names = Vec::new();
    let mut demand = Vec::new();
    for (i, r) in regions.regions().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let mut series: Vec<f64> = base
            .iter()
            .map(|s| {
                let e = if params.noise > 0.0 {
                    rng.gen_range(-params.noise..params.noise)
                } else {
                    0.0
                };
                s * (1.0 + e)
            })
            .collect();
        let target_mwh = r.annual_electricity_gwh * 1000.0;
        let sum: f64 = series.iter().sum();
        let scale = target_mwh / sum;
        series.iter_mut().for_each(|d| *d *= scale);
        names.push(r.id.clone());
        demand.push(series);
    }
    DemandProfile::new("current", (0..HOURS_PER_YEAR).collect(), names, demand)
}
