use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::io::write_atomic;
use crate::data::{write_csv, Cell, MonitoringFrame, MonitoringSeries};
use crate::error::{Error, Result};
use crate::rng::indexed;

pub const RAINFALL: &str = "rainfall";
pub const WATER_LEVEL: &str = "water_level";
/// Two-hourly records starting 2020-01-01T00:00:00Z.
pub const START_TIMESTAMP: i64 = 1_577_836_800;
pub const STEP_SECONDS: i64 = 7200;
pub const MIN_SYNTH_LEN: usize = 200;

/// One saturation-line channel:
///
/// `y_t = base + level_coupling·(wl_t − wl_ref) + rain_coupling·(rain_t − rain_ref)
///        + trend·(t − (n−1)/2) + amplitude·sin(2πt/period + phase) + σ·ε_t`
///
/// where `wl_ref` and `rain_ref` are the stationary means of the drivers, so
/// `base` is the long-run level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationSpec {
    pub id: String,
    pub base: f64,
    pub trend: f64,
    pub amplitude: f64,
    pub period: f64,
    #[serde(default)]
    pub phase: f64,
    pub noise_sigma: f64,
    pub level_coupling: f64,
    pub rain_coupling: f64,
}

/// Rainfall is a two-state Markov chain with exponential wet-step depths.
/// Water level is a reservoir fed by rainfall with geometric recession plus a
/// slow seasonal swing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n: usize,
    pub seed: u64,
    pub stations: Vec<StationSpec>,
    pub p_dry_to_wet: f64,
    pub p_wet_to_wet: f64,
    pub mean_wet_rain: f64,
    pub level_base: f64,
    pub recession: f64,
    pub recharge: f64,
    pub level_amplitude: f64,
    pub level_period: f64,
    pub level_noise: f64,
    /// Fraction of station cells blanked; drivers are never blanked.
    pub missing_fraction: f64,
}

fn station(id: &str, base: f64, amplitude: f64, phase: f64, level: f64, rain: f64, sigma: f64) -> StationSpec {
    StationSpec {
        id: id.into(),
        base,
        trend: 0.0,
        amplitude,
        period: 360.0,
        phase,
        noise_sigma: sigma,
        level_coupling: level,
        rain_coupling: rain,
    }
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 8365,
            seed: 0,
            stations: vec![
                station("NO.8", 4.57, 0.08, 0.0, 0.06, 0.010, 0.02),
                station("NO.13", 7.73, 0.12, 0.7, 0.08, 0.012, 0.03),
                station("NO.17", 11.32, 0.03, 1.4, 0.02, 0.004, 0.01),
                station("NO.21", 10.67, 0.08, 2.1, 0.06, 0.008, 0.02),
                station("NO.28", 14.52, 0.15, 2.8, 0.10, 0.015, 0.04),
                station("NO.33", 15.03, 0.08, 3.5, 0.06, 0.010, 0.02),
            ],
            p_dry_to_wet: 0.05,
            p_wet_to_wet: 0.7,
            mean_wet_rain: 4.0,
            level_base: 30.0,
            recession: 0.97,
            recharge: 0.02,
            level_amplitude: 0.8,
            level_period: 4380.0,
            level_noise: 0.02,
            missing_fraction: 0.0,
        }
    }
}

/// Emitted series (with blanks) and the pre-blanking truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub series: MonitoringSeries,
    pub truth: MonitoringSeries,
}

impl SyntheticSpec {
    pub fn station_ids(&self) -> Vec<String> {
        self.stations.iter().map(|s| s.id.clone()).collect()
    }

    pub fn stationary_rain(&self) -> f64 {
        let wet = self.p_dry_to_wet / (self.p_dry_to_wet + 1.0 - self.p_wet_to_wet);
        wet * self.mean_wet_rain
    }

    pub fn stationary_level(&self) -> f64 {
        self.level_base + self.recharge * self.stationary_rain() / (1.0 - self.recession)
    }

    fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if self.n < MIN_SYNTH_LEN {
            return Err(Error::Config(format!("synthetic length must be at least {MIN_SYNTH_LEN}, got {}", self.n)));
        }
        if !prob(self.missing_fraction) || !prob(self.p_dry_to_wet) || !prob(self.p_wet_to_wet) {
            return Err(Error::Config("fractions and probabilities must lie in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.recession) {
            return Err(Error::Config(format!("recession must lie in [0, 1), got {}", self.recession)));
        }
        if !(self.mean_wet_rain > 0.0) || !(self.level_period > 0.0) || self.level_noise < 0.0 {
            return Err(Error::Config("rain depth and level period must be positive".into()));
        }
        for s in &self.stations {
            if !(s.period > 0.0) || !(s.noise_sigma >= 0.0) {
                return Err(Error::Config(format!("station `{}` needs period > 0 and σ ≥ 0", s.id)));
            }
            if s.id == RAINFALL || s.id == WATER_LEVEL {
                return Err(Error::Config(format!("station id `{}` collides with a driver channel", s.id)));
            }
        }
        Ok(())
    }

    /// Rainfall and water level, frame by frame.
    pub fn drivers(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        let mut rng = indexed(self.seed, "synth", 0);
        let depth = Exp::new(1.0 / self.mean_wet_rain).map_err(|e| Error::Config(e.to_string()))?;
        let level_noise = Normal::new(0.0, self.level_noise).map_err(|e| Error::Config(e.to_string()))?;
        let mut rain = Vec::with_capacity(self.n);
        let mut level = Vec::with_capacity(self.n);
        let mut wet = false;
        let mut storage = self.stationary_level() - self.level_base;
        for t in 0..self.n {
            let p = if wet { self.p_wet_to_wet } else { self.p_dry_to_wet };
            wet = rng.random::<f64>() < p;
            let r = if wet { depth.sample(&mut rng) } else { 0.0 };
            storage = self.recession * storage + self.recharge * r;
            let season = self.level_amplitude * (2.0 * PI * t as f64 / self.level_period).sin();
            rain.push(r);
            level.push(self.level_base + storage + season + level_noise.sample(&mut rng));
        }
        Ok((rain, level))
    }

    pub fn generate(&self) -> Result<SyntheticData> {
        let (rain, level) = self.drivers()?;
        let (rain_ref, level_ref) = (self.stationary_rain(), self.stationary_level());
        let centre = (self.n as f64 - 1.0) / 2.0;
        let mut columns = Vec::with_capacity(self.stations.len());
        for (k, s) in self.stations.iter().enumerate() {
            let mut rng = indexed(self.seed, "synth", 1 + k as u64);
            let noise = Normal::new(0.0, s.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
            let col: Vec<f64> = (0..self.n)
                .map(|t| {
                    let tf = t as f64;
                    s.base
                        + s.level_coupling * (level[t] - level_ref)
                        + s.rain_coupling * (rain[t] - rain_ref)
                        + s.trend * (tf - centre)
                        + s.amplitude * (2.0 * PI * tf / s.period + s.phase).sin()
                        + noise.sample(&mut rng)
                })
                .collect();
            columns.push(col);
        }
        let mut blank_rng = indexed(self.seed, "synth-missing", 0);
        let mut channels = vec![RAINFALL.to_string(), WATER_LEVEL.to_string()];
        channels.extend(self.station_ids());
        let mut frames = Vec::with_capacity(self.n);
        let mut truth_frames = Vec::with_capacity(self.n);
        for t in 0..self.n {
            let timestamp = START_TIMESTAMP + t as i64 * STEP_SECONDS;
            let mut truth = vec![Cell::Observed(rain[t]), Cell::Observed(level[t])];
            truth.extend(columns.iter().map(|c| Cell::Observed(c[t])));
            let cells = truth
                .iter()
                .enumerate()
                .map(|(c, &cell)| {
                    if c >= 2 && blank_rng.random::<f64>() < self.missing_fraction {
                        Cell::Missing
                    } else {
                        cell
                    }
                })
                .collect();
            frames.push(MonitoringFrame { timestamp, cells });
            truth_frames.push(MonitoringFrame { timestamp, cells: truth });
        }
        Ok(SyntheticData {
            series: MonitoringSeries::new(channels.clone(), frames)?,
            truth: MonitoringSeries::new(channels, truth_frames)?,
        })
    }
}

/// Path of the ground-truth sidecar written next to `csv`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.truth.csv"))
}

/// Writes the emitted CSV to `path` and the truth to its sidecar.
pub fn synth(spec: &SyntheticSpec, path: &Path) -> Result<SyntheticData> {
    let data = spec.generate()?;
    let mut buf = Vec::new();
    write_csv(&data.series, &mut buf)?;
    write_atomic(path, &buf)?;
    buf.clear();
    write_csv(&data.truth, &mut buf)?;
    write_atomic(&sidecar_path(path), &buf)?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{read_csv, Quality};

    fn small(n: usize, missing: f64) -> SyntheticSpec {
        SyntheticSpec { n, missing_fraction: missing, ..Default::default() }
    }

    #[test]
    fn no_blanks_means_truth_equals_output() {
        let d = small(300, 0.0).generate().unwrap();
        assert_eq!(d.series, d.truth);
        assert_eq!(d.series.channels().len(), 8);
    }

    #[test]
    fn blanks_hit_only_station_cells() {
        let d = small(2000, 0.1).generate().unwrap();
        let missing = d.series.count_quality(Quality::Missing);
        let cells = 2000 * 6;
        assert!((missing as f64 / cells as f64 - 0.1).abs() < 0.01, "{missing}");
        for ch in 0..2 {
            assert!(d.series.column(ch).iter().all(|c| c.value().is_some()));
        }
    }

    #[test]
    fn station_is_the_stated_function_of_its_drivers() {
        let mut spec = small(400, 0.0);
        for s in &mut spec.stations {
            s.noise_sigma = 0.0;
            s.trend = 1e-4;
        }
        let d = spec.generate().unwrap();
        let (rain, level) = spec.drivers().unwrap();
        let s = &spec.stations[2];
        let col = d.truth.column(4);
        for t in [0usize, 17, 399] {
            let expect = s.base
                + s.level_coupling * (level[t] - spec.stationary_level())
                + s.rain_coupling * (rain[t] - spec.stationary_rain())
                + s.trend * (t as f64 - 199.5)
                + s.amplitude * (2.0 * PI * t as f64 / s.period + s.phase).sin();
            assert!((col[t].value().unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_and_reproducible() {
        let a = SyntheticSpec { seed: 4, ..small(250, 0.1) }.generate().unwrap();
        let b = SyntheticSpec { seed: 4, ..small(250, 0.1) }.generate().unwrap();
        let c = SyntheticSpec { seed: 5, ..small(250, 0.1) }.generate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn csv_round_trip_is_bit_identical() {
        let d = small(200, 0.1).generate().unwrap();
        let mut buf = Vec::new();
        write_csv(&d.series, &mut buf).unwrap();
        let ids: Vec<String> = d.series.channels().to_vec();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let back = read_csv(buf.as_slice(), &refs).unwrap();
        assert_eq!(back, d.series);
        let mut again = Vec::new();
        write_csv(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn invalid_specs_are_config_errors() {
        assert!(matches!(small(199, 0.0).generate(), Err(Error::Config(_))));
        assert!(matches!(small(300, 1.5).generate(), Err(Error::Config(_))));
        assert!(matches!(small(300, -0.1).generate(), Err(Error::Config(_))));
    }

    #[test]
    fn sidecar_sits_next_to_the_csv() {
        assert_eq!(sidecar_path(Path::new("/tmp/x/data.csv")), PathBuf::from("/tmp/x/data.truth.csv"));
    }
}
