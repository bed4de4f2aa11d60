use std::path::Path;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured renewable power on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActualSeries {
    /// kW, one value per `resolution_h`
    pub values: Vec<f64>,
    pub resolution_h: f64,
    /// Time of the first sample in the source file, seconds.
    pub origin_s: f64,
}

impl ActualSeries {
    pub fn new(values: Vec<f64>, resolution_h: f64) -> Result<Self> {
        if !(resolution_h > 0.0) {
            return Err(Error::Data(format!(
                "resolution {resolution_h} h must be positive"
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0) || !v.is_finite())
        {
            return Err(Error::Data(format!("power at index {i} is {v}")));
        }
        Ok(ActualSeries {
            values,
            resolution_h,
            origin_s: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn energy_kwh(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.resolution_h
    }
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    time: f64,
    power_kw: f64,
}

/// Reads a `time,power_kw` CSV (time in seconds) and averages it onto
/// steps of `target_resolution_h`.
///
/// Each sample holds until the next one; the last sample holds for the
/// preceding spacing. Samples straddling a step boundary are split, so the
/// energy of every complete step is preserved. A trailing partial step is
/// dropped.
pub fn load_trace(path: impl AsRef<Path>, target_resolution_h: f64) -> Result<ActualSeries> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["time", "power_kw"] {
        return Err(Error::Data(format!(
            "{}: expected header time,power_kw, found {}",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut power = Vec::new();
    for (i, row) in reader.deserialize::<TraceRow>().enumerate() {
        let row = row?;
        times.push(row.time);
        power.push(row.power_kw);
        if !(row.power_kw >= 0.0) || !row.power_kw.is_finite() {
            return Err(Error::Data(format!(
                "{}: row {} has power {}",
                path.display(),
                i + 1,
                row.power_kw
            )));
        }
    }
    downsample(&times, &power, target_resolution_h)
}

/// Time-weighted mean of `(times_s, power_kw)` samples on steps of
/// `target_resolution_h`; see [`load_trace`].
pub fn downsample(
    times_s: &[f64],
    power_kw: &[f64],
    target_resolution_h: f64,
) -> Result<ActualSeries> {
    if times_s.is_empty() {
        return Err(Error::Data("empty trace".into()));
    }
    if times_s.len() != power_kw.len() {
        return Err(Error::Data(
            "time and power columns differ in length".into(),
        ));
    }
    if !(target_resolution_h > 0.0) {
        return Err(Error::Data(format!(
            "resolution {target_resolution_h} h must be positive"
        )));
    }
    if let Some(i) = (1..times_s.len()).find(|&i| !(times_s[i] > times_s[i - 1])) {
        return Err(Error::Data(format!(
            "time not increasing at row {}: {} after {}",
            i + 1,
            times_s[i],
            times_s[i - 1]
        )));
    }
    if let Some((i, p)) = power_kw.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
        return Err(Error::Data(format!("row {} has power {p}", i + 1)));
    }

    let n = times_s.len();
    let last_spacing = if n > 1 {
        times_s[n - 1] - times_s[n - 2]
    } else {
        target_resolution_h * 3600.0
    };
    let origin = times_s[0];
    let end = times_s[n - 1] + last_spacing - origin;
    let bin = target_resolution_h * 3600.0;
    // tolerate float noise in the span when it is a whole number of bins
    let n_bins = ((end / bin) * (1.0 + 1e-12)).floor() as usize;
    if n_bins == 0 {
        return Err(Error::Data(format!(
            "trace spans {end} s, shorter than one step of {bin} s"
        )));
    }
    if (end - n_bins as f64 * bin).abs() > 1e-9 * end {
        warn!(
            "trace ends {:.3} s into a partial step; dropped",
            end - n_bins as f64 * bin
        );
    }

    let mut energy = vec![0.0; n_bins];
    for i in 0..n {
        let start = times_s[i] - origin;
        let stop = if i + 1 < n {
            times_s[i + 1] - origin
        } else {
            end
        };
        let mut a = start;
        while a < stop {
            let b_idx = (a / bin).floor() as usize;
            if b_idx >= n_bins {
                break;
            }
            let b_end = ((b_idx + 1) as f64 * bin).min(stop);
            energy[b_idx] += power_kw[i] * (b_end - a);
            if b_end <= a {
                break;
            }
            a = b_end;
        }
    }
    let values = energy.into_iter().map(|e| e / bin).collect();
    Ok(ActualSeries {
        values,
        resolution_h: target_resolution_h,
        origin_s: origin,
    })
}

/// A smooth wind-like profile: a mean plus sinusoids, plus AR(1) noise,
/// clipped at zero.
///
/// `p(t) = max(0, mean + sum_i A_i sin(2 pi t / P_i + phi_i) + e(t))` with
/// `e(t) = rho e(t-1) + sqrt(1 - rho^2) sigma z(t)`, `z` standard normal
/// from a ChaCha8 stream seeded with the given seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTrace {
    pub mean_kw: f64,
    /// `(amplitude kW, period h, phase rad)`
    pub components: Vec<(f64, f64, f64)>,
    pub noise_kw: f64,
    pub noise_correlation: f64,
}

impl Default for SyntheticTrace {
    fn default() -> Self {
        SyntheticTrace {
            mean_kw: 3.4,
            components: vec![(1.6, 3.0, 0.4), (0.7, 0.8, 2.1)],
            noise_kw: 0.25,
            noise_correlation: 0.95,
        }
    }
}

impl SyntheticTrace {
    pub fn generate(&self, n: usize, resolution_h: f64, seed: u64) -> Result<ActualSeries> {
        if !(0.0..1.0).contains(&self.noise_correlation) {
            return Err(Error::Data(format!(
                "noise correlation {} must lie in [0, 1)",
                self.noise_correlation
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let innovation = (1.0 - self.noise_correlation.powi(2)).sqrt() * self.noise_kw;
        let mut e: f64 = 0.0;
        let values = (0..n)
            .map(|i| {
                let t = i as f64 * resolution_h;
                let z: f64 = StandardNormal.sample(&mut rng);
                e = if i == 0 {
                    self.noise_kw * z
                } else {
                    self.noise_correlation * e + innovation * z
                };
                let wave: f64 = self
                    .components
                    .iter()
                    .map(|&(a, period, phase)| {
                        a * (std::f64::consts::TAU * t / period + phase).sin()
                    })
                    .sum();
                (self.mean_kw + wave + e).max(0.0)
            })
            .collect();
        ActualSeries::new(values, resolution_h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn write_csv(rows: &[(f64, f64)]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "time,power_kw").unwrap();
        for (t, p) in rows {
            writeln!(f, "{t},{p}").unwrap();
        }
        f
    }

    #[test]
    fn constant_trace_stays_constant() {
        let rows: Vec<_> = (0..90).map(|s| (s as f64, 3.6)).collect();
        let f = write_csv(&rows);
        let series = load_trace(f.path(), 0.025).unwrap();
        assert_eq!(series.values.len(), 1);
        assert_abs_diff_eq!(series.values[0], 3.6, epsilon = 1e-12);
    }

    #[test]
    fn alternating_samples_average_out() {
        let rows: Vec<_> = (0..180)
            .map(|s| (s as f64, if s % 2 == 0 { 0.0 } else { 2.0 }))
            .collect();
        let f = write_csv(&rows);
        let series = load_trace(f.path(), 0.025).unwrap();
        assert_eq!(series.values.len(), 2);
        for v in series.values {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bad_rows_are_data_errors() {
        let f = write_csv(&[(0.0, 1.0), (1.0, -1.0)]);
        assert!(matches!(load_trace(f.path(), 0.025), Err(Error::Data(_))));
        let f = write_csv(&[(0.0, 1.0), (2.0, 1.0), (1.0, 1.0)]);
        assert!(matches!(load_trace(f.path(), 0.025), Err(Error::Data(_))));
        let f = write_csv(&[]);
        assert!(matches!(load_trace(f.path(), 0.025), Err(Error::Data(_))));
    }

    #[test]
    fn downsampling_preserves_energy() {
        let gen = SyntheticTrace::default()
            .generate(3600, 1.0 / 3600.0, 3)
            .unwrap();
        let times: Vec<f64> = (0..3600).map(f64::from).collect();
        let down = downsample(&times, &gen.values, 0.025).unwrap();
        assert_eq!(down.len(), 40);
        let raw = gen.energy_kwh();
        assert!((raw - down.energy_kwh()).abs() <= 1e-9 * raw);
    }

    #[test]
    fn irregular_samples_split_across_steps() {
        // 0..60 s at 1 kW, 60..150 s at 4 kW, 150..180 s at 2 kW
        let down = downsample(&[0.0, 60.0, 150.0], &[1.0, 4.0, 2.0], 0.025).unwrap();
        assert_eq!(down.len(), 2);
        assert_abs_diff_eq!(down.values[0], (60.0 + 4.0 * 30.0) / 90.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            down.values[1],
            (4.0 * 60.0 + 2.0 * 30.0) / 90.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn synthetic_trace_is_seeded() {
        let gen = SyntheticTrace::default();
        let a = gen.generate(100, 0.025, 1).unwrap();
        assert_eq!(a, gen.generate(100, 0.025, 1).unwrap());
        assert_ne!(a, gen.generate(100, 0.025, 2).unwrap());
        assert!(a.values.iter().all(|v| *v >= 0.0));
    }
}
