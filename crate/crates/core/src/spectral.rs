//! FFT cadence estimation and the speed identity `S = l * f`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const METERS_PER_MILE: f64 = 1609.344;

/// One-sided magnitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub frequencies: Vec<f64>,
    pub magnitudes: Vec<f64>,
    /// Hz per bin.
    pub resolution: f64,
}

impl Spectrum {
    pub fn fft_len(&self) -> usize {
        (self.magnitudes.len() - 1) * 2
    }

    /// Index of the largest magnitude, first on ties.
    pub fn peak_bin(&self) -> usize {
        argmax(&self.magnitudes, 0..self.magnitudes.len())
    }

    fn bins_in(&self, low: f64, high: f64) -> std::ops::Range<usize> {
        let lo = self.frequencies.partition_point(|&f| f < low);
        let hi = self.frequencies.partition_point(|&f| f <= high);
        lo..hi
    }
}

fn argmax(values: &[f64], range: std::ops::Range<usize>) -> usize {
    let mut best = range.start;
    for i in range {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

fn hann(len: usize) -> Vec<f64> {
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / denom).cos()))
        .collect()
}

fn complex_spectrum(signal: &[f64], planner: &mut FftPlanner<f64>) -> Vec<Complex<f64>> {
    let len = signal.len();
    let n = len.next_power_of_two();
    let mean = signal.iter().sum::<f64>() / len as f64;
    let window = hann(len);
    let mut buf: Vec<Complex<f64>> = signal
        .iter()
        .zip(&window)
        .map(|(x, w)| Complex::new((x - mean) * w, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf
}

fn spectrum_from_power(power: Vec<f64>, n: usize, sample_rate_hz: f64) -> Spectrum {
    let resolution = sample_rate_hz / n as f64;
    Spectrum {
        frequencies: (0..power.len()).map(|k| k as f64 * resolution).collect(),
        magnitudes: power.into_iter().map(f64::sqrt).collect(),
        resolution,
    }
}

fn check_len(len: usize) -> Result<()> {
    if len < 2 {
        return Err(Error::StreamTooShort { len, frame: 2 });
    }
    Ok(())
}

/// Magnitude spectrum of the mean-removed, Hann-windowed signal, zero-padded
/// to the next power of two.
pub fn fft_magnitude(signal: &[f64], sample_rate_hz: f64) -> Result<Spectrum> {
    check_len(signal.len())?;
    let mut planner = FftPlanner::new();
    let bins = complex_spectrum(signal, &mut planner);
    let power = bins.iter().map(|c| c.norm_sqr()).collect();
    Ok(spectrum_from_power(
        power,
        signal.len().next_power_of_two(),
        sample_rate_hz,
    ))
}

/// Euclidean norm across axes of the per-axis spectra, i.e.
/// `sqrt(sum_axis |X_axis(f)|^2)`. Unlike the spectrum of `|a(t)|`, this
/// keeps the arm-swing fundamental when the swing is confined to one axis
/// and does not depend on sensor orientation.
pub fn vector_magnitude_spectrum<const C: usize>(
    samples: &[[f64; C]],
    sample_rate_hz: f64,
) -> Result<Spectrum> {
    check_len(samples.len())?;
    let n = samples.len().next_power_of_two();
    let mut planner = FftPlanner::new();
    let mut power = vec![0.0; n / 2 + 1];
    let mut axis = vec![0.0; samples.len()];
    for c in 0..C {
        for (dst, s) in axis.iter_mut().zip(samples) {
            *dst = s[c];
        }
        for (p, x) in power.iter_mut().zip(complex_spectrum(&axis, &mut planner)) {
            *p += x.norm_sqr();
        }
    }
    Ok(spectrum_from_power(power, n, sample_rate_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CadenceConfig {
    /// Search band in Hz, inclusive.
    pub band: (f64, f64),
    /// Steps per spectral cycle; a wrist swings once per stride.
    pub harmonic_multiplier: f64,
    /// The in-band peak must exceed this multiple of the in-band median.
    pub peak_ratio: f64,
}

impl Default for CadenceConfig {
    fn default() -> Self {
        Self {
            band: (0.5, 4.0),
            harmonic_multiplier: 2.0,
            peak_ratio: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CadenceEstimate {
    pub dominant_hz: f64,
    pub step_frequency_hz: f64,
    pub band: (f64, f64),
}

/// Step frequency from tri-axial acceleration.
pub fn step_frequency(
    accel: &[[f64; 3]],
    sample_rate_hz: f64,
    config: &CadenceConfig,
) -> Result<CadenceEstimate> {
    let (low, high) = config.band;
    if !(low >= 0.0 && high > low) {
        return Err(Error::InvalidArgument(format!("bad band {low}:{high}")));
    }
    let min_len = (2.0 * sample_rate_hz).ceil() as usize;
    if accel.len() < min_len {
        return Err(Error::StreamTooShort {
            len: accel.len(),
            frame: min_len,
        });
    }
    let spectrum = vector_magnitude_spectrum(accel, sample_rate_hz)?;
    let bins = spectrum.bins_in(low, high);
    if bins.is_empty() {
        return Err(Error::NoDominantPeak);
    }
    let peak = argmax(&spectrum.magnitudes, bins.clone());
    let mut in_band = spectrum.magnitudes[bins].to_vec();
    in_band.sort_by(f64::total_cmp);
    let mid = in_band.len() / 2;
    let median = if in_band.len() % 2 == 0 {
        0.5 * (in_band[mid - 1] + in_band[mid])
    } else {
        in_band[mid]
    };
    if spectrum.magnitudes[peak] <= config.peak_ratio * median {
        return Err(Error::NoDominantPeak);
    }
    let dominant_hz = spectrum.frequencies[peak];
    Ok(CadenceEstimate {
        dominant_hz,
        step_frequency_hz: config.harmonic_multiplier * dominant_hz,
        band: config.band,
    })
}

/// Speed in m/s from step length (m) and step frequency (Hz).
pub fn speed_from_cadence(step_length_m: f64, step_frequency_hz: f64) -> f64 {
    debug_assert!(step_length_m >= 0.0 && step_frequency_hz >= 0.0);
    step_length_m * step_frequency_hz
}

pub fn mps_to_mph(speed_mps: f64) -> f64 {
    speed_mps * 3600.0 / METERS_PER_MILE
}

pub fn mph_to_mps(speed_mph: f64) -> f64 {
    speed_mph * METERS_PER_MILE / 3600.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, amp: f64, n: usize, rate: f64) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / rate).sin())
            .collect()
    }

    #[test]
    fn constant_signal_has_zero_spectrum() {
        let s = fft_magnitude(&[3.7; 100], 51.0).unwrap();
        assert_eq!(s.magnitudes.len(), 65);
        assert!(s.magnitudes.iter().all(|&m| m < 1e-12));
    }

    #[test]
    fn bins_are_uniform_and_one_sided() {
        let s = fft_magnitude(&sine(2.0, 1.0, 2040, 51.0), 51.0).unwrap();
        assert_eq!(s.fft_len(), 2048);
        assert_eq!(s.magnitudes.len(), 1025);
        assert!((s.resolution - 51.0 / 2048.0).abs() < 1e-15);
        for (k, f) in s.frequencies.iter().enumerate() {
            assert!((f - k as f64 * s.resolution).abs() < 1e-12);
        }
    }

    #[test]
    fn two_hz_sine_peak() {
        let s = fft_magnitude(&sine(2.0, 1.0, 2040, 51.0), 51.0).unwrap();
        let f = s.frequencies[s.peak_bin()];
        assert!((f - 2.0).abs() <= s.resolution, "peak at {f}");
    }

    #[test]
    fn mixture_peak_follows_larger_component() {
        let a = sine(1.0, 0.3, 2040, 51.0);
        let b = sine(2.5, 1.0, 2040, 51.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a + b).collect();
        let s = fft_magnitude(&x, 51.0).unwrap();
        assert!((s.frequencies[s.peak_bin()] - 2.5).abs() <= s.resolution);
    }

    #[test]
    fn single_axis_swing() {
        let x = sine(0.9, 0.4, 2040, 51.0);
        let accel: Vec<[f64; 3]> = x.iter().map(|&v| [v, 0.0, 0.0]).collect();
        let est = step_frequency(&accel, 51.0, &CadenceConfig::default()).unwrap();
        let res = 51.0 / 2048.0;
        assert!((est.dominant_hz - 0.9).abs() <= res);
        assert_eq!(est.step_frequency_hz, 2.0 * est.dominant_hz);
        assert!((est.step_frequency_hz - 1.8).abs() <= 2.0 * res);
    }

    #[test]
    fn zero_signal_has_no_peak() {
        let accel = vec![[0.0; 3]; 510];
        assert!(matches!(
            step_frequency(&accel, 51.0, &CadenceConfig::default()),
            Err(Error::NoDominantPeak)
        ));
    }

    #[test]
    fn too_short_for_cadence() {
        let accel = vec![[0.0; 3]; 60];
        assert!(matches!(
            step_frequency(&accel, 51.0, &CadenceConfig::default()),
            Err(Error::StreamTooShort { .. })
        ));
        assert!(fft_magnitude(&[1.0], 51.0).is_err());
    }

    #[test]
    fn speed_identity() {
        assert_eq!(speed_from_cadence(0.0, 2.0), 0.0);
        assert!((speed_from_cadence(1.2, 1.8) - 2.16).abs() < 1e-15);
        // 2.16 * 3600 / 1609.344
        assert!((mps_to_mph(2.16) - 4.831_782_390_837_5).abs() < 1e-9);
        assert!((mph_to_mps(mps_to_mph(2.16)) - 2.16).abs() < 1e-12);
    }
}
