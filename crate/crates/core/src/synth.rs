//! Synthetic wrist-IMU treadmill sessions.
//!
//! Each axis carries an arm-swing fundamental plus two harmonics. Swing
//! frequency sits on one of two plateaus (walking, running) and barely moves
//! with speed inside a regime; the swing amplitude grows linearly with speed
//! and is what carries speed information within a regime. Gravity is
//! projected through a slowly wobbling wrist orientation, and white noise
//! grows with speed, scaled per participant.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imu::{
    session_file_name, write_manifest, write_session, ImuSample, ManifestEntry, Session,
    ACCEL_RANGE_G, DEFAULT_SAMPLE_RATE_HZ, GYRO_RANGE_DPS,
};
use crate::rng::{derive_seed, seeded_rng};

pub const MIN_SPEED_MPH: f64 = 3.0;
pub const MAX_SPEED_MPH: f64 = 7.0;
pub const DEFAULT_DURATION_S: f64 = 45.0;

/// Every tunable constant of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitModelParams {
    /// Arm-swing frequency at the start of the walking plateau.
    pub walk_swing_hz: f64,
    /// Arm-swing frequency at the start of the running plateau.
    pub run_swing_hz: f64,
    /// Slow drift of swing frequency with speed inside a plateau.
    pub swing_slope_hz_per_mph: f64,
    pub transition_mph: f64,
    /// Swing acceleration amplitude `a0 + a1 * speed`, in g.
    pub accel_base_g: f64,
    pub accel_slope_g_per_mph: f64,
    /// Angular-rate amplitude `w0 + w1 * speed`, in deg/s.
    pub gyro_base_dps: f64,
    pub gyro_slope_dps_per_mph: f64,
    /// Relative amplitudes of the 2nd and 3rd swing harmonics.
    pub harmonics: [f64; 2],
    pub gravity_g: f64,
    pub wobble_hz: f64,
    pub wobble_rad: f64,
    pub accel_noise_g: f64,
    pub gyro_noise_dps: f64,
    /// Extra noise per mph above the slowest speed, as a fraction of the
    /// base noise, before the participant's posture scale.
    pub posture_noise_per_mph: f64,
}

impl Default for GaitModelParams {
    fn default() -> Self {
        Self {
            walk_swing_hz: 0.9,
            run_swing_hz: 1.35,
            swing_slope_hz_per_mph: 0.02,
            transition_mph: 4.5,
            accel_base_g: 0.05,
            accel_slope_g_per_mph: 0.07,
            gyro_base_dps: 20.0,
            gyro_slope_dps_per_mph: 30.0,
            harmonics: [0.3, 0.1],
            gravity_g: 1.0,
            wobble_hz: 0.07,
            wobble_rad: 0.15,
            accel_noise_g: 0.02,
            gyro_noise_dps: 3.0,
            posture_noise_per_mph: 0.5,
        }
    }
}

impl GaitModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.run_swing_hz > self.walk_swing_hz && self.walk_swing_hz > 0.0) {
            return Err(Error::InvalidArgument(
                "running plateau must lie above a positive walking plateau".into(),
            ));
        }
        if !(3.0..=7.0).contains(&self.transition_mph) {
            return Err(Error::OutOfRange {
                field: "transition speed",
                value: self.transition_mph,
                min: 3.0,
                max: 7.0,
            });
        }
        Ok(())
    }

    pub fn is_running(&self, speed_mph: f64) -> bool {
        speed_mph >= self.transition_mph
    }

    /// Arm-swing frequency before the participant offset.
    pub fn swing_hz(&self, speed_mph: f64) -> f64 {
        if self.is_running(speed_mph) {
            self.run_swing_hz + self.swing_slope_hz_per_mph * (speed_mph - self.transition_mph)
        } else {
            self.walk_swing_hz + self.swing_slope_hz_per_mph * (speed_mph - MIN_SPEED_MPH)
        }
    }
}

/// Per-participant variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantProfile {
    pub id: String,
    pub cadence_offset_hz: f64,
    pub amplitude_gain: f64,
    /// Swing phase per channel: accel xyz then gyro xyz.
    pub phase_offsets: [f64; 6],
    /// Share of the swing amplitude seen on each channel.
    pub axis_weights: [f64; 6],
    pub posture_noise_scale: f64,
    pub seed: u64,
}

impl ParticipantProfile {
    pub fn random(id: impl Into<String>, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let base_weights = [1.0, 0.6, 0.35, 0.5, 1.0, 0.3];
        Self {
            id: id.into(),
            cadence_offset_hz: rng.random_range(-0.04..=0.04),
            amplitude_gain: rng.random_range(0.95..=1.05),
            phase_offsets: std::array::from_fn(|_| rng.random_range(0.0..TAU)),
            axis_weights: base_weights.map(|w| w * rng.random_range(0.92..=1.08)),
            posture_noise_scale: rng.random_range(0.8..=1.2),
            seed,
        }
    }

    /// Arm-swing frequency this participant uses at a speed.
    pub fn swing_hz(&self, gait: &GaitModelParams, speed_mph: f64) -> f64 {
        gait.swing_hz(speed_mph) + self.cadence_offset_hz
    }
}

fn swing_wave(phase: f64, harmonics: &[f64; 2]) -> f64 {
    phase.sin() + harmonics[0] * (2.0 * phase).sin() + harmonics[1] * (3.0 * phase).sin()
}

fn check_speed(speed_mph: f64) -> Result<()> {
    if !(MIN_SPEED_MPH..=MAX_SPEED_MPH).contains(&speed_mph) {
        return Err(Error::OutOfRange {
            field: "speed_mph",
            value: speed_mph,
            min: MIN_SPEED_MPH,
            max: MAX_SPEED_MPH,
        });
    }
    Ok(())
}

/// One fixed-speed session. Deterministic for the profile seed and speed.
pub fn generate_session(
    profile: &ParticipantProfile,
    gait: &GaitModelParams,
    speed_mph: f64,
    duration_s: f64,
    rate_hz: f64,
) -> Result<Session> {
    check_speed(speed_mph)?;
    gait.validate()?;
    if duration_s.is_nan() || duration_s < 10.0 {
        return Err(Error::InvalidArgument(format!(
            "duration must be at least 10 s, got {duration_s}"
        )));
    }
    if rate_hz.is_nan() || rate_hz <= 0.0 {
        return Err(Error::InvalidArgument(format!("bad sample rate {rate_hz}")));
    }

    let mut rng = seeded_rng(derive_seed(profile.seed, speed_mph.to_bits()));
    let n = (duration_s * rate_hz).round() as usize;
    let swing_hz = profile.swing_hz(gait, speed_mph);
    let gain = profile.amplitude_gain;
    let accel_amp = gain * (gait.accel_base_g + gait.accel_slope_g_per_mph * speed_mph);
    let gyro_amp = gain * (gait.gyro_base_dps + gait.gyro_slope_dps_per_mph * speed_mph);
    let noise_mult =
        1.0 + profile.posture_noise_scale * gait.posture_noise_per_mph * (speed_mph - MIN_SPEED_MPH);
    let accel_noise = Normal::new(0.0, gait.accel_noise_g * noise_mult)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let gyro_noise = Normal::new(0.0, gait.gyro_noise_dps * noise_mult)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let wobble_phase = [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)];
    let start_phase = rng.random_range(0.0..TAU);

    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / rate_hz;
            let phase = start_phase + TAU * swing_hz * t;
            let pitch = gait.wobble_rad * (TAU * gait.wobble_hz * t + wobble_phase[0]).sin();
            let roll = 0.7 * gait.wobble_rad * (TAU * 1.3 * gait.wobble_hz * t + wobble_phase[1]).sin();
            let gravity = [
                gait.gravity_g * pitch.sin(),
                gait.gravity_g * roll.sin() * pitch.cos(),
                gait.gravity_g * roll.cos() * pitch.cos(),
            ];
            let mut accel = [0.0; 3];
            let mut gyro = [0.0; 3];
            for a in 0..3 {
                let swing = swing_wave(phase + profile.phase_offsets[a], &gait.harmonics);
                accel[a] = (gravity[a]
                    + accel_amp * profile.axis_weights[a] * swing
                    + accel_noise.sample(&mut rng))
                .clamp(-ACCEL_RANGE_G, ACCEL_RANGE_G);
                let rot = swing_wave(phase + profile.phase_offsets[3 + a], &gait.harmonics);
                gyro[a] = (gyro_amp * profile.axis_weights[3 + a] * rot + gyro_noise.sample(&mut rng))
                    .clamp(-GYRO_RANGE_DPS, GYRO_RANGE_DPS);
            }
            ImuSample::new(t, accel, gyro)
        })
        .collect();

    Ok(Session {
        participant_id: profile.id.clone(),
        speed_mph,
        sample_rate_hz: rate_hz,
        samples,
    })
}

/// Participant ids `p01`, `p02`, ...
pub fn participant_id(index: usize) -> String {
    format!("p{:02}", index + 1)
}

/// Evenly spaced speeds `start, start + step, ..., <= end`.
pub fn speed_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && end >= start) {
        return Err(Error::InvalidArgument(format!("bad speed range {start}:{end}:{step}")));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e6).round() / 1e6)
        .collect())
}

/// The 9 treadmill speeds from 3.0 to 7.0 mph.
pub fn default_speeds() -> Vec<f64> {
    (0..9).map(|i| 3.0 + 0.5 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub participants: usize,
    pub speeds: Vec<f64>,
    pub master_seed: u64,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub gait: GaitModelParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            participants: 15,
            speeds: default_speeds(),
            master_seed: 0,
            duration_s: DEFAULT_DURATION_S,
            rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            gait: GaitModelParams::default(),
        }
    }
}

impl SynthConfig {
    pub fn profiles(&self) -> Vec<ParticipantProfile> {
        (0..self.participants)
            .map(|p| ParticipantProfile::random(participant_id(p), derive_seed(self.master_seed, p as u64)))
            .collect()
    }
}

/// All sessions of a synthetic cohort, participant-major.
pub fn generate_sessions(config: &SynthConfig) -> Result<Vec<Session>> {
    if config.participants < 1 {
        return Err(Error::InvalidArgument("need at least one participant".into()));
    }
    let mut sessions = Vec::with_capacity(config.participants * config.speeds.len());
    for profile in config.profiles() {
        for &speed in &config.speeds {
            sessions.push(generate_session(
                &profile,
                &config.gait,
                speed,
                config.duration_s,
                config.rate_hz,
            )?);
        }
    }
    Ok(sessions)
}

/// Writes every session as CSV plus `manifest.csv` into `out_dir`.
pub fn generate_dataset(config: &SynthConfig, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let mut entries = Vec::new();
    for session in generate_sessions(config)? {
        let path = out_dir.join(session_file_name(&session.participant_id, session.speed_mph));
        write_session(&path, &session)?;
        entries.push(ManifestEntry {
            path,
            speed_mph: session.speed_mph,
            participant: session.participant_id.clone(),
        });
    }
    write_manifest(out_dir.join("manifest.csv"), &entries)?;
    Ok(entries)
}
