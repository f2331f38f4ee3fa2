use gaitspeed::imu::{prepare_sessions, DEFAULT_SAMPLE_RATE_HZ};
use gaitspeed::spectral::step_frequency;
use gaitspeed::synth::{default_speeds, generate_sessions};
use gaitspeed::{CadenceConfig, CalibrationParams, GaitModelParams, Session, SynthConfig};

const RATE: f64 = DEFAULT_SAMPLE_RATE_HZ;

fn step_hz(s: &Session) -> f64 {
    let accel: Vec<[f64; 3]> = s.samples.iter().map(|x| x.accel()).collect();
    step_frequency(&accel, RATE, &CadenceConfig::default())
        .unwrap()
        .step_frequency_hz
}

fn spread(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    let min = v.iter().cloned().fold(f64::MAX, f64::min);
    max - min
}

#[test]
fn pure_sinusoid_within_one_bin() {
    let n = 2040;
    let bin = RATE / 2048.0;
    for f0 in [0.75, 1.1, 1.6, 2.3] {
        let accel: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let s = (2.0 * std::f64::consts::PI * f0 * i as f64 / RATE).sin();
                [0.3 * s, 1.0 - 0.2 * s, 0.1 * s]
            })
            .collect();
        let est = step_frequency(&accel, RATE, &CadenceConfig::default()).unwrap();
        assert!((est.dominant_hz - f0).abs() <= bin, "{f0}: {est:?}");
        assert_eq!(est.step_frequency_hz, 2.0 * est.dominant_hz);
    }
}

#[test]
fn synthetic_cohort_cadence_follows_gait_model() {
    let config = SynthConfig {
        participants: 4,
        master_seed: 31,
        ..SynthConfig::default()
    };
    let gait = GaitModelParams::default();
    let sessions = prepare_sessions(&generate_sessions(&config).unwrap(), &CalibrationParams::identity()).unwrap();
    let profiles = config.profiles();
    let speeds = default_speeds();

    for (p, profile) in profiles.iter().enumerate() {
        let row = &sessions[p * speeds.len()..(p + 1) * speeds.len()];
        let est: Vec<f64> = row.iter().map(step_hz).collect();
        for (s, &speed) in row.iter().zip(&speeds) {
            let swing = profile.swing_hz(&gait, speed);
            let dominant = step_hz(s) / 2.0;
            assert!((dominant - swing).abs() <= 0.15, "{} at {speed}: {dominant} vs {swing}", profile.id);
        }
        type Points = Vec<(f64, f64)>;
        let (walk, run): (Points, Points) = speeds
            .iter()
            .copied()
            .zip(est.iter().copied())
            .partition(|(speed, _)| !gait.is_running(*speed));
        let walk: Vec<f64> = walk.into_iter().map(|(_, f)| f).collect();
        let run: Vec<f64> = run.into_iter().map(|(_, f)| f).collect();
        assert!(spread(&walk) < 0.3, "walking spread {walk:?}");
        assert!(spread(&run) < 0.3, "running spread {run:?}");
        let jump = run[0] - walk[walk.len() - 1];
        assert!(jump >= 0.3, "{}: jump {jump}", profile.id);
    }
}
