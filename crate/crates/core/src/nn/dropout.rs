use rand::Rng;

use crate::error::{Error, Result};

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::OutOfRange {
            field: "dropout rate",
            value: rate,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(())
}

/// Inverted dropout. Returns the output and the per-element multiplier
/// (0 or `1 / (1 - rate)`, or 1 everywhere at inference) for the backward
/// pass.
pub fn dropout<R: Rng + ?Sized>(
    x: &[f64],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_rate(rate)?;
    let mask = dropout_mask(x.len(), rate, rng, training);
    Ok((x.iter().zip(&mask).map(|(v, m)| v * m).collect(), mask))
}

pub(crate) fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R, training: bool) -> Vec<f64> {
    if !training || rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}
