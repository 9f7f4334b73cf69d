use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn check_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::domain(format!("dropout rate {rate} outside [0, 1)")))
    }
}

/// Inverted-dropout multipliers: 0 with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, rate: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if rate == 0.0 {
        return Ok(vec![1.0; len]);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok((0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect())
}

pub fn apply_dropout<R: Rng + ?Sized>(input: &[f64], rate: f64, mode: Mode, rng: &mut R) -> Result<Vec<f64>> {
    check_rate(rate)?;
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(input.to_vec());
    }
    let mask = dropout_mask(input.len(), rate, rng)?;
    Ok(input.iter().zip(mask).map(|(x, m)| x * m).collect())
}
