//! Training-time augmentation: time scaling, time inversion and fitting
//! clips to a fixed duration by cropping or zero padding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;
use crate::signal::Waveform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentConfig {
    /// Bounds of the exponent `u`; the scale factor is `2^u`.
    pub scale_exponent_range: [f64; 2],
    pub invert_prob: f64,
    /// Seconds.
    pub target_duration: f64,
    pub seed: u64,
    #[serde(default)]
    pub eval_mode: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            scale_exponent_range: [-1.5, 1.5],
            invert_prob: 0.5,
            target_duration: 5.0,
            seed: 0,
            eval_mode: false,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.scale_exponent_range;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::invalid(format!(
                "scale exponent range [{lo}, {hi}] is not an ordered finite interval"
            )));
        }
        if !(0.0..=1.0).contains(&self.invert_prob) {
            return Err(Error::invalid(format!(
                "inversion probability {} outside [0, 1]",
                self.invert_prob
            )));
        }
        if !(self.target_duration > 0.0) || !self.target_duration.is_finite() {
            return Err(Error::invalid("target duration must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    Random,
    Center,
}

/// Resample by linear interpolation: output sample `j` reads the input at
/// position `j * factor`. The sample rate is kept, so pitch moves with speed.
pub fn time_scale(signal: &Waveform, factor: f64) -> Result<Waveform> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::invalid(format!(
            "scale factor must be positive, got {factor}"
        )));
    }
    if factor == 1.0 {
        return Ok(signal.clone());
    }
    let x = signal.samples();
    let out_len = (x.len() as f64 / factor).round() as usize;
    if out_len == 0 {
        return Err(Error::invalid(format!(
            "scaling {} samples by {factor} leaves nothing",
            x.len()
        )));
    }
    let last = x.len() - 1;
    let out = (0..out_len)
        .map(|j| {
            let pos = j as f64 * factor;
            let i = pos.floor() as usize;
            if i >= last {
                x[last]
            } else {
                let frac = pos - i as f64;
                x[i] + frac * (x[i + 1] - x[i])
            }
        })
        .collect();
    Ok(signal.with_samples(out))
}

pub fn time_invert(signal: &Waveform) -> Waveform {
    let mut out = signal.samples().to_vec();
    out.reverse();
    signal.with_samples(out)
}

/// Crop or zero-pad to exactly `round(target * sample_rate)` samples.
pub fn fit_duration(signal: &Waveform, target: f64, mode: FitMode, seed: u64) -> Result<Waveform> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::invalid("target duration must be positive"));
    }
    let want = (target * signal.sample_rate() as f64).round() as usize;
    let have = signal.len();
    if have == want {
        return Ok(signal.clone());
    }
    let slack = have.abs_diff(want);
    let offset = match mode {
        FitMode::Center => slack / 2,
        FitMode::Random => rng(seed).random_range(0..=slack),
    };
    let out = if have > want {
        signal.samples()[offset..offset + want].to_vec()
    } else {
        let mut v = vec![0.0; want];
        v[offset..offset + have].copy_from_slice(signal.samples());
        v
    };
    Ok(signal.with_samples(out))
}

/// Draw the scale exponent `u ~ U[lo, hi]`.
pub fn draw_scale_exponent<R: Rng>(r: &mut R, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        r.random_range(range[0]..=range[1])
    }
}

/// scale, then invert, then fit. In eval mode only the centred fit runs.
pub fn augment_pipeline(signal: &Waveform, config: &AugmentConfig) -> Result<Waveform> {
    config.validate()?;
    if config.eval_mode {
        return fit_duration(signal, config.target_duration, FitMode::Center, config.seed);
    }
    let mut r = rng(config.seed);
    let factor = 2f64.powf(draw_scale_exponent(&mut r, config.scale_exponent_range));
    let invert = r.random_bool(config.invert_prob);
    let fit_seed: u64 = r.random();
    let mut x = time_scale(signal, factor)?;
    if invert {
        x = time_invert(&x);
    }
    fit_duration(&x, config.target_duration, FitMode::Random, fit_seed)
}
