//! Signal perturbations used for robustness testing: additive white
//! Gaussian noise at a target SNR and Butterworth low-pass filtering.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};
use crate::signal::Waveform;
use crate::trainer::{Example, Model};
use crate::transform::{power_and_residual, ratio_db};

/// Add zero-mean Gaussian noise with variance `P / 10^(snr_db / 10)`, where
/// `P` is the mean squared sample of the whole clip. `snr_db = +inf`
/// returns the signal unchanged.
pub fn add_awgn(signal: &Waveform, snr_db: f64, seed: u64) -> Result<Waveform> {
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR must not be NaN"));
    }
    if snr_db == f64::INFINITY {
        return Ok(signal.clone());
    }
    let p = signal.power();
    if p == 0.0 {
        return Err(Error::invalid("signal has zero power; SNR is undefined"));
    }
    let sigma = (p / 10f64.powf(snr_db / 10.0)).sqrt();
    let normal = Normal::new(0.0, sigma)
        .map_err(|e| Error::Numerical(format!("noise distribution: {e}")))?;
    let mut r = rng(seed);
    let out = signal
        .samples()
        .iter()
        .map(|s| s + normal.sample(&mut r))
        .collect();
    Waveform::new(out, signal.sample_rate())
}

/// One biquad, or a first-order section when `b2 = a2 = 0`.
/// `y = b0 x + b1 x[-1] + b2 x[-2] - a1 y[-1] - a2 y[-2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Section {
    fn response(&self, z_inv: Complex64) -> Complex64 {
        let z2 = z_inv * z_inv;
        (self.b0 + z_inv * self.b1 + z2 * self.b2) / (1.0 + z_inv * self.a1 + z2 * self.a2)
    }

    /// Roots of `z^2 + a1 z + a2` (a single root for first-order sections).
    pub fn poles(&self) -> Vec<Complex64> {
        if self.a2 == 0.0 {
            return vec![Complex64::new(-self.a1, 0.0)];
        }
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        vec![(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }
}

/// Cascaded-section Butterworth low-pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ButterworthFilter {
    pub sections: Vec<Section>,
    pub order: usize,
    pub cutoff: f64,
    pub sample_rate: u32,
}

impl ButterworthFilter {
    /// Complex response at `freq` Hz.
    pub fn response(&self, freq: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -2.0 * PI * freq / self.sample_rate as f64);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    pub fn magnitude(&self, freq: f64) -> f64 {
        self.response(freq).norm()
    }

    pub fn magnitude_db(&self, freq: f64) -> f64 {
        20.0 * self.magnitude(freq).log10()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| s.poles()).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }
}

/// Butterworth low-pass by bilinear transform of the analog prototype with
/// the cutoff pre-warped, so the -3 dB point lands exactly on `cutoff`.
pub fn design_butterworth_lowpass(
    order: usize,
    cutoff: f64,
    sample_rate: u32,
) -> Result<ButterworthFilter> {
    let nyquist = sample_rate as f64 / 2.0;
    if order == 0 {
        return Err(Error::invalid("filter order must be at least 1"));
    }
    if !(cutoff > 0.0) || cutoff >= nyquist {
        return Err(Error::invalid(format!(
            "cutoff {cutoff} Hz must lie in (0, {nyquist}) Hz"
        )));
    }
    // analog prototype in units where the bilinear map is z = (1 + s) / (1 - s)
    let warped = (PI * cutoff / sample_rate as f64).tan();
    let bilinear = |s: Complex64| (1.0 + s) / (1.0 - s);
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for k in 0..order / 2 {
        let theta = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
        let z = bilinear(Complex64::from_polar(warped, theta));
        let a1 = -2.0 * z.re;
        let a2 = z.norm_sqr();
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Section {
            b0: g,
            b1: 2.0 * g,
            b2: g,
            a1,
            a2,
        });
    }
    if order % 2 == 1 {
        let z = bilinear(Complex64::new(-warped, 0.0)).re;
        let g = (1.0 - z) / 2.0;
        sections.push(Section {
            b0: g,
            b1: g,
            b2: 0.0,
            a1: -z,
            a2: 0.0,
        });
    }
    Ok(ButterworthFilter {
        sections,
        order,
        cutoff,
        sample_rate,
    })
}

/// Causal filtering from zero initial state (transposed direct form II per
/// section). Output length equals input length.
pub fn apply_filter(filter: &ButterworthFilter, signal: &Waveform) -> Result<Waveform> {
    if filter.sample_rate != signal.sample_rate() {
        return Err(Error::invalid(format!(
            "filter designed for {} Hz but signal is at {} Hz",
            filter.sample_rate,
            signal.sample_rate()
        )));
    }
    let mut y = signal.samples().to_vec();
    for s in &filter.sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in y.iter_mut() {
            let x = *v;
            let out = s.b0 * x + z1;
            z1 = s.b1 * x - s.a1 * out + z2;
            z2 = s.b2 * x - s.a2 * out;
            *v = out;
        }
    }
    Waveform::new(y, signal.sample_rate())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Awgn,
    Lowpass,
}

/// Accuracy and spectrogram-domain SNR at each perturbation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub axis: Vec<f64>,
    pub accuracy: Vec<f64>,
    pub spectro_snr: Vec<f64>,
    pub bank_label: String,
}

/// Low-pass order used by the sweep.
pub const SWEEP_FILTER_ORDER: usize = 5;

pub fn default_snr_axis() -> Vec<f64> {
    vec![f64::INFINITY, 30.0, 25.0, 20.0, 15.0, 10.0, 5.0, 0.0]
}

/// Nyquist followed by 16k, 8k, 4k, 2k and 1k Hz, keeping those below
/// Nyquist.
pub fn default_cutoff_axis(sample_rate: u32) -> Vec<f64> {
    let nyquist = sample_rate as f64 / 2.0;
    std::iter::once(nyquist)
        .chain(
            [16000.0, 8000.0, 4000.0, 2000.0, 1000.0]
                .into_iter()
                .filter(|c| *c < nyquist),
        )
        .collect()
}

fn perturb_clip(kind: SweepKind, value: f64, clip: &Waveform, seed: u64) -> Result<Waveform> {
    match kind {
        SweepKind::Awgn => add_awgn(clip, value, seed),
        SweepKind::Lowpass => {
            if value >= clip.nyquist() {
                Ok(clip.clone())
            } else {
                let f = design_butterworth_lowpass(SWEEP_FILTER_ORDER, value, clip.sample_rate())?;
                apply_filter(&f, clip)
            }
        }
    }
}

/// Perturb every clip at each axis value, classify with the frozen model and
/// record accuracy plus the pooled spectrogram-domain SNR of the model's
/// bank. Clip seeds are `derive_seed(seed, [axis_index, clip_index])`.
pub fn robustness_sweep(
    kind: SweepKind,
    axis: &[f64],
    model: &Model,
    clips: &[Example],
    seed: u64,
) -> Result<SweepResult> {
    if axis.is_empty() {
        return Err(Error::invalid("sweep axis is empty"));
    }
    if clips.is_empty() {
        return Err(Error::invalid("no clips to evaluate"));
    }
    let bank = model.bank()?;
    let mut accuracy = Vec::with_capacity(axis.len());
    let mut spectro_snr = Vec::with_capacity(axis.len());
    for (ai, &value) in axis.iter().enumerate() {
        let mut correct = 0usize;
        let (mut sig, mut res) = (0.0, 0.0);
        for (ci, ex) in clips.iter().enumerate() {
            let noisy = perturb_clip(
                kind,
                value,
                &ex.wave,
                derive_seed(seed, &[ai as u64, ci as u64]),
            )?;
            let clean_spec = model.spectrogram_with(&bank, &ex.wave)?;
            let noisy_spec = model.spectrogram_with(&bank, &noisy)?;
            if model.predict_spectrogram(&noisy_spec) == ex.label {
                correct += 1;
            }
            let (s, r) = power_and_residual(&clean_spec, &noisy_spec)?;
            sig += s;
            res += r;
        }
        accuracy.push(correct as f64 / clips.len() as f64);
        spectro_snr.push(ratio_db(sig, res));
    }
    Ok(SweepResult {
        kind,
        axis: axis.to_vec(),
        accuracy,
        spectro_snr,
        bank_label: bank.label().to_string(),
    })
}
