//! Time-domain signals, synthetic generators, analysis windows and framing.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono sample buffer at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn nyquist(&self) -> f64 {
        self.sample_rate as f64 / 2.0
    }

    /// Mean squared sample value.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.energy() / self.samples.len() as f64
    }

    /// Sum of squared samples.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |acc, s| acc.max(s.abs()))
    }

    /// Same sample rate, new samples. Skips re-validation for internal use
    /// where samples are known finite.
    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

/// Synthetic signal recipes. Frequencies are in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    Sine {
        freq: f64,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Linear frequency sweep from `f0` to `f1` over the clip.
    Chirp {
        f0: f64,
        f1: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// Sum of randomly placed, randomly phased partials in `[low, high]`,
    /// normalised to the requested peak amplitude.
    BandNoise {
        low: f64,
        high: f64,
        #[serde(default = "unit")]
        amplitude: f64,
        #[serde(default = "default_partials")]
        partials: usize,
    },
    Silence,
}

fn unit() -> f64 {
    1.0
}

fn default_partials() -> usize {
    64
}

impl Generator {
    /// Highest frequency the generator emits, in Hz.
    pub fn max_freq(&self) -> f64 {
        match *self {
            Generator::Sine { freq, .. } => freq,
            Generator::Chirp { f0, f1, .. } => f0.max(f1),
            Generator::BandNoise { high, .. } => high,
            Generator::Silence => 0.0,
        }
    }

    fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = sample_rate as f64 / 2.0;
        let (amplitude, lowest) = match *self {
            Generator::Sine {
                freq, amplitude, ..
            } => (amplitude, freq),
            Generator::Chirp { f0, f1, amplitude } => (amplitude, f0.min(f1)),
            Generator::BandNoise {
                low,
                high,
                amplitude,
                partials,
            } => {
                if low > high {
                    return Err(Error::invalid(format!(
                        "band noise low edge {low} Hz exceeds high edge {high} Hz"
                    )));
                }
                if partials == 0 {
                    return Err(Error::invalid("band noise needs at least one partial"));
                }
                (amplitude, low)
            }
            Generator::Silence => (0.0, 0.0),
        };
        if self.max_freq() >= nyquist {
            return Err(Error::invalid(format!(
                "frequency {} Hz is at or above Nyquist ({nyquist} Hz) for sample rate {sample_rate}",
                self.max_freq()
            )));
        }
        if !(lowest >= 0.0) {
            return Err(Error::invalid("frequencies must be non-negative"));
        }
        if !(0.0..=1.0).contains(&amplitude) {
            return Err(Error::invalid(format!(
                "amplitude {amplitude} outside [0, 1]"
            )));
        }
        Ok(())
    }
}

/// Render a generator into a waveform of `round(duration * sample_rate)` samples.
///
/// The output is a pure function of `(generator, duration, sample_rate, seed)`.
pub fn generate(gen: &Generator, duration: f64, sample_rate: u32, seed: u64) -> Result<Waveform> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::invalid(format!(
            "duration must be positive, got {duration}"
        )));
    }
    if sample_rate == 0 {
        return Err(Error::invalid("sample rate must be positive"));
    }
    gen.validate(sample_rate)?;
    let len = (duration * sample_rate as f64).round() as usize;
    let fs = sample_rate as f64;
    let samples = match *gen {
        Generator::Silence => vec![0.0; len],
        Generator::Sine {
            freq,
            amplitude,
            phase,
        } => (0..len)
            .map(|i| amplitude * (2.0 * PI * freq * i as f64 / fs + phase).sin())
            .collect(),
        Generator::Chirp { f0, f1, amplitude } => {
            let rate = (f1 - f0) / duration;
            (0..len)
                .map(|i| {
                    let t = i as f64 / fs;
                    amplitude * (2.0 * PI * (f0 * t + 0.5 * rate * t * t)).sin()
                })
                .collect()
        }
        Generator::BandNoise {
            low,
            high,
            amplitude,
            partials,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let comps: Vec<(f64, f64)> = (0..partials)
                .map(|_| {
                    let f = if high > low {
                        rng.random_range(low..high)
                    } else {
                        low
                    };
                    (f, rng.random_range(0.0..2.0 * PI))
                })
                .collect();
            let mut out: Vec<f64> = (0..len)
                .map(|i| {
                    let t = i as f64 / fs;
                    comps
                        .iter()
                        .map(|(f, p)| (2.0 * PI * f * t + p).sin())
                        .sum()
                })
                .collect();
            let peak = out.iter().fold(0.0f64, |a, s| a.max(s.abs()));
            if peak > 0.0 {
                let scale = amplitude / peak;
                out.iter_mut().for_each(|s| *s *= scale);
            }
            out
        }
    };
    Waveform::new(samples, sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    #[default]
    Hann,
}

/// Analysis window of a given length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub length: usize,
}

impl WindowSpec {
    pub fn new(kind: WindowKind, length: usize) -> Self {
        Self { kind, length }
    }

    pub fn rectangular(length: usize) -> Self {
        Self::new(WindowKind::Rectangular, length)
    }

    pub fn hann(length: usize) -> Self {
        Self::new(WindowKind::Hann, length)
    }

    /// Window coefficients. Hann is the periodic variant, `0.5 - 0.5 cos(2 pi n / N)`.
    pub fn values(&self) -> Vec<f64> {
        let n = self.length;
        match self.kind {
            WindowKind::Rectangular => vec![1.0; n],
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Signals shorter than one frame are rejected.
    #[default]
    Disabled,
    /// Signals shorter than one frame are zero-extended to a single frame.
    ZeroExtend,
}

/// Frame length and hop, both in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameGrid {
    pub frame_length: usize,
    pub hop: usize,
    #[serde(default)]
    pub padding: Padding,
}

impl FrameGrid {
    pub fn new(frame_length: usize, hop: usize) -> Result<Self> {
        let grid = Self {
            frame_length,
            hop,
            padding: Padding::Disabled,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || self.hop == 0 || self.hop > self.frame_length {
            return Err(Error::invalid(format!(
                "frame grid needs 0 < hop <= frame length, got hop {} and frame length {}",
                self.hop, self.frame_length
            )));
        }
        Ok(())
    }

    /// `floor((len - N) / hop) + 1` for `len >= N`, else 0.
    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.frame_length {
            0
        } else {
            (len - self.frame_length) / self.hop + 1
        }
    }

    /// Signal length after the padding policy is applied.
    pub(crate) fn padded_len(&self, len: usize) -> Result<usize> {
        if len >= self.frame_length {
            return Ok(len);
        }
        match self.padding {
            Padding::Disabled => Err(Error::invalid(format!(
                "signal of {len} samples is shorter than the frame length {}",
                self.frame_length
            ))),
            Padding::ZeroExtend => Ok(self.frame_length),
        }
    }
}

impl Default for FrameGrid {
    fn default() -> Self {
        Self {
            frame_length: 1024,
            hop: 256,
            padding: Padding::Disabled,
        }
    }
}

/// Cut a signal into windowed frames: `out[t][n] = x[t * hop + n] * w[n]`.
pub fn frame(signal: &Waveform, grid: &FrameGrid, window: &WindowSpec) -> Result<Array2<f64>> {
    grid.validate()?;
    if window.length != grid.frame_length {
        return Err(Error::Shape(format!(
            "window length {} does not match frame length {}",
            window.length, grid.frame_length
        )));
    }
    let x = signal.samples();
    let len = grid.padded_len(x.len())?;
    let n = grid.frame_length;
    let t = grid.num_frames(len);
    let w = window.values();
    let mut out = Array2::zeros((t, n));
    for (ti, mut row) in out.rows_mut().into_iter().enumerate() {
        let start = ti * grid.hop;
        for (i, v) in row.iter_mut().enumerate() {
            let s = x.get(start + i).copied().unwrap_or(0.0);
            *v = s * w[i];
        }
    }
    Ok(out)
}
