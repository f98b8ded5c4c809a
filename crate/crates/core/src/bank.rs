//! DFT and complex frequency B-spline (fbsp) kernel banks.
//!
//! An fbsp filter with order `m`, bandwidth `f_b` and centre frequency `f_c`
//! has taps
//!
//! ```text
//! K[n] = (1/sqrt(N)) * sqrt(f_b) * sinc(f_b * t_n / m)^m * exp(2i pi f_c n)
//! t_n  = (n - (N - 1) / 2) / N
//! ```
//!
//! where `sinc(x) = sin(pi x) / (pi x)`. The envelope time `t_n` is the
//! centred tap index measured in frames, so `f_b` is a bandwidth in DFT bins
//! and `f_c` is in cycles per sample. At `m = 0` the envelope is identically
//! one; with `f_b = 1` and `f_c = k / N` the bank is then the complex
//! conjugate of the normalised DFT bank, tap for tap.
//!
//! Fractional powers of negative sinc values use the principal branch,
//! `exp(m * Log(sinc))`.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::WindowSpec;

/// Shared order and bandwidth plus one centre frequency per filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FbspParams {
    pub m: f64,
    pub f_b: f64,
    pub f_c: Vec<f64>,
}

impl FbspParams {
    pub fn new(m: f64, f_b: f64, f_c: Vec<f64>) -> Result<Self> {
        let p = Self { m, f_b, f_c };
        p.validate()?;
        Ok(p)
    }

    /// The STFT-equivalent starting point: `m = 0`, `f_b = 1` and one
    /// filter per non-negative DFT bin, `f_c = k / N` for `k = 0..=N/2`.
    pub fn stft_init(n_fft: usize) -> Self {
        Self {
            m: 0.0,
            f_b: 1.0,
            f_c: dft_grid(n_fft),
        }
    }

    pub fn num_filters(&self) -> usize {
        self.f_c.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.m.is_finite() || self.m < 0.0 {
            return Err(Error::invalid(format!(
                "order m must be >= 0, got {}",
                self.m
            )));
        }
        if !self.f_b.is_finite() || self.f_b <= 0.0 {
            return Err(Error::invalid(format!(
                "bandwidth f_b must be > 0, got {}",
                self.f_b
            )));
        }
        if self.f_c.is_empty() {
            return Err(Error::invalid("at least one centre frequency is required"));
        }
        if let Some(bad) = self
            .f_c
            .iter()
            .find(|f| !f.is_finite() || !(0.0..=0.5).contains(*f))
        {
            return Err(Error::invalid(format!(
                "centre frequency {bad} outside [0, 0.5] cycles/sample"
            )));
        }
        if self.f_c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid(
                "centre frequencies must be strictly increasing",
            ));
        }
        Ok(())
    }
}

/// JSON document for a parameter set: `{m, f_b, f_c: [...], n_fft}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub m: f64,
    pub f_b: f64,
    pub f_c: Vec<f64>,
    pub n_fft: usize,
}

impl ParamsFile {
    pub fn new(params: &FbspParams, n_fft: usize) -> Self {
        Self {
            m: params.m,
            f_b: params.f_b,
            f_c: params.f_c.clone(),
            n_fft,
        }
    }

    pub fn params(&self) -> Result<FbspParams> {
        FbspParams::new(self.m, self.f_b, self.f_c.clone())
    }
}

/// Normalised DFT grid `k / N` for `k = 0..=N/2`.
pub fn dft_grid(n_fft: usize) -> Vec<f64> {
    (0..=n_fft / 2).map(|k| k as f64 / n_fft as f64).collect()
}

/// Sign of the complex carrier in each kernel row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierSign {
    /// `exp(-2i pi f n)`, the analysis DFT convention.
    Negative,
    /// `exp(+2i pi f n)`, the fbsp convention.
    Positive,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BankKind {
    Dft,
    Fbsp(FbspParams),
    Custom,
}

impl BankKind {
    pub fn label(&self) -> &'static str {
        match self {
            BankKind::Dft => "stft",
            BankKind::Fbsp(_) => "fbsp",
            BankKind::Custom => "custom",
        }
    }
}

/// F x N complex kernel matrix; row k holds the taps of filter k.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    weights: Array2<Complex64>,
    kind: BankKind,
    norm_scale: f64,
    carrier: CarrierSign,
}

impl KernelBank {
    /// Wrap an arbitrary weight matrix, e.g. a hand-built test bank.
    pub fn from_weights(weights: Array2<Complex64>, carrier: CarrierSign) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::Shape("kernel bank must be non-empty".into()));
        }
        if weights
            .iter()
            .any(|w| !w.re.is_finite() || !w.im.is_finite())
        {
            return Err(Error::Numerical(
                "kernel bank has non-finite entries".into(),
            ));
        }
        let norm_scale = 1.0 / (weights.ncols() as f64).sqrt();
        Ok(Self {
            weights,
            kind: BankKind::Custom,
            norm_scale,
            carrier,
        })
    }

    pub fn weights(&self) -> &Array2<Complex64> {
        &self.weights
    }

    pub fn kind(&self) -> &BankKind {
        &self.kind
    }

    pub fn label(&self) -> &'static str {
        self.kind.label()
    }

    pub fn norm_scale(&self) -> f64 {
        self.norm_scale
    }

    pub fn carrier(&self) -> CarrierSign {
        self.carrier
    }

    pub fn num_filters(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_taps(&self) -> usize {
        self.weights.ncols()
    }

    /// Squared L2 norm of each row.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        self.weights
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|w| w.norm_sqr()).sum())
            .collect()
    }

    /// Multiply every entry by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.weights.mapv_inplace(|w| w * factor);
        out
    }
}

/// Unit carrier `exp(sign * 2i pi f n)` with the phase reduced to one turn
/// before the trig call, so equal `(f, n)` always give bitwise-equal values.
pub(crate) fn carrier(f: f64, n: usize, sign: CarrierSign) -> Complex64 {
    let turns = f * n as f64;
    let phase = 2.0 * PI * (turns - turns.round());
    let (s, c) = phase.sin_cos();
    match sign {
        CarrierSign::Positive => Complex64::new(c, s),
        CarrierSign::Negative => Complex64::new(c, -s),
    }
}

/// Centred tap time in frames.
pub(crate) fn tap_time(n: usize, n_taps: usize) -> f64 {
    (n as f64 - (n_taps as f64 - 1.0) / 2.0) / n_taps as f64
}

/// `sin(pi x) / (pi x)` with a series expansion near zero.
pub(crate) fn sinc(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-4 {
        1.0 - px * px / 6.0
    } else {
        px.sin() / px
    }
}

/// Derivative of [`sinc`].
pub(crate) fn sinc_deriv(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-4 {
        -PI * px / 3.0
    } else {
        (px.cos() - px.sin() / px) / x
    }
}

/// Envelope sinc argument `f_b * t / m`.
pub(crate) fn sinc_arg(m: f64, f_b: f64, t: f64) -> f64 {
    f_b * t / m
}

/// `sinc(f_b t / m)^m`, principal branch; exactly 1 at `m = 0`.
pub(crate) fn envelope(m: f64, f_b: f64, t: f64) -> Complex64 {
    if m == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    let s = sinc(sinc_arg(m, f_b, t));
    complex_pow(s, m)
}

/// Principal-branch `s^m` for real `s`.
pub(crate) fn complex_pow(s: f64, m: f64) -> Complex64 {
    if s > 0.0 {
        Complex64::new(s.powf(m), 0.0)
    } else if s == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::from_polar((-s).powf(m), PI * m)
    }
}

/// One-sided normalised DFT bank: `F = N/2 + 1` rows,
/// `K[k][n] = exp(-2i pi (k/N) n) / sqrt(N)`.
pub fn dft_kernel(n_fft: usize) -> Result<KernelBank> {
    dft_bank(n_fft, n_fft / 2 + 1)
}

/// Full normalised DFT bank with all N rows.
pub fn dft_kernel_two_sided(n_fft: usize) -> Result<KernelBank> {
    dft_bank(n_fft, n_fft)
}

fn dft_bank(n_fft: usize, rows: usize) -> Result<KernelBank> {
    if n_fft < 2 {
        return Err(Error::invalid(format!(
            "transform length must be >= 2, got {n_fft}"
        )));
    }
    let scale = 1.0 / (n_fft as f64).sqrt();
    let weights = Array2::from_shape_fn((rows, n_fft), |(k, n)| {
        let f = k as f64 / n_fft as f64;
        let c = carrier(f, n, CarrierSign::Positive);
        Complex64::new(scale * c.re, -(scale * c.im))
    });
    Ok(KernelBank {
        weights,
        kind: BankKind::Dft,
        norm_scale: scale,
        carrier: CarrierSign::Negative,
    })
}

/// Build the fbsp bank for `params` with `n_fft` taps per filter.
pub fn fbsp_kernel(params: &FbspParams, n_fft: usize) -> Result<KernelBank> {
    params.validate()?;
    if n_fft < 2 {
        return Err(Error::invalid(format!(
            "transform length must be >= 2, got {n_fft}"
        )));
    }
    let scale = 1.0 / (n_fft as f64).sqrt();
    let amp = Complex64::new(scale * params.f_b.sqrt(), 0.0);
    let env: Vec<Complex64> = (0..n_fft)
        .map(|n| amp * envelope(params.m, params.f_b, tap_time(n, n_fft)))
        .collect();
    let weights = Array2::from_shape_fn((params.num_filters(), n_fft), |(k, n)| {
        env[n] * carrier(params.f_c[k], n, CarrierSign::Positive)
    });
    Ok(KernelBank {
        weights,
        kind: BankKind::Fbsp(params.clone()),
        norm_scale: scale,
        carrier: CarrierSign::Positive,
    })
}

/// Gain of every filter against a grid of probe sinusoids.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    /// F x M linear magnitudes.
    pub gains: Array2<f64>,
    /// M probe frequencies in cycles/sample, uniform on `[0, 0.5]`.
    pub probe_freqs: Vec<f64>,
    /// Per-probe maximum over filters.
    pub max_gain_curve: Vec<f64>,
}

impl FrequencyResponse {
    /// Ratio of the largest to the smallest max-gain value over probes
    /// strictly inside `(lo, hi)`.
    pub fn flatness_ratio(&self, lo: f64, hi: f64) -> f64 {
        let inside = self
            .probe_freqs
            .iter()
            .zip(&self.max_gain_curve)
            .filter(|(f, _)| **f > lo && **f < hi)
            .map(|(_, g)| *g);
        let (mn, mx) = inside.fold((f64::INFINITY, 0.0f64), |(a, b), g| (a.min(g), b.max(g)));
        mx / mn
    }

    /// Attenuation in dB of the band `[lo, hi]` relative to the overall
    /// peak of the max-gain curve, using the strongest probe in the band.
    pub fn band_attenuation_db(&self, lo: f64, hi: f64) -> f64 {
        let peak = self.max_gain_curve.iter().fold(0.0f64, |a, g| a.max(*g));
        let band = self
            .probe_freqs
            .iter()
            .zip(&self.max_gain_curve)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .fold(0.0f64, |a, (_, g)| a.max(*g));
        20.0 * (peak / band).log10()
    }
}

/// Default probe count: the bank's own one-sided DFT grid.
pub fn default_probe_count(n_taps: usize) -> usize {
    n_taps / 2 + 1
}

/// Evaluate `|sum_n K[k][n] w[n] exp(-+2i pi f_j n)|` on `probes` uniform
/// frequencies over `[0, 0.5]`.
///
/// The probe exponential is the conjugate of the bank's carrier, so a row
/// with carrier frequency `f` peaks at probe frequency `f` whichever sign
/// convention the bank uses.
pub fn frequency_response(
    bank: &KernelBank,
    window: &WindowSpec,
    probes: usize,
) -> Result<FrequencyResponse> {
    if probes < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 probes, got {probes}"
        )));
    }
    let n_taps = bank.num_taps();
    if window.length != n_taps {
        return Err(Error::Shape(format!(
            "window length {} does not match {} taps",
            window.length, n_taps
        )));
    }
    let w = window.values();
    let probe_sign = match bank.carrier() {
        CarrierSign::Positive => CarrierSign::Negative,
        CarrierSign::Negative => CarrierSign::Positive,
    };
    let probe_freqs: Vec<f64> = (0..probes)
        .map(|j| 0.5 * j as f64 / (probes - 1) as f64)
        .collect();
    let mut gains = Array2::zeros((bank.num_filters(), probes));
    for (j, &f) in probe_freqs.iter().enumerate() {
        let probe: Vec<Complex64> = (0..n_taps)
            .map(|n| carrier(f, n, probe_sign) * w[n])
            .collect();
        for (k, row) in bank.weights().rows().into_iter().enumerate() {
            let acc: Complex64 = row.iter().zip(&probe).map(|(a, b)| a * b).sum();
            gains[[k, j]] = acc.norm();
        }
    }
    let max_gain_curve = gains
        .columns()
        .into_iter()
        .map(|c| c.iter().fold(0.0f64, |a, g| a.max(*g)))
        .collect();
    Ok(FrequencyResponse {
        gains,
        probe_freqs,
        max_gain_curve,
    })
}
