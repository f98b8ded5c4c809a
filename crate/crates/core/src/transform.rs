//! Framed analysis with a kernel bank and log-power spectrograms.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bank::{BankKind, FbspParams, KernelBank};
use crate::error::{Error, Result};
use crate::signal::{frame, FrameGrid, Waveform, WindowSpec};

/// Floor added to `|X|^2` before the logarithm.
pub const DEFAULT_EPS: f64 = 1e-10;

/// What produced a spectrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankDescriptor {
    pub label: String,
    pub num_filters: usize,
    pub num_taps: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<FbspParams>,
}

impl BankDescriptor {
    pub fn of(bank: &KernelBank) -> Self {
        Self {
            label: bank.label().to_string(),
            num_filters: bank.num_filters(),
            num_taps: bank.num_taps(),
            params: match bank.kind() {
                BankKind::Fbsp(p) => Some(p.clone()),
                _ => None,
            },
        }
    }
}

/// F x T log-power matrix, `log(|X|^2 + eps)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Array2<f64>,
    pub eps: f64,
    pub grid: FrameGrid,
    pub bank: BankDescriptor,
}

impl Spectrogram {
    pub fn num_filters(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.values.ncols()
    }

    /// Undo the logarithm: `exp(value) - eps`.
    pub fn linear_power(&self) -> Array2<f64> {
        let eps = self.eps;
        self.values.mapv(|v| (v.exp() - eps).max(0.0))
    }
}

/// `X[k][t] = sum_n x[t*hop + n] w[n] K[k][n]`.
pub fn analyze(
    signal: &Waveform,
    bank: &KernelBank,
    grid: &FrameGrid,
    window: &WindowSpec,
) -> Result<Array2<Complex64>> {
    if bank.num_taps() != grid.frame_length {
        return Err(Error::Shape(format!(
            "bank has {} taps but the frame length is {}",
            bank.num_taps(),
            grid.frame_length
        )));
    }
    let frames = frame(signal, grid, window)?;
    Ok(analyze_frames(&frames, bank))
}

/// Apply a bank to pre-windowed frames (T x N) giving F x T outputs.
pub(crate) fn analyze_frames(frames: &Array2<f64>, bank: &KernelBank) -> Array2<Complex64> {
    let k = bank.weights();
    let mut out = Array2::zeros((bank.num_filters(), frames.nrows()));
    for (t, fr) in frames.rows().into_iter().enumerate() {
        for (f, row) in k.rows().into_iter().enumerate() {
            let mut re = 0.0;
            let mut im = 0.0;
            for (x, w) in fr.iter().zip(row.iter()) {
                re += x * w.re;
                im += x * w.im;
            }
            out[[f, t]] = Complex64::new(re, im);
        }
    }
    out
}

/// Elementwise `log(|X|^2 + eps)`.
pub fn log_power(
    x: &Array2<Complex64>,
    eps: f64,
    grid: FrameGrid,
    bank: BankDescriptor,
) -> Result<Spectrogram> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    Ok(Spectrogram {
        values: x.mapv(|z| (z.norm_sqr() + eps).ln()),
        eps,
        grid,
        bank,
    })
}

/// Convenience: analyze followed by log_power.
pub fn spectrogram(
    signal: &Waveform,
    bank: &KernelBank,
    grid: &FrameGrid,
    window: &WindowSpec,
    eps: f64,
) -> Result<Spectrogram> {
    let x = analyze(signal, bank, grid, window)?;
    log_power(&x, eps, *grid, BankDescriptor::of(bank))
}

/// Spectrogram-domain SNR in dB,
/// `10 log10(sum P_clean / sum |P_noisy - P_clean|)` on linear power.
/// Returns `f64::INFINITY` when the residual is zero.
pub fn bank_energy_ratio(clean: &Spectrogram, noisy: &Spectrogram) -> Result<f64> {
    let (signal, residual) = power_and_residual(clean, noisy)?;
    Ok(ratio_db(signal, residual))
}

/// `(sum P_clean, sum |P_noisy - P_clean|)`, for callers that pool
/// several clips before taking the ratio.
pub fn power_and_residual(clean: &Spectrogram, noisy: &Spectrogram) -> Result<(f64, f64)> {
    if clean.values.dim() != noisy.values.dim() {
        return Err(Error::Shape(format!(
            "spectrogram shapes differ: {:?} vs {:?}",
            clean.values.dim(),
            noisy.values.dim()
        )));
    }
    let pc = clean.linear_power();
    let pn = noisy.linear_power();
    let signal: f64 = pc.iter().sum();
    let residual: f64 = pc.iter().zip(pn.iter()).map(|(a, b)| (b - a).abs()).sum();
    Ok((signal, residual))
}

pub(crate) fn ratio_db(signal: f64, residual: f64) -> f64 {
    if residual == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / residual).log10()
    }
}
