//! Trainable time-frequency front end built from complex frequency B-spline
//! (fbsp) wavelets.
//!
//! With `m = 0`, `f_b = 1` and centre frequencies on the DFT grid the fbsp
//! bank reproduces the STFT exactly (up to conjugation); training moves the
//! shared order `m`, the bandwidth `f_b` and the per-filter centres `f_c`.

pub mod augment;
pub mod bank;
pub mod error;
pub mod grad;
pub mod io;
pub mod perturb;
pub mod rng;
pub mod signal;
pub mod trainer;
pub mod transform;
pub mod wav;

pub use bank::{
    dft_kernel, dft_kernel_two_sided, fbsp_kernel, frequency_response, BankKind, CarrierSign,
    FbspParams, FrequencyResponse, KernelBank, ParamsFile,
};
pub use error::{Error, Result};
pub use grad::{
    check_loss_gradient, fbsp_loss, finite_difference_oracle, finite_difference_oracle_with,
    kernel_jacobian_vector, loss_gradient, FdSteps, ParamGradient,
};
pub use signal::{
    frame, generate, FrameGrid, Generator, Padding, Waveform, WindowKind, WindowSpec,
};
pub use trainer::{make_task, train, Example, Model, TrainConfig, TrainLog};
pub use transform::{analyze, bank_energy_ratio, log_power, spectrogram, Spectrogram};
