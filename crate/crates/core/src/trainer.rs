//! Desk-scale fitting of fbsp parameters together with a linear classifier.
//!
//! Each clip is framed, transformed with the current bank and reduced to a
//! time-averaged log-power vector (one value per filter). A fixed per-filter
//! standardisation, measured once on the training set with the initial
//! bank, feeds a linear softmax head. The objective is
//! `cross_entropy + lambda * fbsp_loss`, minimised with Nesterov momentum.
//! Bank parameters stay frozen for the first `freeze_epochs` epochs.

use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_pipeline, AugmentConfig};
use crate::bank::{dft_kernel, fbsp_kernel, FbspParams, KernelBank};
use crate::error::{Error, Result};
use crate::grad::{
    check_singularity, fbsp_loss, kernel_jacobian_vector, loss_gradient, ParamGradient,
};
use crate::perturb::add_awgn;
use crate::rng::{derive_seed, rng};
use crate::signal::{frame, generate, FrameGrid, Generator, Waveform, WindowKind, WindowSpec};
use crate::transform::{analyze_frames, log_power, BankDescriptor, Spectrogram, DEFAULT_EPS};

/// Analysis settings shared by training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Frontend {
    pub n_fft: usize,
    pub hop: usize,
    pub window: WindowKind,
    pub eps: f64,
}

impl Default for Frontend {
    fn default() -> Self {
        Self {
            n_fft: 64,
            hop: 32,
            window: WindowKind::Hann,
            eps: DEFAULT_EPS,
        }
    }
}

impl Frontend {
    pub fn grid(&self) -> Result<FrameGrid> {
        FrameGrid::new(self.n_fft, self.hop)
    }

    pub fn window_spec(&self) -> WindowSpec {
        WindowSpec::new(self.window, self.n_fft)
    }
}

/// Which bank a model analyses with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BankMode {
    Stft,
    #[default]
    Fbsp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub lr_decay: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lambda_fbsp: f64,
    pub freeze_epochs: usize,
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Separate learning rate for the bank parameters; `lr` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bank_lr: Option<f64>,
    #[serde(default)]
    pub frontend: Frontend,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentConfig>,
}

fn default_batch() -> usize {
    16
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 2.5e-4,
            lr_decay: 0.985,
            momentum: 0.9,
            weight_decay: 5e-4,
            lambda_fbsp: 1.0,
            freeze_epochs: 3,
            seed: 0,
            batch_size: default_batch(),
            bank_lr: None,
            frontend: Frontend::default(),
            augment: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if let Some(b) = self.bank_lr {
            if !(b >= 0.0) {
                return bad(format!("bank learning rate must be >= 0, got {b}"));
            }
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!(
                "lr decay must lie in (0, 1], got {}",
                self.lr_decay
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        if !(self.weight_decay >= 0.0) || !(self.lambda_fbsp >= 0.0) {
            return bad("weight decay and lambda must be non-negative".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        self.frontend.grid()?;
        if !(self.frontend.eps > 0.0) {
            return bad("eps must be positive".into());
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        Ok(())
    }
}

/// A labelled clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub wave: Waveform,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub num_classes: usize,
}

/// Recipe for one synthetic class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub generator: Generator,
    /// Relative frequency jitter applied per clip, e.g. 0.02 for +-2 %.
    #[serde(default)]
    pub freq_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub classes: Vec<ClassSpec>,
    pub samples_per_class: usize,
    /// Per-clip SNR drawn uniformly from this dB range; `None` for clean clips.
    #[serde(default)]
    pub snr_range: Option<[f64; 2]>,
    pub duration: f64,
    pub sample_rate: u32,
    pub seed: u64,
}

impl TaskSpec {
    /// Tone, chirp and noise band at 8 kHz.
    pub fn three_class(seed: u64, samples_per_class: usize) -> Self {
        Self {
            classes: vec![
                ClassSpec {
                    generator: Generator::Sine {
                        freq: 440.0,
                        amplitude: 0.8,
                        phase: 0.0,
                    },
                    freq_jitter: 0.05,
                },
                ClassSpec {
                    generator: Generator::Chirp {
                        f0: 1000.0,
                        f1: 1600.0,
                        amplitude: 0.8,
                    },
                    freq_jitter: 0.05,
                },
                ClassSpec {
                    generator: Generator::BandNoise {
                        low: 2200.0,
                        high: 3000.0,
                        amplitude: 0.8,
                        partials: 24,
                    },
                    freq_jitter: 0.05,
                },
            ],
            samples_per_class,
            snr_range: Some([5.0, 20.0]),
            duration: 0.25,
            sample_rate: 8000,
            seed,
        }
    }
}

fn jittered(gen: &Generator, scale: f64, phase: f64) -> Generator {
    match gen.clone() {
        Generator::Sine {
            freq, amplitude, ..
        } => Generator::Sine {
            freq: freq * scale,
            amplitude,
            phase,
        },
        Generator::Chirp { f0, f1, amplitude } => Generator::Chirp {
            f0: f0 * scale,
            f1: f1 * scale,
            amplitude,
        },
        Generator::BandNoise {
            low,
            high,
            amplitude,
            partials,
        } => Generator::BandNoise {
            low: low * scale,
            high: high * scale,
            amplitude,
            partials,
        },
        Generator::Silence => Generator::Silence,
    }
}

/// Build a class-balanced corpus and split it 80/20 after a seeded shuffle.
pub fn make_task(spec: &TaskSpec) -> Result<Corpus> {
    let k = spec.classes.len();
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 classes, got {k}")));
    }
    if spec.samples_per_class == 0 {
        return Err(Error::invalid("samples per class must be positive"));
    }
    let nyquist = spec.sample_rate as f64 / 2.0;
    for (i, c) in spec.classes.iter().enumerate() {
        if !(0.0..1.0).contains(&c.freq_jitter) {
            return Err(Error::invalid(format!(
                "class {i}: jitter must lie in [0, 1)"
            )));
        }
        let top = c.generator.max_freq() * (1.0 + c.freq_jitter);
        if top >= nyquist {
            return Err(Error::invalid(format!(
                "class {i} reaches {top} Hz, at or above Nyquist ({nyquist} Hz)"
            )));
        }
        if matches!(c.generator, Generator::Silence) && spec.snr_range.is_some() {
            return Err(Error::invalid(format!(
                "class {i} is silent; noise at a given SNR is undefined"
            )));
        }
    }
    let mut all = Vec::with_capacity(k * spec.samples_per_class);
    for (label, class) in spec.classes.iter().enumerate() {
        for i in 0..spec.samples_per_class {
            let clip_seed = derive_seed(spec.seed, &[label as u64, i as u64]);
            let mut r = rng(clip_seed);
            let scale = 1.0 + class.freq_jitter * r.random_range(-1.0..=1.0);
            let phase = r.random_range(0.0..std::f64::consts::TAU);
            let gen = jittered(&class.generator, scale, phase);
            let mut wave = generate(&gen, spec.duration, spec.sample_rate, r.random())?;
            if let Some([lo, hi]) = spec.snr_range {
                let snr = if hi > lo { r.random_range(lo..=hi) } else { lo };
                wave = add_awgn(&wave, snr, r.random())?;
            }
            all.push(Example { wave, label });
        }
    }
    all.shuffle(&mut rng(derive_seed(spec.seed, &[u64::MAX])));
    let n_train = (all.len() * 4) / 5;
    let val = all.split_off(n_train);
    Ok(Corpus {
        train: all,
        val,
        num_classes: k,
    })
}

/// Linear softmax classifier over standardised features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    /// classes x features, row-major.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
}

impl LinearHead {
    fn zeros(classes: usize, features: usize) -> Self {
        Self {
            weights: vec![vec![0.0; features]; classes],
            bias: vec![0.0; classes],
            feature_mean: vec![0.0; features],
            feature_scale: vec![1.0; features],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    fn standardise(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(&self.feature_mean)
            .zip(&self.feature_scale)
            .map(|((f, m), s)| (f - m) / s)
            .collect()
    }

    pub fn logits(&self, features: &[f64]) -> Vec<f64> {
        let z = self.standardise(features);
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(&z).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    pub fn predict(&self, features: &[f64]) -> usize {
        argmax(&self.logits(features))
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let mx = z.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e: Vec<f64> = z.iter().map(|v| (v - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Front end, bank parameters and head: everything needed for inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub frontend: Frontend,
    pub mode: BankMode,
    pub params: FbspParams,
    pub head: LinearHead,
}

impl Model {
    pub fn bank(&self) -> Result<KernelBank> {
        match self.mode {
            BankMode::Stft => dft_kernel(self.frontend.n_fft),
            BankMode::Fbsp => fbsp_kernel(&self.params, self.frontend.n_fft),
        }
    }

    pub fn spectrogram_with(&self, bank: &KernelBank, wave: &Waveform) -> Result<Spectrogram> {
        let grid = self.frontend.grid()?;
        let frames = frame(wave, &grid, &self.frontend.window_spec())?;
        let x = analyze_frames(&frames, bank);
        log_power(&x, self.frontend.eps, grid, BankDescriptor::of(bank))
    }

    /// Time-averaged log-power per filter.
    pub fn features(&self, wave: &Waveform) -> Result<Vec<f64>> {
        let bank = self.bank()?;
        Ok(time_average(&self.spectrogram_with(&bank, wave)?))
    }

    pub fn predict_spectrogram(&self, spec: &Spectrogram) -> usize {
        self.head.predict(&time_average(spec))
    }

    pub fn predict(&self, wave: &Waveform) -> Result<usize> {
        Ok(self.head.predict(&self.features(wave)?))
    }

    pub fn accuracy(&self, clips: &[Example]) -> Result<f64> {
        if clips.is_empty() {
            return Ok(0.0);
        }
        let bank = self.bank()?;
        let mut correct = 0;
        for ex in clips {
            let spec = self.spectrogram_with(&bank, &ex.wave)?;
            if self.predict_spectrogram(&spec) == ex.label {
                correct += 1;
            }
        }
        Ok(correct as f64 / clips.len() as f64)
    }
}

pub(crate) fn time_average(spec: &Spectrogram) -> Vec<f64> {
    let t = spec.num_frames() as f64;
    spec.values
        .rows()
        .into_iter()
        .map(|r| r.iter().sum::<f64>() / t)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total_loss: f64,
    pub task_loss: f64,
    pub fbsp_loss: f64,
    pub accuracy: f64,
    pub m: f64,
    pub f_b: f64,
}

impl EpochRecord {
    fn is_finite(&self) -> bool {
        [
            self.total_loss,
            self.task_loss,
            self.fbsp_loss,
            self.accuracy,
            self.m,
            self.f_b,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: TrainLog,
    /// Set when training stopped on a non-finite loss; `log` then ends at the
    /// last finite epoch and `model` holds the parameters from that epoch.
    pub diverged: Option<String>,
}

/// Loss and gradients for one batch of pre-framed clips.
struct BatchEval {
    task_loss: f64,
    correct: usize,
    head_w: Vec<Vec<f64>>,
    head_b: Vec<f64>,
    /// Cotangent on the kernel, `dL = Re sum G dK`.
    kernel_cot: Option<Array2<Complex64>>,
}

fn eval_batch(
    head: &LinearHead,
    bank: &KernelBank,
    frames: &[&Array2<f64>],
    labels: &[usize],
    eps: f64,
    want_kernel: bool,
) -> BatchEval {
    let c = head.num_classes();
    let f = bank.num_filters();
    let n = bank.num_taps();
    let inv_b = 1.0 / frames.len() as f64;
    let mut out = BatchEval {
        task_loss: 0.0,
        correct: 0,
        head_w: vec![vec![0.0; f]; c],
        head_b: vec![0.0; c],
        kernel_cot: want_kernel.then(|| Array2::zeros((f, n))),
    };
    for (fr, &label) in frames.iter().zip(labels) {
        let x = analyze_frames(fr, bank);
        let t = x.ncols() as f64;
        let feats: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|z| (z.norm_sqr() + eps).ln()).sum::<f64>() / t)
            .collect();
        let z = head.standardise(&feats);
        let logits = head.logits(&feats);
        let p = softmax(&logits);
        out.task_loss -= p[label].max(f64::MIN_POSITIVE).ln() * inv_b;
        if argmax(&logits) == label {
            out.correct += 1;
        }
        let mut g_logit = p;
        g_logit[label] -= 1.0;
        for ci in 0..c {
            let g = g_logit[ci] * inv_b;
            out.head_b[ci] += g;
            for (acc, zi) in out.head_w[ci].iter_mut().zip(&z) {
                *acc += g * zi;
            }
        }
        if let Some(cot) = out.kernel_cot.as_mut() {
            // dL/dfeature_k, then through the mean over frames and the log power
            for k in 0..f {
                let g_feat: f64 = (0..c)
                    .map(|ci| g_logit[ci] * head.weights[ci][k])
                    .sum::<f64>()
                    / head.feature_scale[k]
                    * inv_b;
                if g_feat == 0.0 {
                    continue;
                }
                let mut row = cot.row_mut(k);
                for (ti, xt) in x.row(k).iter().enumerate() {
                    let coef = xt.conj() * (2.0 * g_feat / (t * (xt.norm_sqr() + eps)));
                    for (g, s) in row.iter_mut().zip(fr.row(ti)) {
                        *g += coef * *s;
                    }
                }
            }
        }
    }
    out
}

/// Nesterov momentum state for a flat parameter vector.
#[derive(Debug, Clone)]
struct Nesterov {
    velocity: Vec<f64>,
    momentum: f64,
}

impl Nesterov {
    fn new(len: usize, momentum: f64) -> Self {
        Self {
            velocity: vec![0.0; len],
            momentum,
        }
    }

    /// Returns the descent direction `g + mu * v` after updating `v`.
    fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        self.velocity
            .iter_mut()
            .zip(grad)
            .map(|(v, g)| {
                *v = self.momentum * *v + g;
                g + self.momentum * *v
            })
            .collect()
    }
}

fn flatten_bank_grad(g: &ParamGradient) -> Vec<f64> {
    let mut v = vec![g.d_m, g.d_fb];
    v.extend_from_slice(&g.d_fc);
    v
}

/// Smallest bandwidth the projection allows.
const MIN_BANDWIDTH: f64 = 1e-6;

/// Apply `params - scale * dir` with projection onto the valid domain,
/// halving the step while it lands in a singular zone.
fn step_bank(params: &FbspParams, dir: &[f64], scale: f64, n_fft: usize) -> FbspParams {
    let mut s = scale;
    for _ in 0..=20 {
        let mut p = params.clone();
        p.m = (params.m - s * dir[0]).max(0.0);
        p.f_b = (params.f_b - s * dir[1]).max(MIN_BANDWIDTH);
        let fc: Vec<f64> = params
            .f_c
            .iter()
            .zip(&dir[2..])
            .map(|(f, d)| (f - s * d).clamp(0.0, 0.5))
            .collect();
        if fc.windows(2).all(|w| w[1] > w[0]) {
            p.f_c = fc;
        }
        if check_singularity(&p, n_fft).is_ok() {
            return p;
        }
        s *= 0.5;
    }
    params.clone()
}

/// Fit head and (after the frozen warm-up) bank parameters.
pub fn train(config: &TrainConfig, corpus: &Corpus, init: &FbspParams) -> Result<TrainOutcome> {
    config.validate()?;
    init.validate()?;
    if corpus.train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let fe = config.frontend;
    let grid = fe.grid()?;
    let window = fe.window_spec();
    let n_fft = fe.n_fft;
    let classes = corpus.num_classes;
    let f = init.num_filters();

    let frame_all = |clips: &[Example], epoch: Option<usize>| -> Result<Vec<Array2<f64>>> {
        clips
            .iter()
            .enumerate()
            .map(|(i, ex)| match (&config.augment, epoch) {
                (Some(aug), Some(e)) => {
                    let cfg = AugmentConfig {
                        seed: derive_seed(aug.seed, &[e as u64, i as u64]),
                        ..aug.clone()
                    };
                    frame(&augment_pipeline(&ex.wave, &cfg)?, &grid, &window)
                }
                (Some(aug), None) => {
                    let cfg = AugmentConfig {
                        eval_mode: true,
                        ..aug.clone()
                    };
                    frame(&augment_pipeline(&ex.wave, &cfg)?, &grid, &window)
                }
                (None, _) => frame(&ex.wave, &grid, &window),
            })
            .collect()
    };
    let base_frames = frame_all(&corpus.train, None)?;
    let labels: Vec<usize> = corpus.train.iter().map(|e| e.label).collect();

    let mut params = init.clone();
    let mut model = Model {
        frontend: fe,
        mode: BankMode::Fbsp,
        params: params.clone(),
        head: LinearHead::zeros(classes, f),
    };

    // fixed standardisation from the initial bank
    {
        let bank = fbsp_kernel(&params, n_fft)?;
        let feats: Vec<Vec<f64>> = base_frames
            .iter()
            .map(|fr| {
                let x = analyze_frames(fr, &bank);
                let t = x.ncols() as f64;
                x.rows()
                    .into_iter()
                    .map(|r| r.iter().map(|z| (z.norm_sqr() + fe.eps).ln()).sum::<f64>() / t)
                    .collect()
            })
            .collect();
        let n = feats.len() as f64;
        for k in 0..f {
            let mean = feats.iter().map(|v| v[k]).sum::<f64>() / n;
            let var = feats.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / n;
            model.head.feature_mean[k] = mean;
            model.head.feature_scale[k] = var.sqrt().max(1e-3);
        }
    }

    let mut head_opt = Nesterov::new(classes * (f + 1), config.momentum);
    let mut bank_opt = Nesterov::new(f + 2, config.momentum);
    let mut log = TrainLog::default();
    let mut order: Vec<usize> = (0..corpus.train.len()).collect();
    let bank_lr = config.bank_lr.unwrap_or(config.lr);

    for epoch in 1..=config.epochs {
        let lr = config.lr * config.lr_decay.powi(epoch as i32 - 1);
        let blr = bank_lr * config.lr_decay.powi(epoch as i32 - 1);
        let frozen = epoch <= config.freeze_epochs;
        let epoch_frames;
        let frames: &[Array2<f64>] = if config.augment.is_some() {
            epoch_frames = frame_all(&corpus.train, Some(epoch))?;
            &epoch_frames
        } else {
            &base_frames
        };
        order.shuffle(&mut rng(derive_seed(config.seed, &[epoch as u64])));

        let (mut task_sum, mut fbsp_sum, mut batches) = (0.0, 0.0, 0usize);
        let prev = (model.clone(), log.clone());
        for chunk in order.chunks(config.batch_size) {
            let bank = fbsp_kernel(&params, n_fft)?;
            let fr: Vec<&Array2<f64>> = chunk.iter().map(|&i| &frames[i]).collect();
            let lb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let ev = eval_batch(&model.head, &bank, &fr, &lb, fe.eps, !frozen);
            let reg = fbsp_loss(&bank);
            task_sum += ev.task_loss;
            fbsp_sum += reg;
            batches += 1;

            // head update, weight decay on weights only
            let mut hg = Vec::with_capacity(classes * (f + 1));
            for ci in 0..classes {
                for k in 0..f {
                    hg.push(ev.head_w[ci][k] + config.weight_decay * model.head.weights[ci][k]);
                }
                hg.push(ev.head_b[ci]);
            }
            let dir = head_opt.direction(&hg);
            for ci in 0..classes {
                for k in 0..f {
                    model.head.weights[ci][k] -= lr * dir[ci * (f + 1) + k];
                }
                model.head.bias[ci] -= lr * dir[ci * (f + 1) + f];
            }

            if let Some(cot) = ev.kernel_cot {
                let mut g = kernel_jacobian_vector(&params, n_fft, &cot)?;
                if config.lambda_fbsp > 0.0 {
                    g.add_scaled(&loss_gradient(&params, n_fft)?, config.lambda_fbsp);
                }
                if !g.is_finite() {
                    return Ok(diverged(prev, epoch, "non-finite bank gradient"));
                }
                let dir = bank_opt.direction(&flatten_bank_grad(&g));
                params = step_bank(&params, &dir, blr, n_fft);
            }
        }
        model.params = params.clone();
        let task_loss = task_sum / batches as f64;
        let reg = fbsp_loss(&fbsp_kernel(&params, n_fft)?);
        let record = EpochRecord {
            epoch,
            total_loss: task_loss + config.lambda_fbsp * fbsp_sum / batches as f64,
            task_loss,
            fbsp_loss: reg,
            accuracy: model.accuracy(&corpus.val)?,
            m: params.m,
            f_b: params.f_b,
        };
        if !record.is_finite() {
            return Ok(diverged(prev, epoch, "non-finite loss"));
        }
        log.records.push(record);
    }
    Ok(TrainOutcome {
        model,
        log,
        diverged: None,
    })
}

fn diverged(prev: (Model, TrainLog), epoch: usize, why: &str) -> TrainOutcome {
    TrainOutcome {
        model: prev.0,
        log: prev.1,
        diverged: Some(format!("epoch {epoch}: {why}")),
    }
}

/// Train only the head on a fixed STFT front end.
pub fn train_stft_baseline(config: &TrainConfig, corpus: &Corpus) -> Result<TrainOutcome> {
    let cfg = TrainConfig {
        freeze_epochs: config.epochs,
        lambda_fbsp: 0.0,
        ..config.clone()
    };
    let mut out = train(&cfg, corpus, &FbspParams::stft_init(config.frontend.n_fft))?;
    out.model.mode = BankMode::Stft;
    Ok(out)
}

/// Total objective on a set of clips at fixed head, as a function of the
/// bank parameters. Used for end-to-end gradient checks.
pub fn objective(
    model: &Model,
    params: &FbspParams,
    clips: &[Example],
    lambda: f64,
) -> Result<f64> {
    let bank = fbsp_kernel(params, model.frontend.n_fft)?;
    let (frames, labels) = frames_and_labels(model, clips)?;
    let fr: Vec<&Array2<f64>> = frames.iter().collect();
    let ev = eval_batch(&model.head, &bank, &fr, &labels, model.frontend.eps, false);
    Ok(ev.task_loss + lambda * fbsp_loss(&bank))
}

/// Analytic gradient of [`objective`] with respect to the bank parameters.
pub fn objective_gradient(
    model: &Model,
    params: &FbspParams,
    clips: &[Example],
    lambda: f64,
) -> Result<ParamGradient> {
    let n_fft = model.frontend.n_fft;
    let bank = fbsp_kernel(params, n_fft)?;
    let (frames, labels) = frames_and_labels(model, clips)?;
    let fr: Vec<&Array2<f64>> = frames.iter().collect();
    let ev = eval_batch(&model.head, &bank, &fr, &labels, model.frontend.eps, true);
    let cot = ev.kernel_cot.expect("kernel cotangent requested");
    let mut g = kernel_jacobian_vector(params, n_fft, &cot)?;
    if lambda > 0.0 {
        g.add_scaled(&loss_gradient(params, n_fft)?, lambda);
    }
    Ok(g)
}

fn frames_and_labels(model: &Model, clips: &[Example]) -> Result<(Vec<Array2<f64>>, Vec<usize>)> {
    let grid = model.frontend.grid()?;
    let window = model.frontend.window_spec();
    let frames = clips
        .iter()
        .map(|ex| frame(&ex.wave, &grid, &window))
        .collect::<Result<Vec<_>>>()?;
    Ok((frames, clips.iter().map(|e| e.label).collect()))
}
