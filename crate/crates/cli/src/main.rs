mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fbsp::bank::{default_probe_count, ParamsFile};
use fbsp::grad::{check_loss_gradient, random_draw_suite, CheckStatus, GradCheckEntry, Tolerance};
use fbsp::io::{
    sidecar_path, write_frequency_response_csv, write_json, write_spectrogram_csv, write_sweep_csv,
    write_train_log_csv,
};
use fbsp::perturb::{
    add_awgn, apply_filter, design_butterworth_lowpass, robustness_sweep, SweepKind,
};
use fbsp::trainer::{make_task, train, train_stft_baseline, BankMode, Corpus, Example, Model};
use fbsp::transform::BankDescriptor;
use fbsp::wav::{read_wav, write_wav, WavFormat};
use fbsp::{dft_kernel, fbsp_kernel, frequency_response, generate, Error, KernelBank, Result};

use config::{Overrides, RunConfig};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "fbsp",
    version,
    about = "Trainable fbsp time-frequency front end"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration; a sidecar from an earlier run also works.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Stft,
    Fbsp,
}

impl From<Mode> for BankMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Stft => BankMode::Stft,
            Mode::Fbsp => BankMode::Fbsp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus (or one signal when the config has `signal`).
    Gen {
        #[command(flatten)]
        common: Common,
        /// Output directory, or WAV path for a single signal.
        #[arg(long)]
        out: PathBuf,
    },
    /// Log-power spectrogram of a WAV file as CSV (filters x frames).
    Spectrogram {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Parameter file `{m, f_b, f_c, n_fft}`.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Frequency response of a bank as CSV.
    FreqResponse {
        #[command(flatten)]
        common: Common,
        /// Parameter file `{m, f_b, f_c, n_fft}`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Analytic against finite-difference gradients; exits 3 on any mismatch.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Parameter file `{m, f_b, f_c, n_fft}`.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train bank parameters and a linear head with late unfreeze.
    Train {
        #[command(flatten)]
        common: Common,
        /// Corpus directory written by `gen`; the configured task otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Add white noise at a target SNR and/or low-pass filter a WAV file.
    Perturb {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long)]
        cutoff_hz: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Robustness sweeps for the STFT and fbsp banks side by side.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Trained model (`model.json` from `train`); trained from the config otherwise.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Numerical(_) | Error::Singularity(_) => EXIT_NUMERICAL,
        _ => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(common: &Common, mut o: Overrides) -> Result<RunConfig> {
    o.seed = common.seed;
    RunConfig::load(common.config.as_deref())?.resolve(&o)
}

fn read_params(path: &Path, o: &mut Overrides) -> Result<()> {
    let file: ParamsFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    o.params = Some(file.params()?);
    o.n_fft = Some(file.n_fft);
    Ok(())
}

/// Write `value` next to `path` as `<path>.json`.
fn sidecar(cfg: &RunConfig, path: &Path, output: serde_json::Value) -> Result<()> {
    write_json(sidecar_path(path), &cfg.sidecar(output))
}

fn bank_for(cfg: &RunConfig) -> Result<KernelBank> {
    match cfg.mode {
        BankMode::Stft => dft_kernel(cfg.frontend.n_fft),
        BankMode::Fbsp => fbsp_kernel(cfg.params(), cfg.frontend.n_fft),
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Gen { common, out } => cmd_gen(&load(&common, Overrides::default())?, &out),
        Command::Spectrogram {
            common,
            input,
            out,
            mode,
            params,
        } => {
            let mut o = Overrides {
                mode: mode.map(Into::into),
                ..Default::default()
            };
            if let Some(p) = &params {
                read_params(p, &mut o)?;
            }
            cmd_spectrogram(&load(&common, o)?, &input, &out)
        }
        Command::FreqResponse {
            common,
            input,
            out,
            mode,
        } => {
            let mut o = Overrides {
                mode: mode.map(Into::into),
                ..Default::default()
            };
            if let Some(p) = &input {
                read_params(p, &mut o)?;
            }
            cmd_freq_response(&load(&common, o)?, &out)
        }
        Command::Gradcheck { common, input, out } => {
            let mut o = Overrides::default();
            if let Some(p) = &input {
                read_params(p, &mut o)?;
            }
            cmd_gradcheck(&load(&common, o)?, &out)
        }
        Command::Train { common, input, out } => cmd_train(
            &load(&common, Overrides::default())?,
            input.as_deref(),
            &out,
        ),
        Command::Perturb {
            common,
            input,
            out,
            snr_db,
            cutoff_hz,
            order,
        } => {
            let o = Overrides {
                snr_db,
                cutoff_hz,
                order,
                ..Default::default()
            };
            cmd_perturb(&load(&common, o)?, &input, &out)
        }
        Command::Sweep { common, input, out } => cmd_sweep(
            &load(&common, Overrides::default())?,
            input.as_deref(),
            &out,
        ),
    }
}

const LABELS_FILE: &str = "labels.csv";

fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<u8> {
    if let Some(sig) = &cfg.signal {
        let wave = generate(&sig.generator, sig.duration, sig.sample_rate, cfg.seed)?;
        write_wav(out, &wave, sig.format)?;
        sidecar(cfg, out, json!({"kind": "signal", "samples": wave.len()}))?;
        return Ok(0);
    }
    let corpus = make_task(cfg.task())?;
    fs::create_dir_all(out)?;
    let mut labels = String::from("file,split,label\n");
    for (split, clips) in [("train", &corpus.train), ("val", &corpus.val)] {
        for (i, ex) in clips.iter().enumerate() {
            let name = format!("{split}_{i:04}.wav");
            let path = out.join(&name);
            write_wav(&path, &ex.wave, WavFormat::Float32)?;
            sidecar(
                cfg,
                &path,
                json!({"kind": "clip", "split": split, "index": i, "label": ex.label}),
            )?;
            labels.push_str(&format!("{name},{split},{}\n", ex.label));
        }
    }
    let labels_path = out.join(LABELS_FILE);
    fs::write(&labels_path, labels)?;
    sidecar(
        cfg,
        &labels_path,
        json!({"kind": "labels", "train": corpus.train.len(), "val": corpus.val.len(), "classes": corpus.num_classes}),
    )?;
    println!(
        "wrote {} train and {} val clips to {}",
        corpus.train.len(),
        corpus.val.len(),
        out.display()
    );
    Ok(0)
}

fn read_corpus(dir: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(dir.join(LABELS_FILE))?;
    let mut corpus = Corpus {
        train: vec![],
        val: vec![],
        num_classes: 0,
    };
    for (i, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let [file, split, label] = fields[..] else {
            return Err(Error::Validation(format!(
                "{LABELS_FILE} line {}: expected 3 fields",
                i + 1
            )));
        };
        let label: usize = label.trim().parse().map_err(|_| {
            Error::Validation(format!("{LABELS_FILE} line {}: bad label {label:?}", i + 1))
        })?;
        let ex = Example {
            wave: read_wav(dir.join(file))?,
            label,
        };
        corpus.num_classes = corpus.num_classes.max(label + 1);
        match split {
            "train" => corpus.train.push(ex),
            "val" => corpus.val.push(ex),
            other => {
                return Err(Error::Validation(format!(
                    "{LABELS_FILE} line {}: unknown split {other:?}",
                    i + 1
                )))
            }
        }
    }
    Ok(corpus)
}

fn cmd_spectrogram(cfg: &RunConfig, input: &Path, out: &Path) -> Result<u8> {
    let wave = read_wav(input)?;
    let bank = bank_for(cfg)?;
    let model = Model {
        frontend: cfg.frontend,
        mode: cfg.mode,
        params: cfg.params().clone(),
        head: empty_head(),
    };
    let spec = model.spectrogram_with(&bank, &wave)?;
    write_spectrogram_csv(out, &spec)?;
    sidecar(
        cfg,
        out,
        json!({
            "kind": "spectrogram",
            "input": input,
            "filters": spec.num_filters(),
            "frames": spec.num_frames(),
            "eps": spec.eps,
            "grid": spec.grid,
            "bank": BankDescriptor::of(&bank),
            "sample_rate": wave.sample_rate(),
        }),
    )?;
    Ok(0)
}

fn empty_head() -> fbsp::trainer::LinearHead {
    fbsp::trainer::LinearHead {
        weights: vec![],
        bias: vec![],
        feature_mean: vec![],
        feature_scale: vec![],
    }
}

fn cmd_freq_response(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let bank = bank_for(cfg)?;
    let n = cfg.frontend.n_fft;
    let probes = cfg.probes.unwrap_or_else(|| default_probe_count(n));
    let resp = frequency_response(&bank, &cfg.frontend.window_spec(), probes)?;
    write_frequency_response_csv(out, &resp)?;
    let ratio = resp.flatness_ratio(0.02, 0.48);
    let top = resp.band_attenuation_db(0.375, 0.5);
    sidecar(
        cfg,
        out,
        json!({
            "kind": "frequency_response",
            "bank": BankDescriptor::of(&bank),
            "probes": probes,
            "flatness_ratio": ratio,
            "top_quartile_attenuation_db": top,
        }),
    )?;
    println!(
        "max/min of max-gain over (0.02, 0.48): {ratio:.6}; top-quartile attenuation {top:.3} dB"
    );
    Ok(0)
}

fn cmd_gradcheck(cfg: &RunConfig, out: &Path) -> Result<u8> {
    let tol = Tolerance::default();
    let gc = &cfg.gradcheck;
    let mut report: Vec<GradCheckEntry> =
        check_loss_gradient(cfg.params(), cfg.frontend.n_fft, gc.step, tol)?;
    if gc.draws > 0 {
        report.extend(random_draw_suite(
            cfg.seed, gc.draws, gc.n_taps, gc.step, tol,
        )?);
    }
    write_json(out, &report)?;
    let failed = report
        .iter()
        .filter(|e| e.status == CheckStatus::Fail)
        .count();
    sidecar(
        cfg,
        out,
        json!({"kind": "gradcheck", "checks": report.len(), "failed": failed}),
    )?;
    for e in report
        .iter()
        .filter(|e| e.status == CheckStatus::Fail)
        .take(20)
    {
        eprintln!(
            "mismatch {}: analytic {} numeric {} (rel {:.2e})",
            e.param, e.analytic, e.numeric, e.rel_error
        );
    }
    println!("{} checks, {failed} failed", report.len());
    Ok(if failed == 0 { 0 } else { EXIT_NUMERICAL })
}

fn corpus_for(cfg: &RunConfig, input: Option<&Path>) -> Result<Corpus> {
    match input {
        Some(dir) => read_corpus(dir),
        None => make_task(cfg.task()),
    }
}

fn cmd_train(cfg: &RunConfig, input: Option<&Path>, out: &Path) -> Result<u8> {
    let corpus = corpus_for(cfg, input)?;
    let outcome = train(&cfg.train_config(), &corpus, cfg.params())?;
    fs::create_dir_all(out)?;
    let n_fft = cfg.frontend.n_fft;
    let params_path = out.join("params.json");
    write_json(&params_path, &ParamsFile::new(&outcome.model.params, n_fft))?;
    sidecar(cfg, &params_path, json!({"kind": "params"}))?;
    let log_path = out.join("log.csv");
    write_train_log_csv(&log_path, &outcome.log)?;
    sidecar(
        cfg,
        &log_path,
        json!({"kind": "train_log", "epochs": outcome.log.records.len()}),
    )?;
    let model_path = out.join("model.json");
    write_json(&model_path, &outcome.model)?;
    sidecar(
        cfg,
        &model_path,
        json!({"kind": "model", "diverged": outcome.diverged}),
    )?;
    if let Some(last) = outcome.log.records.last() {
        println!(
            "epoch {}: loss {:.6}, val accuracy {:.3}, m {}, f_b {:.6}",
            last.epoch, last.total_loss, last.accuracy, last.m, last.f_b
        );
    }
    match outcome.diverged {
        Some(why) => {
            eprintln!("error: training diverged at {why}");
            Ok(EXIT_NUMERICAL)
        }
        None => Ok(0),
    }
}

fn cmd_perturb(cfg: &RunConfig, input: &Path, out: &Path) -> Result<u8> {
    let p = &cfg.perturb;
    if p.snr_db.is_none() && p.cutoff_hz.is_none() {
        return Err(Error::Validation(
            "perturb needs --snr-db and/or --cutoff-hz".into(),
        ));
    }
    let mut wave = read_wav(input)?;
    if let Some(cutoff) = p.cutoff_hz {
        let filter = design_butterworth_lowpass(cfg.filter_order(), cutoff, wave.sample_rate())?;
        wave = apply_filter(&filter, &wave)?;
    }
    if let Some(snr) = p.snr_db {
        wave = add_awgn(&wave, snr, cfg.seed)?;
    }
    write_wav(out, &wave, WavFormat::Float32)?;
    sidecar(cfg, out, json!({"kind": "perturbed", "input": input}))?;
    Ok(0)
}

fn cmd_sweep(cfg: &RunConfig, input: Option<&Path>, out: &Path) -> Result<u8> {
    let corpus = make_task(cfg.task())?;
    let fbsp_model: Model = match input {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => train(&cfg.train_config(), &corpus, cfg.params())?.model,
    };
    let stft_model = train_stft_baseline(&cfg.train_config(), &corpus)?.model;
    fs::create_dir_all(out)?;
    let axes = [
        (SweepKind::Awgn, "awgn", cfg.snr_axis()),
        (SweepKind::Lowpass, "lowpass", cfg.cutoff_axis()),
    ];
    for (kind, name, axis) in axes {
        for (label, model) in [("stft", &stft_model), ("fbsp", &fbsp_model)] {
            let result = robustness_sweep(kind, &axis, model, &corpus.val, cfg.seed)?;
            let path = out.join(format!("sweep_{name}_{label}.csv"));
            write_sweep_csv(&path, &result)?;
            sidecar(
                cfg,
                &path,
                json!({"kind": "sweep", "perturbation": name, "bank": label}),
            )?;
            let summary: Vec<String> = result
                .axis
                .iter()
                .zip(&result.accuracy)
                .map(|(a, acc)| format!("{a}:{acc:.2}"))
                .collect();
            println!("{name} {label}: {}", summary.join(" "));
        }
    }
    Ok(0)
}
