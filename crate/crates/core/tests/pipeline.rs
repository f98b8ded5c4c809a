use fbsp::bank::ParamsFile;
use fbsp::trainer::{make_task, train, TaskSpec, TrainConfig};
use fbsp::wav::{read_wav, write_wav, WavFormat};
use fbsp::{
    dft_kernel, fbsp_kernel, generate, spectrogram, FbspParams, FrameGrid, Generator, WindowSpec,
};

use tempfile::TempDir;

fn chirp() -> fbsp::Waveform {
    let gen = Generator::Chirp {
        f0: 100.0,
        f1: 3500.0,
        amplitude: 0.7,
    };
    generate(&gen, 0.5, 8000, 1).unwrap()
}

#[test]
fn float_wav_round_trip_keeps_the_spectrogram() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("x.wav");
    // float32 storage: quantise once, then the round trip is exact
    let x = chirp();
    write_wav(&path, &x, WavFormat::Float32).unwrap();
    let once = read_wav(&path).unwrap();
    write_wav(&path, &once, WavFormat::Float32).unwrap();
    let twice = read_wav(&path).unwrap();
    assert_eq!(once, twice);
    assert!(x
        .samples()
        .iter()
        .zip(once.samples())
        .all(|(a, b)| (a - b).abs() < 1e-7));

    let grid = FrameGrid::new(128, 64).unwrap();
    let win = WindowSpec::hann(128);
    let bank = fbsp_kernel(&FbspParams::stft_init(128), 128).unwrap();
    let a = spectrogram(&once, &bank, &grid, &win, 1e-10).unwrap();
    let b = spectrogram(&twice, &bank, &grid, &win, 1e-10).unwrap();
    assert_eq!(a.values, b.values);
}

#[test]
fn pcm16_round_trip_within_quantisation() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("x.wav");
    let x = chirp();
    write_wav(&path, &x, WavFormat::Pcm16).unwrap();
    let y = read_wav(&path).unwrap();
    assert_eq!(y.len(), x.len());
    assert_eq!(y.sample_rate(), 8000);
    let worst = x
        .samples()
        .iter()
        .zip(y.samples())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1.0 / 32768.0, "worst {worst}");
}

#[test]
fn params_file_rebuilds_the_same_bank() {
    let p = FbspParams::new(1.25, 0.8, vec![0.0, 0.1, 0.33, 0.5]).unwrap();
    let text = serde_json::to_string(&ParamsFile::new(&p, 32)).unwrap();
    let back: ParamsFile = serde_json::from_str(&text).unwrap();
    assert_eq!(back.n_fft, 32);
    assert_eq!(back.params().unwrap(), p);
    assert_eq!(
        fbsp_kernel(&back.params().unwrap(), 32).unwrap(),
        fbsp_kernel(&p, 32).unwrap()
    );
}

#[test]
fn init_bank_and_dft_agree_on_generated_audio() {
    let x = chirp();
    for (n, hop) in [(64usize, 16usize), (256, 64)] {
        let grid = FrameGrid::new(n, hop).unwrap();
        let win = WindowSpec::hann(n);
        let a = spectrogram(
            &x,
            &fbsp_kernel(&FbspParams::stft_init(n), n).unwrap(),
            &grid,
            &win,
            1e-10,
        )
        .unwrap();
        let b = spectrogram(&x, &dft_kernel(n).unwrap(), &grid, &win, 1e-10).unwrap();
        let worst = (&a.values - &b.values)
            .iter()
            .fold(0.0f64, |m, d| m.max(d.abs()));
        assert!(worst < 1e-10, "n {n}: {worst}");
    }
}

#[test]
fn training_lowers_the_loss_across_seeds() {
    for seed in 0..5 {
        let corpus = make_task(&TaskSpec::three_class(100 + seed, 12)).unwrap();
        let cfg = TrainConfig {
            epochs: 8,
            lr: 0.02,
            bank_lr: Some(1e-3),
            freeze_epochs: 2,
            batch_size: 8,
            seed,
            ..Default::default()
        };
        let out = train(&cfg, &corpus, &FbspParams::stft_init(64)).unwrap();
        assert!(out.diverged.is_none());
        let first = out.log.records.first().unwrap().total_loss;
        let last = out.log.records.last().unwrap().total_loss;
        assert!(last < first, "seed {seed}: {first} -> {last}");
    }
}
