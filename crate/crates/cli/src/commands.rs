use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use spiketrum::baselines::{mel_spectrogram, som_train, spectrogram_encode, LauscherConfig, LauscherEncoder, MelConfig, SomConfig};
use spiketrum::io::config::{ConfigFile, Overrides, Settings};
use spiketrum::io::format::{read_codes, read_events, sniff, write_codes, write_events, CodeFile, FileKind};
use spiketrum::io::levels::{read_levels, write_levels};
use spiketrum::io::probe::{label_from_path, probe_eval, probe_train};
use spiketrum::io::wav::{load_audio, write_wav};
use spiketrum::io::write_atomic;
use spiketrum::kernel_bank::{linear_fft_size, BankParams};
use spiketrum::{
    compute_metrics, reconstruct_from_codes, reconstruction_report, EncodedStream, EncoderConfig, Error, EventStream,
    LevelTable, MetricsReport, Spiketrum,
};

use crate::{Cli, Command, EncoderFlags, ReportFormat};

type Result<T> = spiketrum::Result<T>;

/// 1 for configuration problems, 2 for data and format errors.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        _ => 2,
    }
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    path.map_or_else(|| Ok(ConfigFile::default()), ConfigFile::load)
}

fn overrides(flags: &EncoderFlags) -> Overrides {
    Overrides {
        sps: flags.sps,
        sample_rate: flags.sample_rate,
        levels: flags.levels.clone(),
        ..Overrides::default()
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn with_extension(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Expands directories to the WAV files below them, sorted.
fn collect_wavs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
        for entry in entries {
            let path = entry.map_err(|e| Error::Io { path: dir.into(), source: e })?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")) {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found = Vec::new();
            walk(input, &mut found)?;
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::EmptyInput("no WAV files found".into()));
    }
    Ok(files)
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report serializes")
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match output {
        Some(path) => write_atomic(path, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| Error::Io { path: "<stdout>".into(), source: e }),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Encode { input, output, encoder } => encode(&file, &encoder, &input, &output),
        Command::Decode { input, output, reference, report, encoder } => {
            decode(&file, &encoder, &input, &output, reference.as_deref(), report.as_deref())
        }
        Command::Calibrate { inputs, output, encoder, jobs } => {
            let settings = Settings::resolve(&file, &Overrides { jobs, ..overrides(&encoder) })?;
            let st = Spiketrum::new(settings.encoder.clone())?;
            let files = collect_wavs(&inputs)?;
            let encoded = pool(settings.jobs)?.install(|| encode_files(&st, &files))?;
            let table = st.calibrate(&encoded)?;
            write_levels(&output, &table)
        }
        Command::Metrics { inputs, bin_width, binarize, format, output } => {
            let flags = Overrides { bin_width, binarize: binarize.then_some(true), ..Overrides::default() };
            let settings = Settings::resolve(&file, &flags)?;
            metrics(&settings, &inputs, format, output.as_deref())
        }
        Command::Bench { inputs, output, encoder, jobs, seed } => {
            let settings = Settings::resolve(&file, &Overrides { jobs, seed, ..overrides(&encoder) })?;
            bench(&settings, &inputs, &output)
        }
        Command::DumpBank { output, sample_rate } => {
            let settings = Settings::resolve(&file, &Overrides { sample_rate, ..Overrides::default() })?;
            dump_bank(&settings.encoder, output.as_deref())
        }
        Command::Probe { train, test, encoder, jobs } => {
            let settings = Settings::resolve(&file, &Overrides { jobs, ..overrides(&encoder) })?;
            probe(&settings, &train, &test)
        }
    }
}

fn encode_files(st: &Spiketrum, files: &[PathBuf]) -> Result<Vec<EncodedStream>> {
    let rate = st.config().sample_rate;
    files.par_iter().map(|f| st.encode(&load_audio(f, rate)?)).collect()
}

#[derive(Debug, Serialize)]
struct EncodeReport {
    input: String,
    sample_rate: u32,
    sps: usize,
    segment_len: usize,
    n_samples: usize,
    duration: usize,
    segments: usize,
    code_count: usize,
    event_count: usize,
    collisions: usize,
    early_stops: usize,
    input_energy: f64,
    residual_energy: f64,
    residual_energy_fraction: f64,
    levels: String,
}

fn encode(file: &ConfigFile, flags: &EncoderFlags, input: &Path, output: &Path) -> Result<()> {
    let settings = Settings::resolve(file, &overrides(flags))?;
    let st = Spiketrum::new(settings.encoder.clone())?;
    let signal = load_audio(input, settings.encoder.sample_rate)?;
    let encoded = st.encode(&signal)?;
    let (table, levels_path) = match &settings.levels {
        Some(path) => (read_levels(path)?, path.clone()),
        None => {
            let path = with_extension(output, "levels.csv");
            let table = st.calibrate([&encoded])?;
            write_levels(&path, &table)?;
            (table, path)
        }
    };
    let itp = st.to_events(&encoded, &table)?;
    write_codes(
        &with_extension(output, "codes"),
        &CodeFile {
            n_kernels: st.bank().len() as u32,
            sample_rate: settings.encoder.sample_rate,
            segment_len: settings.encoder.segment_len as u32,
            duration: encoded.duration() as u64,
            codes: encoded.codes().copied().collect(),
        },
    )?;
    write_events(&with_extension(output, "events"), &itp.stream, 0)?;
    let report = EncodeReport {
        input: input.display().to_string(),
        sample_rate: settings.encoder.sample_rate,
        sps: settings.encoder.sps,
        segment_len: settings.encoder.segment_len,
        n_samples: encoded.n_samples,
        duration: encoded.duration(),
        segments: encoded.segments.len(),
        code_count: encoded.code_count(),
        event_count: itp.stream.len(),
        collisions: itp.collisions,
        early_stops: encoded.early_stops(settings.encoder.sps),
        input_energy: encoded.input_energy(),
        residual_energy: encoded.residual_energy(),
        residual_energy_fraction: encoded.residual_energy_fraction(),
        levels: levels_path.display().to_string(),
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    write_atomic(&with_extension(output, "report.json"), json.as_bytes())
}

/// Encoder settings adjusted to the geometry stored in a file header.
fn config_for(settings: &Settings, sample_rate: u32, segment_len: Option<usize>) -> EncoderConfig {
    let base = &settings.encoder;
    let segment_len = segment_len.unwrap_or(base.segment_len);
    if base.sample_rate == sample_rate && base.segment_len == segment_len {
        return base.clone();
    }
    EncoderConfig {
        sample_rate,
        segment_len,
        bank: BankParams {
            sample_rate,
            fft_size: linear_fft_size(segment_len, base.bank.max_len),
            ..base.bank.clone()
        },
        ..base.clone()
    }
}

#[derive(Debug, Serialize)]
struct DecodeReport {
    input: String,
    output: String,
    kind: &'static str,
    duration: usize,
    rmse: Option<f64>,
    snr_db: Option<f64>,
    residual_energy_fraction: Option<f64>,
}

fn decode(
    file: &ConfigFile,
    flags: &EncoderFlags,
    input: &Path,
    output: &Path,
    reference: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let settings = Settings::resolve(file, &overrides(flags))?;
    let bytes = std::fs::read(input).map_err(|e| Error::Io { path: input.into(), source: e })?;
    let (kind, sample_rate, recon) = match sniff(&bytes) {
        Some(FileKind::Codes) => {
            let codes = read_codes(input)?;
            let st = Spiketrum::new(config_for(&settings, codes.sample_rate, Some(codes.segment_len as usize)))?;
            if st.bank().len() != codes.n_kernels as usize {
                return Err(Error::Contract(format!(
                    "file uses {} kernels, configured bank has {}",
                    codes.n_kernels,
                    st.bank().len()
                )));
            }
            let recon = reconstruct_from_codes(&codes.codes, st.bank(), codes.segment_len as usize, codes.duration as usize)?;
            ("codes", codes.sample_rate, recon)
        }
        Some(FileKind::Events) => {
            let events = read_events(input)?.stream;
            let levels = settings
                .levels
                .as_ref()
                .ok_or_else(|| Error::Config("decoding events needs a level table (--levels)".into()))?;
            let table = read_levels(levels)?;
            let st = Spiketrum::new(config_for(&settings, events.sample_rate, None))?;
            let recon = st.reconstruct_events(&events, &table)?;
            ("events", events.sample_rate, recon)
        }
        None => {
            return Err(spiketrum::FormatError::BadMagic {
                expected: *b"SPKC",
                found: bytes.get(..4).and_then(|b| b.try_into().ok()).unwrap_or_default(),
            }
            .into())
        }
    };
    write_wav(output, &recon, sample_rate)?;

    let mut report = DecodeReport {
        input: input.display().to_string(),
        output: output.display().to_string(),
        kind,
        duration: recon.len(),
        rmse: None,
        snr_db: None,
        residual_energy_fraction: None,
    };
    if let Some(reference) = reference {
        let mut original = load_audio(reference, sample_rate)?;
        if original.len() > recon.len() {
            return Err(Error::Contract(format!(
                "reference has {} samples, reconstruction covers {}",
                original.len(),
                recon.len()
            )));
        }
        original.resize(recon.len(), 0.0);
        let r = reconstruction_report(&original, &recon)?;
        report.rmse = Some(r.rmse);
        report.snr_db = Some(r.snr_db);
        report.residual_energy_fraction = Some(r.residual_energy_fraction);
    }
    let mut line = to_json_line(&report);
    line.push('\n');
    if let Some(path) = report_path {
        write_atomic(path, line.as_bytes())?;
    }
    emit(None, line.as_bytes())
}

#[derive(Debug, Serialize)]
struct MetricsRow {
    file: String,
    spike_count: u64,
    n_channels: usize,
    n_bins: usize,
    bin_width: f64,
    sparsity_pct: f64,
    mean_channel_entropy: f64,
    population_entropy: f64,
    information_gain: f64,
}

impl MetricsRow {
    fn new(file: &Path, r: &MetricsReport) -> Self {
        MetricsRow {
            file: file.display().to_string(),
            spike_count: r.spike_count,
            n_channels: r.n_channels,
            n_bins: r.n_bins,
            bin_width: r.bin_width,
            sparsity_pct: r.sparsity_pct,
            mean_channel_entropy: r.per_channel_entropy.iter().sum::<f64>() / r.n_channels.max(1) as f64,
            population_entropy: r.population_entropy,
            information_gain: r.information_gain,
        }
    }
}

fn metrics(settings: &Settings, inputs: &[PathBuf], format: ReportFormat, output: Option<&Path>) -> Result<()> {
    let reports = inputs
        .iter()
        .map(|p| compute_metrics(&read_events(p)?.stream, settings.bin_width, settings.binarize))
        .collect::<Result<Vec<_>>>()?;
    let bytes = match format {
        ReportFormat::Jsonl => {
            let mut out = String::new();
            for (p, r) in inputs.iter().zip(&reports) {
                #[derive(Serialize)]
                struct Line<'a> {
                    file: String,
                    #[serde(flatten)]
                    report: &'a MetricsReport,
                }
                out += &to_json_line(&Line { file: p.display().to_string(), report: r });
                out.push('\n');
            }
            out.into_bytes()
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for (p, r) in inputs.iter().zip(&reports) {
                w.serialize(MetricsRow::new(p, r)).expect("in-memory csv");
            }
            w.into_inner().expect("in-memory csv")
        }
    };
    emit(output, &bytes)
}

#[derive(Debug, Serialize)]
struct BenchRow {
    encoder: &'static str,
    channels: u32,
    spikes_per_sample: f64,
    sparsity: f64,
    entropy: f64,
    gain: f64,
    encode_time: f64,
}

fn summarize(encoder: &'static str, streams: &[EventStream], samples: usize, seconds: f64, settings: &Settings) -> Result<BenchRow> {
    let reports = streams
        .par_iter()
        .map(|s| compute_metrics(s, settings.bin_width, settings.binarize))
        .collect::<Result<Vec<_>>>()?;
    let n = reports.len() as f64;
    Ok(BenchRow {
        encoder,
        channels: streams.first().map_or(0, |s| s.n_channels),
        spikes_per_sample: streams.iter().map(EventStream::len).sum::<usize>() as f64 / samples as f64,
        sparsity: reports.iter().map(|r| r.sparsity_pct).sum::<f64>() / n,
        entropy: reports.iter().map(|r| r.population_entropy).sum::<f64>() / n,
        gain: reports.iter().map(|r| r.information_gain).sum::<f64>() / n,
        encode_time: seconds,
    })
}

fn bench(settings: &Settings, inputs: &[PathBuf], output: &Path) -> Result<()> {
    let files = collect_wavs(inputs)?;
    let rate = settings.encoder.sample_rate;
    pool(settings.jobs)?.install(|| {
        let clips = files.par_iter().map(|f| load_audio(f, rate)).collect::<Result<Vec<_>>>()?;
        let samples: usize = clips.iter().map(Vec::len).sum();
        let mut rows = Vec::new();

        let mel = MelConfig::new(rate);
        let start = Instant::now();
        let frames: Vec<Vec<f64>> = clips.iter().flat_map(|x| mel_spectrogram(x, &mel)).collect();
        let codebook = som_train(&frames, &SomConfig { seed: settings.seed, ..SomConfig::default() })?;
        let spec = clips
            .par_iter()
            .map(|x| spectrogram_encode(x, &codebook, &mel))
            .collect::<Result<Vec<_>>>()?;
        rows.push(summarize("spectrogram", &spec, samples, start.elapsed().as_secs_f64(), settings)?);

        let start = Instant::now();
        let st = Spiketrum::new(settings.encoder.clone())?;
        let encoded = clips.par_iter().map(|x| st.encode(x)).collect::<Result<Vec<_>>>()?;
        let table: LevelTable = match &settings.levels {
            Some(path) => read_levels(path)?,
            None => st.calibrate(&encoded)?,
        };
        let events = encoded
            .iter()
            .map(|e| Ok(st.to_events(e, &table)?.stream))
            .collect::<Result<Vec<_>>>()?;
        rows.push(summarize("spiketrum", &events, samples, start.elapsed().as_secs_f64(), settings)?);

        let start = Instant::now();
        let lauscher = LauscherEncoder::new(&LauscherConfig::default(), rate)?;
        let events: Vec<EventStream> = clips.par_iter().map(|x| lauscher.encode(x)).collect();
        rows.push(summarize("lauscher", &events, samples, start.elapsed().as_secs_f64(), settings)?);

        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).expect("in-memory csv");
        }
        write_atomic(output, &w.into_inner().expect("in-memory csv"))
    })
}

fn dump_bank(config: &EncoderConfig, output: Option<&Path>) -> Result<()> {
    let st = Spiketrum::new(config.clone())?;
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let header = ["index", "center_freq", "effective_len", "samples..."];
    w.write_record(header).expect("in-memory csv");
    for k in st.bank().kernels() {
        let mut record = vec![k.index.to_string(), k.center_freq.to_string(), k.effective_len.to_string()];
        record.extend(k.support().iter().map(f64::to_string));
        w.write_record(&record).expect("in-memory csv");
    }
    emit(output, &w.into_inner().expect("in-memory csv"))
}

fn probe(settings: &Settings, train: &[PathBuf], test: &[PathBuf]) -> Result<()> {
    let st = Spiketrum::new(settings.encoder.clone())?;
    let labelled = |inputs: &[PathBuf]| -> Result<(Vec<String>, Vec<EncodedStream>)> {
        let files = collect_wavs(inputs)?;
        let labels = files
            .iter()
            .map(|f| label_from_path(f).ok_or_else(|| Error::Contract(format!("no label in file name {}", f.display()))))
            .collect::<Result<Vec<_>>>()?;
        Ok((labels, encode_files(&st, &files)?))
    };
    let ((train_labels, train_enc), (test_labels, test_enc)) =
        pool(settings.jobs)?.install(|| Ok::<_, Error>((labelled(train)?, labelled(test)?)))?;
    let table = match &settings.levels {
        Some(path) => read_levels(path)?,
        None => st.calibrate(&train_enc)?,
    };
    let events = |enc: &[EncodedStream]| -> Result<Vec<EventStream>> { enc.iter().map(|e| Ok(st.to_events(e, &table)?.stream)).collect() };
    let (train_ev, test_ev) = (events(&train_enc)?, events(&test_enc)?);
    let model = probe_train(train_labels.iter().map(String::as_str).zip(&train_ev))?;
    let accuracy = probe_eval(&model, test_labels.iter().map(String::as_str).zip(&test_ev))?;
    #[derive(Serialize)]
    struct ProbeReport {
        classes: usize,
        train: usize,
        test: usize,
        accuracy: f64,
    }
    let mut line = to_json_line(&ProbeReport {
        classes: model.labels.len(),
        train: train_ev.len(),
        test: test_ev.len(),
        accuracy,
    });
    line.push('\n');
    emit(None, line.as_bytes())
}
