// SPDX-License-Identifier: Apache-2.0

//! The `efab` command line: the counter, loopback and classification
//! experiments plus training, compilation and data generation.
//!
//! Exit codes: 0 success, 1 assertion or equivalence failure (including
//! any failed flow stage), 2 usage or I/O error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use efab_core::cad::{designs, run_flow};
use efab_core::sim::{self, linear_fit, FabricState};
use efab_core::{census, FabricLayout};
use efab_link::{run_loopback, FaultSchedule, LoopbackConfig, ReadyPattern};
use efab_ml::dataset::synth_tracks;
use efab_ml::{
    auc, evaluate, quantize, quantize_features, read_samples, roc_csv, roc_curve, roc_svg, split_dataset,
    synth_dataset, train_tree, write_tracks, Classifier, EvalReport, MlError, Sample, TrainOptions, TreeModel,
};
use efab_treec::{compile_tree, equivalence_check, estimate_resources, CompiledTree, FitReport, Vector};
use log::{info, warn};
use thiserror::Error;

/// Frequencies of the modeled power sweep, MHz.
pub const SWEEP_MHZ: [f64; 7] = [10.0, 25.0, 50.0, 100.0, 125.0, 200.0, 250.0];

/// Energy per toggle assumed by the power proxy. Only the shape of the
/// curve is meaningful; the scale is arbitrary.
pub const JOULES_PER_TOGGLE: f64 = 1e-15;

/// Clock of the latency figure reported for compiled trees.
pub const TIMING_TARGET_MHZ: f64 = 200.0;

#[derive(Debug, Parser)]
#[command(name = "efab", version, about = "eFPGA fabric, readout link and pixel-classifier experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the resource census of a layout.
    Census(CensusArgs),
    /// Run the 16-bit counter on the simulated fabric.
    Counter(CounterArgs),
    /// Stream PRBS frames through the link and the loopback firmware.
    Loopback(LoopbackArgs),
    /// Train or import a tree, evaluate it, compile it and check the fabric against it.
    Classify(ClassifyArgs),
    /// Train a tree and export it as JSON.
    Train(TrainArgs),
    /// Compile a tree to a netlist and report its fit.
    Compile(CompileArgs),
    /// Write synthetic tracks.
    SynthData(SynthArgs),
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    /// Bundled layout name (cmos28, cmos130) or a layout file.
    #[arg(long, default_value = "cmos28")]
    pub layout: String,
}

#[derive(Debug, Args)]
pub struct CounterArgs {
    #[arg(long, default_value = "cmos28")]
    pub layout: String,
    #[arg(long, default_value_t = 100_000)]
    pub cycles: u64,
    /// Placement seed.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Flip one bit of the bitstream image before loading it.
    #[arg(long)]
    pub corrupt_bitstream: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LoopbackArgs {
    #[arg(long, default_value = "cmos28")]
    pub layout: String,
    #[arg(long, default_value_t = 1000)]
    pub frames: u64,
    /// Payload octets per frame.
    #[arg(long, default_value_t = 256)]
    pub frame_len: usize,
    /// File of `frame bit` pairs to flip on the return leg.
    #[arg(long)]
    pub faults: Option<PathBuf>,
    /// Seeds placement, the PRBS generator and the backpressure pattern.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Probability that the sink is ready on a cycle; 1 disables backpressure.
    #[arg(long, default_value_t = 0.75)]
    pub ready_probability: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Track or profile file (plain or gzip). Synthetic tracks when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Number of synthetic tracks.
    #[arg(long, default_value_t = 10_000)]
    pub tracks: usize,
    /// Seeds data generation, the train/test split and placement.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Exported tree JSON; evaluated on the whole dataset. Otherwise a
    /// tree is trained on 80% and evaluated on the rest.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Probability of signal at or above which a track is kept.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "cmos28")]
    pub layout: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Grow best-first to this many leaves.
    #[arg(long, default_value_t = 10)]
    pub max_leaves: usize,
    /// Where to write the model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// Exported tree JSON. The synthetic reference tree when absent.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value = "cmos28")]
    pub layout: String,
    /// Seed of the reference tree.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10_000)]
    pub tracks: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output file; a `.gz` extension compresses.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {msg}", path.display())]
    Input { path: PathBuf, msg: String },
    /// A pipeline stage failed.
    #[error("{stage} failed: {msg}")]
    Stage { stage: &'static str, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Stage { .. } => 1,
            _ => 2,
        }
    }
}

fn stage<E: std::fmt::Display>(stage: &'static str) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Stage { stage, msg: e.to_string() }
}

/// What a command printed and whether its checks held.
#[derive(Debug, Default)]
pub struct Outcome {
    pub text: String,
    pub passed: bool,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed { 0 } else { 1 }
    }
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Census(a) => cmd_census(&a),
        Command::Counter(a) => cmd_counter(&a),
        Command::Loopback(a) => cmd_loopback(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Compile(a) => cmd_compile(&a),
        Command::SynthData(a) => cmd_synth(&a),
    }
}

/// A bundled name, or a path when a file of that name exists.
pub fn resolve_layout(arg: &str) -> Result<FabricLayout, CliError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        return FabricLayout::parse(&text).map_err(|e| CliError::Input { path: path.into(), msg: e.to_string() });
    }
    match FabricLayout::bundled(arg) {
        Ok(l) => Ok(l),
        Err(_) if arg.contains(['/', '.']) => Err(CliError::Usage(format!("layout file {arg} does not exist"))),
        Err(e) => Err(CliError::Usage(format!("{e}; bundled layouts are cmos28 and cmos130"))),
    }
}

fn write_file(out: &mut Outcome, dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io { path: path.clone(), source })?;
    info!("wrote {}", path.display());
    out.files.push(path);
    Ok(())
}

pub fn cmd_census(a: &CensusArgs) -> Result<Outcome, CliError> {
    let layout = resolve_layout(&a.layout)?;
    let c = census(&layout);
    Ok(Outcome { text: format!("layout {}\n{c}\n", a.layout), passed: true, files: vec![] })
}

pub fn cmd_counter(a: &CounterArgs) -> Result<Outcome, CliError> {
    let layout = resolve_layout(&a.layout)?;
    let nl = designs::counter16();
    let flow = run_flow(&nl, &layout, a.seed).map_err(stage("place-and-route"))?;
    let mut image = flow.image.clone();
    if a.corrupt_bitstream {
        let mid = image.len() / 2;
        image[mid] ^= 0x10;
    }
    let mut fabric = sim::load(&layout, &image).map_err(stage("bitstream load"))?;
    let pins: Vec<_> = (0..16)
        .map(|i| flow.ports.output(&format!("count[{i}]")).expect("counter output is placed"))
        .collect();

    let mut out = Outcome { passed: true, ..Default::default() };
    let t = &mut out.text;
    let _ = writeln!(t, "counter16 on {}: {} cycles", a.layout, a.cycles);
    if a.cycles == 0 {
        warn!("zero cycles requested; the check passes vacuously");
        let _ = writeln!(t, "warning: zero cycles, nothing checked");
        return Ok(out);
    }
    let io = fabric.io_frame();
    let mut mismatches = 0u64;
    let mut first = None;
    for k in 0..a.cycles {
        let frame = fabric.step(&io);
        let got = pins.iter().enumerate().fold(0u64, |w, (i, &(bank, idx))| w | (frame.outputs(bank)[idx] as u64) << i);
        if got != k % 65_536 {
            mismatches += 1;
            first.get_or_insert((k, got));
        }
    }
    let _ = writeln!(t, "mismatches {mismatches}");
    if let Some((k, got)) = first {
        let _ = writeln!(t, "first mismatch at cycle {k}: read {got}, expected {}", k % 65_536);
    }
    out.passed = mismatches == 0;

    let activity = fabric.activity_report().map_err(stage("activity"))?;
    let _ = writeln!(t, "\n{activity}");
    let _ = writeln!(t, "\nmodeled power (model, not measurement; {JOULES_PER_TOGGLE:e} J per toggle)");
    t.push_str(&activity.power_table(&SWEEP_MHZ, JOULES_PER_TOGGLE));
    let points = power_points(&activity);
    if let Some(fit) = linear_fit(&points) {
        let _ = writeln!(t, "linear fit: slope {:.6e} W/MHz, R^2 {:.9}", fit.slope, fit.r_squared);
    }
    if let Some(dir) = &a.out {
        let mut csv = String::from("f_mhz,power_w\n");
        for (f, p) in &points {
            let _ = writeln!(csv, "{f},{p:e}");
        }
        let text = out.text.clone();
        write_file(&mut out, dir, "counter.txt", &text)?;
        write_file(&mut out, dir, "power.csv", &csv)?;
    }
    Ok(out)
}

/// (MHz, W) over [`SWEEP_MHZ`].
pub fn power_points(activity: &sim::ActivityReport) -> Vec<(f64, f64)> {
    SWEEP_MHZ.iter().map(|&f| (f, activity.power(f * 1e6, JOULES_PER_TOGGLE))).collect()
}

pub fn loopback_fabric(layout: &FabricLayout, seed: u64) -> Result<FabricState, CliError> {
    let flow = run_flow(&designs::loopback32(), layout, seed).map_err(stage("place-and-route"))?;
    sim::load(layout, &flow.image).map_err(stage("bitstream load"))
}

pub fn cmd_loopback(a: &LoopbackArgs) -> Result<Outcome, CliError> {
    if !(a.ready_probability > 0.0 && a.ready_probability <= 1.0) {
        return Err(CliError::Usage("--ready-probability must lie in (0, 1]".into()));
    }
    let layout = resolve_layout(&a.layout)?;
    let faults = match &a.faults {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            text.parse::<FaultSchedule>().map_err(|e| CliError::Input { path: p.clone(), msg: e.to_string() })?
        }
        None => FaultSchedule::default(),
    };
    let ready = if a.ready_probability >= 1.0 {
        ReadyPattern::Always
    } else {
        ReadyPattern::Random { probability: a.ready_probability, seed: a.seed }
    };
    let cfg = LoopbackConfig {
        n_frames: a.frames,
        frame_len: a.frame_len,
        prbs_seed: (a.seed as u32) | 1,
        ready,
        faults,
        ..LoopbackConfig::default()
    };
    let mut fabric = loopback_fabric(&layout, a.seed)?;
    let r = run_loopback(&mut fabric, &cfg).map_err(stage("loopback"))?;

    let errors = r.crc_errors + r.framing_errors + r.payload_mismatches + r.bit_errors + r.prbs_errors;
    let passed = errors == 0 && cfg.faults.is_empty() && r.frames_ok == a.frames;
    let mut out = Outcome { passed, ..Default::default() };
    let _ = writeln!(
        out.text,
        "loopback on {}: {} frames of {} octets, ready probability {}, {} scheduled faults\n",
        a.layout,
        a.frames,
        a.frame_len,
        a.ready_probability,
        cfg.faults.len()
    );
    out.text.push_str(&r.to_string());
    if !cfg.faults.is_empty() {
        let _ = writeln!(out.text, "faults were injected; the run does not count as clean");
    }
    if let Some(dir) = &a.out {
        let text = out.text.clone();
        write_file(&mut out, dir, "loopback.txt", &text)?;
    }
    Ok(out)
}

fn load_samples(data: &DataArgs) -> Result<Vec<Sample>, CliError> {
    match &data.dataset {
        Some(p) => {
            if !p.exists() {
                return Err(CliError::Usage(format!("dataset {} does not exist", p.display())));
            }
            let samples = read_samples(p).map_err(|e| match e {
                MlError::Io(source) => CliError::Io { path: p.clone(), source },
                e => CliError::Input { path: p.clone(), msg: e.to_string() },
            })?;
            info!("read {} samples from {}", samples.len(), p.display());
            Ok(samples)
        }
        None => Ok(synth_dataset(data.tracks, data.seed)),
    }
}

fn load_model(path: &Path) -> Result<TreeModel, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    TreeModel::import(&text).map_err(|e| CliError::Input { path: path.into(), msg: e.to_string() })
}

fn eval_row(csv: &mut String, name: &str, r: &EvalReport) {
    let _ = writeln!(csv, "{name},{},{:.6},{:.6},{},{}", r.threshold, r.signal_efficiency, r.background_rejection, r.n_signal, r.n_background);
}

pub fn cmd_classify(a: &ClassifyArgs) -> Result<Outcome, CliError> {
    let layout = resolve_layout(&a.layout)?;
    let data = load_samples(&a.data)?;
    let (model, test, trained) = match &a.model {
        Some(p) => (load_model(p)?, data, false),
        None => {
            let (train, test) = split_dataset(&data, 0.8, a.data.seed).map_err(stage("split"))?;
            let model = train_tree(&train, &TrainOptions::ten_leaves()).map_err(stage("training"))?;
            (model, test, true)
        }
    };
    let quant = quantize(&model, a.threshold).map_err(stage("quantization"))?;
    let real = evaluate(&model, &test, a.threshold).map_err(stage("evaluation"))?;
    let quantized = evaluate(&quant, &test, a.threshold).map_err(stage("evaluation"))?;
    let probs: Vec<f64> = test.iter().map(|s| model.probability(s)).collect();
    let signal: Vec<bool> = test.iter().map(Sample::is_signal).collect();
    let area = auc(&probs, &signal).map_err(stage("evaluation"))?;
    let roc = roc_curve(&probs, &signal).map_err(stage("evaluation"))?;

    let compiled = compile_tree(&quant).map_err(stage("compile"))?;
    let fit = estimate_resources(&compiled, &layout);
    let flow = run_flow(&compiled.netlist, &layout, a.data.seed).map_err(stage("place-and-route"))?;
    let mut fabric = sim::load(&layout, &flow.image).map_err(stage("bitstream load"))?;
    let vectors: Vec<Vector> = test.iter().map(|s| quantize_features(&s.features)).collect();
    let equiv =
        equivalence_check(&compiled, &quant, &vectors, Some((&mut fabric, &flow.ports))).map_err(stage("equivalence"))?;

    let mut out = Outcome { passed: equiv.passed() && fit.fits, ..Default::default() };
    let t = &mut out.text;
    let source = match &a.data.dataset {
        Some(p) => p.display().to_string(),
        None => format!("synthetic ({} tracks, seed {})", a.data.tracks, a.data.seed),
    };
    let _ = writeln!(t, "dataset   {source}");
    let _ = writeln!(
        t,
        "model     {}",
        match &a.model {
            Some(p) => format!("imported from {}", p.display()),
            None => "trained on 80%".to_string(),
        }
    );
    let _ = writeln!(t, "tree      {} thresholds, depth {}", model.internal_nodes(), model.depth());
    let _ = writeln!(t, "evaluated on {} tracks, AUC {area:.4}\n", test.len());
    let _ = writeln!(t, "floating point\n{real}");
    let _ = writeln!(t, "quantized <28,19>\n{quantized}");
    let _ = writeln!(t, "{}", compiled_summary(&compiled));
    let _ = writeln!(t, "{fit}\n");
    let _ = writeln!(t, "fabric equivalence\n{equiv}");
    if !fit.fits {
        let _ = writeln!(t, "the compiled tree does not fit {}", a.layout);
    }

    if let Some(dir) = &a.out {
        let mut metrics = String::from("model,threshold,signal_efficiency,background_rejection,n_signal,n_background\n");
        eval_row(&mut metrics, "float", &real);
        eval_row(&mut metrics, "quantized", &quantized);
        let text = out.text.clone();
        write_file(&mut out, dir, "classify.txt", &text)?;
        write_file(&mut out, dir, "metrics.csv", &metrics)?;
        write_file(&mut out, dir, "roc.csv", &roc_csv(&roc))?;
        write_file(&mut out, dir, "roc.svg", &roc_svg(&roc, &format!("ROC, AUC {area:.4}")))?;
        write_file(&mut out, dir, "fit.csv", &fit.to_csv())?;
        write_file(&mut out, dir, "equivalence.txt", &equiv.to_string())?;
        write_file(&mut out, dir, "netlist.txt", &compiled.netlist.to_text())?;
        if trained {
            write_file(&mut out, dir, "model.json", &model.export())?;
        }
    }
    Ok(out)
}

pub fn compiled_summary(c: &CompiledTree) -> String {
    let latency_ns = (c.pipeline_depth + 1) as f64 * 1e3 / TIMING_TARGET_MHZ;
    format!(
        "compiled  {} LUTs, {} flip-flops, {} logic levels, pipeline depth {} (result within {latency_ns:.0} ns at {TIMING_TARGET_MHZ} MHz)",
        c.lut_count, c.ff_count, c.logic_levels, c.pipeline_depth
    )
}

pub fn cmd_train(a: &TrainArgs) -> Result<Outcome, CliError> {
    if a.max_leaves < 2 {
        return Err(CliError::Usage("--max-leaves must be at least 2".into()));
    }
    let data = load_samples(&a.data)?;
    let (train, test) = split_dataset(&data, 0.8, a.data.seed).map_err(stage("split"))?;
    let opts = TrainOptions { max_leaves: Some(a.max_leaves), ..TrainOptions::default() };
    let model = train_tree(&train, &opts).map_err(stage("training"))?;
    let report = evaluate(&model, &test, 0.5).map_err(stage("evaluation"))?;
    let probs: Vec<f64> = test.iter().map(|s| model.probability(s)).collect();
    let signal: Vec<bool> = test.iter().map(Sample::is_signal).collect();
    let area = auc(&probs, &signal).map_err(stage("evaluation"))?;
    let mut out = Outcome { passed: true, ..Default::default() };
    let _ = writeln!(
        out.text,
        "trained on {} tracks: {} thresholds, depth {}\nheld-out {} tracks, AUC {area:.4}\n{report}",
        train.len(),
        model.internal_nodes(),
        model.depth(),
        test.len()
    );
    fs::write(&a.out, model.export()).map_err(|source| CliError::Io { path: a.out.clone(), source })?;
    out.files.push(a.out.clone());
    Ok(out)
}

pub fn cmd_compile(a: &CompileArgs) -> Result<Outcome, CliError> {
    let layout = resolve_layout(&a.layout)?;
    let model = match &a.model {
        Some(p) => load_model(p)?,
        None => efab_treec::reference_model(a.seed).map_err(stage("training"))?.0,
    };
    let quant = quantize(&model, a.threshold).map_err(stage("quantization"))?;
    let compiled = compile_tree(&quant).map_err(stage("compile"))?;
    let fit: FitReport = estimate_resources(&compiled, &layout);
    let mut out = Outcome { passed: fit.fits, ..Default::default() };
    let _ = writeln!(out.text, "{}\n{fit}", compiled_summary(&compiled));
    if let Some(dir) = &a.out {
        write_file(&mut out, dir, "netlist.txt", &compiled.netlist.to_text())?;
        write_file(&mut out, dir, "fit.csv", &fit.to_csv())?;
    }
    Ok(out)
}

pub fn cmd_synth(a: &SynthArgs) -> Result<Outcome, CliError> {
    let n = write_tracks(&a.out, synth_tracks(a.tracks, a.seed)).map_err(|e| match e {
        MlError::Io(source) => CliError::Io { path: a.out.clone(), source },
        e => CliError::Input { path: a.out.clone(), msg: e.to_string() },
    })?;
    Ok(Outcome { text: format!("wrote {n} tracks to {}\n", a.out.display()), passed: true, files: vec![a.out.clone()] })
}
