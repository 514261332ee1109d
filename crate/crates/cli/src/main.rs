//! `otfs-isac` command line front end.
//!
//! ```text
//! otfs-isac sense   [--preset desk-sensing | --config run.toml] [--mode bistatic] ...
//! otfs-isac chanest [--preset desk] [--scenario S2] [--methods proposed,single_pilot] ...
//! otfs-isac bench   [--sizes 16x16,32x32,64x64,128x128] [--reps 5]
//! otfs-isac rdm     [--preset desk-sensing] [--snr -20] [--trial 0]
//! ```
//!
//! Every run writes its CSV/PGM artifacts plus `manifest.txt` into `--out-dir`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use otfs_isac::export::export_rdm;
use otfs_isac::oracle::{benchmark_corr, scaling_exponent, write_bench_csv};
use otfs_isac::scenario::{presets, BinSource, FrameKind, SnrSweep};
use otfs_isac::{
    run_chanest_sweep, run_sensing_sweep, ChanestMethod, RadarMode, Scenario, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "otfs-isac",
    version,
    about = "OTFS radar sensing and channel estimation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo target estimation error versus SNR.
    Sense(CommonArgs),
    /// Channel estimation MSE versus SNR, proposed pilot against the single-pilot baseline.
    Chanest(ChanestArgs),
    /// Naive versus FFT correlation timing.
    Bench(BenchArgs),
    /// Export the range-Doppler map of one trial.
    Rdm(RdmArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML scenario file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario: desk, desk-sensing, full, full-sensing.
    #[arg(long)]
    preset: Option<String>,
    /// `start:stop:step` in dB, a single value, or `inf` for no noise.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// monostatic | bistatic
    #[arg(long)]
    mode: Option<RadarMode>,
    /// S1 | S2
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ChanestArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Estimators to compare: proposed, single_pilot.
    #[arg(long, value_delimiter = ',', default_value = "proposed,single_pilot")]
    methods: Vec<String>,
    /// Frame kinds: data, pilot_only.
    #[arg(long, value_delimiter = ',')]
    frames: Option<Vec<String>>,
    /// Path bins given to the estimators: truth | detected.
    #[arg(long)]
    bins: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated `MxN` sizes, sorted by M*N.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "16x16,32x32,64x64,128x128"
    )]
    sizes: Vec<String>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RdmArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trial index within the SNR point.
    #[arg(long, default_value_t = 0)]
    trial: usize,
}

fn parse_snr(text: &str) -> Result<SnrSweep> {
    let text = text.trim();
    if text.eq_ignore_ascii_case("inf") {
        return Ok(SnrSweep::noiseless());
    }
    let parts: Vec<f64> = text
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("bad --snr {text:?}"))?;
    match parts.as_slice() {
        [v] => Ok(SnrSweep::range(*v, *v, 1.0)),
        [a, b] => Ok(SnrSweep::range(*a, *b, 2.0)),
        [a, b, s] => Ok(SnrSweep::range(*a, *b, *s)),
        _ => bail!("--snr takes start:stop[:step], a single value, or inf"),
    }
}

fn parse_method(s: &str) -> Result<ChanestMethod> {
    match s.trim() {
        "proposed" => Ok(ChanestMethod::Proposed),
        "single_pilot" | "single-pilot" => Ok(ChanestMethod::SinglePilot),
        other => bail!("unknown method {other:?} (proposed, single_pilot)"),
    }
}

fn parse_frame(s: &str) -> Result<FrameKind> {
    match s.trim() {
        "data" => Ok(FrameKind::Data),
        "pilot_only" | "pilot-only" => Ok(FrameKind::PilotOnly),
        other => bail!("unknown frame kind {other:?} (data, pilot_only)"),
    }
}

fn resolve(
    args: &CommonArgs,
    default_preset: &str,
    default_mode: RadarMode,
) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::from_toml(&text)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => presets::by_name(
            args.preset.as_deref().unwrap_or(default_preset),
            args.scenario.unwrap_or_default(),
            args.mode.unwrap_or(default_mode),
        )?,
    };
    if let Some(s) = &args.snr {
        cfg.snr = parse_snr(s)?;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(s) = args.scenario {
        cfg.scenario = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(t);
    }
    Ok(builder.build()?)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_manifest(
    dir: &Path,
    command: &str,
    outputs: &[&str],
    cfg: Option<&ScenarioConfig>,
) -> Result<()> {
    let mut w = create(dir, "manifest.txt")?;
    writeln!(w, "# otfs-isac {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# command: {command}")?;
    writeln!(w, "# outputs: {}", outputs.join(", "))?;
    if let Some(cfg) = cfg {
        writeln!(w, "# master seed: {}", cfg.seed)?;
        writeln!(
            w,
            "# resolved configuration follows; it can be passed back via --config\n"
        )?;
        write!(w, "{}", cfg.to_toml())?;
    }
    w.flush()?;
    Ok(())
}

fn sense(args: CommonArgs) -> Result<()> {
    let cfg = resolve(&args, "desk-sensing", RadarMode::Monostatic)?;
    fs::create_dir_all(&args.out_dir)?;
    let out = create(&args.out_dir, "sensing.csv")?;
    let points = thread_pool(args.threads)?.install(|| run_sensing_sweep(&cfg, out))?;
    write_manifest(&args.out_dir, "sense", &["sensing.csv"], Some(&cfg))?;
    eprintln!(
        "{}: {} SNR points x {} trials -> {}",
        cfg.name,
        points.len(),
        cfg.trials,
        args.out_dir.join("sensing.csv").display()
    );
    Ok(())
}

fn chanest(args: ChanestArgs) -> Result<()> {
    let mut cfg = resolve(&args.common, "desk", RadarMode::Bistatic)?;
    if let Some(frames) = &args.frames {
        cfg.chanest.frames = frames
            .iter()
            .map(|f| parse_frame(f))
            .collect::<Result<_>>()?;
    }
    if let Some(bins) = &args.bins {
        cfg.chanest.bins = match bins.as_str() {
            "truth" => BinSource::Truth,
            "detected" => BinSource::Detected,
            other => bail!("unknown --bins {other:?} (truth, detected)"),
        };
    }
    let methods: Vec<ChanestMethod> = args
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<_>>()?;
    let dir = &args.common.out_dir;
    fs::create_dir_all(dir)?;
    let out = create(dir, "chanest.csv")?;
    let points =
        thread_pool(args.common.threads)?.install(|| run_chanest_sweep(&cfg, &methods, out))?;
    write_manifest(dir, "chanest", &["chanest.csv"], Some(&cfg))?;
    eprintln!(
        "{}: {} rows -> {}",
        cfg.name,
        points.len(),
        dir.join("chanest.csv").display()
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let sizes: Vec<(usize, usize)> = args
        .sizes
        .iter()
        .map(|s| {
            let (m, n) = s
                .split_once('x')
                .with_context(|| format!("size {s:?} is not MxN"))?;
            Ok((m.trim().parse()?, n.trim().parse()?))
        })
        .collect::<Result<_>>()?;
    let rows = benchmark_corr(&sizes, args.reps)?;
    fs::create_dir_all(&args.out_dir)?;
    let mut out = create(&args.out_dir, "bench.csv")?;
    write_bench_csv(&mut out, &rows)?;
    out.flush()?;
    write_manifest(
        &args.out_dir,
        &format!(
            "bench --sizes {} --reps {}",
            args.sizes.join(","),
            args.reps
        ),
        &["bench.csv"],
        None,
    )?;
    if rows.len() >= 2 {
        let naive: Vec<_> = rows
            .iter()
            .map(|r| (r.cells() as f64, r.t_naive_s))
            .collect();
        let fft: Vec<_> = rows.iter().map(|r| (r.cells() as f64, r.t_fft_s)).collect();
        eprintln!(
            "fitted exponent vs MN: naive {:.3}, fft {:.3}",
            scaling_exponent(&naive),
            scaling_exponent(&fft)
        );
    }
    Ok(())
}

fn rdm(args: RdmArgs) -> Result<()> {
    let cfg = resolve(&args.common, "desk-sensing", RadarMode::Monostatic)?;
    let snr = cfg.snr.points()[0];
    let snap = cfg.sensing_snapshot(snr, 0, args.trial)?;
    let dir = &args.common.out_dir;
    fs::create_dir_all(dir)?;
    export_rdm(&snap.rdm, &dir.join("rdm"))?;

    let mut w = create(dir, "targets.csv")?;
    writeln!(w, "kind,index,l,k,value,range_m,speed_mps")?;
    for (i, p) in snap.channel.paths().iter().enumerate() {
        writeln!(
            w,
            "truth,{},{},{},{:.6e},{:.4},{:.4}",
            i + 1,
            p.l,
            p.k,
            p.h.norm(),
            cfg.physical.bin_to_range(p.l),
            cfg.physical.bin_to_speed_signed(p.k)
        )?;
    }
    for (i, d) in snap.detections.iter().enumerate() {
        writeln!(
            w,
            "detection,{},{},{},{:.6e},{:.4},{:.4}",
            i + 1,
            d.l,
            d.k,
            d.magnitude,
            d.range_m,
            d.speed_mps
        )?;
    }
    w.flush()?;
    write_manifest(
        dir,
        &format!("rdm --trial {}", args.trial),
        &["rdm.csv", "rdm.pgm", "targets.csv"],
        Some(&cfg),
    )?;
    eprintln!(
        "{}: {} mode, SNR {snr} dB -> {}",
        cfg.name,
        cfg.mode,
        dir.join("rdm.pgm").display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Sense(a) => sense(a),
        Command::Chanest(a) => chanest(a),
        Command::Bench(a) => bench(a),
        Command::Rdm(a) => rdm(a),
    }
}
