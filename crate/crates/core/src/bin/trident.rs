//! `trident`: cost tables, desk-scale training and the tamper suite.

use std::fmt::Write as _;
use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use trident::adversary::{parse_scenarios, run_suite, BUNDLED_SUITE};
use trident::bench::{bench, BenchParams, BenchRow, Protocol};
use trident::ml::{decode, lr_shift, predict, train, train_plain, Dataset, Model, ModelShare, SharedMatrix, TrainParams};
use trident::net::TcpLink;
use trident::sharing::{dealer, share};
use trident::{run, run_party, Config, Error, MsbMode, Party, PartyId, Result, Ring, P1};

/// Largest accepted L∞ distance between trained and oracle weights.
const WEIGHT_TOLERANCE: f64 = 1e-2;

#[derive(Parser)]
#[command(name = "trident", version, about = "Four-party secure computation toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Measure a protocol's rounds and bits against its closed-form cost.
    Bench(BenchArgs),
    /// Train a model on a CSV dataset owned by P1.
    Train(TrainArgs),
    /// Evaluate a shared model on a CSV dataset.
    Predict(PredictArgs),
    /// Run tamper scenarios and report each outcome.
    Adversary(AdversaryArgs),
    /// Write a synthetic dataset.
    Dataset(DatasetArgs),
}

#[derive(Args, Clone)]
struct Session {
    /// Master seed as a hex string.
    #[arg(long, default_value = "74726964656e74")]
    seed: String,
    /// Ring width ℓ.
    #[arg(long, default_value_t = 64)]
    ring: u32,
    #[arg(long, default_value_t = 13)]
    frac_bits: u32,
    /// Most significant bit extraction: a2b_fallback or paper_bitext.
    #[arg(long, default_value = "a2b_fallback")]
    msb: MsbMode,
}

impl Session {
    fn config(&self) -> Result<Config> {
        let seed = hex::decode(&self.seed).map_err(|e| Error::InvalidArgument(format!("seed: {e}")))?;
        let ring = Ring::new(self.ring)?;
        if self.frac_bits + 2 > ring.bits() {
            return Err(Error::InvalidArgument(format!("{} fractional bits do not fit ℓ={}", self.frac_bits, ring.bits())));
        }
        Ok(Config { seed, ring, frac_bits: self.frac_bits, msb_mode: self.msb, eager_digests: false })
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    /// Four threads over in-process channels.
    Local,
    /// Four processes over localhost sockets.
    Tcp,
}

#[derive(Args, Clone)]
struct Network {
    #[arg(long, value_enum, default_value = "local")]
    backend: BackendKind,
    /// First of four consecutive ports; party i listens on port + i.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Run only this party (0-3) and connect to the others.
    #[arg(long, hide = true)]
    party: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Protocol name, or `all`.
    protocol: String,
    #[arg(long, default_value_t = 256)]
    count: usize,
    /// Vector length for dotp.
    #[arg(long, default_value_t = 16)]
    d: usize,
    #[arg(long)]
    csv: bool,
    #[command(flatten)]
    session: Session,
}

#[derive(Args, Clone)]
struct TrainArgs {
    model: Model,
    data: PathBuf,
    /// Training iterations, one batch each.
    #[arg(long, alias = "iterations", default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    /// Learning rate; a power-of-two reciprocal.
    #[arg(long, default_value_t = 0.125)]
    lr: f64,
    /// Directory for the four share files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[command(flatten)]
    session: Session,
    #[command(flatten)]
    net: Network,
}

#[derive(Args, Clone)]
struct PredictArgs {
    model: Model,
    data: PathBuf,
    /// Directory holding model.p0.bin .. model.p3.bin.
    #[arg(long, default_value = ".")]
    model_dir: PathBuf,
    /// Party (0-3) that learns the predictions.
    #[arg(long, default_value_t = 1)]
    output: usize,
    #[command(flatten)]
    session: Session,
    #[command(flatten)]
    net: Network,
}

#[derive(Args)]
struct AdversaryArgs {
    /// Scenario file; the bundled suite when omitted.
    file: Option<PathBuf>,
    #[command(flatten)]
    session: Session,
}

#[derive(Args)]
struct DatasetArgs {
    model: Model,
    #[arg(long, default_value_t = 64)]
    rows: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    /// A check or the tamper suite failed; exit code 1.
    Mismatch(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        Failure::Error(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Error(e.into())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Bench(a) => cmd_bench(&a),
        Cmd::Train(a) => cmd_train(&a),
        Cmd::Predict(a) => cmd_predict(&a),
        Cmd::Adversary(a) => cmd_adversary(&a),
        Cmd::Dataset(a) => cmd_dataset(&a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch(msg)) => {
            eprintln!("trident: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("trident: {e}");
            ExitCode::from(if e.is_abort() { 1 } else { 2 })
        }
    }
}

fn cmd_bench(a: &BenchArgs) -> CmdResult {
    let cfg = a.session.config()?;
    let protos = if a.protocol == "all" { Protocol::ALL.to_vec() } else { vec![a.protocol.parse::<Protocol>()?] };
    let params = BenchParams { count: a.count, d: a.d };
    if a.csv {
        println!("{}", BenchRow::CSV_HEADER);
    }
    let mut failed = 0;
    for p in protos {
        let row = bench(&cfg, p, &params)?;
        if a.csv {
            println!("{}", row.csv());
        } else {
            println!("{row}");
        }
        failed += usize::from(!row.pass());
    }
    if failed > 0 {
        return Err(Failure::Mismatch(format!("{failed} protocol(s) missed their formula")));
    }
    Ok(())
}

fn model_path(dir: &Path, p: PartyId) -> PathBuf {
    dir.join(format!("model.p{}.bin", p.index()))
}

/// Runs `f` at every party: as four threads, as this process's single
/// party, or by launching one child process per party.
fn session(net: &Network, cfg: &Config, f: impl Fn(&mut Party) -> Result<()> + Sync) -> Result<()> {
    if let Some(i) = net.party {
        let me = PartyId::from_index(i).ok_or_else(|| Error::InvalidArgument(format!("party {i}")))?;
        let port = net.port.ok_or_else(|| Error::InvalidArgument("--party needs --port".into()))?;
        let link = TcpLink::connect(me, &net.host, port)?;
        return run_party(cfg, me, Box::new(link), f).0;
    }
    match net.backend {
        BackendKind::Local => run(cfg, f).into_values().map(|_| ()),
        BackendKind::Tcp => spawn_parties(net),
    }
}

fn spawn_parties(net: &Network) -> Result<()> {
    let port = match net.port {
        Some(p) => p,
        None => free_ports()?,
    };
    let exe = std::env::current_exe()?;
    let args: Vec<_> = std::env::args_os().skip(1).collect();
    let children = (0..4)
        .map(|i| {
            let mut c = Command::new(&exe);
            c.args(&args).arg("--party").arg(i.to_string());
            if net.port.is_none() {
                c.arg("--port").arg(port.to_string());
            }
            c.spawn()
        })
        .collect::<std::io::Result<Vec<_>>>()?;
    let mut failed = Vec::new();
    for (i, mut c) in children.into_iter().enumerate() {
        if !c.wait()?.success() {
            failed.push(format!("P{i}"));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::abort(format!("{} exited with an error", failed.join(", "))))
    }
}

/// A base port with the three after it also free.
fn free_ports() -> Result<u16> {
    for _ in 0..32 {
        let base = TcpListener::bind("127.0.0.1:0")?.local_addr()?.port();
        if base > u16::MAX - 4 {
            continue;
        }
        if (0..4).all(|i| TcpListener::bind(("127.0.0.1", base + i)).is_ok()) {
            return Ok(base);
        }
    }
    Err(Error::InvalidArgument("no four consecutive free ports".into()))
}

fn cmd_train(a: &TrainArgs) -> CmdResult {
    let cfg = a.session.config()?;
    let (ring, f) = (cfg.ring, cfg.frac_bits);
    let data = Dataset::load(&a.data, ring, f)?;
    if a.epochs == 0 || a.batch > data.rows() {
        return Err(Error::InvalidArgument(format!("need epochs > 0 and batch <= {} rows", data.rows())).into());
    }
    let params = TrainParams { model: a.model, iterations: a.epochs, batch: a.batch, lr_shift: lr_shift(a.lr, a.batch)? };
    fs::create_dir_all(&a.out)?;
    session(&a.net, &cfg, |p| {
        let w = train(p, P1, &data, &params)?;
        ModelShare { ring, frac_bits: f, weights: w }.save(&model_path(&a.out, p.id()))
    })?;
    if a.net.party.is_some() {
        return Ok(());
    }
    let shares = PartyId::ALL.map(|p| ModelShare::load(&model_path(&a.out, p)));
    let shares: Vec<ModelShare> = shares.into_iter().collect::<Result<_>>()?;
    let per_party: Vec<_> = shares.into_iter().map(|s| s.weights).collect();
    let got = dealer::zip_views(&per_party)
        .iter()
        .map(|v| dealer::open(ring, v).ok_or_else(|| Error::abort("share files are inconsistent")))
        .collect::<Result<Vec<u64>>>()?;
    let want = train_plain(ring, f, &data, &params);
    let mut gap = 0f64;
    let mut table = String::from("weight,secure,oracle\n");
    for (j, (g, w)) in got.iter().zip(&want).enumerate() {
        let (g, w) = (decode(ring, f, *g), decode(ring, f, *w));
        gap = gap.max((g - w).abs());
        let _ = writeln!(table, "{j},{g:.6},{w:.6}");
    }
    print!("{table}");
    println!("linf_gap,{gap:.6}");
    if gap >= WEIGHT_TOLERANCE {
        return Err(Failure::Mismatch(format!("weight gap {gap} exceeds {WEIGHT_TOLERANCE}")));
    }
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> CmdResult {
    let cfg = a.session.config()?;
    let output = PartyId::from_index(a.output).ok_or_else(|| Error::InvalidArgument(format!("party {}", a.output)))?;
    let data = Dataset::load(&a.data, cfg.ring, cfg.frac_bits)?;
    session(&a.net, &cfg, |p| {
        let m = ModelShare::load(&model_path(&a.model_dir, p.id()))?;
        if m.ring != cfg.ring || m.frac_bits != cfg.frac_bits || m.weights.len() != data.features {
            return Err(Error::InvalidArgument("model shape does not match the session and dataset".into()));
        }
        let (n, d) = (data.rows(), data.features);
        let xv = if p.is(P1) { data.x.clone() } else { Vec::new() };
        let x = SharedMatrix::new(n, d, share(p, P1, cfg.ring, &xv, n * d)?)?;
        if let Some(y) = predict(p, &x, &m.weights, a.model, output)? {
            let mut out = String::from("prediction\n");
            for v in y {
                let _ = writeln!(out, "{:.6}", decode(cfg.ring, cfg.frac_bits, v));
            }
            print!("{out}");
        }
        Ok(())
    })?;
    Ok(())
}

fn cmd_adversary(a: &AdversaryArgs) -> CmdResult {
    let cfg = a.session.config()?;
    let text = match &a.file {
        Some(path) => fs::read_to_string(path)?,
        None => BUNDLED_SUITE.to_string(),
    };
    let policies = parse_scenarios(&text)?;
    let report = run_suite(&cfg, &policies)?;
    print!("{report}");
    let v = report.violations();
    println!("scenarios,{},violations,{v}", report.rows.len());
    if v > 0 {
        return Err(Failure::Mismatch(format!("{v} violation(s)")));
    }
    Ok(())
}

fn cmd_dataset(a: &DatasetArgs) -> CmdResult {
    let mut rng = ChaCha12Rng::seed_from_u64(a.seed);
    let mut out = String::from("x1,x2,y\n");
    for _ in 0..a.rows {
        let x1: f64 = rng.gen_range(-1.0..1.0);
        let x2: f64 = rng.gen_range(-1.0..1.0);
        let y = match a.model {
            Model::Linear => 0.75 * x1 - 0.5 * x2 + rng.gen_range(-0.05..0.05),
            Model::Logistic => f64::from(u8::from(x1 + 0.5 * x2 > 0.0)),
        };
        let _ = writeln!(out, "{x1:.4},{x2:.4},{y:.4}");
    }
    match &a.out {
        Some(p) => fs::write(p, out)?,
        None => print!("{out}"),
    }
    Ok(())
}
