mod bench;
mod files;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spx_batch::banksim::{count_conflicts, reduction_trace, LevelTally};
use spx_batch::config::{TuningConfig, TuningEntry};
use spx_batch::sigcore::{keygen, keygen_random, sign_oracle, verify, Signer};
use spx_batch::tuner::profile::profile_kernels;
use spx_batch::tuner::{padding_solve, select_backends, PaddingScheme, TuneInput, DEFAULT_SEME_BYTES};
use spx_batch::{Error, ParamSetId};

const CONFIG_ENV: &str = "HERO_SIGN_CONFIG";
const DEFAULT_CONFIG_FILE: &str = "spx-tuning.json";

/// Exit status plus a message for stderr.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    const VERIFY: u8 = 1;
    const USAGE: u8 = 2;
    const INTERNAL: u8 = 3;

    pub fn usage(message: impl Into<String>) -> Self {
        Failure { code: Self::USAGE, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure { code: Self::INTERNAL, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Graph { .. } | Error::Internal(_) => Self::INTERNAL,
            _ => Self::USAGE,
        };
        Failure { code, message: e.to_string() }
    }
}

#[derive(Parser)]
#[command(name = "spx-batch", version, about = "SPHINCS+ f-variant signing, tuning and batch benchmarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a key pair.
    Keygen {
        #[arg(long)]
        set: ParamSetId,
        /// 3n-byte seed in hex (sk_seed ‖ sk_prf ‖ pk_seed); random if omitted.
        #[arg(long)]
        seed: Option<String>,
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        sk: PathBuf,
        /// Write hex text instead of raw bytes.
        #[arg(long)]
        hex: bool,
    },
    /// Sign a message read from a file or standard input.
    Sign {
        #[arg(long)]
        set: ParamSetId,
        #[arg(long)]
        sk: PathBuf,
        #[arg(long)]
        msg: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Use the sequential reference signer.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        /// n-byte randomness in hex; pk_seed if omitted.
        #[arg(long)]
        opt_rand: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        hex: bool,
    },
    /// Verify a signature; exits 0 if valid and 1 otherwise.
    Verify {
        #[arg(long)]
        set: ParamSetId,
        #[arg(long)]
        pk: PathBuf,
        #[arg(long)]
        msg: Option<PathBuf>,
        #[arg(long)]
        sig: PathBuf,
    },
    /// Search fusion layouts and write them to the tuning config.
    Tune {
        /// Sets to tune; all three if omitted.
        #[arg(long)]
        set: Vec<ParamSetId>,
        #[arg(long, default_value_t = DEFAULT_SEME_BYTES)]
        seme: usize,
        #[arg(long, default_value_t = spx_batch::tuner::DEFAULT_ALPHA)]
        alpha: f64,
        /// Profile both hash backends this many times per kernel and pick
        /// the faster one per cell.
        #[arg(long)]
        profile_reps: Option<usize>,
        /// Keep full-width leaf storage for every set.
        #[arg(long)]
        no_relax: bool,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Count bank conflicts of a tree reduction.
    Banksim {
        /// Node width in bytes.
        #[arg(long)]
        width: u32,
        #[arg(long, default_value_t = 6)]
        height: u32,
        #[arg(long)]
        padded: bool,
        /// Override the rows per padding region.
        #[arg(long)]
        rows: Option<u32>,
        /// Leaves come from lane-local storage.
        #[arg(long)]
        relax: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Sign a batch through the task-graph executor and report throughput.
    Bench {
        #[arg(long, default_value = "128f")]
        set: ParamSetId,
        #[arg(long, default_value_t = 64)]
        messages: usize,
        #[arg(long, default_value_t = 32)]
        msg_len: usize,
        /// Messages per graph; defaults to an even split over the graphs.
        #[arg(long)]
        batch_m: Option<usize>,
        #[arg(long, default_value_t = 4)]
        graphs_t: usize,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

/// `--config`, else the environment variable, else nothing.
fn config_path(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn load_config(flag: Option<PathBuf>) -> Result<TuningConfig, Failure> {
    match config_path(flag) {
        Some(p) => Ok(TuningConfig::load(&p)?),
        None => Ok(TuningConfig::defaults()?),
    }
}

fn print_json(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::internal(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Keygen { set, seed, pk, sk, hex } => {
            let (public, secret) = match seed {
                Some(s) => keygen(set, &files::hex_arg("seed", &s, 3 * set.params().n)?)?,
                None => keygen_random(set, &mut rand::thread_rng()),
            };
            files::write(&pk, &public.to_bytes(), hex)?;
            files::write(&sk, &secret.to_bytes(), hex)?;
        }
        Command::Sign { set, sk, msg, out, oracle, config, opt_rand, workers, hex } => {
            let secret = files::secret_key(set, &sk)?;
            let message = files::message(msg.as_ref())?;
            let rand = opt_rand.map(|r| files::hex_arg("opt_rand", &r, set.params().n)).transpose()?;
            let sig = if oracle {
                sign_oracle(&secret, &message, rand.as_deref())?
            } else {
                let mut cfg = load_config(config)?.signer_config(set)?;
                if let Some(w) = workers {
                    cfg.workers = w;
                }
                Signer::new(cfg)?.sign(&secret, &message, rand.as_deref())?
            };
            files::write(&out, sig.as_bytes(), hex)?;
        }
        Command::Verify { set, pk, msg, sig } => {
            let public = files::public_key(set, &pk)?;
            let message = files::message(msg.as_ref())?;
            let bytes = files::signature_bytes(set, &sig)?;
            return match verify(&public, &message, &bytes) {
                Ok(true) => {
                    println!("valid");
                    Ok(0)
                }
                Ok(false) => {
                    println!("invalid");
                    Ok(Failure::VERIFY)
                }
                Err(e @ Error::Format { .. }) => {
                    eprintln!("invalid: {e}");
                    Ok(Failure::VERIFY)
                }
                Err(e) => Err(e.into()),
            };
        }
        Command::Tune { set, seme, alpha, profile_reps, no_relax, workers, config } => {
            let path = config_path(config).unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG_FILE));
            tune(&path, set, seme, alpha, profile_reps, no_relax, workers)?;
        }
        Command::Banksim { width, height, padded, rows, relax, format } => {
            banksim(width, height, padded, rows, relax, format)?;
        }
        Command::Bench { set, messages, msg_len, batch_m, graphs_t, workers, config, seed } => {
            if graphs_t == 0 || messages == 0 {
                return Err(Failure::usage("--messages and --graphs-t must be positive"));
            }
            let report = bench::run(bench::BenchArgs {
                config: load_config(config)?.signer_config(set)?,
                messages,
                msg_len,
                batch_m: batch_m.unwrap_or(messages.div_ceil(graphs_t)),
                graphs_t,
                workers,
                seed,
            })?;
            print_json(&report)?;
            if report.verified != messages || !report.replay_ok {
                return Err(Failure::internal("batch output failed post-hoc verification"));
            }
        }
    }
    Ok(0)
}

fn tune(
    path: &Path,
    sets: Vec<ParamSetId>,
    seme: usize,
    alpha: f64,
    profile_reps: Option<usize>,
    no_relax: bool,
    workers: Option<usize>,
) -> Result<(), Failure> {
    let sets = if sets.is_empty() { ParamSetId::ALL.to_vec() } else { sets };
    let mut cfg = if path.exists() {
        TuningConfig::load(path)?
    } else {
        TuningConfig { sets: Default::default() }
    };
    for &id in &sets {
        let mut input = TuneInput::new(id.derived());
        input.seme_per_block = seme;
        input.alpha = alpha;
        input.relax = !no_relax && id == ParamSetId::S256f;
        let mut entry = TuningEntry::from_tuning(&input)?;
        if let Some(w) = workers {
            entry.workers = w;
        }
        entry.validate(id)?;
        cfg.sets.insert(id, entry);
    }
    if let Some(reps) = profile_reps {
        let samples = profile_kernels(&ParamSetId::ALL, reps)?;
        cfg.set_backends(&select_backends(&samples, reps)?);
    }
    cfg.validate()?;
    cfg.save(path)?;
    print_json(&cfg)
}

#[derive(Serialize)]
struct BanksimReport {
    width: u32,
    height: u32,
    relax: bool,
    padding: PaddingScheme,
    load_conflicts: u64,
    store_conflicts: u64,
    total_conflicts: u64,
    max_way: u32,
    per_level: BTreeMap<u32, LevelTally>,
}

fn banksim(width: u32, height: u32, padded: bool, rows: Option<u32>, relax: bool, format: Format) -> Result<(), Failure> {
    let padding = match (rows, padded) {
        (Some(r), _) => PaddingScheme::forced_rows(width, r)?,
        (None, true) => padding_solve(width)?,
        (None, false) => PaddingScheme::none(width),
    };
    let trace = reduction_trace(height, width, relax)?;
    let detail = count_conflicts(&trace, &padding);
    match format {
        Format::Json => print_json(&BanksimReport {
            width,
            height,
            relax,
            padding,
            load_conflicts: detail.load_conflicts,
            store_conflicts: detail.store_conflicts,
            total_conflicts: detail.total_conflicts(),
            max_way: detail.max_way(),
            per_level: detail.per_level,
        }),
        Format::Csv => {
            println!("level,load_conflicts,store_conflicts,max_way");
            for (level, t) in &detail.per_level {
                println!("{level},{},{},{}", t.load_conflicts, t.store_conflicts, t.max_way);
            }
            println!("total,{},{},{}", detail.load_conflicts, detail.store_conflicts, detail.max_way());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Failure::USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("spx-batch: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
