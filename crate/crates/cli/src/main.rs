//! `provmark`: stamp images at acquisition, verify them later, measure the
//! embedding cost and simulate board-level device fingerprints.
//!
//! Machine-readable output (JSON or CSV) goes to stdout, diagnostics to
//! stderr. `verify` reports its verdict through the exit status as well:
//! 0 Authentic, 3 NoWatermark, 4 UnknownDevice, 5 Tampered. Usage errors
//! exit with 2 and runtime failures with 1.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use provmark_core::devfing::{accuracy_sweep, LcrFeatureMatrix, SignatureSummary, SweepRow};
use provmark_core::quality::{quality_report, QualityReport};
use provmark_core::watermark::DEFAULT_DELTA;
use provmark_core::{DeviceFeatureSet, PreSharedKey, RasterImage, SubbandPlan};
use provmark_service::http::DEFAULT_MAX_IMAGE_BYTES;
use provmark_service::{
    plan_for, verify_image, AppState, Registry, RegistryRecord, ServiceConfig, Tolerances,
    Verdict, WatermarkStore,
};

const KEY_ENV: &str = "PROVMARK_KEY";

#[derive(Parser)]
#[command(name = "provmark", version, about = "Acquisition-time image provenance watermarking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the 128-hex fingerprint of a device feature file.
    DeviceFp {
        #[arg(long)]
        features: PathBuf,
    },
    /// Add a device to the registry and print its record.
    Register {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        device_id: String,
        #[arg(long)]
        features: PathBuf,
        /// Bit string recovered from the board fingerprint, stored alongside.
        #[arg(long)]
        devfing_key: Option<String>,
    },
    /// Embed the device/image watermark and write a lossless PNG.
    Stamp {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        key: KeyArg,
        /// Output PNG; its directory becomes the watermarked-image store.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Authenticate an image against the registry.
    Verify {
        #[arg(long)]
        image: PathBuf,
        #[command(flatten)]
        key: KeyArg,
        #[arg(long)]
        registry: PathBuf,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        plan: PlanArgs,
    },
    /// Full-reference quality report between two images.
    Metrics {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Also append a CSV row (header written when the file is new).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Board-level LCR fingerprint simulation.
    Devfing {
        #[command(subcommand)]
        command: DevfingCommand,
    },
    /// Run the registration/verification HTTP service.
    Serve {
        /// Port to listen on; 0 picks a free one.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        bind: String,
        #[arg(long)]
        registry: PathBuf,
        #[command(flatten)]
        key: KeyArg,
        #[arg(long, default_value_t = DEFAULT_MAX_IMAGE_BYTES)]
        max_image_bytes: usize,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[command(flatten)]
        tol: TolArgs,
    },
}

#[derive(Subcommand)]
enum DevfingCommand {
    /// Binary signature of an LCR matrix (CSV with an L,C,R,Z header).
    Binarize {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Authentication accuracy under log-domain noise, as CSV.
    Sweep {
        #[arg(long)]
        matrix: PathBuf,
        /// Correctable Hamming distance of the sketch.
        #[arg(long, default_value_t = 3)]
        t: usize,
        /// Noise scales.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8")]
        k: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Args)]
struct KeyArg {
    /// Pre-shared key file. Without it the key is read from PROVMARK_KEY.
    #[arg(long)]
    key: Option<PathBuf>,
}

impl KeyArg {
    fn load(&self) -> Result<PreSharedKey> {
        match &self.key {
            Some(path) => Ok(PreSharedKey::from_file(path)?),
            None => match std::env::var_os(KEY_ENV) {
                Some(v) => Ok(PreSharedKey::new(v.into_encoded_bytes())?),
                None => bail!("no key: pass --key or set {KEY_ENV}"),
            },
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    /// QIM quantisation step.
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    delta: f64,
    /// Odd repetition count; defaults to the largest that fits (max 31).
    #[arg(long)]
    redundancy: Option<usize>,
}

impl PlanArgs {
    /// `None` when the default plan cannot fit a frame into `img`.
    fn resolve(&self, img: &RasterImage) -> Result<Option<SubbandPlan>> {
        match self.redundancy {
            Some(r) => Ok(Some(SubbandPlan::new(self.delta, r)?)),
            None => Ok(plan_for(img, self.delta)?),
        }
    }
}

#[derive(Args)]
struct TolArgs {
    /// Largest tolerated per-byte signature difference.
    #[arg(long, default_value_t = 3)]
    tol_bytes: u8,
    /// Smallest tolerated signature correlation.
    #[arg(long, default_value_t = 0.98)]
    tol_corr: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            bytes: self.tol_bytes,
            corr: self.tol_corr,
        }
    }
}

fn load_features(path: &Path) -> Result<DeviceFeatureSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    DeviceFeatureSet::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_image(path: &Path) -> Result<RasterImage> {
    RasterImage::load_png(path).with_context(|| format!("loading {}", path.display()))
}

fn load_matrix(path: &Path) -> Result<LcrFeatureMatrix> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    LcrFeatureMatrix::from_csv(file).with_context(|| format!("parsing {}", path.display()))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn verdict_code(v: Verdict) -> u8 {
    match v {
        Verdict::Authentic => 0,
        Verdict::NoWatermark => 3,
        Verdict::UnknownDevice => 4,
        Verdict::Tampered => 5,
    }
}

fn stamp(image: &Path, features: &Path, key: &KeyArg, out: &Path, plan: &PlanArgs) -> Result<()> {
    let img = load_image(image)?;
    let features = load_features(features)?;
    let key = key.load()?;
    let plan = plan
        .resolve(&img)?
        .ok_or_else(|| anyhow!("{}x{} is too small to carry a frame", img.width(), img.height()))?;
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = out
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| anyhow!("invalid output path {}", out.display()))?;
    let store = WatermarkStore::open(dir)?;
    let path = store.stamp_and_store(name, &img, &features, &key, &plan)?;
    eprintln!(
        "stamped {} (delta {}, redundancy {})",
        path.display(),
        plan.delta(),
        plan.redundancy()
    );
    Ok(())
}

fn verify(image: &Path, key: &KeyArg, registry: &Path, tol: &TolArgs, plan: &PlanArgs) -> Result<u8> {
    let img = load_image(image)?;
    let key = key.load()?;
    let registry = Registry::open_read_only(registry)?;
    let report = match plan.resolve(&img)? {
        Some(plan) => verify_image(&img, &key, &plan, &registry, tol.tolerances())?,
        None => provmark_service::VerificationReport::no_watermark("image too small to carry a frame"),
    };
    print_json(&report)?;
    Ok(verdict_code(report.verdict))
}

fn metrics(reference: &Path, test: &Path, csv: Option<&Path>) -> Result<()> {
    let report = quality_report(&load_image(reference)?, &load_image(test)?)?;
    print_json(&report)?;
    if let Some(path) = csv {
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        if fresh {
            writeln!(f, "{}", QualityReport::CSV_HEADER)?;
        }
        writeln!(f, "{}", report.csv_row())?;
    }
    Ok(())
}

fn serve(
    bind: &str,
    port: u16,
    registry: &Path,
    key: &KeyArg,
    config: ServiceConfig,
) -> Result<()> {
    let key = key.load()?;
    let registry = Registry::open(registry)?;
    let state = AppState::new(registry, key, config);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((bind, port))
            .await
            .with_context(|| format!("binding {bind}:{port}"))?;
        eprintln!("listening on {}", listener.local_addr()?);
        provmark_service::serve(listener, state).await?;
        Ok(())
    })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::DeviceFp { features } => {
            println!("{}", load_features(&features)?.fingerprint());
        }
        Command::Register {
            registry,
            device_id,
            features,
            devfing_key,
        } => {
            let mut record = RegistryRecord::new(device_id, load_features(&features)?.fingerprint());
            if let Some(bits) = devfing_key {
                provmark_core::devfing::parse_bits(&bits).context("--devfing-key")?;
                record = record.with_devfing_key(bits);
            }
            let stored = Registry::open(&registry)?.insert(record)?;
            print_json(&stored)?;
        }
        Command::Stamp {
            image,
            features,
            key,
            out,
            plan,
        } => stamp(&image, &features, &key, &out, &plan)?,
        Command::Verify {
            image,
            key,
            registry,
            tol,
            plan,
        } => return verify(&image, &key, &registry, &tol, &plan),
        Command::Metrics {
            reference,
            test,
            csv,
        } => metrics(&reference, &test, csv.as_deref())?,
        Command::Devfing { command } => match command {
            DevfingCommand::Binarize { matrix } => {
                print_json(&SignatureSummary::of(&load_matrix(&matrix)?))?;
            }
            DevfingCommand::Sweep {
                matrix,
                t,
                k,
                trials,
                seed,
            } => {
                let rows = accuracy_sweep(&load_matrix(&matrix)?, t, &k, trials, seed)?;
                println!("{}", SweepRow::CSV_HEADER);
                for row in rows {
                    println!("{}", row.csv_line());
                }
            }
        },
        Command::Serve {
            port,
            bind,
            registry,
            key,
            max_image_bytes,
            delta,
            tol,
        } => {
            if !(delta.is_finite() && delta > 0.0) {
                bail!("--delta must be positive");
            }
            let config = ServiceConfig {
                delta,
                tolerances: tol.tolerances(),
                max_image_bytes,
            };
            serve(&bind, port, &registry, &key, config)?;
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
