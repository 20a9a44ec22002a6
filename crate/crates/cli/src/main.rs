// SPDX-License-Identifier: Apache-2.0 OR MIT

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;

use primefwd::keyspace::KeyDirectory;
use primefwd::svrf::{FractionalKeys, FractionalSvrf, Mode, SvrfFilter};
use primefwd::sweep::{self, SweepConfig};
use primefwd::{gen_workload, FlowId, Mft, Opb, P3faFilter, WorkloadSpec};

const SEED_ENV: &str = "PRIMEFWD_SEED";

#[derive(Parser)]
#[command(
    name = "primefwd",
    version,
    about = "Prime-key multicast forwarding filters and sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic forwarding table.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rho: usize,
        /// Target mean popcount.
        #[arg(long)]
        phi: f64,
        /// Falls back to $PRIMEFWD_SEED, then 1.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a filter from a forwarding table.
    Build {
        #[arg(long)]
        mft: PathBuf,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value = "multicast")]
        mode: ModeArg,
        /// Fractional group count (fsvrf only).
        #[arg(long)]
        groups: Option<usize>,
        /// Filter dump destination.
        #[arg(long)]
        out: PathBuf,
        /// Key directory dump destination.
        #[arg(long)]
        dir_out: PathBuf,
    },
    /// Look a flow or a raw key up in a filter dump.
    Query {
        #[arg(long)]
        filter: PathBuf,
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, conflicts_with = "key", required_unless_present = "key")]
        flow: Option<String>,
        #[arg(long)]
        key: Option<BigUint>,
        /// Arrival port, excluded from the result (p3fa only).
        #[arg(long)]
        ingress: Option<usize>,
    },
    /// Memory footprint of every scheme over the grid.
    SpaceSweep(SweepArgs),
    /// Modelled lookup latency and speedups over the grid.
    TimeSweep(SweepArgs),
    /// Diversity threshold for every (n, rho).
    Threshold(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// `key = value` file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    groups: Option<usize>,
    /// Build every filter instead of using analytic accounting.
    #[arg(long)]
    force_construct: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    P3fa,
    Svrf,
    Fsvrf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Unicast,
    Multicast,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Unicast => Mode::Unicast,
            ModeArg::Multicast => Mode::Multicast,
        }
    }
}

/// Usage errors exit 2, everything else 1.
enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Gen { n, rho, phi, seed, out } => {
            let seed = match seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or(1),
            };
            let spec = WorkloadSpec::new(n, rho, phi, seed);
            spec.validate().map_err(|e| usage(e.to_string()))?;
            let mft = gen_workload(&spec).context("generating workload")?;
            write(&out, &mft.to_text())?;
        }
        Command::Build {
            mft,
            scheme,
            mode,
            groups,
            out,
            dir_out,
        } => {
            if groups.is_some() && !matches!(scheme, SchemeArg::Fsvrf) {
                return Err(usage("--groups only applies to --scheme fsvrf"));
            }
            if groups == Some(0) {
                return Err(usage("--groups must be at least 1"));
            }
            let table = Mft::read_from(read(&mft)?.as_bytes()).with_context(|| format!("parsing {}", mft.display()))?;
            let (filter, dir) = build(&table, scheme, mode.into(), groups)?;
            write(&out, &filter)?;
            write(&dir_out, &dir)?;
        }
        Command::Query {
            filter,
            dir,
            flow,
            key,
            ingress,
        } => {
            let text = read(&filter)?;
            let dir_text = read(&dir)?;
            let flow = flow
                .map(|f| f.parse::<FlowId>())
                .transpose()
                .map_err(|e| usage(e.to_string()))?;
            let report = query(&text, &dir_text, flow.as_ref(), key.as_ref(), ingress)?;
            print!("{report}");
        }
        Command::SpaceSweep(args) => sweep_command(args, |cfg| sweep::run_space_sweep(cfg))?,
        Command::TimeSweep(args) => sweep_command(args, |cfg| sweep::run_time_sweep(cfg))?,
        Command::Threshold(args) => sweep_command(args, |cfg| sweep::run_threshold_sweep(cfg))?,
    }
    Ok(())
}

fn build(table: &Mft, scheme: SchemeArg, mode: Mode, groups: Option<usize>) -> Result<(String, String)> {
    Ok(match scheme {
        SchemeArg::P3fa => {
            let mut dir = KeyDirectory::default();
            let f = P3faFilter::construct(table, &mut dir)?;
            (f.to_dump(), dir.to_dump())
        }
        SchemeArg::Svrf => {
            let mut dir = KeyDirectory::default();
            let f = SvrfFilter::construct(table, &mut dir, mode)?;
            (f.to_dump(), dir.to_dump())
        }
        SchemeArg::Fsvrf => {
            let n_groups = groups.unwrap_or_else(|| table.len().div_ceil(256).clamp(1, 1024));
            let mut keys = FractionalKeys::new(n_groups);
            let f = FractionalSvrf::construct(table, &mut keys, mode)?;
            (f.to_dump(), keys.to_dump())
        }
    })
}

fn join(ports: impl IntoIterator<Item = usize>) -> String {
    ports.into_iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
}

fn query(
    filter: &str,
    dir_text: &str,
    flow: Option<&FlowId>,
    key: Option<&BigUint>,
    ingress: Option<usize>,
) -> Result<String, Failure> {
    let header = filter.lines().next().unwrap_or("");
    if header.starts_with("p3fa ") {
        let dir = KeyDirectory::from_dump(dir_text).context("parsing directory")?;
        let f = P3faFilter::from_dump(filter, &dir).context("parsing filter")?;
        let key = match (flow, key) {
            (Some(flow), _) => dir.lookup_key(flow).map_err(anyhow::Error::from)?.value().clone(),
            (None, Some(k)) => k.clone(),
            (None, None) => unreachable!("clap requires --flow or --key"),
        };
        if ingress.is_some_and(|s| s == 0 || s > f.rho()) {
            return Err(usage(format!("--ingress must be in 1..={}", f.rho())));
        }
        let r = f.query_value(&key, ingress).context("query")?;
        let remainders = r
            .remainders
            .iter()
            .enumerate()
            .map(|(i, rem)| match rem {
                Some(v) => format!("{}={v}", i + 1),
                None => format!("{}=-", i + 1),
            })
            .collect::<Vec<_>>()
            .join(" ");
        return Ok(format!("ports: {}\nremainders: {remainders}\n", join(r.ports())));
    }
    if ingress.is_some() {
        return Err(usage("--ingress only applies to p3fa filters"));
    }
    let (mode, rho, value) = if header.starts_with("svrf ") {
        let dir = KeyDirectory::from_dump(dir_text).context("parsing directory")?;
        let f = SvrfFilter::from_dump(filter, &dir).context("parsing filter")?;
        let key = match (flow, key) {
            (Some(flow), _) => dir.lookup_key(flow).map_err(anyhow::Error::from)?.value().clone(),
            (None, Some(k)) => k.clone(),
            (None, None) => unreachable!("clap requires --flow or --key"),
        };
        (f.mode(), f.rho(), f.query_value(&key).context("query")?)
    } else if let Some(n) = header.strip_prefix("groups=") {
        let n_groups: usize = n.parse().map_err(|_| anyhow::anyhow!("bad header {header:?}"))?;
        let keys = FractionalKeys::from_dump(dir_text, n_groups).context("parsing directory")?;
        let f = FractionalSvrf::from_dump(filter, &keys).context("parsing filter")?;
        let flow = flow.ok_or_else(|| usage("fractional filters are queried by --flow"))?;
        let sub = &f.subfilters()[0];
        (sub.mode(), sub.rho(), f.query(flow, &keys).context("query")?)
    } else {
        return Err(Failure::Data(anyhow::anyhow!(
            "unrecognised filter dump header {header:?}"
        )));
    };
    Ok(match value {
        None => "miss\n".to_string(),
        Some(v) => {
            let ports = match mode {
                Mode::Unicast => v.to_string(),
                Mode::Multicast => join(Opb::from_value(rho, &v).context("decoding bitmap")?.ports()),
            };
            format!("value: {v}\nports: {ports}\n")
        }
    })
}

fn sweep_command(
    args: SweepArgs,
    run: impl FnOnce(&SweepConfig) -> Result<Vec<sweep::Row>, sweep::SweepError>,
) -> Result<(), Failure> {
    let text = match &args.config {
        Some(path) => read(path)?,
        None => String::new(),
    };
    let mut cfg = SweepConfig::parse(&text, env_seed()?).map_err(|e| usage(e.to_string()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(g) = args.groups {
        cfg.groups = Some(g);
    }
    cfg.force_construct |= args.force_construct;
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let mut rows = run(&cfg).map_err(anyhow::Error::from)?;
    let csv = sweep::to_csv(&mut rows);
    match &args.out {
        Some(path) => write(path, &csv)?,
        None => io::stdout().write_all(csv.as_bytes()).context("writing stdout")?,
    }
    Ok(())
}
