use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hetnet::experiment::{
    self, bound_report, run_experiment, Axis, CaseSpec, ExperimentError, ExperimentSpec, Kind, NetworkSpec, Overrides,
    Report, Table,
};
use hetnet::sampling::{write_realization_csv, Sampler};

/// Coverage, rate and spectral efficiency of multi-antenna multi-tier networks.
///
/// Exit status: 0 on success, 1 for invalid input (no output file is written),
/// 2 when a run fails.
#[derive(Parser)]
#[command(name = "hetnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Master seed; every realization is a function of (seed, index).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<u64>,
    /// SIR target sweep in dB.
    #[arg(long, num_args = 3, value_names = ["START", "STOP", "STEP"], allow_negative_numbers = true)]
    sweep_db: Option<Vec<f64>>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "HETNET_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse the same random streams for every case.
    #[arg(long)]
    paired: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 3, value_names = ["START", "STOP", "STEP"])]
        theta: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Run a built-in experiment by name.
    Reproduce {
        #[arg(required_unless_present = "list")]
        name: Option<String>,
        /// List the built-in experiments.
        #[arg(long)]
        list: bool,
        /// Print the spec instead of running it.
        #[arg(long)]
        show: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Simulated coverage of a network file.
    Coverage(NetworkArgs),
    /// Analytic union bound on coverage of a network file.
    Bound {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 3, value_names = ["START", "STOP", "STEP"], allow_negative_numbers = true)]
        sweep_db: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distribution of the number of open base stations above target.
    CandidateCount(NetworkArgs),
    /// Area spectral efficiency of a network file.
    Ase(NetworkArgs),
    /// Coverage as the open-access share of one tier varies.
    Theta {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, num_args = 3, value_names = ["START", "STOP", "STEP"], required = true)]
        theta: Vec<f64>,
        /// 1-based tier to split.
        #[arg(long, default_value_t = 2)]
        split_tier: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Coupled comparison of two techniques applied to every tier.
    Ordering {
        #[arg(long)]
        config: PathBuf,
        /// siso, su_bf:M, sdma:M or sdma:M:USERS
        #[arg(long)]
        first: String,
        #[arg(long)]
        second: String,
        #[command(flatten)]
        common: Common,
    },
    /// CCDFs of Gamma ratios Z_{k,m} and their dominance relations.
    Ccdf {
        /// Shapes as K,M; repeatable.
        #[arg(long = "pair", required = true, value_parser = parse_pair)]
        pairs: Vec<[u32; 2]>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a CSV was produced by a given spec.
    Verify {
        /// Experiment spec file.
        #[arg(long, conflicts_with = "name", required_unless_present = "name")]
        config: Option<PathBuf>,
        /// Built-in experiment name.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        csv: PathBuf,
    },
    /// Write one realization as CSV.
    DumpRealization {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = experiment::DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        index: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct NetworkArgs {
    /// Network file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

fn parse_pair(s: &str) -> Result<[u32; 2], String> {
    let (k, m) = s.split_once(',').ok_or("expected K,M")?;
    let p = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("`{x}`: {e}"));
    Ok([p(k)?, p(m)?])
}

fn axis(v: &Option<Vec<f64>>) -> Option<Axis> {
    v.as_ref().map(|v| Axis { start: v[0], stop: v[1], step: v[2] })
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    fs::read_to_string(path).map_err(|e| ExperimentError::Validation(format!("{}: {e}", path.display())))
}

fn overrides(common: &Common, theta: Option<Axis>) -> Overrides {
    Overrides {
        seed: common.seed,
        realizations: common.realizations,
        sweep_db: axis(&common.sweep_db),
        theta,
        paired: common.paired,
    }
}

fn network_spec(
    name: &str,
    kind: Kind,
    config: &Path,
    cases: Vec<CaseSpec>,
) -> Result<ExperimentSpec, ExperimentError> {
    let network = NetworkSpec::from_toml(&read(config)?)?;
    Ok(ExperimentSpec {
        name: name.into(),
        kind,
        seed: experiment::DEFAULT_SEED,
        realizations: hetnet::montecarlo::DEFAULT_REALIZATIONS,
        paired: false,
        sweep_db: None,
        theta: None,
        split_tier: 2,
        network: Some(network),
        cases,
        comparisons: Vec::new(),
        pairs: Vec::new(),
        grid: None,
    })
}

fn emit(report: &Report, out: Option<&Path>) -> Result<(), ExperimentError> {
    let csv = report.to_csv();
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| ExperimentError::Runtime(format!("{}: {e}", dir.display())))?;
            }
            fs::write(path, csv).map_err(|e| ExperimentError::Runtime(format!("{}: {e}", path.display())))?;
        }
        None => std::io::stdout().write_all(csv.as_bytes()).map_err(|e| ExperimentError::Runtime(e.to_string()))?,
    }
    for line in &report.summary {
        eprintln!("{line}");
    }
    Ok(())
}

fn execute(spec: ExperimentSpec, common: &Common) -> Result<(), ExperimentError> {
    eprintln!("{} ({}), seed {}, {} realizations", spec.name, spec.kind.name(), spec.seed, spec.realizations);
    let report = run_experiment(&spec, common.workers)?;
    emit(&report, common.out.as_deref())
}

fn verify(spec: ExperimentSpec, csv_path: &Path) -> Result<(), ExperimentError> {
    let csv = read(csv_path)?;
    let table = Table { metadata: Table::parse_metadata(&csv), ..Table::default() };
    let field = |k: &str| table.get(k).ok_or_else(|| ExperimentError::Validation(format!("CSV lacks `{k}` metadata")));
    let number = |k: &str| -> Result<u64, ExperimentError> {
        field(k)?.parse().map_err(|_| ExperimentError::Validation(format!("bad `{k}` metadata")))
    };
    let parse_axis = |k: &str| -> Result<Option<Axis>, ExperimentError> {
        let Some(v) = table.get(k) else { return Ok(None) };
        let parts: Vec<f64> = v.split(':').filter_map(|p| p.parse().ok()).collect();
        match parts.as_slice() {
            [start, stop, step] => Ok(Some(Axis { start: *start, stop: *stop, step: *step })),
            _ => Err(ExperimentError::Validation(format!("bad `{k}` metadata"))),
        }
    };
    let resolved = spec.apply(&Overrides {
        seed: Some(number("seed")?),
        realizations: Some(number("realizations")?),
        sweep_db: parse_axis("sweep_db")?,
        theta: parse_axis("theta")?,
        paired: field("paired")? == "true",
    });
    let expected = resolved.digest().to_string();
    let found = field("config_digest")?;
    if found == expected {
        println!("ok: {} matches {}", csv_path.display(), expected);
        Ok(())
    } else {
        Err(ExperimentError::Validation(format!("digest mismatch: CSV has {found}, spec gives {expected}")))
    }
}

fn dispatch(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run { config, theta, common } => {
            let spec = ExperimentSpec::from_toml(&read(&config)?)?.apply(&overrides(&common, axis(&theta)));
            execute(spec, &common)
        }
        Command::Reproduce { name, list, show, common } => {
            if list {
                for (n, text) in experiment::BUILTIN {
                    let about = text.lines().next().unwrap_or("").trim_start_matches("# ");
                    println!("{n:<12} {about}");
                }
                return Ok(());
            }
            let name = name.expect("required unless listing");
            if show {
                let text = experiment::BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, t)| *t);
                print!("{}", text.ok_or_else(|| ExperimentError::Validation(format!("unknown experiment `{name}`")))?);
                return Ok(());
            }
            execute(experiment::builtin(&name)?.apply(&overrides(&common, None)), &common)
        }
        Command::Coverage(a) => execute(
            network_spec("coverage", Kind::CoverageSweep, &a.config, Vec::new())?.apply(&overrides(&a.common, None)),
            &a.common,
        ),
        Command::CandidateCount(a) => execute(
            network_spec("candidate-count", Kind::CandidateCount, &a.config, Vec::new())?
                .apply(&overrides(&a.common, None)),
            &a.common,
        ),
        Command::Ase(a) => execute(
            network_spec("ase", Kind::AseCompare, &a.config, Vec::new())?.apply(&overrides(&a.common, None)),
            &a.common,
        ),
        Command::Theta { config, theta, split_tier, common } => {
            let mut spec = network_spec("theta", Kind::ThetaSweep, &config, Vec::new())?;
            spec.split_tier = split_tier;
            execute(spec.apply(&overrides(&common, axis(&Some(theta)))), &common)
        }
        Command::Ordering { config, first, second, common } => {
            let case =
                |label: &str| CaseSpec { label: label.into(), techniques: vec![label.into()], ..CaseSpec::default() };
            if first == second {
                return Err(ExperimentError::Validation("compare two different techniques".into()));
            }
            let mut spec = network_spec("ordering", Kind::Ordering, &config, vec![case(&first), case(&second)])?;
            if common.sweep_db.is_none() {
                spec.sweep_db = Some(Axis { start: -10.0, stop: 15.0, step: 2.5 });
            }
            execute(spec.apply(&overrides(&common, None)), &common)
        }
        Command::Bound { config, sweep_db, out } => {
            let network = NetworkSpec::from_toml(&read(&config)?)?;
            emit(&bound_report(&network, axis(&sweep_db))?, out.as_deref())
        }
        Command::Ccdf { pairs, out } => {
            let spec = ExperimentSpec {
                name: "ccdf".into(),
                kind: Kind::Ccdf,
                seed: experiment::DEFAULT_SEED,
                realizations: 0,
                paired: false,
                sweep_db: None,
                theta: None,
                split_tier: 2,
                network: None,
                cases: Vec::new(),
                comparisons: Vec::new(),
                pairs,
                grid: None,
            };
            emit(&run_experiment(&spec, 1)?, out.as_deref())
        }
        Command::Verify { config, name, csv } => {
            let spec = match (config, name) {
                (Some(path), _) => ExperimentSpec::from_toml(&read(&path)?)?,
                (None, Some(name)) => experiment::builtin(&name)?,
                (None, None) => unreachable!("clap requires one"),
            };
            verify(spec, &csv)
        }
        Command::DumpRealization { config, seed, index, out } => {
            let (cfg, placement) = NetworkSpec::from_toml(&read(&config)?)?.build()?;
            let realization = Sampler::new(&cfg, &placement)?.realization(seed, index);
            let mut buf = Vec::new();
            write_realization_csv(&realization, &mut buf).map_err(|e| ExperimentError::Runtime(e.to_string()))?;
            let report = String::from_utf8(buf).expect("CSV is ASCII");
            match out {
                Some(path) => {
                    fs::write(&path, report).map_err(|e| ExperimentError::Runtime(format!("{}: {e}", path.display())))
                }
                None => {
                    print!("{report}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
