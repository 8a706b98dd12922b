use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use alcart_core::cartography::DatasetMap;
use alcart_core::data::{generate_synthetic, GeneratorConfig};
use alcart_core::exec::{install, Exec};
use alcart_core::harness::{
    profile_acquisitions, read_results, write_results, AcquisitionProfile, Benchmark, ExperimentConfig,
    ExperimentResult,
};
use alcart_core::report::{
    aggregate_curves, bucket_bars_svg, default_target, efficiency_csv, efficiency_table, emit_artifacts, map_svg,
    profiles_csv_string,
};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "alcart", version, about = "Active learning with dataset cartography on synthetic outlier benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config (`gen` also accepts a bare generator config).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for independent runs and pool scoring.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Replace the configured replicate seeds with this single seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset as CSV.
    Gen(Common),
    /// Build the reference dataset map from training on the whole pool.
    Map(Common),
    /// Run every configured strategy and replicate at the config's removal fraction.
    Run(Common),
    /// Bucket profile of each acquired batch against a dataset map.
    Profile {
        #[command(flatten)]
        common: Common,
        /// Directory of result JSON files.
        #[arg(long)]
        results: PathBuf,
        /// Map CSV; built from the config when omitted.
        #[arg(long)]
        map: Option<PathBuf>,
    },
    /// Run the removal sweep and report sample efficiency against random.
    Ablate(Common),
    /// Aggregate results into curves, plots and a manifest.
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory of result JSON files.
        #[arg(long)]
        results: PathBuf,
        /// Map CSV used for the map plot and acquisition profiles.
        #[arg(long)]
        map: Option<PathBuf>,
    },
}

/// Failure class, mapped onto the exit status.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = e
            .chain()
            .any(|c| c.downcast_ref::<alcart_core::Error>().is_some_and(alcart_core::Error::is_usage));
        if usage {
            Failure::Usage(e)
        } else {
            Failure::Runtime(e)
        }
    }
}

impl From<alcart_core::Error> for Failure {
    fn from(e: alcart_core::Error) -> Self {
        Failure::from(anyhow::Error::new(e))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Gen(c) => gen(&c),
        Command::Map(c) => with_threads(&c, || map(&c)),
        Command::Run(c) => with_threads(&c, || run(&c)),
        Command::Profile { common, results, map } => profile(&common, &results, map.as_deref()),
        Command::Ablate(c) => with_threads(&c, || ablate(&c)),
        Command::Report { common, results, map } => report(&common, &results, map.as_deref()),
    }
}

fn with_threads<F>(common: &Common, f: F) -> CliResult<()>
where
    F: FnOnce() -> CliResult<()> + Send,
{
    if common.parallel == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--parallel must be at least 1")));
    }
    install(common.parallel, f)
}

fn exec(common: &Common) -> Exec {
    if common.parallel > 1 {
        Exec::Parallel
    } else {
        Exec::Sequential
    }
}

fn config_path(common: &Common) -> CliResult<&Path> {
    common
        .config
        .as_deref()
        .ok_or_else(|| Failure::Usage(anyhow::anyhow!("this command needs --config <path>")))
}

fn load_config(common: &Common) -> CliResult<ExperimentConfig> {
    let path = config_path(common)?;
    let mut cfg = ExperimentConfig::from_json_file(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = common.seed {
        cfg.replicate_seeds = vec![seed];
    }
    cfg.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(cfg)
}

fn out_dir(common: &Common) -> CliResult<&Path> {
    let dir = common.out.as_path();
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn write(path: &Path, content: &str) -> CliResult<()> {
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn gen(common: &Common) -> CliResult<()> {
    let path = config_path(common)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let data = match serde_json::from_str::<ExperimentConfig>(&text) {
        Ok(cfg) => cfg.dataset.load()?,
        Err(experiment_err) => {
            let mut generator: GeneratorConfig = serde_json::from_str(&text).map_err(|_| {
                anyhow::anyhow!("{} is neither an experiment nor a generator config: {experiment_err}", path.display())
            })?;
            if let Some(seed) = common.seed {
                generator.rng_seed = seed;
            }
            generate_synthetic(&generator)?
        }
    };
    let dest = out_dir(common)?.join("dataset.csv");
    data.write_csv(&dest)?;
    log::info!("wrote {} ({} examples)", dest.display(), data.len());
    Ok(())
}

fn map(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let map = Benchmark::prepare(&cfg)?.build_reference_map()?;
    let dir = out_dir(common)?;
    map.write_csv(dir.join("map.csv"))?;
    write(&dir.join("map.svg"), &map_svg(&map))?;
    Ok(())
}

fn timings_csv(results: &[ExperimentResult]) -> String {
    let mut out = String::from("strategy,removal_fraction,replicate,iteration,wall_clock_ms\n");
    for r in results {
        for it in &r.iterations {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.kind(),
                r.removal_fraction,
                r.replicate_seed,
                it.iteration,
                it.wall_clock_ms
            ));
        }
    }
    out
}

fn save_results(dir: &Path, results: &[ExperimentResult]) -> CliResult<()> {
    let written = write_results(results, dir)?;
    log::info!("wrote {} files to {}", written.len(), dir.display());
    // wall-clock is kept out of the result files so they stay reproducible
    write(&dir.join("timings.csv"), &timings_csv(results))
}

fn run(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let started = Instant::now();
    let mut bench = Benchmark::prepare(&cfg)?;
    if cfg.removal_fraction > 0.0 {
        bench.ensure_reference_map()?;
    }
    let results = bench.run_all(&bench.run_specs(cfg.removal_fraction), exec(common))?;
    save_results(out_dir(common)?, &results)?;
    log::info!("{} runs in {:.1}s", results.len(), started.elapsed().as_secs_f64());
    Ok(())
}

fn ablate(common: &Common) -> CliResult<()> {
    let cfg = load_config(common)?;
    let started = Instant::now();
    let exec = exec(common);
    let mut bench = Benchmark::prepare(&cfg)?;
    bench.ensure_reference_map()?;
    let mut fractions = vec![0.0];
    fractions.extend(cfg.removal_fractions.iter().copied().filter(|&f| f > 0.0));
    let specs: Vec<_> = fractions.iter().flat_map(|&f| bench.run_specs(f)).collect();
    let results = bench.run_all(&specs, exec)?;
    let dir = out_dir(common)?;
    save_results(dir, &results)?;

    let full = bench.full_data_accuracy(exec)?;
    let target = default_target(full, cfg.target_fraction);
    let curves = aggregate_curves(&results)?;
    let rows = efficiency_table(&curves, target);
    write(&dir.join("efficiency.csv"), &efficiency_csv(&rows))?;
    for r in &rows {
        match r.efficiency.ratio {
            Some(ratio) => log::info!("{} at removal {:.2}: sample efficiency {ratio:.3}", r.strategy, r.removal_fraction),
            None => log::info!("{} at removal {:.2}: target {target:.4} not reached", r.strategy, r.removal_fraction),
        }
    }
    log::info!("{} runs in {:.1}s", results.len(), started.elapsed().as_secs_f64());
    Ok(())
}

fn load_results(dir: &Path) -> CliResult<Vec<ExperimentResult>> {
    let results = read_results(dir)?;
    if results.is_empty() {
        return Err(Failure::Usage(anyhow::anyhow!("no result files in {}", dir.display())));
    }
    Ok(results)
}

fn load_or_build_map(common: &Common, map: Option<&Path>) -> CliResult<DatasetMap> {
    match map {
        Some(p) => Ok(DatasetMap::read_csv(p)?),
        None => {
            let cfg = load_config(common)?;
            Ok(Benchmark::prepare(&cfg)?.build_reference_map()?)
        }
    }
}

fn profiles_for(results: &[ExperimentResult], map: &DatasetMap) -> CliResult<Vec<AcquisitionProfile>> {
    Ok(results
        .iter()
        .map(|r| profile_acquisitions(r, map))
        .collect::<alcart_core::Result<Vec<_>>>()?)
}

fn profile(common: &Common, results: &Path, map: Option<&Path>) -> CliResult<()> {
    let results = load_results(results)?;
    let map = load_or_build_map(common, map)?;
    let profiles = profiles_for(&results, &map)?;
    let dir = out_dir(common)?;
    write(&dir.join("profiles.csv"), &profiles_csv_string(&profiles))?;
    for p in &profiles {
        let name = format!("profile_{}_f{:.2}_r{}.svg", p.strategy, p.removal_fraction, p.replicate_seed);
        write(&dir.join(name), &bucket_bars_svg(p))?;
    }
    Ok(())
}

fn report(common: &Common, results: &Path, map: Option<&Path>) -> CliResult<()> {
    let results = load_results(results)?;
    let curves = aggregate_curves(&results)?;
    let (maps, profiles) = match map {
        Some(p) => {
            let m = DatasetMap::read_csv(p)?;
            let profiles = profiles_for(&results, &m)?;
            (vec![m], profiles)
        }
        None => (Vec::new(), Vec::new()),
    };
    let named: Vec<(&str, &DatasetMap)> = maps.iter().map(|m| ("reference", m)).collect();
    let manifest = emit_artifacts(&curves, &named, &profiles, out_dir(common)?)?;
    log::info!("{} artifacts, {} plots", manifest.entries.len(), manifest.plot_count());
    Ok(())
}
