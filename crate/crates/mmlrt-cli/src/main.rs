//! `mmlrt` — homogeneity testing for mixtures of continuous-time Markov
//! chains.
//!
//! Subcommands cover the full workflow: `simulate` draws paths from a
//! generator, `fit` estimates one- or two-component models, `lrt` computes
//! the homogeneity likelihood-ratio statistic, `bootstrap` calibrates it by
//! parametric resampling, and `censored-mc` / `cov-verify` / `divergence`
//! run the numerical studies of the statistic's asymptotics.
//!
//! Configuration layering: built-in defaults, then an optional `--config`
//! JSON file, then explicit flags — flags always win.  Every run writes a
//! `manifest.json` into the output directory echoing the fully resolved
//! configuration, and rerunning with `--config manifest.json` regenerates
//! the outputs byte for byte.
//!
//! Exit codes: 0 success, 1 validation/input error, 2 runtime failure.
//! All numeric output (JSON, CSV, and stdout) carries 17 significant
//! digits, enough to round-trip every f64 exactly.

use std::fs::File;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use mmlrt_core::bootstrap::{parametric_bootstrap, BootstrapConfig};
use mmlrt_core::censored_exp::{
    cov_scores, gumbel_cdf, gumbel_mc, local_stationarity_estimate, rho, v_theta, GumbelMcConfig,
    LocalStationarity, ThetaSearch,
};
use mmlrt_core::ctmc::{CtmcParams, SamplePath, SuffStats};
use mmlrt_core::io::{read_json, read_jsonl, write_json_17, write_jsonl};
use mmlrt_core::mixture::{
    em_fit_two_component, fit_one_component, lrt_statistic, FitOptions, FitResult, LrtMode,
    LrtResult, MixtureParams,
};
use mmlrt_core::rng::stream_rng;
use mmlrt_core::score_asymptotics::{divergence_report, DivergenceConfig};
use mmlrt_core::{Error, Result};

/// 17 significant digits: round-trips every finite f64.
fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Parser)]
#[command(
    name = "mmlrt",
    version,
    about = "Homogeneity testing for mixtures of continuous-time Markov chains",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Master seed (overrides the config file's seed fields).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel subcommands.  Precedence: this flag,
    /// then the config file, then MMLRT_WORKERS, then machine parallelism.
    /// Results never depend on the worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// JSON config file (either a bare config object or a manifest.json
    /// written by a previous run).  Explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "mmlrt-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw i.i.d. paths from a generator and write them as JSON Lines.
    Simulate(SimulateArgs),
    /// Fit a one- and/or two-component model to observed paths.
    Fit(FitArgs),
    /// Compute the homogeneity likelihood-ratio statistic on observed paths.
    Lrt(LrtArgs),
    /// Calibrate an observed statistic by parametric bootstrap from the
    /// fitted one-component null.
    Bootstrap(BootstrapArgs),
    /// Monte Carlo study of the extreme-value limit of the censored-
    /// exponential sup statistic.
    #[command(name = "censored-mc")]
    CensoredMc(CensoredMcArgs),
    /// Verify the score-covariance identities: correlation vs covariance/
    /// variance, local stationarity, and long-range decay.
    #[command(name = "cov-verify")]
    CovVerify(CovVerifyArgs),
    /// Monte Carlo check that the second moment of the density ratio
    /// diverges along a rate-scaling sequence.
    Divergence(DivergenceArgs),
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

/// Wrapper written to `<out>/manifest.json` after every successful run.
#[derive(Serialize)]
struct ManifestOut<'a, T: Serialize> {
    subcommand: &'a str,
    config: &'a T,
}

fn write_manifest<T: Serialize>(out: &Path, subcommand: &str, config: &T) -> Result<()> {
    write_json_17(
        &out.join("manifest.json"),
        &ManifestOut { subcommand, config },
    )
}

/// Load a config file into `T`.  Accepts either a bare config object or a
/// manifest written by a previous run (whose `subcommand` must match).
fn load_config<T: DeserializeOwned + Default>(
    path: Option<&Path>,
    subcommand: &str,
) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let value: serde_json::Value = read_json(path)?;
    let value = match &value {
        serde_json::Value::Object(map)
            if map.contains_key("subcommand") && map.contains_key("config") =>
        {
            let sub = map["subcommand"].as_str().unwrap_or_default();
            if sub != subcommand {
                return Err(Error::validation(format!(
                    "{} is a manifest for `{sub}`, not `{subcommand}`",
                    path.display()
                )));
            }
            map["config"].clone()
        }
        _ => value,
    };
    serde_json::from_value(value).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: e.to_string(),
    })
}

/// Worker-count layering: flag, config file, MMLRT_WORKERS, machine.
fn resolve_workers(flag: Option<usize>, file: Option<usize>) -> Result<usize> {
    let resolved = if let Some(w) = flag {
        w
    } else if let Some(w) = file {
        w
    } else if let Ok(s) = std::env::var("MMLRT_WORKERS") {
        s.trim().parse::<usize>().map_err(|e| {
            Error::validation(format!("MMLRT_WORKERS='{s}' is not a worker count: {e}"))
        })?
    } else {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    };
    if resolved == 0 {
        return Err(Error::validation("workers must be at least 1"));
    }
    Ok(resolved)
}

/// EM knobs shared by `fit`, `lrt`, and `bootstrap`.
#[derive(Args, Clone)]
struct EmArgs {
    /// EM sweep cap per restart.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Log-likelihood gain per sweep below which EM counts as converged.
    #[arg(long)]
    tol: Option<f64>,
    /// Number of EM restarts (the first is the deterministic symmetric
    /// start; the rest are seeded jitters).
    #[arg(long)]
    restarts: Option<usize>,
    /// Half-width of the multiplicative log-space jitter applied to rates
    /// at each restart.
    #[arg(long)]
    jitter: Option<f64>,
}

impl EmArgs {
    fn apply(&self, fit: &mut FitOptions) {
        if let Some(v) = self.max_iters {
            fit.max_iters = v;
        }
        if let Some(v) = self.tol {
            fit.loglik_tol = v;
        }
        if let Some(v) = self.restarts {
            fit.n_restarts = v;
        }
        if let Some(v) = self.jitter {
            fit.init_jitter = v;
        }
    }
}

/// Read paths, validate a shared horizon, infer the state count, and build
/// sufficient statistics.
fn load_paths(file: &str) -> Result<(Vec<SuffStats>, usize, f64)> {
    let paths: Vec<SamplePath> = read_jsonl(Path::new(file))?;
    if paths.is_empty() {
        return Err(Error::validation(format!("{file}: no paths")));
    }
    let horizon = paths[0].horizon_t;
    let mut w = 2usize;
    for p in &paths {
        w = w.max(p.z0 + 1);
        for &(state, _) in &p.segments {
            w = w.max(state + 1);
        }
    }
    let stats = paths
        .iter()
        .enumerate()
        .map(|(ix, p)| {
            if p.horizon_t != horizon {
                return Err(Error::validation(format!(
                    "{file}: path {ix} has horizon {} but path 0 has {horizon}; \
                     all paths must share one observation window",
                    p.horizon_t
                )));
            }
            SuffStats::from_path(p, w)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((stats, w, horizon))
}

/// Naive extra-parameter count of the two-component model over the
/// one-component model: mixing weight + second initial distribution +
/// second rate vector over states that can be exited.
fn naive_extra_params(null_fit: &CtmcParams) -> usize {
    let w = null_fit.w();
    let exitable = null_fit.beta.iter().filter(|&&b| b > 0.0).count();
    1 + (w - 1) + exitable
}

fn create_out_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        let line = row.iter().map(|&v| g17(v)).collect::<Vec<_>>().join(",");
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SimulateArgs {
    /// Generator parameters (JSON file with alpha, beta, gamma, T).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Number of paths to draw.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateCfg {
    /// Embedded so the manifest alone regenerates the run.
    params: Option<CtmcParams>,
    n: usize,
    seed: u64,
}

impl Default for SimulateCfg {
    fn default() -> Self {
        SimulateCfg {
            params: None,
            n: 100,
            seed: 0,
        }
    }
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let mut cfg: SimulateCfg = load_config(cli.config.as_deref(), "simulate")?;
    if let Some(file) = &args.params {
        cfg.params = Some(read_json(file)?);
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let params = cfg.params.as_ref().ok_or_else(|| {
        Error::validation("no generator: pass --params <file> or a config with `params`")
    })?;
    params.validate_boundary()?;
    if cfg.n == 0 {
        return Err(Error::validation("need n >= 1 paths"));
    }

    let paths: Vec<SamplePath> = (0..cfg.n)
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, &[i as u64]);
            params.sample_path(&mut rng)
        })
        .collect();
    create_out_dir(&cli.out)?;
    let file = cli.out.join("paths.jsonl");
    write_jsonl(&file, &paths)?;
    write_manifest(&cli.out, "simulate", &cfg)?;
    println!("wrote {} paths to {}", cfg.n, file.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

#[derive(Args)]
struct FitArgs {
    /// Observed paths (JSON Lines).
    #[arg(long)]
    paths: Option<String>,
    /// Which models to fit: 1, 2, or both.
    #[arg(long)]
    components: Option<String>,
    #[command(flatten)]
    em: EmArgs,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitCfg {
    paths: Option<String>,
    components: String,
    fit: FitOptions,
}

impl Default for FitCfg {
    fn default() -> Self {
        FitCfg {
            paths: None,
            components: "1".into(),
            fit: FitOptions::default(),
        }
    }
}

#[derive(Serialize)]
struct FitOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    one: Option<FitResult<CtmcParams>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    two: Option<FitResult<MixtureParams>>,
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let mut cfg: FitCfg = load_config(cli.config.as_deref(), "fit")?;
    if let Some(p) = &args.paths {
        cfg.paths = Some(p.clone());
    }
    if let Some(c) = &args.components {
        cfg.components = c.clone();
    }
    args.em.apply(&mut cfg.fit);
    if let Some(seed) = cli.seed {
        cfg.fit.seed = seed;
    }
    let paths_file = cfg
        .paths
        .as_ref()
        .ok_or_else(|| Error::validation("no input: pass --paths <file>"))?;
    let (fit_one, fit_two) = match cfg.components.as_str() {
        "1" => (true, false),
        "2" => (false, true),
        "both" => (true, true),
        other => {
            return Err(Error::validation(format!(
                "--components must be 1, 2, or both; got '{other}'"
            )))
        }
    };

    let (stats, _, horizon) = load_paths(paths_file)?;
    let one = if fit_one {
        Some(fit_one_component(&stats, horizon)?)
    } else {
        None
    };
    let two = if fit_two {
        Some(em_fit_two_component(&stats, horizon, &cfg.fit)?)
    } else {
        None
    };

    create_out_dir(&cli.out)?;
    let file = cli.out.join("fit.json");
    write_json_17(&file, &FitOutput { one: one.clone(), two: two.clone() })?;
    write_manifest(&cli.out, "fit", &cfg)?;
    if let Some(f) = &one {
        println!("one_component_loglik = {}", g17(f.loglik));
    }
    if let Some(f) = &two {
        println!("two_component_loglik = {}", g17(f.loglik));
        println!("converged = {}", f.converged);
    }
    println!("wrote {}", file.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// lrt
// ---------------------------------------------------------------------------

#[derive(Args)]
struct LrtArgs {
    /// Observed paths (JSON Lines).
    #[arg(long)]
    paths: Option<String>,
    /// Null type: composite (fit the one-component null) or simple
    /// (test against known parameters supplied via --null).
    #[arg(long)]
    mode: Option<String>,
    /// Known null parameters (JSON file); required in simple mode.
    #[arg(long)]
    null: Option<PathBuf>,
    /// In simple mode, pin the second component's initial distribution at
    /// the null's instead of freeing it.
    #[arg(long)]
    pin_alpha: bool,
    #[command(flatten)]
    em: EmArgs,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LrtCfg {
    paths: Option<String>,
    mode: String,
    /// Embedded null parameters for simple mode.
    null: Option<CtmcParams>,
    free_alpha: bool,
    fit: FitOptions,
}

impl Default for LrtCfg {
    fn default() -> Self {
        LrtCfg {
            paths: None,
            mode: "composite".into(),
            null: None,
            free_alpha: true,
            fit: FitOptions::default(),
        }
    }
}

fn run_lrt(cfg: &LrtCfg) -> Result<LrtResult> {
    let paths_file = cfg
        .paths
        .as_ref()
        .ok_or_else(|| Error::validation("no input: pass --paths <file>"))?;
    let mode = match cfg.mode.as_str() {
        "composite" => LrtMode::Composite,
        "simple" => {
            let null = cfg.null.clone().ok_or_else(|| {
                Error::validation("simple mode needs null parameters: pass --null <file>")
            })?;
            LrtMode::Simple {
                null,
                free_alpha: cfg.free_alpha,
            }
        }
        other => {
            return Err(Error::validation(format!(
                "--mode must be composite or simple; got '{other}'"
            )))
        }
    };
    let (stats, _, horizon) = load_paths(paths_file)?;
    lrt_statistic(&stats, horizon, &mode, &cfg.fit)
}

fn cmd_lrt(cli: &Cli, args: &LrtArgs) -> Result<()> {
    let mut cfg: LrtCfg = load_config(cli.config.as_deref(), "lrt")?;
    if let Some(p) = &args.paths {
        cfg.paths = Some(p.clone());
    }
    if let Some(m) = &args.mode {
        cfg.mode = m.clone();
    }
    if let Some(file) = &args.null {
        cfg.null = Some(read_json(file)?);
    }
    if args.pin_alpha {
        cfg.free_alpha = false;
    }
    args.em.apply(&mut cfg.fit);
    if let Some(seed) = cli.seed {
        cfg.fit.seed = seed;
    }

    let res = run_lrt(&cfg)?;
    create_out_dir(&cli.out)?;
    let file = cli.out.join("lrt.json");
    write_json_17(&file, &res)?;
    write_manifest(&cli.out, "lrt", &cfg)?;
    println!("lambda = {}", g17(res.lambda));
    println!("two_lambda = {}", g17(res.two_lambda));
    println!("converged = {}", res.fit_two.converged);
    println!("wrote {}", file.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bootstrap
// ---------------------------------------------------------------------------

#[derive(Args)]
struct BootstrapArgs {
    /// Observed paths (JSON Lines).
    #[arg(long)]
    paths: Option<String>,
    /// Number of bootstrap replicates.
    #[arg(long)]
    replicates: Option<usize>,
    /// Degrees of freedom for the chi-square reference columns
    /// (default: the naive extra-parameter count of the fitted null).
    #[arg(long)]
    chi2_df: Option<usize>,
    /// Feed the raw statistic (instead of twice it) to the headline
    /// chi-square reference column.
    #[arg(long)]
    chi2_on_raw_lambda: bool,
    #[command(flatten)]
    em: EmArgs,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BootstrapCfg {
    paths: Option<String>,
    /// Replicate count (B).
    b: usize,
    /// Master seed for replicate streams.
    seed: u64,
    workers: Option<usize>,
    /// Options for the observed fit and every replicate refit.
    fit: FitOptions,
    /// None means: use the naive extra-parameter count.
    chi2_df: Option<usize>,
    double_lambda_for_chi2: bool,
}

impl Default for BootstrapCfg {
    fn default() -> Self {
        BootstrapCfg {
            paths: None,
            b: 10_000,
            seed: 0,
            workers: None,
            fit: FitOptions::default(),
            chi2_df: None,
            double_lambda_for_chi2: true,
        }
    }
}

fn cmd_bootstrap(cli: &Cli, args: &BootstrapArgs) -> Result<()> {
    let mut cfg: BootstrapCfg = load_config(cli.config.as_deref(), "bootstrap")?;
    if let Some(p) = &args.paths {
        cfg.paths = Some(p.clone());
    }
    if let Some(b) = args.replicates {
        cfg.b = b;
    }
    if let Some(df) = args.chi2_df {
        cfg.chi2_df = Some(df);
    }
    if args.chi2_on_raw_lambda {
        cfg.double_lambda_for_chi2 = false;
    }
    args.em.apply(&mut cfg.fit);
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.fit.seed = seed;
    }
    cfg.workers = Some(resolve_workers(cli.workers, cfg.workers)?);
    let paths_file = cfg
        .paths
        .clone()
        .ok_or_else(|| Error::validation("no input: pass --paths <file>"))?;

    let (stats, _, horizon) = load_paths(&paths_file)?;
    let observed = lrt_statistic(&stats, horizon, &LrtMode::Composite, &cfg.fit)?;
    let null_fit = observed
        .fit_one
        .as_ref()
        .expect("composite mode always carries the one-component fit");
    let chi2_df = cfg.chi2_df.unwrap_or_else(|| naive_extra_params(&null_fit.params));
    cfg.chi2_df = Some(chi2_df);

    let boot_cfg = BootstrapConfig {
        b: cfg.b,
        n: stats.len(),
        master_seed: cfg.seed,
        fit_opts: cfg.fit.clone(),
        workers: cfg.workers.expect("resolved above"),
        chi2_df,
        double_lambda_for_chi2: cfg.double_lambda_for_chi2,
    };
    let report = parametric_bootstrap(&null_fit.params, observed.lambda, &boot_cfg)?;

    create_out_dir(&cli.out)?;
    let file = cli.out.join("bootstrap.json");
    write_json_17(&file, &report)?;
    let hist_rows: Vec<Vec<f64>> = report
        .histogram
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            vec![
                report.histogram.edges[i],
                report.histogram.edges[i + 1],
                c as f64,
            ]
        })
        .collect();
    write_csv(
        &cli.out.join("histogram.csv"),
        "bin_left,bin_right,count",
        &hist_rows,
    )?;
    write_manifest(&cli.out, "bootstrap", &cfg)?;
    println!("lambda_observed = {}", g17(report.lambda_observed));
    println!("p_boot = {}", g17(report.p_boot));
    println!("p_boot_raw = {}", g17(report.p_boot_raw));
    println!("p_chi2 = {} (df = {chi2_df})", g17(report.p_chi2));
    println!("em_failures = {}", report.em_failures);
    println!("wrote {}", file.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// censored-mc
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CensoredMcArgs {
    /// True rate of the null exponential.
    #[arg(long)]
    theta: Option<f64>,
    /// Censoring horizon T.
    #[arg(long)]
    horizon: Option<f64>,
    /// Observations per replicate.
    #[arg(long)]
    n: Option<usize>,
    /// Monte Carlo replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Lower edge of the rate search grid.
    #[arg(long)]
    theta_min: Option<f64>,
    /// Upper edge of the rate search grid.
    #[arg(long)]
    theta_max: Option<f64>,
    /// Geometric grid size for the rate search.
    #[arg(long)]
    grid: Option<usize>,
    /// Golden-section bracket width (in log rate) at which refinement stops.
    #[arg(long)]
    refine_tol: Option<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CensoredMcCfg {
    theta_true: f64,
    #[serde(rename = "T")]
    horizon_t: f64,
    n: usize,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
    /// None resolves to the default search for (n, T).
    search: Option<ThetaSearch>,
}

impl Default for CensoredMcCfg {
    fn default() -> Self {
        CensoredMcCfg {
            theta_true: 1.0,
            horizon_t: 1.0,
            n: 10_000,
            reps: 2000,
            seed: 0,
            workers: None,
            search: None,
        }
    }
}

fn cmd_censored_mc(cli: &Cli, args: &CensoredMcArgs) -> Result<()> {
    let mut cfg: CensoredMcCfg = load_config(cli.config.as_deref(), "censored-mc")?;
    if let Some(v) = args.theta {
        cfg.theta_true = v;
    }
    if let Some(v) = args.horizon {
        cfg.horizon_t = v;
    }
    if let Some(v) = args.n {
        cfg.n = v;
    }
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.workers = Some(resolve_workers(cli.workers, cfg.workers)?);
    if args.theta_min.is_some()
        || args.theta_max.is_some()
        || args.grid.is_some()
        || args.refine_tol.is_some()
    {
        let mut search = match cfg.search.clone() {
            Some(s) => s,
            None => ThetaSearch::default_for(cfg.n, cfg.horizon_t)?,
        };
        if let Some(v) = args.theta_min {
            search.theta_min = v;
        }
        if let Some(v) = args.theta_max {
            search.theta_max = v;
        }
        if let Some(v) = args.grid {
            search.grid_points = v;
        }
        if let Some(v) = args.refine_tol {
            search.refine_tol = v;
        }
        cfg.search = Some(search);
    }
    // Resolve the search fully so the manifest pins it.
    if cfg.search.is_none() {
        cfg.search = Some(ThetaSearch::default_for(cfg.n, cfg.horizon_t)?);
    }

    let mc_cfg = GumbelMcConfig {
        theta_true: cfg.theta_true,
        horizon_t: cfg.horizon_t,
        n: cfg.n,
        reps: cfg.reps,
        seed: cfg.seed,
        search: cfg.search.clone(),
        workers: cfg.workers.expect("resolved above"),
    };
    let result = gumbel_mc(&mc_cfg)?;

    create_out_dir(&cli.out)?;
    let file = cli.out.join("gumbel.json");
    write_json_17(&file, &result)?;
    // Empirical vs limiting CDF of the centered statistic.
    let mut centered: Vec<f64> = result.rows.iter().map(|r| r.centered).collect();
    centered.sort_by(f64::total_cmp);
    let cdf_rows: Vec<Vec<f64>> = centered
        .iter()
        .enumerate()
        .map(|(i, &x)| vec![x, (i + 1) as f64 / centered.len() as f64, gumbel_cdf(x)])
        .collect();
    write_csv(
        &cli.out.join("gumbel_cdf.csv"),
        "centered,ecdf,gumbel_cdf",
        &cdf_rows,
    )?;
    write_manifest(&cli.out, "censored-mc", &cfg)?;
    println!("mean_lambda = {}", g17(result.mean_lambda));
    println!("median_centered = {}", g17(result.median_centered));
    println!("ks_to_gumbel = {}", g17(result.ks_to_gumbel));
    println!("wrote {}", file.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// cov-verify
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CovVerifyArgs {
    /// Censoring horizon T for the identity and local-stationarity checks.
    #[arg(long)]
    horizon: Option<f64>,
    /// Lower edge of the log-rate grid.
    #[arg(long)]
    s_min: Option<f64>,
    /// Upper edge of the log-rate grid.
    #[arg(long)]
    s_max: Option<f64>,
    /// Points per axis of the identity grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Lower edge of the local-stationarity scan.
    #[arg(long)]
    t_min: Option<f64>,
    /// Upper edge of the local-stationarity scan.
    #[arg(long)]
    t_max: Option<f64>,
    /// Step of the local-stationarity scan.
    #[arg(long)]
    t_step: Option<f64>,
    /// Comma-separated ladder of gaps for the local-variance extrapolation.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Comma-separated gaps for the long-range decay table.
    #[arg(long, value_delimiter = ',')]
    long_deltas: Option<Vec<f64>>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CovVerifyCfg {
    #[serde(rename = "T")]
    horizon_t: f64,
    s_min: f64,
    s_max: f64,
    grid: usize,
    t_min: f64,
    t_max: f64,
    t_step: f64,
    /// Points closer than this to the rate crossing (where the correlation
    /// is undefined) are skipped in the local-stationarity scan.
    crossing_guard: f64,
    deltas: Vec<f64>,
    long_deltas: Vec<f64>,
}

impl Default for CovVerifyCfg {
    fn default() -> Self {
        CovVerifyCfg {
            horizon_t: 1.0,
            s_min: -2.0,
            s_max: 2.0,
            grid: 50,
            t_min: -2.0,
            t_max: 4.0,
            t_step: 0.25,
            crossing_guard: 0.05,
            deltas: vec![0.04, 0.02, 0.01, 0.005],
            long_deltas: vec![5.0, 10.0, 20.0],
        }
    }
}

#[derive(Serialize)]
struct LongRangeRow {
    delta: f64,
    rho: f64,
    /// rho * e^{delta/2}; approaches 2 as delta grows.
    scaled: f64,
}

#[derive(Serialize)]
struct CovVerifyOutput {
    /// Worst |rho * sqrt(v v) - cov| over the grid.
    max_identity_residual: f64,
    /// Uncensored correlation at gap 1 and its distance from sech(1/2).
    uncensored_rho_delta1: f64,
    uncensored_rho_delta1_gap: f64,
    local: Vec<LocalStationarity>,
    long_range: Vec<LongRangeRow>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

fn cmd_cov_verify(cli: &Cli, args: &CovVerifyArgs) -> Result<()> {
    let mut cfg: CovVerifyCfg = load_config(cli.config.as_deref(), "cov-verify")?;
    if let Some(v) = args.horizon {
        cfg.horizon_t = v;
    }
    if let Some(v) = args.s_min {
        cfg.s_min = v;
    }
    if let Some(v) = args.s_max {
        cfg.s_max = v;
    }
    if let Some(v) = args.grid {
        cfg.grid = v;
    }
    if let Some(v) = args.t_min {
        cfg.t_min = v;
    }
    if let Some(v) = args.t_max {
        cfg.t_max = v;
    }
    if let Some(v) = args.t_step {
        cfg.t_step = v;
    }
    if let Some(v) = &args.deltas {
        cfg.deltas = v.clone();
    }
    if let Some(v) = &args.long_deltas {
        cfg.long_deltas = v.clone();
    }
    if cfg.grid < 2 {
        return Err(Error::validation("grid must be at least 2"));
    }
    if !(cfg.horizon_t > 0.0 && cfg.horizon_t.is_finite()) {
        return Err(Error::validation("horizon must be positive"));
    }
    if !(cfg.t_step > 0.0) || !(cfg.t_max > cfg.t_min) || !(cfg.s_max > cfg.s_min) {
        return Err(Error::validation("empty scan range"));
    }

    // Identity: correlation times the score standard deviations must equal
    // the covariance, at every pair of grid rates.
    let sgrid = linspace(cfg.s_min, cfg.s_max, cfg.grid);
    let horizon = cfg.horizon_t;
    let mut max_resid = 0.0f64;
    for &s in &sgrid {
        for &t in &sgrid {
            let th1 = s.exp() + 0.5;
            let th2 = t.exp() + 0.5;
            let lhs = rho(s, t, Some(horizon))
                * (v_theta(th1, horizon) * v_theta(th2, horizon)).sqrt();
            let rhs = cov_scores(th1, th2, horizon);
            let resid = (lhs - rhs).abs();
            if !resid.is_finite() {
                return Err(Error::Runtime(format!(
                    "identity residual not finite at (s, t) = ({s}, {t})"
                )));
            }
            max_resid = max_resid.max(resid);
        }
    }

    let rho_1 = rho(0.0, 1.0, None);
    let sech_half = 1.0 / (0.5f64).cosh();

    let crossing = -(2.0f64.ln());
    let mut local = Vec::new();
    let mut t = cfg.t_min;
    while t <= cfg.t_max + 1e-12 {
        if (t - crossing).abs() > cfg.crossing_guard {
            local.push(local_stationarity_estimate(t, Some(horizon), &cfg.deltas)?);
        }
        t += cfg.t_step;
    }

    let long_range: Vec<LongRangeRow> = cfg
        .long_deltas
        .iter()
        .map(|&d| {
            let r = rho(0.0, d, None);
            LongRangeRow {
                delta: d,
                rho: r,
                scaled: r * (d / 2.0).exp(),
            }
        })
        .collect();

    let output = CovVerifyOutput {
        max_identity_residual: max_resid,
        uncensored_rho_delta1: rho_1,
        uncensored_rho_delta1_gap: (rho_1 - sech_half).abs(),
        local,
        long_range,
    };

    create_out_dir(&cli.out)?;
    let file = cli.out.join("cov_verify.json");
    write_json_17(&file, &output)?;
    let local_rows: Vec<Vec<f64>> = output
        .local
        .iter()
        .flat_map(|l| {
            l.deltas
                .iter()
                .zip(&l.ratios)
                .map(|(&d, &r)| vec![l.t, d, r, l.limit])
                .collect::<Vec<_>>()
        })
        .collect();
    write_csv(
        &cli.out.join("local_stationarity.csv"),
        "t,delta,ratio,limit",
        &local_rows,
    )?;
    let long_rows: Vec<Vec<f64>> = output
        .long_range
        .iter()
        .map(|r| vec![r.delta, r.rho, r.scaled])
        .collect();
    write_csv(
        &cli.out.join("long_range.csv"),
        "delta,rho,rho_times_exp_half_delta",
        &long_rows,
    )?;
    write_manifest(&cli.out, "cov-verify", &cfg)?;
    println!("max_identity_residual = {}", g17(output.max_identity_residual));
    println!("uncensored_rho_delta1 = {}", g17(output.uncensored_rho_delta1));
    println!("wrote {}", file.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// divergence
// ---------------------------------------------------------------------------

#[derive(Args)]
struct DivergenceArgs {
    /// Base chain parameters (JSON file with alpha, beta, gamma, T).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Comma-separated rate scales c >= 1.
    #[arg(long, value_delimiter = ',')]
    c_values: Option<Vec<f64>>,
    /// Simulated paths per estimate.
    #[arg(long)]
    nsim: Option<usize>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DivergenceCfg {
    /// Embedded so the manifest alone regenerates the run.
    base: Option<CtmcParams>,
    c_values: Vec<f64>,
    nsim: usize,
    seed: u64,
}

impl Default for DivergenceCfg {
    fn default() -> Self {
        DivergenceCfg {
            base: None,
            c_values: vec![2.0, 5.0, 10.0, 20.0],
            nsim: 10_000,
            seed: 0,
        }
    }
}

fn cmd_divergence(cli: &Cli, args: &DivergenceArgs) -> Result<()> {
    let mut cfg: DivergenceCfg = load_config(cli.config.as_deref(), "divergence")?;
    if let Some(file) = &args.params {
        cfg.base = Some(read_json(file)?);
    }
    if let Some(cs) = &args.c_values {
        cfg.c_values = cs.clone();
    }
    if let Some(n) = args.nsim {
        cfg.nsim = n;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let base = cfg.base.clone().ok_or_else(|| {
        Error::validation("no base chain: pass --params <file> or a config with `base`")
    })?;

    let report = divergence_report(&DivergenceConfig {
        base,
        c_values: cfg.c_values.clone(),
        nsim: cfg.nsim,
        seed: cfg.seed,
    })?;

    create_out_dir(&cli.out)?;
    let file = cli.out.join("divergence.json");
    write_json_17(&file, &report)?;
    write_manifest(&cli.out, "divergence", &cfg)?;
    print!("{}", report.table);
    println!("wrote {}", file.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// entry
// ---------------------------------------------------------------------------

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::Validation(_)
        | Error::Domain(_)
        | Error::Parse { .. }
        | Error::Fit(_)
        | Error::Json(_) => 1,
        Error::Io(_) | Error::Runtime(_) => 2,
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Simulate(args) => cmd_simulate(cli, args),
        Cmd::Fit(args) => cmd_fit(cli, args),
        Cmd::Lrt(args) => cmd_lrt(cli, args),
        Cmd::Bootstrap(args) => cmd_bootstrap(cli, args),
        Cmd::CensoredMc(args) => cmd_censored_mc(cli, args),
        Cmd::CovVerify(args) => cmd_cov_verify(cli, args),
        Cmd::Divergence(args) => cmd_divergence(cli, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
