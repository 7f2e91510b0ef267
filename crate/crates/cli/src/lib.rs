//! Command-line front end: parameter sweeps, heralding runs, spectrum fits
//! and the invariant suite.

pub mod analysis;
pub mod config;
pub mod error;
pub mod fit;
pub mod herald;
pub mod output;
pub mod svg;
pub mod sweep;
pub mod validate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isobeat::spectra::FitOptions;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::fit::Guess;
use crate::sweep::Variant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Noisy,
    Ideal,
    Mixture,
    All,
}

impl VariantArg {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Noisy => vec![Variant::Noisy],
            VariantArg::Ideal => vec![Variant::Ideal],
            VariantArg::Mixture => vec![Variant::Mixture],
            VariantArg::All => Variant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "isobeat", version, about = "Raman quantum-beat simulator for two isotopic vibrational modes")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory (default: [output] dir, else ./out).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Variant(s) computed by `sweep`.
    #[arg(long, global = true, value_enum, default_value = "all")]
    pub variant: VariantArg,
    /// Write SVG plots next to the CSV files.
    #[arg(long, global = true, overrides_with = "no_svg")]
    pub svg: bool,
    #[arg(long, global = true, overrides_with = "svg")]
    pub no_svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// g² against write/read delay; writes sweep.csv.
    Sweep,
    /// Heralded phonon populations and log-negativity; writes herald.csv.
    Herald,
    /// Voigt fit of a Raman spectrum; writes report.txt.
    Fit(FitArgs),
    /// Runs the invariant checks; exit 3 if any fails.
    Validate,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Two-column text file: Raman shift (cm⁻¹), counts.
    pub spectrum: PathBuf,
    /// Peak guess CENTER[,GAMMA_L[,SIGMA_G[,AREA]]] in cm⁻¹; repeat per peak.
    #[arg(long = "guess", required = true, value_name = "SPEC")]
    pub guesses: Vec<Guess>,
    /// Fit a Gaussian width per peak instead of a shared one.
    #[arg(long)]
    pub independent_sigma: bool,
    /// No constant background term.
    #[arg(long)]
    pub no_baseline: bool,
    /// Also write config_fragment.toml with the derived [system] keys.
    #[arg(long)]
    pub emit_config: bool,
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig, CliError> {
        match &self.config {
            Some(path) => RunConfig::load(path),
            None => Ok(RunConfig::default()),
        }
    }

    fn out_dir(&self, cfg: Option<&RunConfig>) -> PathBuf {
        self.out
            .clone()
            .or_else(|| cfg.and_then(|c| c.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    fn svg_enabled(&self, cfg: &RunConfig) -> bool {
        if self.no_svg {
            false
        } else {
            self.svg || cfg.svg
        }
    }
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn cmd_sweep(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    let dir = cli.out_dir(Some(&cfg));
    output::ensure_dir(&dir)?;
    let rows = sweep::run_sweep(&cfg, &cli.variant.variants())?;
    report_written(&output::write_sweep(&dir, &rows, cli.svg_enabled(&cfg))?);
    Ok(())
}

fn cmd_herald(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    let dir = cli.out_dir(Some(&cfg));
    output::ensure_dir(&dir)?;
    let rows = herald::run_herald(&cfg)?;
    if let Some(first) = rows.first() {
        println!("herald probability {:.4e}, E_N(t={}) = {:.4}", first.herald_prob, first.t_ps, first.e_n);
    }
    report_written(&output::write_herald(&dir, &rows, cli.svg_enabled(&cfg))?);
    Ok(())
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<(), CliError> {
    let spec = fit::load_spectrum(&args.spectrum)?;
    let options = FitOptions { shared_sigma: !args.independent_sigma, baseline: !args.no_baseline, ..FitOptions::default() };
    let outcome = fit::run_fit(&args.spectrum, &spec, &args.guesses, &options)?;
    let dir = cli.out_dir(None);
    output::ensure_dir(&dir)?;
    let text = outcome.report_text();
    print!("{text}");
    let mut written = vec![dir.join("report.txt")];
    output::write_text(&written[0], &text)?;
    if args.emit_config {
        let fragment = outcome
            .config_fragment()
            .ok_or_else(|| CliError::Usage("--emit-config needs at least two fitted peaks".into()))?;
        let path = dir.join("config_fragment.toml");
        output::write_text(&path, &fragment)?;
        written.push(path);
    }
    report_written(&written);
    Ok(())
}

fn cmd_validate(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.run_config()?;
    let checks = validate::run_validation(&cfg);
    print!("{}", validate::format_report(&checks));
    validate::verdict(&checks)
}

/// Executes a parsed command line on a worker pool of `--jobs` threads.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Sweep => cmd_sweep(cli),
        Command::Herald => cmd_herald(cli),
        Command::Fit(args) => cmd_fit(cli, args),
        Command::Validate => cmd_validate(cli),
    })
}
