//! `rrdps`: key rates, sweeps, intensity optimization and bound verification.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rrdps_core::channel::ChannelTemplate;
use rrdps_core::config::{ConfigError, RunConfig, Settings};
use rrdps_core::csv::{format_sig, write_sweep};
use rrdps_core::keyrate::{evaluate, Evaluation};
use rrdps_core::optimizer::{optimize_intensities, sweep_grid_with, IntensityMode};
use rrdps_core::oracle::{run_suite, SuiteConfig};
use rrdps_core::source::SourceEnsemble;
use rrdps_core::Error;

const EXIT_OK: u8 = 0;
const EXIT_INFEASIBLE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "rrdps", version, about = "Decoy-state RRDPS-QKD key rates with source intensity errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key rate at a single (L, delta, z) point.
    Keyrate(Overrides),
    /// Optimized (or fixed-intensity) rates over L x delta x z, as CSV.
    Sweep(Overrides),
    /// Optimize intensities at a single point.
    Optimize(Overrides),
    /// Randomized soundness check of the decoy bounds.
    Verify(Overrides),
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Config file with [common] and per-subcommand sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named channel parameter set.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long = "base-dark")]
    base_dark: Option<String>,
    #[arg(long)]
    misalignment: Option<String>,
    #[arg(long = "background-error")]
    background_error: Option<String>,
    #[arg(long = "detector-eff")]
    detector_eff: Option<String>,
    #[arg(long = "loss-coeff")]
    loss_coeff: Option<String>,
    #[arg(long = "corr-eff")]
    corr_eff: Option<String>,
    /// Train length(s), comma separated.
    #[arg(long = "L")]
    train_len: Option<String>,
    /// Relative intensity error radius (list for sweep/verify).
    #[arg(long, allow_hyphen_values = true)]
    delta: Option<String>,
    /// Distance(s) in km, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    /// Distance range start:stop:step in km.
    #[arg(long = "z-range")]
    z_range: Option<String>,
    /// mu,nu1,nu2,nu3 instead of optimizing.
    #[arg(long = "fixed-intensities")]
    fixed_intensities: Option<String>,
    #[arg(long = "select-probs")]
    select_probs: Option<String>,
    #[arg(long)]
    resolution: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    multistart: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// eq1: 1/L scales the whole bracket; eq2: only the privacy term.
    #[arg(long = "rate-scope")]
    rate_scope: Option<String>,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<String>,
    /// Seeded-random pattern sets per (delta, z) for verify.
    #[arg(long)]
    patterns: Option<String>,
    /// Estimator mutation for verify's negative control: none | negate-q1.
    #[arg(long)]
    mutate: Option<String>,
}

impl Overrides {
    fn settings(&self, section: &str) -> Result<Settings, ConfigError> {
        let mut settings = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    ConfigError::Invalid(format!("cannot read config {}: {e}", path.display()))
                })?;
                Settings::parse_file(&text, &path.display().to_string(), section)?
            }
            None => Settings::default(),
        };
        let flags = [
            ("preset", &self.preset),
            ("base-dark", &self.base_dark),
            ("misalignment", &self.misalignment),
            ("background-error", &self.background_error),
            ("detector-eff", &self.detector_eff),
            ("loss-coeff", &self.loss_coeff),
            ("corr-eff", &self.corr_eff),
            ("L", &self.train_len),
            ("delta", &self.delta),
            ("z", &self.z),
            ("z-range", &self.z_range),
            ("fixed-intensities", &self.fixed_intensities),
            ("select-probs", &self.select_probs),
            ("resolution", &self.resolution),
            ("rounds", &self.rounds),
            ("multistart", &self.multistart),
            ("seed", &self.seed),
            ("rate-scope", &self.rate_scope),
            ("out", &self.out),
            ("patterns", &self.patterns),
            ("mutate", &self.mutate),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                settings.set_flag(key, v);
            }
        }
        // A flag-level z or z-range replaces whichever form the file used.
        if self.z.is_some() && self.z_range.is_none() {
            settings.remove("z-range");
        }
        if self.z_range.is_some() && self.z.is_none() {
            settings.remove("z");
        }
        Ok(settings)
    }

    fn resolve(&self, section: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::resolve(&self.settings(section)?)
    }
}

fn open_output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_evaluation(out: &mut dyn Write, ensemble: &SourceEnsemble, eval: &Evaluation, train_len: u32, delta: f64, z: f64) -> io::Result<()> {
    let kr = &eval.key_rate;
    let x = ensemble.intensities();
    writeln!(out, "L: {train_len}")?;
    writeln!(out, "delta: {}", format_sig(delta))?;
    writeln!(out, "z_km: {}", format_sig(z))?;
    writeln!(out, "intensities: mu={} nu1={} nu2={} nu3={}", format_sig(x[0]), format_sig(x[1]), format_sig(x[2]), format_sig(x[3]))?;
    writeln!(out, "Q_mu: {}", format_sig(eval.observed.gain.mu))?;
    writeln!(out, "E_mu: {}", format_sig(eval.observed.qber.mu))?;
    writeln!(
        out,
        "Q_k_mu_lower: {} {} {}",
        format_sig(kr.q_bounds.q0_lower),
        format_sig(kr.q_bounds.q1_lower),
        format_sig(kr.q_bounds.q2_lower)
    )?;
    writeln!(
        out,
        "e_ph: {} {} {}",
        format_sig(kr.phase_errors[0]),
        format_sig(kr.phase_errors[1]),
        format_sig(kr.phase_errors[2])
    )?;
    writeln!(out, "ec_cost: {}", format_sig(kr.ec_cost))?;
    writeln!(out, "rate: {}", format_sig(kr.rate))?;
    writeln!(out, "raw_rate: {}", format_sig(kr.raw_rate))?;
    writeln!(out, "feasible: {}", kr.feasible)?;
    match &kr.diagnostics {
        Some(report) => writeln!(out, "conditions: {report}")?,
        None => writeln!(out, "conditions: not checked")?,
    }
    Ok(())
}

enum Failure {
    Config(String),
    Validation(String),
    Infeasible,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(format!("I/O error: {e}"))
    }
}

fn run_point(args: &Overrides, section: &str, force_optimize: bool) -> Result<(), Failure> {
    let cfg = args.resolve(section)?;
    let (l, delta, z) = cfg.single_point()?;
    let params = cfg.channel.params(l, z).map_err(|e| Failure::Config(e.to_string()))?;
    let mode = if force_optimize {
        if let IntensityMode::Fixed(_) = cfg.mode {
            return Err(Failure::Config("optimize does not accept fixed-intensities".into()));
        }
        IntensityMode::Optimize
    } else {
        cfg.mode
    };
    let (ensemble, eval) = match mode {
        IntensityMode::Fixed(x) => {
            let ensemble = SourceEnsemble::with_probs(x, [delta; 4], cfg.select_probs)
                .map_err(|e| Failure::Validation(e.to_string()))?;
            let eval = evaluate(&ensemble, &params, cfg.scope).map_err(|e| Failure::Validation(e.to_string()))?;
            (ensemble, eval)
        }
        IntensityMode::Optimize => match optimize_intensities(&params, delta, &cfg.search) {
            Ok(opt) => (opt.ensemble, opt.evaluation),
            Err(Error::NoFeasiblePoint) => {
                eprintln!("no admissible intensity point in the search box");
                return Err(Failure::Infeasible);
            }
            Err(e) => return Err(Failure::Validation(e.to_string())),
        },
    };
    let mut out = open_output(&cfg.out)?;
    print_evaluation(&mut *out, &ensemble, &eval, l, delta, z)?;
    out.flush()?;
    if eval.key_rate.feasible {
        Ok(())
    } else {
        Err(Failure::Infeasible)
    }
}

fn run_sweep(args: &Overrides) -> Result<(), Failure> {
    let cfg = args.resolve("sweep")?;
    let distances = cfg
        .distances
        .clone()
        .ok_or_else(|| Failure::Config("sweep needs 'z' or 'z-range'".into()))?;
    let template: ChannelTemplate = cfg.channel;
    let result = sweep_grid_with(&template, &cfg.train_lens, &cfg.deltas, &distances, cfg.mode, &cfg.search)
        .map_err(|e| Failure::Config(e.to_string()))?;
    for (l, d, z, reason) in &result.excluded {
        eprintln!("excluded L={l} delta={} z={}: {reason}", format_sig(*d), format_sig(*z));
    }
    let out = open_output(&cfg.out)?;
    write_sweep(out, &result)?;
    Ok(())
}

fn run_verify(args: &Overrides) -> Result<(), Failure> {
    let cfg = args.resolve("verify")?;
    let (l, intensities) = match (&cfg.train_lens[..], cfg.mode) {
        ([l], IntensityMode::Fixed(x)) => (*l, x),
        ([l], IntensityMode::Optimize) => (*l, SuiteConfig::default().intensities),
        _ => return Err(Failure::Config("verify takes a single train length".into())),
    };
    let suite = SuiteConfig {
        intensities,
        select_probs: cfg.select_probs,
        deltas: cfg.deltas.clone(),
        distances: cfg.distances.clone().unwrap_or_else(|| SuiteConfig::default().distances),
        train_len: l,
        random_patterns: cfg.patterns,
        root_seed: cfg.seed,
        mutation: cfg.mutation,
        channel: cfg.channel,
        ..SuiteConfig::default()
    };
    let report = run_suite(&suite).map_err(|e| Failure::Validation(e.to_string()))?;
    let mut out = open_output(&cfg.out)?;
    write!(out, "{report}")?;
    out.flush()?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{} of {} cases failed", report.failures(), report.cases.len())))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Keyrate(args) => run_point(args, "keyrate", false),
        Command::Optimize(args) => run_point(args, "optimize", true),
        Command::Sweep(args) => run_sweep(args),
        Command::Verify(args) => run_verify(args),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(Failure::Infeasible) => ExitCode::from(EXIT_INFEASIBLE),
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failure: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
