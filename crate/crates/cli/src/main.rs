use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mdiqcc::analyzer::qber_x;
use mdiqcc::finite::finite_key_rate;
use mdiqcc::forward::{expected_gains_with, infinite_decoy_key_rate};
use mdiqcc::optimize::{optimize_four_intensity, optimize_three_intensity, OptimizerSettings};
use mdiqcc::sim::{load_budget, simulate_counts_with, simulate_hom_scan, QuotaMode, SimPlan};
use mdiqcc::{load_config, load_ledger, AnalysisConfig, Error, PulseModel, SourceSpec, SystemModel};

#[derive(Parser)]
#[command(name = "mdiqcc", version, about = "Decoy-state conference key analysis for three-user MDI networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// X-basis error rate over a grid of Bob/Charlie delays (CSV).
    HomScan(HomScanArgs),
    /// Expected gain table of a configuration (CSV `combo,gain,error_gain`).
    ForwardGains(ForwardArgs),
    /// Monte-Carlo count ledger of a configuration.
    Simulate(SimulateArgs),
    /// Finite-key analysis of a count ledger (JSON report).
    Analyze(AnalyzeArgs),
    /// Optimized rates over a loss range (CSV `loss_db,rate_4int,rate_3int,rate_infinite`).
    KeyrateCurve(CurveArgs),
    /// Optimize protocol parameters at one loss (JSON).
    Optimize(OptimizeArgs),
    /// Ratio of optimized four- and three-intensity rates at one loss (JSON).
    Compare(CompareArgs),
}

#[derive(Args)]
struct HomScanArgs {
    /// Configuration JSON; its system and pulse shape are used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Delay range in ps, `a:b:step`, applied to both axes.
    #[arg(long, default_value = "-400:400:100", allow_hyphen_values = true)]
    grid: String,
    /// Overrides the interference visibility (ideal 0.25).
    #[arg(long)]
    visibility: Option<f64>,
    /// Mean photon number per user.
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    /// Pulse triples per grid point.
    #[arg(long, default_value_t = 1e6)]
    pulses: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Report the closed-form value instead of simulating.
    #[arg(long)]
    analytic: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ForwardArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Total pulse triples; each configuration gets its i.i.d. share.
    #[arg(long, default_value_t = 1e9)]
    pulses: f64,
    /// CSV `combo,pulses` fixing the pulses of every ledger row.
    #[arg(long)]
    budget_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Counts CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Errors CSV path.
    #[arg(long)]
    errors: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    counts: PathBuf,
    #[arg(long)]
    errors: Option<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's failure probability per bound.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Pulse repetition rate in Hz.
    #[arg(long, default_value_t = 2.5e8)]
    rep_rate: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Default, ValueEnum)]
enum Preset {
    /// Detector efficiency 0.8, e_d 2.5%, visibility 0.25.
    #[default]
    Simulation,
    /// Losses include detection, e_d 2.25%, visibility 0.218.
    Experiment,
}

/// Channel for loss-driven commands: η = det_eff·10^(-loss/30) per user.
#[derive(Args)]
struct ChannelArgs {
    /// Take p_d, e_d, visibility and f from this configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Detector efficiency folded into every user's transmittance.
    #[arg(long)]
    det_eff: Option<f64>,
    /// Misalignment error.
    #[arg(long)]
    ed: Option<f64>,
    #[arg(long)]
    visibility: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct SearchArgs {
    /// Objective evaluations per start.
    #[arg(long, default_value_t = 300)]
    evals: usize,
    /// Random starts besides the fixed ones.
    #[arg(long, default_value_t = 3)]
    starts: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct CurveArgs {
    /// `a:b:step` in dB.
    #[arg(long, allow_hyphen_values = true)]
    loss_db: String,
    #[arg(long, default_value_t = 1e13)]
    pulses: f64,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, ValueEnum)]
enum Protocol {
    Four,
    Three,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long, value_enum, default_value = "four")]
    protocol: Protocol,
    #[arg(long)]
    loss_db: f64,
    #[arg(long, default_value_t = 1e13)]
    pulses: f64,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    loss_db: f64,
    #[arg(long, default_value_t = 1.99e13)]
    pulses: f64,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.downcast_ref::<Error>() {
                Some(err) => eprintln!("error: {err}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(err) if !err.is_validation() => 3,
        _ => 2,
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::HomScan(a) => hom_scan(a),
        Command::ForwardGains(a) => forward_gains(a),
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::KeyrateCurve(a) => keyrate_curve(a),
        Command::Optimize(a) => optimize(a),
        Command::Compare(a) => compare(a),
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// `a:b:step` or a single value.
fn parse_range(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad range `{text}`"))?;
    match parts[..] {
        [v] => Ok(vec![v]),
        [a, b, step] => {
            if !(step > 0.0) || b < a {
                bail!("range `{text}` needs step > 0 and a <= b");
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            Ok((0..=n).map(|i| a + step * i as f64).collect())
        }
        _ => bail!("range `{text}` must be `a:b:step`"),
    }
}

fn hom_scan(a: HomScanArgs) -> anyhow::Result<()> {
    let (mut system, gamma) = match &a.config {
        Some(p) => {
            let (_, sys, pulse, _) = load_config(p)?;
            (sys, pulse.gamma)
        }
        None => (SystemModel::symmetric(1.0, 0.0, 0.0, 0.25, 1.16)?, PulseModel::DEFAULT_GAMMA),
    };
    if let Some(v) = a.visibility {
        system.visibility = v;
        system.validate()?;
    }
    let axis = parse_range(&a.grid)?;
    let grid: Vec<(f64, f64)> = axis.iter().flat_map(|&b| axis.iter().map(move |&c| (b, c))).collect();
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "dt_b_ps,dt_c_ps,qber_x")?;
    if a.analytic {
        for (b, c) in grid {
            let q = qber_x(&PulseModel::with_delays(gamma, b, c), system.visibility)?;
            writeln!(w, "{b},{c},{q}")?;
        }
        return Ok(());
    }
    if !(a.pulses >= 1.0) {
        bail!(Error::invalid("pulses", "pulses >= 1 violated"));
    }
    for p in simulate_hom_scan(a.mu, &system, gamma, &grid, a.pulses.round() as u64, a.seed)? {
        let q = p.qber_x.map(|q| q.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{q}", p.dt_b, p.dt_c)?;
    }
    Ok(())
}

fn forward_gains(a: ForwardArgs) -> anyhow::Result<()> {
    let (source, system, pulse, analysis) = load_config(&a.config)?;
    let table = expected_gains_with(&source, &system, &pulse, analysis.quadrature_points)?;
    output(a.out.as_deref())?.write_all(table.to_csv().as_bytes())?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let (source, system, pulse, _) = load_config(&a.config)?;
    let quota = match &a.budget_file {
        Some(p) => QuotaMode::Fixed(load_budget(p)?),
        None => QuotaMode::Proportional,
    };
    let plan = SimPlan {
        n_pulses: a.pulses,
        seed: a.seed,
        quota,
    };
    let ledger = simulate_counts_with(&source, &system, &pulse, &plan)?;
    output(a.out.as_deref())?.write_all(ledger.counts_csv().as_bytes())?;
    if let Some(p) = &a.errors {
        output(Some(p))?.write_all(ledger.errors_csv().as_bytes())?;
    }
    Ok(())
}

fn analyze(a: AnalyzeArgs) -> anyhow::Result<()> {
    let (source, system, _, mut analysis) = load_config(&a.config)?;
    if let Some(eps) = a.epsilon {
        analysis.epsilon = eps;
    }
    if !(a.rep_rate > 0.0) || !a.rep_rate.is_finite() {
        bail!(Error::invalid("rep_rate", "rep_rate > 0 violated"));
    }
    let ledger = load_ledger(&a.counts, a.errors.as_deref())?;
    let report = finite_key_rate(&ledger, &source, system.f, &analysis)?.with_rep_rate(a.rep_rate);
    if let Some(reason) = &report.reason {
        eprintln!("note: {reason}");
    }
    write_json(a.out.as_deref(), &report)
}

/// Channel template and analysis settings; transmittance is set per loss.
struct Channel {
    system: SystemModel,
    det_eff: f64,
    analysis: AnalysisConfig,
}

impl Channel {
    fn from_args(c: &ChannelArgs, default: Preset) -> anyhow::Result<Self> {
        let preset = c.preset.unwrap_or(default);
        let (mut system, mut det_eff) = match preset {
            Preset::Simulation => (SystemModel::symmetric(1.0, 1e-6, 0.025, 0.25, 1.16)?, 0.8),
            Preset::Experiment => (SystemModel::symmetric(1.0, 1e-6, 0.0225, 0.218, 1.16)?, 1.0),
        };
        let mut analysis = AnalysisConfig::default();
        if let Some(p) = &c.config {
            let (_, sys, _, an) = load_config(p)?;
            system = sys;
            analysis = an;
        }
        if let Some(v) = c.det_eff {
            det_eff = v;
        }
        if let Some(v) = c.ed {
            system.e_d = v;
        }
        if let Some(v) = c.visibility {
            system.visibility = v;
        }
        if let Some(v) = c.epsilon {
            analysis.epsilon = v;
        }
        if !(0.0..=1.0).contains(&det_eff) {
            bail!(Error::invalid("det_eff", format!("{det_eff} not in [0, 1]")));
        }
        analysis.validate()?;
        Ok(Channel { system, det_eff, analysis })
    }

    fn at(&self, loss_db: f64) -> anyhow::Result<SystemModel> {
        let sys = self.system.with_eta(SystemModel::eta_from_total_loss(loss_db, self.det_eff));
        sys.validate()?;
        Ok(sys)
    }
}

impl SearchArgs {
    fn settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            evaluations_per_start: self.evals,
            random_starts: self.starts,
            seed: self.seed,
        }
    }
}

fn keyrate_curve(a: CurveArgs) -> anyhow::Result<()> {
    let channel = Channel::from_args(&a.channel, Preset::Simulation)?;
    let settings = a.search.settings();
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "loss_db,rate_4int,rate_3int,rate_infinite")?;
    for loss in parse_range(&a.loss_db)? {
        let sys = channel.at(loss)?;
        let four = optimize_four_intensity(&sys, a.pulses, &channel.analysis, &settings)?;
        let three = optimize_three_intensity(&sys, a.pulses, &channel.analysis, &settings)?;
        let infinite = infinite_decoy_key_rate(&four.params, &sys)?;
        writeln!(w, "{loss},{},{},{infinite}", four.rate, three.rate)?;
        eprintln!("{loss} dB done");
    }
    Ok(())
}

fn optimize(a: OptimizeArgs) -> anyhow::Result<()> {
    let channel = Channel::from_args(&a.channel, Preset::Simulation)?;
    let sys = channel.at(a.loss_db)?;
    let settings = a.search.settings();
    match a.protocol {
        Protocol::Four => write_json(
            a.out.as_deref(),
            &optimize_four_intensity(&sys, a.pulses, &channel.analysis, &settings)?,
        ),
        Protocol::Three => write_json(
            a.out.as_deref(),
            &optimize_three_intensity(&sys, a.pulses, &channel.analysis, &settings)?,
        ),
    }
}

#[derive(Serialize)]
struct Comparison {
    loss_db: f64,
    pulses: f64,
    rate_4int: f64,
    rate_3int: f64,
    /// `None` when the three-intensity rate is zero.
    ratio: Option<f64>,
    params_4int: SourceSpec,
    params_3int: mdiqcc::decoy::ThreeIntensitySpec,
}

fn compare(a: CompareArgs) -> anyhow::Result<()> {
    let channel = Channel::from_args(&a.channel, Preset::Experiment)?;
    let sys = channel.at(a.loss_db)?;
    let settings = a.search.settings();
    let four = optimize_four_intensity(&sys, a.pulses, &channel.analysis, &settings)?;
    let three = optimize_three_intensity(&sys, a.pulses, &channel.analysis, &settings)?;
    write_json(
        a.out.as_deref(),
        &Comparison {
            loss_db: a.loss_db,
            pulses: a.pulses,
            rate_4int: four.rate,
            rate_3int: three.rate,
            ratio: (three.rate > 0.0).then(|| four.rate / three.rate),
            params_4int: four.params,
            params_3int: three.params,
        },
    )
}
