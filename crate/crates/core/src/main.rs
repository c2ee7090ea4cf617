use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adhesion_lab::adhesion::{builtin_profile, peak_oracle, ProfileSchedule, DEFAULT_V_SLIP_MAX};
use adhesion_lab::config::parse_config;
use adhesion_lab::plot;
use adhesion_lab::scenario::{compare_strategies, run_scenario, EventAction, RunOutput, Scenario};
use adhesion_lab::strategies::StrategyKind;
use adhesion_lab::trace::emit_trace_csv;
use adhesion_lab::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "adhesion-lab", version, about = "Wheel-roller adhesion tracking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        strategy: Option<StrategyKind>,
        /// Run on this profile alone for the whole timeline.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, env = "ADHESION_LAB_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        plots: bool,
        #[arg(long)]
        dt_plant: Option<f64>,
        #[arg(long)]
        dt_ctrl: Option<f64>,
    },
    /// Run the same scenario with several strategies and tabulate metrics.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        strategies: Vec<StrategyKind>,
        #[arg(long, env = "ADHESION_LAB_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        plots: bool,
    },
    /// Print the peak of a built-in profile.
    Oracle {
        #[arg(long)]
        profile: String,
    },
}

fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn unknown_profile(label: &str) -> Error {
    let mut v = adhesion_lab::error::ValidationError::default();
    v.push("profile", format!("unknown profile `{label}`"));
    Error::Validation(v)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn print_metrics(out: &RunOutput) {
    println!(
        "{} ({}), slip rms error {:.4} m/s",
        out.scenario.name,
        out.scenario.strategy,
        out.metrics.slip_rms_error
    );
    for c in &out.metrics.conditions {
        let st = c
            .search_time
            .map_or("not converged".to_string(), |s| format!("{s:.3} s"));
        println!(
            "  {:<6} search {:>14}  ripple {:8.4} N m  mu {:.4} / {:.4} ({:.1}%)",
            c.label,
            st,
            c.torque_ripple,
            c.mu_steady,
            c.mu_peak,
            100.0 * c.peak_utilization
        );
    }
}

fn run(
    config: &Path,
    strategy: Option<StrategyKind>,
    profile: Option<&str>,
    seed: Option<u64>,
    out: &Path,
    plots: bool,
    dt: (Option<f64>, Option<f64>),
) -> Result<()> {
    let mut s = load(config)?;
    if let Some(k) = strategy {
        s.strategy = k;
    }
    if let Some(p) = profile {
        let params = builtin_profile(p).ok_or_else(|| unknown_profile(p))?;
        s.schedule = ProfileSchedule::constant(params);
        s.timeline.events.retain(|e| e.action != EventAction::WetOn);
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(v) = dt.0 {
        s.timing.dt_plant = v;
    }
    if let Some(v) = dt.1 {
        s.timing.dt_ctrl = v;
    }
    s.validate()?;
    let result = run_scenario(&s)?;
    create_dir(out)?;
    let stem = format!("{}_{}", s.name, s.strategy);
    emit_trace_csv(&result.trace.rows, &out.join(format!("{stem}.csv")))?;
    if plots {
        let profiles: Vec<_> = s.schedule.segments().iter().map(|g| g.params.clone()).collect();
        plot::write_svg(
            &out.join(format!("{stem}_time.svg")),
            &plot::render_time_stack(&result.trace.rows)?,
        )?;
        plot::write_svg(
            &out.join(format!("{stem}_trajectory.svg")),
            &plot::render_trajectory(&result.trace.rows, &profiles)?,
        )?;
    }
    print_metrics(&result);
    Ok(())
}

fn compare(
    config: &Path,
    kinds: &[StrategyKind],
    seed: Option<u64>,
    out: &Path,
    plots: bool,
) -> Result<()> {
    let mut s = load(config)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let cmp = compare_strategies(&s, kinds)?;
    create_dir(out)?;
    for r in &cmp.runs {
        let path = out.join(format!("{}_{}.csv", s.name, r.scenario.strategy));
        emit_trace_csv(&r.trace.rows, &path)?;
    }
    let write = |name: &str, text: String| {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    write("metrics.csv", cmp.metrics_csv())?;
    write("ratios.csv", cmp.ratios_csv())?;
    if plots {
        for (name, svg) in plot::render_comparison(&cmp)? {
            plot::write_svg(&out.join(name), &svg)?;
        }
    }
    for r in &cmp.runs {
        print_metrics(r);
    }
    Ok(())
}

fn oracle(profile: &str) -> Result<()> {
    let params = builtin_profile(profile).ok_or_else(|| unknown_profile(profile))?;
    let (v, m) = peak_oracle(&params, DEFAULT_V_SLIP_MAX);
    println!(
        "{}: c1={} c2={} c3={} v_peak={v:.4} m/s mu_peak={m:.4}",
        params.label, params.c1, params.c2, params.c3
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            strategy,
            profile,
            seed,
            out,
            plots,
            dt_plant,
            dt_ctrl,
        } => run(
            &config,
            strategy,
            profile.as_deref(),
            seed,
            &out,
            plots,
            (dt_plant, dt_ctrl),
        ),
        Command::Compare {
            config,
            strategies,
            out,
            seed,
            plots,
        } => compare(&config, &strategies, seed, &out, plots),
        Command::Oracle { profile } => oracle(&profile),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
