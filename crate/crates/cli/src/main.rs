use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use cantsel_core::polytope::PolytopeLut;
use cantsel_core::sim::montecarlo::{write_kpi_csv, McConfig, Variant};
use cantsel_core::sim::{
    compute_kpis, run_monte_carlo, simulate_with_lut, wall_task, AllocatorKind, KpiReport,
    ScenarioConfig, Task, Trace,
};
use cantsel_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cantsel",
    version,
    about = "Cant-angle selection benchmark for tilting hexarotors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Precompute the zero-moment force polytope table.
    BuildLut {
        #[arg(long)]
        delta_deg: f64,
        #[arg(long)]
        out: PathBuf,
        /// Scenario whose platform parameters are used (defaults otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Simulate one scenario and write its trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lut: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allocator: Option<AllocatorKind>,
        /// Add the wall-clock allocation time column.
        #[arg(long)]
        timing: bool,
    },
    /// Monte-Carlo campaign of the proposed scheme over several margins.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        seed: u64,
        /// Comma-separated robustness margins [N].
        #[arg(long, value_delimiter = ',', required = true)]
        rstar: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lut: Option<PathBuf>,
        /// Add the mean allocation time column.
        #[arg(long)]
        timing: bool,
    },
    /// Proposed and baseline allocators on identical seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Defaults to the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lut: Option<PathBuf>,
    },
    /// KPIs of a saved trace.
    Kpi {
        #[arg(long)]
        trace: PathBuf,
        /// Ignore rows before this time [s].
        #[arg(long, default_value_t = 0.0)]
        from: f64,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::LutVersion { .. }
        | Error::LutMalformed { .. }
        | Error::Json(_)
        | Error::TraceFormat(_)
        | Error::EmptyTrace => 2,
        Error::InfeasibleAbort { .. } => 4,
        _ => 3,
    }
}

fn load_lut(path: Option<&Path>, cfg: &ScenarioConfig) -> Result<Arc<PolytopeLut>> {
    let lut = match path {
        Some(p) => PolytopeLut::load(p)?,
        None => PolytopeLut::build(cfg.lut_step_deg.to_radians(), &cfg.platform)?,
    };
    Ok(Arc::new(lut))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn print_kpis(k: &KpiReport) {
    if let Some(t) = k.t_c_mean {
        println!("t_c_mean_ms      {t:.6}");
    }
    println!("e_p_mean_norm    {:.6e}", k.e_p_mean_norm);
    println!("e_p_rms          {:.6e}", k.e_p_rms);
    println!("e_R_mean_norm    {:.6e}", k.e_r_mean_norm);
    println!("e_R_rms          {:.6e}", k.e_r_rms);
    println!("fei_mean         {:.6}", k.fei_mean);
    println!("mei_mean         {:.6}", k.mei_mean);
    println!("u_rms            {:.3}", k.u_rms);
    println!("steps            {}", k.steps);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::BuildLut {
            delta_deg,
            out,
            config,
        } => {
            let cfg = match config {
                Some(p) => ScenarioConfig::load(p)?,
                None => ScenarioConfig::default(),
            };
            let lut =
                PolytopeLut::build(delta_deg.to_radians(), &cfg.platform).map_err(|e| match e {
                    Error::Contract(msg) => Error::Config(msg),
                    other => other,
                })?;
            lut.save(&out)?;
            println!("wrote {} entries to {}", lut.len(), out.display());
        }
        Command::Run {
            config,
            lut,
            out,
            allocator,
            timing,
        } => {
            let mut cfg = ScenarioConfig::load(config)?;
            if let Some(a) = allocator {
                cfg.allocator = a;
            }
            let lut = load_lut(lut.as_deref(), &cfg)?;
            let is_wall = matches!(cfg.task, Task::Wall(_));
            let (output, kpis) = if is_wall {
                let w = wall_task(&cfg, lut)?;
                for c in &w.contacts {
                    println!(
                        "contact ({:.2}, {:.2}, {:.2}) t = [{:.2}, {:.2}] pushing {}/{} fx in [{:.2}, {:.2}] N",
                        c.window.point.x,
                        c.window.point.y,
                        c.window.point.z,
                        c.window.start,
                        c.window.end,
                        c.pushing_steps,
                        c.steps,
                        c.min_force_x,
                        c.max_force_x
                    );
                }
                (w.output, w.kpis)
            } else {
                let o = simulate_with_lut(&cfg, lut)?;
                let k = o.kpis()?;
                (o, k)
            };
            output.trace.write_csv(create(&out)?, timing)?;
            let infeasible = output.trace.infeasible_count();
            if infeasible > 0 {
                println!("infeasible selections: {infeasible}");
            }
            print_kpis(&kpis);
        }
        Command::Mc {
            config,
            runs,
            seed,
            rstar,
            out,
            lut,
            timing,
        } => {
            let cfg = ScenarioConfig::load(config)?;
            let lut = load_lut(lut.as_deref(), &cfg)?;
            let variants = rstar.into_iter().map(Variant::proposed).collect();
            let mc = McConfig::new(cfg, runs, seed, variants);
            let rows = run_monte_carlo(&mc, lut)?;
            let mut w = create(&out)?;
            write_kpi_csv(&rows, &mut w, timing)?;
            w.flush()?;
            for row in &rows {
                for (run, msg) in &row.failures {
                    eprintln!("r* = {:?} run {run} failed: {msg}", row.variant.r_star);
                }
            }
        }
        Command::Compare {
            config,
            out,
            runs,
            seed,
            lut,
        } => {
            let cfg = ScenarioConfig::load(config)?;
            let lut = load_lut(lut.as_deref(), &cfg)?;
            let seed = seed.unwrap_or(cfg.seed);
            let variants = vec![Variant::proposed(cfg.selector.r_star), Variant::baseline()];
            let mc = McConfig::new(cfg, runs, seed, variants);
            let rows = run_monte_carlo(&mc, lut)?;
            let mut w = create(&out)?;
            write_kpi_csv(&rows, &mut w, true)?;
            w.flush()?;
            let t = |i: usize| rows[i].kpis.and_then(|k| k.t_c_mean);
            if let (Some(p), Some(b)) = (t(0), t(1)) {
                println!(
                    "t_c proposed {p:.6} ms, baseline {b:.6} ms, ratio {:.1}",
                    b / p
                );
            }
        }
        Command::Kpi { trace, from } => {
            let trace = Trace::load(trace)?;
            print_kpis(&compute_kpis(trace.since(from))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
