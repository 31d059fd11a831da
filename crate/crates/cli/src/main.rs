//! `ris-sim`: runs the experiments of the `ris-linear` harness and writes
//! their curves as CSV.
//!
//! Exit status: 0 success, 2 configuration error, 3 numerical failure,
//! 4 I/O failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ris_linear::harness::config::parse_list;
use ris_linear::harness::result::write_csv;
use ris_linear::harness::{
    export_csv, load_scenario, run_downlink_ber, run_output_snr, run_pdf_fit, run_uplink_ser, CurveResult, Engine,
    ScenarioConfig, Scheme, SerMode, Sweep,
};
use ris_linear::Error;

#[derive(Parser)]
#[command(name = "ris-sim", version, about = "Monte Carlo and closed-form experiments for RIS-aided high-mobility links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Downlink BER against speed, Eb/N0 or the Rician factor.
    DownlinkBer(Common),
    /// Uplink SER against Eb/N0, simulated and closed form.
    UplinkSer(Common),
    /// Precoded output SNR against the number of BS antennas.
    OutputSnr(Common),
    /// Detector-output density: histogram, series and Gaussian.
    PdfFit(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (`key = value` lines, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the scenario's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep axis: speed, ebn0, rician_k (downlink-ber); ebn0 (uplink-ser);
    /// n_bs_antennas (output-snr); snr (pdf-fit).
    #[arg(long)]
    sweep: Option<String>,
    /// Comma-separated grid values on the sweep axis.
    #[arg(long)]
    grid: Option<String>,
    /// linear_precoded, linear_joint, qam_ml_baseline (downlink-ber);
    /// monte_carlo, closed_form, both (uplink-ser).
    #[arg(long)]
    scheme: Option<String>,
    /// Keep the full-size arrays (N_t = 128, N_k = 8, N = 64).
    #[arg(long)]
    paper_scale: bool,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn scenario(c: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => load_scenario(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if !c.paper_scale {
        cfg.apply_desk_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn grid(c: &Common, default: Vec<f64>) -> Result<Vec<f64>, Error> {
    match &c.grid {
        Some(g) => parse_list("grid", g),
        None => Ok(default),
    }
}

fn only_axis(c: &Common, axis: &str) -> Result<(), Error> {
    match c.sweep.as_deref() {
        None => Ok(()),
        Some(a) if a == axis => Ok(()),
        Some(a) => Err(Error::Config {
            line: None,
            key: Some("sweep".into()),
            message: format!("this experiment sweeps `{axis}`, not `{a}`"),
        }),
    }
}

fn no_scheme(c: &Common) -> Result<(), Error> {
    match &c.scheme {
        None => Ok(()),
        Some(s) => Err(Error::Config {
            line: None,
            key: Some("scheme".into()),
            message: format!("this experiment takes no scheme (got `{s}`)"),
        }),
    }
}

fn run(cmd: &Command) -> Result<(CurveResult, Option<PathBuf>), Error> {
    let c = match cmd {
        Command::DownlinkBer(c) | Command::UplinkSer(c) | Command::OutputSnr(c) | Command::PdfFit(c) => c,
    };
    let cfg = scenario(c)?;
    let engine = Engine::new(c.workers)?;
    let result = match cmd {
        Command::DownlinkBer(_) => {
            let sweep = Sweep::parse(c.sweep.as_deref().unwrap_or("ebn0"))?;
            let scheme = Scheme::parse(c.scheme.as_deref().unwrap_or("linear_precoded"))?;
            let default = match sweep {
                Sweep::Ebn0 => cfg.ebn0_grid.clone(),
                other => other.default_grid(),
            };
            run_downlink_ber(&cfg, scheme, sweep, &grid(c, default)?, &engine)?
        }
        Command::UplinkSer(_) => {
            only_axis(c, "ebn0")?;
            let mode = SerMode::parse(c.scheme.as_deref().unwrap_or("both"))?;
            run_uplink_ser(&cfg, mode, &grid(c, cfg.ebn0_grid.clone())?, &engine)?
        }
        Command::OutputSnr(_) => {
            only_axis(c, "n_bs_antennas")?;
            no_scheme(c)?;
            run_output_snr(&cfg, &grid(c, vec![32.0, 64.0, 128.0])?, &engine)?
        }
        Command::PdfFit(_) => {
            only_axis(c, "snr")?;
            no_scheme(c)?;
            run_pdf_fit(&cfg, &grid(c, vec![7.0, 17.0, 27.0])?, &engine)?
        }
    };
    Ok((result, c.out.clone()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = run(&cli.command).and_then(|(result, out)| match out {
        Some(path) => export_csv(&result, &path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&result, &mut lock)?;
            lock.flush().map_err(|source| Error::Io {
                path: "<stdout>".into(),
                source,
            })
        }
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ris-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
