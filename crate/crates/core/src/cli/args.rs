use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{
    export_scenario, read_filter_config, run, sweep, write_sweep_csv, Averaging, CliError, Input, Mode, RunConfig,
    SweepSpec,
};
use crate::filter::FilterConfig;
use crate::geomap;
use crate::simulate::builtin_scenario;

#[derive(Debug, Parser)]
#[command(name = "canyon", version, about = "Map-constrained pedestrian tracking in urban canyons")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a built-in scenario and track it.
    Simulate {
        /// straight_canyon, l_corner, block_loop, jaywalk_cross or covered_hub
        scenario: String,
        #[command(flatten)]
        run: RunArgs,
        /// Also write trace.jsonl and map.geojson here for later replay.
        #[arg(long)]
        export_dir: Option<PathBuf>,
    },
    /// Track a recorded trace on a GeoJSON map.
    Replay {
        trace: PathBuf,
        map: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep one filter parameter over values and seeded replications.
    Sweep {
        #[arg(long, conflicts_with_all = ["trace", "map"], required_unless_present = "trace")]
        scenario: Option<String>,
        #[arg(long, requires = "map")]
        trace: Option<PathBuf>,
        #[arg(long, requires = "trace")]
        map: Option<PathBuf>,
        /// Filter config field to vary, e.g. jaywalk_weight.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        replications: usize,
        #[arg(long, value_enum, default_value_t = Averaging::Pooled)]
        average: Averaging,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check a GeoJSON map and print a report.
    MapValidate { path: PathBuf },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_enum, default_value_t = Mode::GnssRoninPf)]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON filter config; fields left out keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one filter config field, e.g. --set jaywalk_weight=0.4.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory for reports.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn filter_config(&self) -> Result<FilterConfig, CliError> {
        let mut config = match &self.config {
            Some(path) => read_filter_config(path)?,
            None => FilterConfig::default(),
        };
        for o in &self.overrides {
            let (name, value) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected NAME=VALUE, got '{o}'")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("'{value}' is not a number")))?;
            config.set_param(name.trim(), value)?;
        }
        Ok(config)
    }

    fn run_config(&self, input: Input) -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            mode: self.mode,
            filter: self.filter_config()?,
            input,
            output_dir: self.out.clone(),
            seed: self.seed,
        })
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

/// Executes a parsed command. Reports go to stdout.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            scenario,
            run: args,
            export_dir,
        } => {
            let config = args.run_config(Input::Scenario(scenario.clone()))?;
            if let Some(dir) = &export_dir {
                export_scenario(&builtin_scenario(&scenario)?, config.seed, dir)?;
            }
            let result = run(&config)?;
            println!("{}", result.summary_json());
        }
        Command::Replay { trace, map, run: args } => {
            let config = args.run_config(Input::Trace { trace, map })?;
            println!("{}", run(&config)?.summary_json());
        }
        Command::Sweep {
            scenario,
            trace,
            map,
            param,
            values,
            replications,
            average,
            run: args,
        } => {
            let input = match (scenario, trace, map) {
                (Some(name), None, None) => Input::Scenario(name),
                (None, Some(trace), Some(map)) => Input::Trace { trace, map },
                _ => return Err(CliError::Usage("give --scenario or both --trace and --map".into())),
            };
            let mut base = args.run_config(input)?;
            base.output_dir = None;
            let spec = SweepSpec {
                parameter: param,
                values,
                replications,
                averaging: average,
            };
            let rows = sweep(&spec, &base)?;
            match &args.out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(super::io_err(dir))?;
                    let path = dir.join("sweep.csv");
                    let file = fs::File::create(&path).map_err(super::io_err(&path))?;
                    write_sweep_csv(&rows, &spec.parameter, base.mode, file)?;
                }
                None => write_sweep_csv(&rows, &spec.parameter, base.mode, std::io::stdout().lock())?,
            }
        }
        Command::MapValidate { path } => {
            let report = geomap::map_validate(&path)?;
            print_json(&report);
            if !report.is_valid() {
                return Err(CliError::InvalidMap(format!(
                    "{} has {} error(s)",
                    path.display(),
                    report.errors.len()
                )));
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
/// Failures print `{"error": kind, "message": ...}` to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            if e.use_stderr() {
                let msg = serde_json::json!({"error": "usage", "message": e.to_string()});
                let _ = writeln!(std::io::stderr(), "{msg}");
            } else {
                // --help and --version
                let _ = e.print();
            }
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{}", e.to_json());
            1
        }
    }
}
