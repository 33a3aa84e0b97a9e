mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Environment variable naming the directory under which runs are written.
pub const OUTPUT_ROOT_ENV: &str = "MULTISCALE_OUTPUT_ROOT";

#[derive(Parser, Debug)]
#[command(
    name = "multiscale",
    version,
    about = "Micro, meso and macro simulations of growing, dividing, repelling particles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scale of an experiment and write its outputs.
    Run(RunArgs),
    /// Relative L1 errors of micro averages and the macro run against a meso run.
    Compare(CompareArgs),
    /// Summarise a run directory and check its invariants.
    Report(ReportArgs),
    /// Check a configuration without running it.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScaleArg {
    Micro,
    Meso,
    Macro,
}

impl ScaleArg {
    pub fn name(self) -> &'static str {
        match self {
            ScaleArg::Micro => "micro",
            ScaleArg::Meso => "meso",
            ScaleArg::Macro => "macro",
        }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(required_unless_present = "from_manifest")]
    pub scale: Option<ScaleArg>,
    /// case1-growth, case2-frag, case3-both, appendixA-none or appendixA-noD.
    #[arg(required_unless_present = "from_manifest")]
    pub preset: Option<String>,
    #[command(flatten)]
    pub setup: Setup,
    /// Output directory; defaults to `$MULTISCALE_OUTPUT_ROOT/<preset>-<scale>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = OUTPUT_ROOT_ENV, default_value = "runs")]
    pub output_root: PathBuf,
    /// Comma-separated snapshot times; the last one ends the run.
    #[arg(long, value_delimiter = ',')]
    pub output_times: Option<Vec<f64>>,
    /// Micro runs stop once the particle count exceeds this.
    #[arg(long, default_value_t = 10_000)]
    pub particle_cap: usize,
    /// Re-run exactly what a previous manifest describes.
    #[arg(long, conflicts_with_all = ["scale", "preset"])]
    pub from_manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Reference run directory.
    #[arg(long)]
    pub meso: PathBuf,
    /// Macro run directory (a meso run is also accepted).
    #[arg(long = "macro")]
    pub macro_dir: Option<PathBuf>,
    /// Micro run directories; may be repeated.
    #[arg(long)]
    pub micro: Vec<PathBuf>,
    /// Error CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub dir: PathBuf,
    /// Write grayscale heatmaps of the spatial and radial densities to `<dir>/png`.
    #[arg(long)]
    pub png: bool,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    pub preset: Option<String>,
    #[command(flatten)]
    pub setup: Setup,
}

/// Config file plus per-field overrides, applied in that order on top of a preset.
#[derive(Args, Debug, Default)]
pub struct Setup {
    /// `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

macro_rules! overrides {
    ($($field:ident),* $(,)?) => {
        #[derive(Args, Debug, Default)]
        pub struct Overrides {
            $(
                #[arg(long, allow_hyphen_values = true, value_name = "VALUE", help_heading = "Config overrides")]
                pub $field: Option<String>,
            )*
        }

        impl Overrides {
            pub fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut out = Vec::new();
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field), v.as_str()));
                    }
                )*
                out
            }
        }
    };
}

overrides!(
    x_min,
    x_max,
    r_min,
    r_max,
    n0,
    diffusion_d,
    growth_g,
    beta_bar,
    alpha,
    t_final,
    init_support_s,
    eps,
    nx,
    nr,
    delta_micro,
    cfl_safety,
    seed,
    n_runs,
    dim,
);

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => commands::run(args),
        Command::Compare(args) => commands::compare(args),
        Command::Report(args) => commands::report(args),
        Command::Validate(args) => commands::validate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
