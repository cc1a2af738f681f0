use clap::{Parser, Subcommand, ValueEnum};
use deskasm::commands::{self, Options, Output};
use deskasm::config::RunConfig;
use deskasm::error::{CliError, Result};
use deskasm_core::placement::CorrectionMode;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "deskasm", version, about = "Teach, detect and plan two-part desk assemblies")]
struct Cli {
    /// Scene JSON; the built-in two-block scene when omitted.
    #[arg(long, global = true)]
    scene: Option<PathBuf>,
    /// Run configuration JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scene seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print the main artifact as JSON instead of the summary.
    #[arg(long, global = true)]
    json: bool,
    /// Write every artifact, plus timing.txt, into this directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Pose correction: `literal` rests the part origin on the table,
    /// `corrected` lifts it by the support height.
    #[arg(long, global = true, value_enum)]
    mode: Option<Mode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Literal,
    Corrected,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the stable placements of a mesh, or of each scene object.
    Placements {
        mesh: Option<PathBuf>,
        /// Multiplies OBJ coordinates into metres.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
    /// Recover the relative assembly pose from a marker recording.
    Teach { recording: PathBuf },
    /// Detect every scene object and correct it onto a stable placement.
    Detect,
    /// Detect both parts and plan the assembly taught in a record.
    Plan {
        #[arg(long)]
        teaching: PathBuf,
    },
    /// Synthesise a demonstration, teach it, then detect and plan.
    RunDemo,
}

fn execute(cli: &Cli) -> Result<Output> {
    let opts = Options {
        config: RunConfig::load(cli.config.as_deref())?,
        seed: cli.seed,
        mode: cli.mode.map(|m| match m {
            Mode::Literal => CorrectionMode::Literal,
            Mode::Corrected => CorrectionMode::YawInvariant,
        }),
    };
    let scene = cli.scene.as_deref();
    match &cli.command {
        Command::Placements { mesh, scale } => {
            if !(*scale > 0.0) {
                return Err(CliError::Input(format!("scale must be positive, got {scale}")));
            }
            commands::placements(mesh.as_deref().map(|m| (m, *scale)), scene, &opts)
        }
        Command::Teach { recording } => commands::teach_cmd(recording),
        Command::Detect => commands::detect_cmd(scene, &opts),
        Command::Plan { teaching } => commands::plan_cmd(scene, teaching, &opts),
        Command::RunDemo => commands::run_demo(scene, &opts),
    }
}

fn write_all(dir: &Path, out: &Output) -> Result<()> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    for a in &out.artifacts {
        let p = dir.join(a.file);
        std::fs::write(&p, &a.json).map_err(io(&p))?;
    }
    let p = dir.join("timing.txt");
    std::fs::write(&p, timing_text(out)).map_err(io(&p))
}

fn timing_text(out: &Output) -> String {
    let total: f64 = out.timing.iter().map(|t| t.1).sum();
    let mut s: String = out.timing.iter().map(|(stage, t)| format!("{stage:<12} {t:>8.3} s\n")).collect();
    s.push_str(&format!("{:<12} {total:>8.3} s\n", "total"));
    s
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match execute(&cli) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(dir) = &cli.out_dir {
        if let Err(e) = write_all(dir, &out) {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    }
    if cli.json {
        if let Some(a) = out.artifacts.first() {
            print!("{}", a.json);
        }
    } else {
        print!("{}", out.summary);
    }
    eprint!("{}", timing_text(&out));
    ExitCode::SUCCESS
}
