use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use translator_lab::flowsim::{soliton_drift_on, DriftSetup};
use translator_lab::io::{export_mesh, export_profile, parse_json, Format, MeshModel};
use translator_lab::translators::{
    build_bowl, build_catenoid, build_grim_reaper, CatenoidVariant, GrimReaperVariant, Translator,
};
use translator_lab::verify::{run_suite, Suite, DEFAULT_S0_GRID};
use translator_lab::{solve_l, Error, FamilyKind, FlowParams, Result, StepControl};

#[derive(Parser)]
#[command(name = "translator-lab", version, about = "Translating solitons to the r-th mean curvature flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rotational bowl (or the parabolic bowl with --parabolic).
    Bowl {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        parabolic: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Translating catenoid started at s = lambda.
    Catenoid {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long)]
        r: u32,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_enum, default_value = "rotational")]
        family: FamilyArg,
        #[command(flatten)]
        common: Common,
    },
    /// Grim reaper (r = 1): closed form for eps 0, through tau(0) = lambda for eps -1.
    GrimReaper {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long, default_value_t = 1)]
        r: u32,
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the asymptotic constant L and derived quantities as JSON.
    Limit {
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long)]
        r: u32,
    },
    /// Surface-of-revolution OBJ mesh of a rotational profile.
    Mesh {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "euclidean")]
        model: ModelArg,
        #[arg(long, default_value_t = 64)]
        segments: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evolve a profile under the flow and print its drift from rigid translation.
    FlowCheck {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        u: f64,
        #[arg(long)]
        steps: usize,
        /// Grid spacing.
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        /// Window start; chosen automatically when omitted.
        #[arg(long, requires = "to")]
        from: Option<f64>,
        #[arg(long, requires = "from")]
        to: Option<f64>,
    },
    /// Run a verification suite; exits 4 if any claim fails.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[command(flatten)]
        p: ParamArgs,
        #[arg(long)]
        r: u32,
        /// Comma-separated s0 values.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_S0_GRID)]
        grid: Vec<f64>,
    },
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    eps: i32,
    #[arg(long)]
    n: u32,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

impl Common {
    fn ctrl(&self) -> StepControl {
        let mut c = StepControl::default();
        if let Some(s) = self.s_max {
            c.s_max = s;
        }
        if let Some(t) = self.rtol {
            c.rel_tol = t;
        }
        c
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Odd,
    Even1,
    Even2,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Rotational,
    Parabolic,
    Hyperbolic,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Euclidean,
    Poincare,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Propositions,
    Gluing,
    Exponent,
    All,
}

fn params(p: &ParamArgs, r: u32) -> Result<FlowParams> {
    FlowParams::from_epsilon(p.eps, p.n, r)
}

fn emit(t: &Translator, common: &Common) -> Result<()> {
    let format = match common.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    match &common.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            export_profile(t, format, &mut w)?;
            w.flush()?;
        }
        None => {
            let mut w = BufWriter::new(io::stdout().lock());
            export_profile(t, format, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn load(path: &Path) -> Result<Translator> {
    parse_json(&std::fs::read_to_string(path)?)?.into_translator()
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Bowl { p, r, parabolic, common } => {
            let family = if parabolic { FamilyKind::Parabolic } else { FamilyKind::Rotational };
            emit(&build_bowl(&params(&p, r)?, family, &common.ctrl())?, &common)?;
        }
        Command::Catenoid { p, r, lambda, variant, family, common } => {
            let variant = match variant {
                VariantArg::Odd => CatenoidVariant::Odd,
                VariantArg::Even1 => CatenoidVariant::Even1,
                VariantArg::Even2 => CatenoidVariant::Even2,
            };
            let family = match family {
                FamilyArg::Rotational => FamilyKind::Rotational,
                FamilyArg::Parabolic => FamilyKind::Parabolic,
                FamilyArg::Hyperbolic => FamilyKind::Hyperbolic,
            };
            emit(&build_catenoid(&params(&p, r)?, family, lambda, variant, &common.ctrl())?, &common)?;
        }
        Command::GrimReaper { p, r, lambda, common } => {
            let params = params(&p, r)?;
            let variant = match (p.eps, lambda) {
                (0, None) => GrimReaperVariant::Euclidean,
                (0, Some(_)) => return Err(Error::Domain("the Euclidean grim reaper takes no --lambda".into())),
                (_, Some(l)) => GrimReaperVariant::Hyperbolic(l),
                (_, None) => return Err(Error::Domain("the hyperbolic grim reaper needs --lambda".into())),
            };
            emit(&build_grim_reaper(&params, variant, &common.ctrl())?, &common)?;
        }
        Command::Limit { p, r } => {
            let report = solve_l(&params(&p, r)?);
            println!("{}", serde_json::to_string_pretty(&report).expect("plain struct"));
        }
        Command::Mesh { input, model, segments, out } => {
            let t = load(&input)?;
            let model = match model {
                ModelArg::Euclidean => MeshModel::Euclidean,
                ModelArg::Poincare => MeshModel::Poincare,
            };
            let mut w = BufWriter::new(File::create(&out)?);
            export_mesh(&t, model, segments, &mut w)?;
            w.flush()?;
        }
        Command::FlowCheck { input, u, steps, h, from, to } => {
            let t = load(&input)?;
            let setup = match (from, to) {
                (Some(a), Some(b)) => DriftSetup { branch: 0, s_a: a, s_b: b, h },
                _ => DriftSetup::automatic(&t, h)?,
            };
            eprintln!("window [{}, {}], h = {}, du = {:e}", setup.s_a, setup.s_b, setup.h, u / steps.max(1) as f64);
            println!("{:e}", soliton_drift_on(&t, &setup, u, steps)?);
        }
        Command::Verify { suite, p, r, grid } => {
            let suite = match suite {
                SuiteArg::Propositions => Suite::Propositions,
                SuiteArg::Gluing => Suite::Gluing,
                SuiteArg::Exponent => Suite::Exponent,
                SuiteArg::All => Suite::All,
            };
            let report = run_suite(suite, &params(&p, r)?, &grid, &StepControl::default())?;
            println!("{}", serde_json::to_string_pretty(&report).expect("plain struct"));
            eprint!("{}", report.table());
            return Ok(report.exit_code());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
