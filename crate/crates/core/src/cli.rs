//! Command-line front end.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::beam::{neutral_axis_offset, CrossSection};
use crate::calibrate::{
    fit_friction_coeffs, fit_node_geometry, format_geometry_table, measure_twist, validate, GeometryFitOptions,
    InverseModel, ThetaMode,
};
use crate::config::{load_config, Config, CONFIG_ENV};
use crate::domain::ACTIVE_AREAS;
use crate::error::{Error, Result};
use crate::io;
use crate::reconstruct::Reconstructor;
use crate::simulate::{
    angle_sweep, jig_curvature, manipulator_jig_dataset, sensor_groove_dataset, synthesize_frames,
    twist_procedure_frames, FrictionInjection, JigSpec, ScenarioKind, ScenarioSpec,
};
use crate::stream::{run_stream, StreamOptions, DEFAULT_QUEUE_DEPTH};

#[derive(Debug, Parser)]
#[command(name = "fbg-shape", version, about = "FBG shape sensing for a planar continuum manipulator")]
pub struct Cli {
    /// Configuration file; the shipped defaults are used when absent.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the neutral-axis offset of the sensing unit.
    NeutralAxis,
    /// Reconstruct one centerline per frame of a CSV file.
    Reconstruct(ReconstructArgs),
    /// Reconstruct JSON-lines frames from stdin to stdout.
    Stream(StreamArgs),
    /// Generate synthetic frames or calibration datasets.
    Simulate(SimulateArgs),
    /// Fit node positions and orientations from a groove dataset.
    CalibrateGeometry(CalibrateGeometryArgs),
    /// Fit per-sign friction coefficients from a manipulator jig dataset.
    CalibrateFriction(CalibrateFrictionArgs),
    /// Measure twist offsets from a straight frame and a groove frame.
    CalibrateTwist(CalibrateTwistArgs),
    /// Report curvature and direction errors on a dataset.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Frame CSV (`t,l11,l12,l13,l21,l22,l23`).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for the per-frame centerlines and `summary.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Integration step in mm; overrides the config.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// Emit only the tip pose per frame.
    #[arg(long)]
    pub tip_only: bool,
    /// Block the reader instead of dropping frames when the queue is full.
    #[arg(long)]
    pub no_drop: bool,
    #[arg(long, default_value_t = DEFAULT_QUEUE_DEPTH)]
    pub queue_depth: usize,
    /// Integration step in mm; overrides the config.
    #[arg(long)]
    pub step: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimScenario {
    Jig,
    FreeBend,
    ObstacleProximal,
    ObstacleMiddle,
    ObstacleDistal,
    /// Bare sensor in grooves; writes a calibration dataset.
    GrooveSweep,
    /// Manipulator in jig grooves; writes a calibration dataset.
    JigSweep,
    /// Straight frame followed by one groove frame.
    Twist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: SimScenario,
    /// Jig or groove bend angle, degrees.
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    pub angle: f64,
    /// Free-bend cable displacement, mm; the sign selects the direction.
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub displacement: f64,
    /// Obstacle curvature amplitude, 1/mm; the sign selects the direction.
    #[arg(long, allow_negative_numbers = true)]
    pub amplitude: Option<f64>,
    /// Sweep start, end and step, degrees.
    #[arg(long, default_value_t = -90.0, allow_negative_numbers = true)]
    pub from: f64,
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    pub to: f64,
    #[arg(long, default_value_t = 10.0)]
    pub step_deg: f64,
    /// Wavelength noise standard deviation, pm.
    #[arg(long, default_value_t = 0.0)]
    pub noise_pm: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub frames: usize,
    /// Temperature change at every active area, K.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub delta_t: f64,
    /// Inject the config's friction coefficients and twist offsets.
    #[arg(long)]
    pub inject_calibration: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
    /// Also write the reference centerline (`s_mm,x_mm,y_mm`).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateGeometryArgs {
    /// Groove dataset CSV.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Share one orientation per active area between the fibres.
    #[arg(long)]
    pub shared_theta: bool,
    /// Fit with the isothermal inverse instead of the lumped one.
    #[arg(long)]
    pub isothermal: bool,
    /// Write the updated configuration here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateFrictionArgs {
    /// Manipulator jig dataset CSV.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Fail unless both deflection signs can be fitted.
    #[arg(long)]
    pub require_both: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateTwistArgs {
    /// Frame CSV whose first row is straight and second row is in the groove.
    #[arg(long)]
    pub frames: PathBuf,
    /// Groove bend angle, degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub groove_angle: f64,
    /// Groove arc length, mm.
    #[arg(long, default_value_t = crate::simulate::DEFAULT_JIG_ARC_MM)]
    pub groove_arc: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Parse(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn load(cli_path: Option<&Path>) -> Result<Config> {
    match cli_path {
        Some(p) => load_config(p),
        None => Ok(Config::default()),
    }
}

fn save(config: &Config, out: Option<&Path>, w: &mut dyn Write) -> Result<()> {
    config.validate()?;
    if let Some(p) = out {
        config.save(p)?;
        writeln!(w, "wrote {}", p.display())?;
    }
    Ok(())
}

fn with_step(config: &mut Config, step: Option<f64>) -> Result<()> {
    if let Some(s) = step {
        config.sensing.step = s;
        config.validate()?;
    }
    Ok(())
}

/// Runs one command, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut config = load(cli.config.as_deref())?;
    match cli.command {
        Command::NeutralAxis => {
            let section = CrossSection::sensing_unit(&config.materials, config.geometry().lumen_circle_radius)?;
            let zc = neutral_axis_offset(&section)?;
            writeln!(out, "z_c = {} mm", io::fmt_num(zc))?;
        }
        Command::Reconstruct(args) => {
            with_step(&mut config, args.step)?;
            let frames = io::read_frames_csv(open(&args.input)?)?;
            let reconstructor = Reconstructor::from_config(&config)?;
            std::fs::create_dir_all(&args.out)?;
            let mut summary = Vec::with_capacity(frames.len());
            for (i, frame) in frames.iter().enumerate() {
                let rec = reconstructor.reconstruct(frame)?;
                io::write_centerline_csv(create(&args.out.join(format!("frame_{i:05}.csv")))?, &rec.centerline)?;
                summary.push(io::TipSummary {
                    frame: i,
                    timestamp: frame.timestamp,
                    tip: rec.centerline.tip(),
                    tip_angle: rec.centerline.tip_angle(),
                    deflection: rec.estimates[0].deflection,
                });
            }
            io::write_summary_csv(create(&args.out.join("summary.csv"))?, &summary)?;
            writeln!(out, "reconstructed {} frames into {}", frames.len(), args.out.display())?;
        }
        Command::Stream(args) => {
            with_step(&mut config, args.step)?;
            let reconstructor = Reconstructor::from_config(&config)?;
            let options = StreamOptions {
                tip_only: args.tip_only,
                drop_on_overflow: !args.no_drop,
                queue_depth: args.queue_depth,
            };
            let stdin = BufReader::new(std::io::stdin());
            let stdout = BufWriter::new(std::io::stdout());
            let stats = run_stream(stdin, stdout, &reconstructor, options)?;
            eprintln!(
                "frames {} reconstructed {} errors {} dropped {} mean latency {:.3} ms max {:.3} ms",
                stats.received,
                stats.reconstructed,
                stats.errors,
                stats.dropped,
                stats.mean_latency().as_secs_f64() * 1e3,
                stats.max_latency.as_secs_f64() * 1e3
            );
        }
        Command::Simulate(args) => simulate(&config, args, out)?,
        Command::CalibrateGeometry(args) => {
            let dataset = io::read_dataset_csv(open(&args.dataset)?)?;
            let options = GeometryFitOptions {
                model: if args.isothermal {
                    InverseModel::Isothermal
                } else {
                    InverseModel::Lumped
                },
                theta_mode: if args.shared_theta {
                    ThetaMode::Shared
                } else {
                    ThetaMode::PerFiber
                },
            };
            let fit = fit_node_geometry(&dataset, config.geometry(), options)?;
            write!(out, "{}", format_geometry_table(&fit.geometry))?;
            writeln!(
                out,
                "fit: {}; residual norm {:.3e} {:.3e} {:.3e}",
                options.describe(),
                fit.residual_norm[0],
                fit.residual_norm[1],
                fit.residual_norm[2]
            )?;
            config.calibration.geometry = fit.geometry;
            config.geometry_fit = Some(options.describe());
            save(&config, args.out.as_deref(), out)?;
        }
        Command::CalibrateFriction(args) => {
            let dataset = io::read_dataset_csv(open(&args.dataset)?)?;
            let fit = fit_friction_coeffs(&dataset, config.geometry())?;
            if args.require_both && (fit.c_pos.is_none() || fit.c_neg.is_none()) {
                return Err(Error::Precondition(format!(
                    "both deflection signs required: {} positive and {} negative samples",
                    dataset.count(crate::sensing::Deflection::Positive),
                    dataset.count(crate::sensing::Deflection::Negative)
                )));
            }
            let fmt = |c: Option<[f64; ACTIVE_AREAS]>| match c {
                Some(c) => c.map(io::fmt_num).join(" "),
                None => "not fitted".to_string(),
            };
            writeln!(out, "C+ {}", fmt(fit.c_pos))?;
            writeln!(out, "C- {}", fmt(fit.c_neg))?;
            if let Some(c) = fit.c_pos {
                config.calibration.c_pos = c;
            }
            if let Some(c) = fit.c_neg {
                config.calibration.c_neg = c;
            }
            save(&config, args.out.as_deref(), out)?;
        }
        Command::CalibrateTwist(args) => {
            let frames = io::read_frames_csv(open(&args.frames)?)?;
            if frames.len() != 2 {
                return Err(Error::Precondition(format!(
                    "twist needs exactly 2 frames (straight, groove), got {}",
                    frames.len()
                )));
            }
            let jig = JigSpec::new(args.groove_angle, args.groove_arc)?;
            let twist = measure_twist(&frames[0], &frames[1], jig_curvature(&jig), config.geometry())?;
            writeln!(out, "twist_deg {}", twist.map(|t| io::fmt_num(t.to_degrees())).join(" "))?;
            config.calibration.phi_twist = twist;
            save(&config, args.out.as_deref(), out)?;
        }
        Command::Validate(args) => {
            let dataset = io::read_dataset_csv(open(&args.dataset)?)?;
            let report = validate(&dataset, &config.calibration, config.sensing.deadband)?;
            write!(out, "{report}")?;
        }
    }
    Ok(())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout())),
    })
}

fn simulate(config: &Config, args: SimulateArgs, out: &mut dyn Write) -> Result<()> {
    if !(args.noise_pm.is_finite() && args.noise_pm >= 0.0) {
        return Err(Error::invariant("noise-pm", "must be finite and >= 0"));
    }
    let sigma = args.noise_pm * 1e-3;
    let geometry = config.geometry();
    let k_t = config.sensing.k_t;
    let (friction, twist) = if args.inject_calibration {
        let c = &config.calibration;
        (
            FrictionInjection {
                c_pos: c.c_pos,
                c_neg: c.c_neg,
            },
            c.phi_twist,
        )
    } else {
        (FrictionInjection::none(), [0.0; ACTIVE_AREAS])
    };
    let kind = match args.scenario {
        SimScenario::Jig => ScenarioKind::Jig,
        SimScenario::FreeBend => ScenarioKind::FreeBend,
        SimScenario::ObstacleProximal => ScenarioKind::ObstacleProximal,
        SimScenario::ObstacleMiddle => ScenarioKind::ObstacleMiddle,
        SimScenario::ObstacleDistal => ScenarioKind::ObstacleDistal,
        SimScenario::GrooveSweep | SimScenario::JigSweep => {
            if args.format != OutputFormat::Csv {
                return Err(Error::invariant("format", "calibration datasets are CSV only"));
            }
            if !(args.step_deg > 0.0 && args.from <= args.to) {
                return Err(Error::invariant("from/to/step-deg", "need from <= to and a positive step"));
            }
            let angles = angle_sweep(args.from, args.to, args.step_deg);
            let dataset = if args.scenario == SimScenario::GrooveSweep {
                sensor_groove_dataset(geometry, &angles, &[0.0], sigma, k_t, args.seed)?
            } else {
                manipulator_jig_dataset(geometry, &config.cdm, &angles, friction, twist, sigma, k_t, args.seed)?
            };
            io::write_dataset_csv(sink(args.out.as_deref())?, &dataset)?;
            return Ok(());
        }
        SimScenario::Twist => {
            let jig = JigSpec::with_angle(args.angle)?;
            let (straight, groove) =
                twist_procedure_frames(geometry, twist, jig_curvature(&jig), args.delta_t, sigma, k_t, args.seed)?;
            return write_frames(&[straight, groove], args.format, args.out.as_deref());
        }
    };
    let spec = ScenarioSpec {
        angle: args.angle,
        displacement: args.displacement,
        amplitude: args.amplitude.unwrap_or(ScenarioSpec::new(kind).amplitude),
        noise_sigma: sigma,
        friction,
        twist,
        delta_t: [args.delta_t; ACTIVE_AREAS],
        frames: args.frames,
        ..ScenarioSpec::new(kind)
    };
    let data = synthesize_frames(&spec, geometry, &config.cdm, k_t, args.seed)?;
    write_frames(&data.frames, args.format, args.out.as_deref())?;
    if let Some(p) = &args.truth {
        io::write_centerline_csv(create(p)?, &data.truth.polyline)?;
        let tip = data.truth.polyline.tip();
        writeln!(out, "truth tip {} {}", io::fmt_num(tip[0]), io::fmt_num(tip[1]))?;
    }
    Ok(())
}

fn write_frames(frames: &[crate::domain::WavelengthFrame], format: OutputFormat, path: Option<&Path>) -> Result<()> {
    let w = sink(path)?;
    match format {
        OutputFormat::Csv => io::write_frames_csv(w, frames),
        OutputFormat::Jsonl => io::write_frames_jsonl(w, frames),
    }
}
