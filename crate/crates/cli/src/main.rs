use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use qcontour_core::contours::{halfspace_intersection, radial_contour};
use qcontour_core::diagnostics::{
    default_halfwidth, delta_x, pp_max_deviation, pp_pairs, window_subsample, PpReport,
};
use qcontour_core::directional::sweep_directions;
use qcontour_core::io::{self, ContourFormat, ModelFile, Sweep};
use qcontour_core::splines::make_basis;
use qcontour_core::stratified::{fit_setting1, fit_setting2, ProbePoint};
use qcontour_core::synthetic::{gen_synthetic, Family};
use qcontour_core::{
    Contour, CovariateModel, Dataset, Error, KnotPlacement, RunConfig, SettingKind, TauGrid,
};

#[derive(Parser)]
#[command(
    name = "qcontour",
    version,
    about = "Covariate-conditional bivariate quantile contours"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a directional or stratified model and save it.
    Fit(FitArgs),
    /// Compute contours from a saved model.
    Contour(ContourArgs),
    /// Coverage diagnostics of a saved model on a covariate window.
    Diagnose(DiagnoseArgs),
    /// Write a synthetic dataset.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    One,
    Two,
    DirLinear,
    DirSpline,
}

impl From<SettingArg> for SettingKind {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::One => SettingKind::One,
            SettingArg::Two => SettingKind::Two,
            SettingArg::DirLinear => SettingKind::DirLinear,
            SettingArg::DirSpline => SettingKind::DirSpline,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    y1: String,
    #[arg(long)]
    y2: String,
    #[arg(long)]
    x: String,
    #[arg(long, value_enum)]
    setting: SettingArg,
    /// Contour levels, comma separated.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Number of τ-grid levels for stratified settings.
    #[arg(long)]
    grid: Option<usize>,
    /// Number of interior spline knots.
    #[arg(long)]
    knots: Option<usize>,
    /// Spline order (4 is cubic).
    #[arg(long)]
    order: Option<usize>,
    /// Keep only rows where COL equals VAL.
    #[arg(long, value_name = "COL=VAL")]
    filter: Option<String>,
    /// Number of directions for directional settings.
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct ContourArgs {
    #[arg(long)]
    model: PathBuf,
    /// Covariate quantile(s) to condition on.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "at_value",
        required_unless_present = "at_value"
    )]
    at_quantile: Option<Vec<f64>>,
    /// Covariate value(s) to condition on.
    #[arg(long, value_delimiter = ',')]
    at_value: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Angular bins for radial contours.
    #[arg(long)]
    angles: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Output path; JSON goes to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    at_value: f64,
    /// Window half-width; half the covariate standard deviation by default.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_name = "COL=VAL")]
    filter: Option<String>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    NormalLinear,
    NormalNonlinear,
    Exchangeable,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Nonlinearity strength for normal-nonlinear.
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => fit(a),
        Command::Contour(a) => contour(a),
        Command::Diagnose(a) => diagnose(a),
        Command::Simulate(a) => simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::NumericalFailure { .. }
        | Error::RankDeficient
        | Error::DegenerateData
        | Error::UnboundedRegion => 3,
        Error::EmptyWindow { .. } | Error::EmptyIntersection | Error::EmptyAngleBin { .. } => 4,
        _ => 2,
    }
}

fn parse_filter(filter: &Option<String>) -> Result<Option<(&str, &str)>, Error> {
    filter
        .as_deref()
        .map(|f| {
            f.split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("filter must be COL=VAL, got {f}")))
        })
        .transpose()
}

fn fit(a: FitArgs) -> Result<(), Error> {
    let mut config = RunConfig {
        setting: a.setting.into(),
        ..RunConfig::default()
    };
    if let Some(t) = a.taus {
        config.tau_levels = t;
    }
    config.grid_size = a.grid.unwrap_or(config.grid_size);
    config.n_interior_knots = a.knots.unwrap_or(config.n_interior_knots);
    config.spline_order = a.order.unwrap_or(config.spline_order);
    config.n_directions = a.directions.unwrap_or(config.n_directions);
    config.validate()?;

    let data = io::load_csv(&a.input, &a.y1, &a.y2, &a.x, parse_filter(&a.filter)?)?;
    info!("loaded {} rows", data.len());
    let spline = || {
        make_basis(
            config.spline_order,
            config.n_interior_knots,
            &data.x,
            KnotPlacement::Quantile,
        )
    };

    let file = match config.setting {
        SettingKind::One | SettingKind::Two => {
            let grid = TauGrid::even(config.grid_size)?;
            let raw = match config.setting {
                SettingKind::One => fit_setting1(&data, &grid)?,
                _ => fit_setting2(&data, &grid, &spline()?)?,
            };
            let probes: Vec<ProbePoint> = config
                .covariate_quantiles
                .iter()
                .map(|&q| ProbePoint {
                    x: data.covariate_quantile(q),
                    y1: None,
                })
                .collect();
            let (model, crossed) = raw.rearrange(&probes)?;
            if crossed > 0 {
                info!("quantile crossings at {crossed} probe point(s); rearranged");
            }
            ModelFile::Stratified {
                columns: data.names.clone(),
                covariate: data.x.clone(),
                model,
                config,
            }
        }
        SettingKind::DirLinear | SettingKind::DirSpline => {
            let covariate_model = match config.setting {
                SettingKind::DirLinear => CovariateModel::Linear,
                _ => CovariateModel::Spline(spline()?),
            };
            let sweeps = config
                .depth_levels()
                .into_iter()
                .map(|tau| {
                    let fits = sweep_directions(&data, tau, config.n_directions, &covariate_model)?;
                    Ok(Sweep { tau, fits })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            if sweeps.is_empty() {
                return Err(Error::InvalidInput(
                    "no tau level below 0.5 after folding".into(),
                ));
            }
            ModelFile::Directional {
                config,
                covariate_model,
                data,
                sweeps,
            }
        }
    };
    io::save_model(&file, &a.out)
}

fn conditioning_values(
    at_quantile: &Option<Vec<f64>>,
    at_value: &Option<Vec<f64>>,
    x: &[f64],
) -> Result<Vec<f64>, Error> {
    match (at_quantile, at_value) {
        (_, Some(v)) => Ok(v.clone()),
        (Some(q), None) => {
            if q.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
                return Err(Error::InvalidInput(
                    "covariate quantiles must lie in (0, 1)".into(),
                ));
            }
            let tmp = Dataset::new(x.to_vec(), x.to_vec(), x.to_vec())?;
            Ok(q.iter().map(|&p| tmp.covariate_quantile(p)).collect())
        }
        (None, None) => Err(Error::InvalidInput(
            "one of --at-quantile or --at-value is required".into(),
        )),
    }
}

/// Fits for one level, reusing a stored sweep when it matches.
fn directional_fits(
    data: &Dataset,
    model: &CovariateModel,
    sweeps: &[Sweep],
    tau: f64,
    n_dir: usize,
) -> Result<Vec<qcontour_core::DirectionalFit>, Error> {
    if let Some(s) = sweeps
        .iter()
        .find(|s| (s.tau - tau).abs() < 1e-12 && s.fits.len() == n_dir)
    {
        return Ok(s.fits.clone());
    }
    info!("refitting {n_dir} directions at tau = {tau}");
    sweep_directions(data, tau, n_dir, model)
}

fn contour(a: ContourArgs) -> Result<(), Error> {
    let file = io::load_model(&a.model)?;
    let mut contours = Vec::new();
    match &file {
        ModelFile::Stratified {
            config,
            covariate,
            model,
            ..
        } => {
            let xs = conditioning_values(&a.at_quantile, &a.at_value, covariate)?;
            let taus = a.taus.clone().unwrap_or_else(|| config.tau_levels.clone());
            let n_draws = a.draws.unwrap_or(config.n_draws);
            let seed = a.seed.unwrap_or(config.seed);
            let n_angles = a.angles.unwrap_or(config.n_angles);
            for (i, &x) in xs.iter().enumerate() {
                let cloud = model.simulate_conditional(x, n_draws, seed.wrapping_add(i as u64))?;
                for &tau in &taus {
                    contours.push(radial_contour(&cloud, tau, n_angles, Some(x))?);
                }
            }
        }
        ModelFile::Directional {
            config,
            covariate_model,
            data,
            sweeps,
        } => {
            let xs = conditioning_values(&a.at_quantile, &a.at_value, &data.x)?;
            let levels = match &a.taus {
                Some(t) => RunConfig {
                    tau_levels: t.clone(),
                    ..config.clone()
                }
                .depth_levels(),
                None => config.depth_levels(),
            };
            if levels.is_empty() {
                return Err(Error::InvalidInput(
                    "no tau level below 0.5 after folding".into(),
                ));
            }
            let n_dir = a.directions.unwrap_or(config.n_directions);
            for &tau in &levels {
                let fits = directional_fits(data, covariate_model, sweeps, tau, n_dir)?;
                for &x in &xs {
                    contours.push(halfspace_intersection(&fits, x)?);
                }
            }
        }
    }
    write_contours(&contours, a.out.as_deref(), a.format)
}

fn write_contours(
    contours: &[Contour],
    out: Option<&Path>,
    format: FormatArg,
) -> Result<(), Error> {
    match (out, format) {
        (None, FormatArg::Json) => {
            println!("{}", serde_json::to_string_pretty(contours)?);
            Ok(())
        }
        (None, FormatArg::Csv) => Err(Error::InvalidInput("--format csv needs --out".into())),
        (Some(p), FormatArg::Json) if contours.len() == 1 => {
            io::emit_contour(&contours[0], p, ContourFormat::Json)
        }
        (Some(p), FormatArg::Json) => io::write_contours_json(contours, p),
        (Some(p), FormatArg::Csv) if contours.len() == 1 => {
            io::emit_contour(&contours[0], p, ContourFormat::Csv)
        }
        (Some(p), FormatArg::Csv) => {
            let stem = p.with_extension("");
            for c in contours {
                let x = c.at_x.map_or_else(|| "none".to_string(), |x| x.to_string());
                let path = PathBuf::from(format!("{}_x{}_tau{}.csv", stem.display(), x, c.tau));
                io::emit_contour(c, &path, ContourFormat::Csv)?;
            }
            Ok(())
        }
    }
}

fn diagnose(a: DiagnoseArgs) -> Result<(), Error> {
    let file = io::load_model(&a.model)?;
    let filter = parse_filter(&a.filter)?;
    match &file {
        ModelFile::Directional {
            config,
            covariate_model,
            data: train,
            sweeps,
        } => {
            let names = &train.names;
            let data = io::load_csv(&a.input, &names[0], &names[1], &names[2], filter)?;
            let tau = match a.tau {
                Some(t) if t > 0.0 && t < 0.5 => t,
                Some(t) => {
                    return Err(Error::InvalidInput(format!(
                        "diagnostic tau must lie in (0, 0.5), got {t}"
                    )))
                }
                None => config.depth_levels()[0],
            };
            let halfwidth = a.window.unwrap_or_else(|| default_halfwidth(&data));
            let fits = directional_fits(train, covariate_model, sweeps, tau, config.n_directions)?;
            let report = delta_x(&data, a.at_value, halfwidth, tau, &fits)?;
            emit_report(&report, a.out.as_deref())
        }
        ModelFile::Stratified {
            config,
            columns,
            model,
            ..
        } => {
            let data = io::load_csv(&a.input, &columns[0], &columns[1], &columns[2], filter)?;
            let halfwidth = a.window.unwrap_or_else(|| default_halfwidth(&data));
            if a.tau.is_some() {
                warn!("--tau is ignored for stratified models");
            }
            let n_draws = a.draws.unwrap_or(config.n_draws);
            let seed = a.seed.unwrap_or(config.seed);
            let m = window_subsample(&data, a.at_value, halfwidth)?.len();
            let pairs = pp_pairs(model, &data, a.at_value, halfwidth, n_draws, seed)?;
            let report = PpReport {
                x0: a.at_value,
                halfwidth,
                m,
                n_draws,
                seed,
                max_deviation: pp_max_deviation(&pairs),
            };
            if let Some(out) = &a.out {
                io::write_pp_csv(&pairs, &out.with_extension("pp.csv"))?;
            }
            emit_report(&report, a.out.as_deref())
        }
    }
}

fn emit_report<T: serde::Serialize>(report: &T, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => io::write_json(report, p),
        None => {
            println!("{}", serde_json::to_string_pretty(report)?);
            Ok(())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    if a.n == 0 {
        return Err(Error::InvalidInput("--n must be positive".into()));
    }
    let family = match a.family {
        FamilyArg::NormalLinear => Family::NormalLinear,
        FamilyArg::NormalNonlinear => Family::NormalNonlinear { lambda: a.lambda },
        FamilyArg::Exchangeable => Family::Exchangeable,
    };
    io::write_csv(&gen_synthetic(family, a.n, a.seed).data, &a.out)
}
