use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use crushflow::analysis::{collapse_report, fit_exponents, holder_quotient, stage_norms, DEFAULT_LATTICE};
use crushflow::cantor::box_dimension;
use crushflow::flowmap::{analytic_cantor_path, analytic_reversed_trajectory, grid_point, Integrator, Provenance, Sample};
use crushflow::verify::{select, Context as VerifyContext, VerifyConfig, VerifyReport};
use crushflow::{Address, FieldKind, Params, TorusPoint, Trajectory};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Format, RunConfig};

/// Writes to `path`, or stdout when `None`.
pub fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json_text(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn num(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Field: w | vtilde | vi | v | u | usteady.
    #[arg(long, default_value = "u")]
    pub field: FieldKind,
    /// Evaluation time.
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Stage for vi and vtilde.
    #[arg(long, default_value_t = 2)]
    pub stage: usize,
    /// Slab width for usteady.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
}

/// Time interval on which each field is defined.
fn time_range(kind: FieldKind, params: &Params, stage: usize) -> (f64, f64) {
    match kind {
        FieldKind::U => (0.0, params.final_time),
        FieldKind::V => (0.0, params.tau_inf()),
        FieldKind::Vi | FieldKind::Vtilde => (params.tau(stage), params.tau(stage + 1)),
        FieldKind::W | FieldKind::Usteady => (0.0, 1.0),
    }
}

pub fn eval(cfg: &RunConfig, args: &EvalArgs) -> Result<()> {
    let field = args.field.build(&cfg.params, args.stage, args.eps)?;
    let (lo, hi) = time_range(args.field, &cfg.params, args.stage);
    if !matches!(args.field, FieldKind::W | FieldKind::Usteady) && !(lo..=hi).contains(&args.t) {
        bail!("t = {} outside [{lo}, {hi}] for field {}", args.t, field.name());
    }
    let d = field.dim();
    let m = cfg.grid;
    let n = m.checked_pow(d as u32).context("grid too large")?;
    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|idx| {
            let x = grid_point(d, m, idx, 0.0).into_coords();
            let v = field.value(args.t, &x);
            (x, v.iter().copied().collect())
        })
        .collect();
    let text = match cfg.format_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("t");
            (1..=d).for_each(|j| s.push_str(&format!(",x{j}")));
            (1..=d).for_each(|j| s.push_str(&format!(",u{j}")));
            s.push('\n');
            for (x, v) in &rows {
                s.push_str(&num(args.t));
                for c in x.iter().chain(v) {
                    s.push(',');
                    s.push_str(&num(*c));
                }
                s.push('\n');
            }
            s
        }
        Format::Json => json_text(&json!({
            "field": field.name(),
            "t": args.t,
            "grid": m,
            "points": rows.iter().map(|(x, v)| json!({ "x": x, "value": v })).collect::<Vec<_>>(),
        })),
    };
    emit(cfg.out.as_deref(), &text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Analytic,
    Numeric,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct TrajArgs {
    /// Cantor address, `+`/`-` per coordinate, generations separated by
    /// commas, e.g. `+-,-+`.
    #[arg(long, conflicts_with = "point")]
    pub address: Option<String>,
    /// Start point, comma-separated coordinates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    /// Field [default: v for --address, u for --point].
    #[arg(long)]
    pub field: Option<FieldKind>,
    #[arg(long, value_enum, default_value = "numeric")]
    pub mode: Mode,
    /// Start time [default: start of the field's time range].
    #[arg(long)]
    pub t0: Option<f64>,
    /// End time [default: tau_N for v, T for u, end of the stage otherwise].
    #[arg(long)]
    pub t1: Option<f64>,
    /// Samples of the analytic trajectory.
    #[arg(long, default_value_t = 400)]
    pub samples: usize,
    #[arg(long, default_value_t = 2)]
    pub stage: usize,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}{ext}"))
}

pub fn traj(cfg: &RunConfig, args: &TrajArgs) -> Result<()> {
    let p = cfg.params;
    let integ = Integrator::new(cfg.tol);
    let mut outputs: Vec<(&str, Trajectory)> = Vec::new();
    if let Some(text) = &args.address {
        let addr = Address::parse(text)?;
        if addr.dim() != p.dim {
            bail!("address has dimension {}, parameters have d = {}", addr.dim(), p.dim);
        }
        let kind = args.field.unwrap_or(FieldKind::V);
        let (default_t1, analytic_at): (f64, Box<dyn Fn(f64) -> Result<TorusPoint>>) = match kind {
            FieldKind::V => (p.tau(p.depth), Box::new(|t| Ok(crushflow::flowmap::analytic_cantor_trajectory(&p, &addr, t)?))),
            FieldKind::U => (p.final_time, Box::new(|t| Ok(analytic_reversed_trajectory(&p, &addr, t)?))),
            other => bail!("address trajectories are defined for v and u, not {other:?}"),
        };
        let t0 = args.t0.unwrap_or(0.0);
        let t1 = args.t1.unwrap_or(default_t1);
        if t1 <= t0 {
            bail!("empty time interval [{t0}, {t1}]");
        }
        let start = analytic_at(t0)?;
        if matches!(args.mode, Mode::Analytic | Mode::Both) {
            let n = args.samples.max(2);
            let times: Vec<f64> = (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect();
            let traj = match kind {
                FieldKind::V => analytic_cantor_path(&p, &addr, &times)?,
                _ => Trajectory {
                    field: "u".into(),
                    provenance: Provenance::Analytic,
                    start: start.clone(),
                    samples: times
                        .iter()
                        .map(|&t| Ok(Sample { t, x: analytic_at(t)?, err_est: 0.0 }))
                        .collect::<Result<Vec<_>>>()?,
                },
            };
            outputs.push(("analytic", traj));
        }
        if matches!(args.mode, Mode::Numeric | Mode::Both) {
            let field = kind.build(&p, args.stage, args.eps)?;
            outputs.push(("numeric", integ.integrate(field.as_ref(), &start, t0, t1)?));
        }
    } else if let Some(point) = &args.point {
        if args.mode != Mode::Numeric {
            bail!("analytic trajectories need --address");
        }
        let kind = args.field.unwrap_or(FieldKind::U);
        let field = kind.build(&p, args.stage, args.eps)?;
        if point.len() != field.dim() {
            bail!("point has {} coordinates, field {} has dimension {}", point.len(), field.name(), field.dim());
        }
        let (lo, hi) = time_range(kind, &p, args.stage);
        let t0 = args.t0.unwrap_or(lo);
        let t1 = args.t1.unwrap_or(if kind == FieldKind::V { p.tau(p.depth) } else { hi });
        if t1 <= t0 {
            bail!("empty time interval [{t0}, {t1}]");
        }
        let start = TorusPoint::from_slice(point);
        outputs.push(("numeric", integ.integrate(field.as_ref(), &start, t0, t1)?));
    } else {
        bail!("give --address or --point");
    }

    match (&cfg.out, outputs.len()) {
        (Some(path), 1) => emit(Some(path), &outputs[0].1.to_csv()),
        (Some(path), _) => {
            for (tag, t) in &outputs {
                emit(Some(&with_suffix(path, tag)), &t.to_csv())?;
            }
            Ok(())
        }
        (None, _) => {
            let mut s = String::new();
            for (k, (_, t)) in outputs.iter().enumerate() {
                if k > 0 {
                    s.push('\n');
                }
                s.push_str(&t.to_csv());
            }
            emit(None, &s)
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CrushArgs {
    /// Generation n.
    #[arg(long = "gen", default_value_t = 6)]
    pub generation: usize,
    /// Also write `x1..xd,y1..yd` image pairs to this CSV file.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    /// Shift of the node grid in units of the spacing.
    #[arg(long, default_value_t = 0.0)]
    pub offset: f64,
}

pub fn crush(cfg: &RunConfig, args: &CrushArgs) -> Result<()> {
    let mut report = collapse_report(&cfg.params, cfg.grid, args.generation, args.dump.is_some(), args.offset)?;
    if let Some(path) = &args.dump {
        let d = cfg.params.dim;
        let mut s = String::new();
        let header: Vec<String> = (1..=d).map(|j| format!("x{j}")).chain((1..=d).map(|j| format!("y{j}"))).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for (x, y) in report.images.take().unwrap_or_default() {
            let row: Vec<String> = x.iter().chain(&y).map(|c| num(*c)).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        emit(Some(path), &s)?;
    }
    emit(cfg.out.as_deref(), &json_text(&json!({ "collapse_report": report })))
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Run only checks whose names start with one of these prefixes
    /// (comma-separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Divergence samples per field.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Record wall-clock seconds per check.
    #[arg(long)]
    pub timings: bool,
}

/// Runs the suite and returns whether every selected check passed.
pub fn verify(cfg: &RunConfig, args: &VerifyArgs) -> Result<bool> {
    let mut vc = VerifyConfig::new(cfg.params);
    vc.theta_scale = cfg.theta_scale;
    vc.seed = cfg.seed;
    vc.tol = cfg.tol;
    vc.grid = cfg.grid;
    vc.timings = args.timings;
    if let Some(n) = args.samples {
        vc.div_samples = n;
    }
    let checks = select(&args.only);
    if checks.is_empty() {
        bail!("no check matches {:?}", args.only);
    }
    let ctx = VerifyContext::new(vc.clone());
    let results = checks.par_iter().map(|c| ctx.run(c)).collect();
    let report = VerifyReport::from_results(&vc, results);
    emit(cfg.out.as_deref(), &json_text(&serde_json::to_value(&report)?))?;
    Ok(report.all_passed)
}

#[derive(Debug, Clone, Args)]
pub struct NormsArgs {
    #[arg(long, default_value_t = 1)]
    pub first: usize,
    #[arg(long, default_value_t = 6)]
    pub last: usize,
    /// Lattice nodes per axis for sup norms.
    #[arg(long, default_value_t = DEFAULT_LATTICE)]
    pub lattice: usize,
}

pub fn norms(cfg: &RunConfig, args: &NormsArgs) -> Result<()> {
    let p = cfg.params;
    if p.p >= p.sobolev_threshold() {
        eprintln!(
            "warning: p = {} is not below the W^{{1,p}} threshold d nu / (1 + nu - beta) = {:.6}",
            p.p,
            p.sobolev_threshold()
        );
    }
    if args.last < args.first + 2 {
        bail!("need at least 3 stages, got {}..={}", args.first, args.last);
    }
    let reports = (args.first..=args.last)
        .into_par_iter()
        .map(|i| stage_norms(&p, i, p.p, args.lattice))
        .collect::<crushflow::Result<Vec<_>>>()?;
    let fits = fit_exponents(&p, &reports)?;
    emit(cfg.out.as_deref(), &json_text(&json!({ "norm_report": reports, "exponent_fit": fits })))
}

#[derive(Debug, Clone, Args)]
pub struct DimArgs {
    /// Largest generation.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
}

pub fn dim(cfg: &RunConfig, args: &DimArgs) -> Result<()> {
    let p = cfg.params;
    let rows: Vec<_> = (1..=args.n).map(|n| json!({ "n": n, "dimension": box_dimension(p.nu, p.dim, n) })).collect();
    emit(
        cfg.out.as_deref(),
        &json_text(&json!({ "dim": p.dim, "nu": p.nu, "exact": p.dim as f64 / (1.0 + p.nu), "box_dimension": rows })),
    )
}

#[derive(Debug, Clone, Args)]
pub struct HolderArgs {
    /// Random pairs per separation.
    #[arg(long, default_value_t = 50_000)]
    pub samples: usize,
    /// Separations run from 2^-kmin down to 2^-kmax.
    #[arg(long, default_value_t = 3)]
    pub kmin: u32,
    #[arg(long, default_value_t = 10)]
    pub kmax: u32,
}

pub fn holder(cfg: &RunConfig, args: &HolderArgs) -> Result<()> {
    if args.kmax < args.kmin {
        bail!("kmax < kmin");
    }
    let sweep = holder_quotient(&cfg.params, cfg.params.alpha, args.samples, args.kmin..=args.kmax, cfg.seed)?;
    emit(cfg.out.as_deref(), &json_text(&json!({ "holder_sweep": sweep })))
}
