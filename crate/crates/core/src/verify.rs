//! Named property checks of the whole construction. Each check returns its
//! measured values and a verdict; failures are data, not errors.
//!
//! Names are grouped by a dotted prefix (`geometry.`, `divergence.`, `blob.`,
//! `stage.`, `norms.`, `holder.`, `collapse.`, `steady.`) so a prefix selects
//! a group.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    divergence_check, fit_exponents_normalized, holder_quotient, predicted, sample_points, stage_exponents,
    ExponentFit, NormReport, DEFAULT_LATTICE,
};
use crate::cantor::{
    box_dimension, cantor_address, center, cube, decode_address, limit_point, shifted_center, Address, Cube,
    ScaleSequence, TorusPoint, CONTAINMENT_TOL,
};
use crate::error::Result;
use crate::field::{Construction, FieldKind, Params, Reversed, SteadyLift, StageVelocity, VectorField, Velocity};
use crate::flowmap::{analytic_cantor_trajectory, analytic_reversed_trajectory, analytic_stage_step, Integrator};
use crate::moving_blob::BlobSpec;

/// Exponents at which the `W^{1,p}` scaling is fitted.
pub const NORM_EXPONENTS: [f64; 2] = [1.0, 1.3];

/// Knobs of the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub params: Params,
    /// Multiplier applied to `theta` in the inflated-cube inclusion check.
    pub theta_scale: f64,
    pub seed: u64,
    /// Integrator tolerance.
    pub tol: f64,
    /// Sample points per field for divergence checks.
    pub div_samples: usize,
    pub fd_steps: Vec<f64>,
    pub lattice: usize,
    pub holder_samples: usize,
    /// Grid resolution `M` for the collapse check.
    pub grid: usize,
    pub generation: usize,
    /// Slab width of the steady lift.
    pub eps: f64,
    /// Deepest generation in the exhaustive geometry checks.
    pub geometry_depth: usize,
    /// Record wall-clock seconds per check (breaks byte-identical output).
    pub timings: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self::new(Params::default())
    }
}

impl VerifyConfig {
    pub fn new(params: Params) -> Self {
        Self {
            params,
            theta_scale: 1.0,
            seed: 20240601,
            tol: 1e-10,
            div_samples: 10_000,
            fd_steps: vec![1e-3, 1e-4, 1e-5],
            lattice: DEFAULT_LATTICE,
            holder_samples: 50_000,
            grid: 64,
            generation: 6.min(params.depth),
            eps: 0.5,
            geometry_depth: 3,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub params: Params,
    pub theta_scale: f64,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: usize,
    pub failed: usize,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn from_results(cfg: &VerifyConfig, checks: Vec<CheckResult>) -> Self {
        let passed = checks.iter().filter(|c| c.passed).count();
        let failed = checks.len() - passed;
        Self { params: cfg.params, theta_scale: cfg.theta_scale, seed: cfg.seed, checks, passed, failed, all_passed: failed == 0 }
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

type CheckFn = fn(&Context) -> Result<(bool, Value)>;

/// A named check.
#[derive(Clone, Copy)]
pub struct Check {
    pub name: &'static str,
    run: CheckFn,
}

impl std::fmt::Debug for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Check").field("name", &self.name).finish()
    }
}

/// Shared state for one suite run; expensive intermediate results are
/// computed once.
pub struct Context {
    pub cfg: VerifyConfig,
    norms: OnceLock<std::result::Result<Vec<(f64, Vec<NormReport>, Vec<ExponentFit>)>, String>>,
}

impl Context {
    pub fn new(cfg: VerifyConfig) -> Self {
        Self { cfg, norms: OnceLock::new() }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    fn norm_fits(&self) -> Result<&Vec<(f64, Vec<NormReport>, Vec<ExponentFit>)>> {
        self.norms
            .get_or_init(|| {
                NORM_EXPONENTS
                    .iter()
                    .map(|&p| {
                        let (reps, fits) = stage_exponents(&self.cfg.params, 1..=6, p, self.cfg.lattice)?;
                        Ok((p, reps, fits))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| crate::error::Error::InvalidParameter { name: "norms", reason: e.clone() })
    }

    pub fn run(&self, check: &Check) -> CheckResult {
        let start = Instant::now();
        let outcome = (check.run)(self);
        let seconds = self.cfg.timings.then(|| start.elapsed().as_secs_f64());
        match outcome {
            Ok((passed, measured)) => CheckResult { name: check.name.into(), passed, measured, error: None, seconds },
            Err(e) => CheckResult {
                name: check.name.into(),
                passed: false,
                measured: Value::Null,
                error: Some(e.to_string()),
                seconds,
            },
        }
    }
}

macro_rules! check {
    ($name:literal, $f:expr) => {
        Check { name: $name, run: $f }
    };
}

/// Every check, in report order.
pub fn all_checks() -> Vec<Check> {
    vec![
        check!("geometry.closed_cubes_disjoint", geometry_closed_disjoint),
        check!("geometry.limit_points_distinct", geometry_limit_points_distinct),
        check!("geometry.open_dyadic_disjoint", geometry_open_dyadic_disjoint),
        check!("geometry.nested", geometry_nested),
        check!("geometry.limit_in_every_cube", geometry_limit_in_every_cube),
        check!("geometry.dyadic_covering", geometry_dyadic_covering),
        check!("geometry.decode_roundtrip", geometry_decode_roundtrip),
        check!("geometry.cantor_unique_address", geometry_cantor_unique_address),
        check!("geometry.theta_inclusion", geometry_theta_inclusion),
        check!("geometry.dimension", geometry_dimension),
        check!("divergence.trace.w", |c| div_trace(c, FieldKind::W)),
        check!("divergence.trace.vtilde", |c| div_trace(c, FieldKind::Vtilde)),
        check!("divergence.trace.vi", |c| div_trace(c, FieldKind::Vi)),
        check!("divergence.trace.v", |c| div_trace(c, FieldKind::V)),
        check!("divergence.trace.u", |c| div_trace(c, FieldKind::U)),
        check!("divergence.trace.usteady", |c| div_trace(c, FieldKind::Usteady)),
        check!("divergence.fd_slope.w", |c| div_slope(c, FieldKind::W)),
        check!("divergence.fd_slope.vtilde", |c| div_slope(c, FieldKind::Vtilde)),
        check!("divergence.fd_slope.vi", |c| div_slope(c, FieldKind::Vi)),
        check!("divergence.fd_slope.v", |c| div_slope(c, FieldKind::V)),
        check!("divergence.fd_slope.u", |c| div_slope(c, FieldKind::U)),
        check!("divergence.fd_slope.usteady", |c| div_slope(c, FieldKind::Usteady)),
        check!("blob.core_value", blob_core_value),
        check!("blob.transport", blob_transport),
        check!("stage.time_support", stage_time_support),
        check!("stage.transport", stage_transport),
        check!("stage.trajectory", stage_trajectory),
        check!("norms.sup", |c| norm_slope(c, 0, 0, 0.15)),
        check!("norms.grad", |c| norm_slope(c, 0, 1, 0.15)),
        check!("norms.time_deriv", |c| norm_slope(c, 0, 2, 0.15)),
        check!("norms.sobolev_p1", |c| norm_slope(c, 0, 3, 0.2)),
        check!("norms.sobolev_p1.3", |c| norm_slope(c, 1, 3, 0.2)),
        check!("norms.sobolev_sign_flip", norm_sign_flip),
        check!("holder.bounded", holder_bounded),
        check!("holder.control", holder_control),
        check!("collapse.containment", collapse_containment),
        check!("steady.divergence", steady_divergence),
        check!("steady.trajectory", steady_trajectory),
    ]
}

/// Checks whose name starts with any of the `prefixes` (all when empty).
pub fn select(prefixes: &[String]) -> Vec<Check> {
    all_checks()
        .into_iter()
        .filter(|c| prefixes.is_empty() || prefixes.iter().any(|p| c.name.starts_with(p.as_str())))
        .collect()
}

/// Runs the selected checks sequentially.
pub fn run(cfg: &VerifyConfig, prefixes: &[String]) -> VerifyReport {
    let ctx = Context::new(cfg.clone());
    let results = select(prefixes).iter().map(|c| ctx.run(c)).collect();
    VerifyReport::from_results(cfg, results)
}

fn addresses(d: usize, n: usize) -> Vec<Address> {
    Address::all(d, n).collect()
}

fn random_address(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Address {
    let count = 1u64 << (d * n).min(63);
    Address::from_index(d, n, rng.gen_range(0..count))
}

fn geometry_closed_disjoint(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let seq = ScaleSequence::phi(p.nu);
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    let mut pairs = 0;
    for n in 1..=ctx.cfg.geometry_depth {
        let centres: Vec<TorusPoint> =
            addresses(p.dim, n).iter().map(|a| center(seq, a)).collect::<Result<_>>()?;
        let side = seq.length(n);
        for a in 0..centres.len() {
            for b in a + 1..centres.len() {
                let gap = centres[a].distance_inf(&centres[b]) - side;
                pairs += 1;
                min_gap = min_gap.min(gap);
                violations += (gap <= 0.0) as usize;
            }
        }
    }
    Ok((violations == 0, json!({ "pairs": pairs, "violations": violations, "min_gap": min_gap })))
}

fn geometry_limit_points_distinct(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let n = ctx.cfg.geometry_depth;
    let depth = p.depth;
    let seq = ScaleSequence::phi(p.nu);
    // Extend each prefix with a fixed tail; distinct prefixes must give
    // distinct points.
    let tail = Address::uniform(p.dim, depth - n.min(depth), 1)?;
    let pts: Vec<TorusPoint> = addresses(p.dim, n)
        .iter()
        .map(|a| {
            let mut full = a.clone();
            for s in tail.signs() {
                full = full.child(s.clone())?;
            }
            limit_point(seq, &full)
        })
        .collect::<Result<_>>()?;
    let mut min_dist = f64::INFINITY;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            min_dist = min_dist.min(pts[a].distance_inf(&pts[b]));
        }
    }
    Ok((min_dist > 0.0, json!({ "points": pts.len(), "min_distance": min_dist })))
}

fn geometry_open_dyadic_disjoint(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let mut violations = 0;
    let mut min_gap = f64::INFINITY;
    for n in 1..=ctx.cfg.geometry_depth {
        let centres: Vec<TorusPoint> =
            addresses(p.dim, n).iter().map(|a| center(ScaleSequence::Theta, a)).collect::<Result<_>>()?;
        let side = ScaleSequence::Theta.length(n);
        for a in 0..centres.len() {
            for b in a + 1..centres.len() {
                let gap = centres[a].distance_inf(&centres[b]) - side;
                min_gap = min_gap.min(gap);
                violations += (gap < -CONTAINMENT_TOL) as usize;
            }
        }
    }
    Ok((violations == 0, json!({ "violations": violations, "min_gap": min_gap })))
}

fn geometry_nested(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let mut violations = 0;
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for seq in [ScaleSequence::phi(p.nu), ScaleSequence::Theta] {
        for n in 2..=ctx.cfg.geometry_depth.max(2) {
            for a in addresses(p.dim, n) {
                let child = cube(seq, &a)?;
                let parent = cube(seq, &a.parent().expect("depth >= 2"))?;
                let margin = child.inside_margin(&parent);
                worst = worst.min(margin);
                checked += 1;
                violations += (margin < -CONTAINMENT_TOL) as usize;
            }
        }
    }
    Ok((violations == 0, json!({ "checked": checked, "violations": violations, "min_margin": worst })))
}

fn geometry_limit_in_every_cube(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let mut rng = ctx.rng(1);
    let mut violations = 0;
    for seq in [ScaleSequence::phi(p.nu), ScaleSequence::Theta] {
        for _ in 0..100 {
            let a = random_address(&mut rng, p.dim, p.depth);
            let x = limit_point(seq, &a)?;
            for n in 1..=p.depth {
                violations += !cube(seq, &a.truncate(n))?.contains_closed(&x) as usize;
            }
        }
    }
    Ok((violations == 0, json!({ "addresses": 200, "violations": violations })))
}

fn geometry_dyadic_covering(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let mut rng = ctx.rng(2);
    let mut violations = 0;
    let mut volume_error = 0.0f64;
    for n in 1..=ctx.cfg.geometry_depth {
        for a in addresses(p.dim, n - 1) {
            let parent = if a.is_root() {
                Cube::new(TorusPoint::splat(p.dim, 0.5), 1.0)
            } else {
                cube(ScaleSequence::Theta, &a)?
            };
            let children: Vec<Cube> =
                addresses(p.dim, 1).iter().map(|s| cube(ScaleSequence::Theta, &a.child(s.signs()[0].clone())?)).collect::<Result<_>>()?;
            let vol: f64 = children.iter().map(Cube::volume).sum();
            volume_error = volume_error.max((vol - parent.volume()).abs());
            for _ in 0..16 {
                let half = 0.5 * parent.side;
                let x = TorusPoint::new(parent.center.coords().iter().map(|c| c + rng.gen_range(-half..half)).collect());
                violations += !children.iter().any(|c| c.contains_closed(&x)) as usize;
            }
        }
        for _ in 0..1000 {
            let x = TorusPoint::new((0..p.dim).map(|_| rng.gen::<f64>()).collect());
            violations += !cube(ScaleSequence::Theta, &decode_address(&x, n))?.contains_closed(&x) as usize;
        }
    }
    Ok((violations == 0 && volume_error < 1e-15, json!({ "violations": violations, "volume_error": volume_error })))
}

fn geometry_decode_roundtrip(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let mut violations = 0;
    for n in 1..=ctx.cfg.geometry_depth {
        for a in addresses(p.dim, n) {
            violations += (decode_address(&center(ScaleSequence::Theta, &a)?, n) != a) as usize;
        }
    }
    let mut rng = ctx.rng(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x = TorusPoint::new((0..p.dim).map(|_| rng.gen::<f64>()).collect());
        let a = decode_address(&x, p.depth);
        worst = worst.max(limit_point(ScaleSequence::Theta, &a)?.distance_inf(&x));
    }
    let bound = 0.5 * ScaleSequence::Theta.length(p.depth) + CONTAINMENT_TOL;
    Ok((violations == 0 && worst <= bound, json!({ "violations": violations, "max_point_error": worst, "bound": bound })))
}

fn geometry_cantor_unique_address(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let seq = ScaleSequence::phi(p.nu);
    let mut violations = 0;
    for n in 1..=ctx.cfg.geometry_depth {
        for a in addresses(p.dim, n) {
            violations += (cantor_address(&center(seq, &a)?, p.nu, n).as_ref() != Some(&a)) as usize;
        }
    }
    let mut rng = ctx.rng(4);
    for _ in 0..200 {
        let a = random_address(&mut rng, p.dim, p.depth);
        violations += (cantor_address(&limit_point(seq, &a)?, p.nu, p.depth).as_ref() != Some(&a)) as usize;
    }
    Ok((violations == 0, json!({ "violations": violations })))
}

fn geometry_theta_inclusion(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let seq = ScaleSequence::phi(p.nu);
    let theta = p.theta() * ctx.cfg.theta_scale;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for i in 1..=ctx.cfg.geometry_depth {
        for a in addresses(p.dim, i) {
            let start = shifted_center(p.nu, &a)?;
            let end = center(ScaleSequence::Theta, &a)?;
            let cell = Cube::new(end.clone(), ScaleSequence::Theta.length(i));
            let disp = start.displacement_to(&end);
            for k in 0..=10 {
                let s = k as f64 / 10.0;
                let xa = start.translated(&disp.iter().map(|c| c * s).collect::<Vec<_>>());
                let margin = Cube::new(xa, (1.0 + theta) * seq.length(i)).inside_margin(&cell);
                min_margin = min_margin.min(margin);
                violations += (margin <= 0.0) as usize;
            }
        }
    }
    Ok((
        violations == 0,
        json!({ "theta": theta, "theta_scale": ctx.cfg.theta_scale, "violations": violations, "min_margin": min_margin }),
    ))
}

fn geometry_dimension(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let exact = p.dim as f64 / (1.0 + p.nu);
    let worst = (1..=10).map(|n| (box_dimension(p.nu, p.dim, n) - exact).abs()).fold(0.0, f64::max);
    Ok((worst <= 1e-12, json!({ "expected": exact, "max_error": worst })))
}

fn div_params(ctx: &Context, kind: FieldKind) -> Params {
    let p = ctx.cfg.params;
    if kind == FieldKind::Usteady && p.dim < 3 {
        Params { dim: 3, ..p }
    } else {
        p
    }
}

const DIV_STAGE: usize = 2;

fn div_report(ctx: &Context, kind: FieldKind, steps: &[f64]) -> Result<crate::analysis::DivergenceReport> {
    let p = div_params(ctx, kind);
    let stage = DIV_STAGE.min(p.depth - 1);
    let field = kind.build(&p, stage, ctx.cfg.eps)?;
    let pts = sample_points(kind, &p, stage, ctx.cfg.eps, ctx.cfg.div_samples, ctx.cfg.seed)?;
    Ok(divergence_check(field.as_ref(), &pts, steps))
}

fn div_trace(ctx: &Context, kind: FieldKind) -> Result<(bool, Value)> {
    let r = div_report(ctx, kind, &[])?;
    Ok((r.max_trace <= 1e-9, json!({ "field": r.field, "samples": r.samples, "max_trace": r.max_trace })))
}

fn div_slope(ctx: &Context, kind: FieldKind) -> Result<(bool, Value)> {
    let r = div_report(ctx, kind, &ctx.cfg.fd_steps)?;
    Ok((
        (r.fd_slope - 2.0).abs() <= 0.2,
        json!({ "field": r.field, "samples": r.samples, "steps": r.steps, "fd_errors": r.fd_errors, "fd_slope": r.fd_slope }),
    ))
}

/// A generic blob: side 1/5, offset `theta`, from `(1/4, 3/10, ...)` to
/// `(7/10, 11/20, ...)` over `[0, 1]`.
fn generic_blob(p: &Params) -> Result<BlobSpec> {
    let start = TorusPoint::new((0..p.dim).map(|j| 0.25 + 0.05 * (j % 2) as f64).collect());
    let end = TorusPoint::new((0..p.dim).map(|j| 0.7 - 0.15 * (j % 2) as f64).collect());
    BlobSpec::new(start, end, 0.0, 1.0, 0.2, p.theta())
}

fn blob_core_value(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let blob = generic_blob(p)?;
    let stat = blob.stationary().expect("nondegenerate");
    let q = stat.direction().components().to_vec();
    let mut rng = ctx.rng(5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..p.dim).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let w = stat.value(&x);
        worst = worst.max(w.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let r = stat.cutoff().support_radius();
    let mut outside = 0.0f64;
    for _ in 0..1000 {
        let mut x: Vec<f64> = (0..p.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let j = rng.gen_range(0..p.dim);
        x[j] = if x[j] >= 0.0 { r + x[j].abs() * 0.5 } else { -r - x[j].abs() * 0.5 };
        outside = outside.max(stat.value(&x).amax());
    }
    Ok((worst <= 1e-12 && outside == 0.0, json!({ "core_error": worst, "max_outside_support": outside })))
}

fn blob_transport(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let blob = generic_blob(p)?;
    let integ = Integrator::new(ctx.cfg.tol);
    let mut rng = ctx.rng(6);
    let half = 0.5 * blob.side();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let x = TorusPoint::new(blob.start().coords().iter().map(|c| c + rng.gen_range(-half..=half)).collect());
        let got = integ.flow(&blob, &x, blob.t_start(), blob.t_end())?;
        let want = x.translated(blob.displacement());
        worst = worst.max(got.distance_inf(&want));
    }
    Ok((worst <= 1e-7, json!({ "points": 20, "max_error": worst, "tol": ctx.cfg.tol })))
}

fn stage_time_support(ctx: &Context) -> Result<(bool, Value)> {
    let p = ctx.cfg.params;
    let c = Construction::new(p)?;
    let mut rng = ctx.rng(7);
    let mut leak = 0.0f64;
    for i in 0..p.depth.min(5) {
        let (a, b) = (p.tau(i), p.tau(i + 1));
        let (ws, we) = p.stage_window(i);
        for _ in 0..200 {
            let x: Vec<f64> = (0..p.dim).map(|_| rng.gen::<f64>()).collect();
            let t = if rng.gen::<bool>() { a + (ws - a) * rng.gen::<f64>() } else { we + (b - we) * rng.gen::<f64>() };
            leak = leak.max(c.stage_value(i, t, &x).amax());
            leak = leak.max(c.stage_value(i, p.tau(i), &x).amax());
        }
    }
    let u = Reversed { construction: c };
    let x = vec![0.3; p.dim];
    let ends = u.value(0.0, &x).amax().max(u.value(p.final_time, &x).amax());
    Ok((leak == 0.0 && ends == 0.0, json!({ "max_outside_window": leak, "u_at_ends": ends })))
}

fn stage_transport(ctx: &Context) -> Result<(bool, Value)> {
    let p = ctx.cfg.params;
    let c = Construction::new(p)?;
    let integ = Integrator::new(ctx.cfg.tol);
    let seq = ScaleSequence::phi(p.nu);
    let mut rng = ctx.rng(8);
    let mut worst = 0.0f64;
    let mut per_stage = Vec::new();
    for i in 0..=3.min(p.depth - 1) {
        let field = StageVelocity { construction: c.clone(), stage: i };
        let mut stage_worst = 0.0f64;
        for _ in 0..3 {
            let a = random_address(&mut rng, p.dim, i + 1);
            let start = Cube::new(shifted_center(p.nu, &a)?, seq.length(i + 1));
            let mut pts = start.corners();
            pts.push(start.center.clone());
            for x in pts {
                let got = integ.flow(&field, &x, p.tau(i), p.tau(i + 1))?;
                let want = analytic_stage_step(&p, i, &a, &x)?;
                stage_worst = stage_worst.max(got.distance_inf(&want));
            }
        }
        worst = worst.max(stage_worst);
        per_stage.push(stage_worst);
    }
    Ok((worst <= 1e-7, json!({ "max_error": worst, "per_stage": per_stage })))
}

fn stage_trajectory(ctx: &Context) -> Result<(bool, Value)> {
    let p = ctx.cfg.params;
    let v = Velocity { construction: Construction::new(p)? };
    let integ = Integrator::new(ctx.cfg.tol);
    let mut rng = ctx.rng(9);
    let depth = 6.min(p.depth);
    let last = 4.min(p.depth);
    let times: Vec<f64> = (1..=last).map(|i| p.tau(i)).collect();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let a = random_address(&mut rng, p.dim, depth);
        let x0 = analytic_cantor_trajectory(&p, &a, 0.0)?;
        let got = integ.integrate_through(&v, &x0, 0.0, &times)?;
        for (t, g) in times.iter().zip(&got) {
            worst = worst.max(g.distance_inf(&analytic_cantor_trajectory(&p, &a, *t)?));
        }
    }
    Ok((worst <= 1e-6, json!({ "addresses": 10, "depth": depth, "max_error": worst })))
}

fn norm_slope(ctx: &Context, which_p: usize, quantity: usize, tol: f64) -> Result<(bool, Value)> {
    let (p, reps, fits) = &ctx.norm_fits()?[which_p];
    let fit = &fits[quantity];
    let normalized = &fit_exponents_normalized(&ctx.cfg.params, reps)?[quantity];
    let values: Vec<f64> = reps
        .iter()
        .map(|r| [r.sup_norm, r.grad_sup_norm, r.time_deriv_sup, r.sobolev_norm][quantity])
        .collect();
    Ok((
        fit.within(tol),
        json!({
            "p": p,
            "fit": fit,
            "tolerance": tol,
            "values": values,
            "normalized_fit": normalized,
        }),
    ))
}

fn norm_sign_flip(ctx: &Context) -> Result<(bool, Value)> {
    let fits = ctx.norm_fits()?;
    let params = &ctx.cfg.params;
    let threshold = params.sobolev_threshold();
    let slopes: Vec<(f64, f64, f64)> =
        fits.iter().map(|(p, _, f)| (*p, f[3].slope, predicted::sobolev_norm(params, *p))).collect();
    let below = slopes.iter().filter(|s| s.0 < threshold).all(|s| s.1 < 0.0);
    let above = slopes.iter().filter(|s| s.0 > threshold).all(|s| s.1 > 0.0);
    let straddles = slopes.iter().any(|s| s.0 < threshold) && slopes.iter().any(|s| s.0 > threshold);
    Ok((
        below && above && straddles,
        json!({
            "threshold": threshold,
            "slopes": slopes.iter().map(|s| json!({ "p": s.0, "slope": s.1, "predicted": s.2 })).collect::<Vec<_>>(),
        }),
    ))
}

fn holder_bounded(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let alpha = 0.5 * p.holder_bound();
    let sweep = holder_quotient(p, alpha, ctx.cfg.holder_samples, 3..=10, ctx.cfg.seed)?;
    Ok((sweep.bounded(0.05), serde_json::to_value(&sweep).expect("serialisable")))
}

fn holder_control(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let sweep = holder_quotient(p, 1.5, ctx.cfg.holder_samples, 3..=10, ctx.cfg.seed)?;
    Ok((sweep.slope < -0.2, serde_json::to_value(&sweep).expect("serialisable")))
}

fn collapse_containment(ctx: &Context) -> Result<(bool, Value)> {
    let p = &ctx.cfg.params;
    let m = ctx.cfg.grid;
    let r = crate::analysis::collapse_report(p, m, ctx.cfg.generation, false, 0.0)?;
    let exact = (-(p.nu * (p.dim * ctx.cfg.generation) as f64)).exp2();
    let fraction_ok = (r.core_fraction - r.expected_core_fraction).abs() <= 2.0 / m as f64;
    let ok = r.is_consistent() && fraction_ok && r.volume == exact && r.density_ratio >= 1.0 / exact;
    Ok((ok, serde_json::to_value(&r).expect("serialisable")))
}

fn steady_params(ctx: &Context) -> Params {
    div_params(ctx, FieldKind::Usteady)
}

fn steady_divergence(ctx: &Context) -> Result<(bool, Value)> {
    let p = steady_params(ctx);
    let field = SteadyLift::new(p, ctx.cfg.eps)?;
    let pts = sample_points(FieldKind::Usteady, &p, 0, ctx.cfg.eps, ctx.cfg.div_samples, ctx.cfg.seed ^ 1)?;
    let r = divergence_check(&field, &pts, &[]);
    let mut rng = ctx.rng(10);
    let mut below = 0.0f64;
    for _ in 0..1000 {
        let mut x: Vec<f64> = (0..p.dim).map(|_| rng.gen::<f64>()).collect();
        x[p.dim - 1] *= 1.0 - ctx.cfg.eps;
        let v = field.value(0.0, &x);
        below = below.max(v.rows(0, p.dim - 1).amax()).max((v[p.dim - 1] - 1.0).abs());
    }
    Ok((
        r.max_trace <= 1e-9 && below == 0.0,
        json!({ "samples": r.samples, "max_trace": r.max_trace, "max_deviation_below_slab": below }),
    ))
}

fn steady_trajectory(ctx: &Context) -> Result<(bool, Value)> {
    let p = steady_params(ctx);
    let eps = ctx.cfg.eps;
    let field = SteadyLift::new(p, eps)?;
    let inner = *field.inner().construction.params();
    let integ = Integrator::new(ctx.cfg.tol);
    let mut rng = ctx.rng(11);
    let heights: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let times: Vec<f64> = heights.iter().map(|s| eps * s).collect();
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let a = random_address(&mut rng, inner.dim, inner.depth);
        let mut x0 = analytic_reversed_trajectory(&inner, &a, 0.0)?.into_coords();
        x0.push(1.0 - eps);
        let got = integ.integrate_through(&field, &TorusPoint::new(x0), 0.0, &times)?;
        for (s, g) in heights.iter().zip(&got) {
            let want = analytic_reversed_trajectory(&inner, &a, *s)?;
            let gx = TorusPoint::from_slice(&g.coords()[..inner.dim]);
            worst = worst.max(gx.distance_inf(&want));
        }
    }
    Ok((worst <= 1e-5, json!({ "dim": p.dim, "eps": eps, "trajectories": 3, "max_error": worst })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> VerifyConfig {
        VerifyConfig { div_samples: 200, holder_samples: 500, lattice: 9, ..VerifyConfig::default() }
    }

    #[test]
    fn names_are_unique_and_grouped() {
        let checks = all_checks();
        let mut names: Vec<_> = checks.iter().map(|c| c.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), checks.len());
        assert!(checks.iter().all(|c| c.name.contains('.')));
    }

    #[test]
    fn prefix_selection() {
        let g = select(&["geometry".into()]);
        assert_eq!(g.len(), 10);
        assert!(g.iter().all(|c| c.name.starts_with("geometry.")));
        assert_eq!(select(&[]).len(), all_checks().len());
        assert_eq!(select(&["holder".into(), "collapse".into()]).len(), 3);
        assert!(select(&["nothing".into()]).is_empty());
    }

    #[test]
    fn geometry_suite_passes() {
        let r = run(&quick(), &["geometry".into()]);
        for c in &r.checks {
            assert!(c.passed, "{} {} {:?}", c.name, c.measured, c.error);
        }
        assert!(r.all_passed);
    }

    #[test]
    fn theta_inclusion_breaks_at_eight() {
        for (scale, pass) in [(1.0, true), (2.0, true), (7.9, true), (8.0, false), (16.0, false)] {
            let cfg = VerifyConfig { theta_scale: scale, ..quick() };
            let r = run(&cfg, &["geometry.theta_inclusion".into()]);
            assert_eq!(r.checks[0].passed, pass, "scale {scale}");
        }
    }

    #[test]
    fn blob_and_stage_checks_pass() {
        let r = run(&quick(), &["blob".into(), "stage.time_support".into(), "collapse".into()]);
        for c in &r.checks {
            assert!(c.passed, "{} {} {:?}", c.name, c.measured, c.error);
        }
    }

    #[test]
    fn traces_vanish() {
        let r = run(&quick(), &["divergence.trace".into()]);
        assert_eq!(r.checks.len(), 6);
        assert!(r.all_passed, "{:?}", r.checks);
    }

    #[test]
    fn report_is_deterministic() {
        let cfg = quick();
        let a = serde_json::to_string(&run(&cfg, &["geometry.dimension".into(), "holder.control".into()])).unwrap();
        let b = serde_json::to_string(&run(&cfg, &["geometry.dimension".into(), "holder.control".into()])).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("seconds"));
    }

    #[test]
    fn errors_become_failed_checks() {
        let mut cfg = quick();
        cfg.params.depth = 2;
        let r = run(&cfg, &["norms.sup".into()]);
        assert!(!r.checks[0].passed);
        assert!(r.checks[0].error.is_some());
    }
}
