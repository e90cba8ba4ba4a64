//! Quantitative diagnostics: per-stage norms and their scaling exponents,
//! Hölder quotient sweeps, divergence checks and the collapse report.
//!
//! All blobs of a stage are translates of one another (up to coordinate
//! reflections), so norms are computed on the all-minus blob in its own frame
//! `x = x_p(t) + lambda xi` and multiplied by the blob count where needed.

use std::ops::RangeInclusive;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cantor::{generation_volume, wrap, Address, TorusPoint};
use crate::error::{Error, Result};
use crate::field::{Construction, FieldKind, Params, Reversed, SteadyLift, VectorField, Velocity};
use crate::flowmap::{collapse_entry, grid_point, FlowMapReport};
use crate::moving_blob::BlobSpec;
use crate::quad::{GaussLegendre, KahanSum};

/// Default lattice resolution per axis for sup-norm estimates.
pub const DEFAULT_LATTICE: usize = 33;

/// Panels across each cutoff ramp in the Sobolev quadrature.
const RAMP_PANELS: usize = 16;
const GL_ORDER: usize = 10;

/// Norms of one stage field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub stage: usize,
    pub sup_norm: f64,
    /// Sup of the Frobenius norm of the Jacobian.
    pub grad_sup_norm: f64,
    /// `W^{1,p}` norm at mid-window.
    pub sobolev_norm: f64,
    pub p: f64,
    pub time_deriv_sup: f64,
    pub lattice: usize,
    /// `2^{(i+1) d}`.
    pub blob_count: f64,
}

/// A least-squares line through `log2(quantity)` against the stage index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub quantity: String,
    pub slope: f64,
    pub predicted: f64,
    /// `slope - predicted`.
    pub deviation: f64,
    /// RMS distance of the points from the fitted line.
    pub residual: f64,
    pub stages: (usize, usize),
}

impl ExponentFit {
    pub fn within(&self, tol: f64) -> bool {
        self.deviation.abs() <= tol
    }
}

/// Slope, intercept and RMS residual of the least-squares line through
/// `(xs, ys)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    (slope, intercept, (ss / n).sqrt())
}

/// Predicted log2 slopes against the stage index.
pub mod predicted {
    use crate::field::Params;

    pub fn sup_norm(p: &Params) -> f64 {
        -p.beta
    }

    pub fn grad_sup_norm(p: &Params) -> f64 {
        1.0 + p.nu - p.beta
    }

    pub fn time_deriv_sup(p: &Params) -> f64 {
        1.0 + p.nu - 2.0 * p.beta
    }

    pub fn sobolev_norm(p: &Params, exponent: f64) -> f64 {
        ((1.0 + p.nu - p.beta) * exponent - p.dim as f64 * p.nu) / exponent
    }
}

/// Maximises `f` over the tensor lattice `axes[0] x axes[1] x ...`.
/// Returns the maximum and its location.
pub fn lattice_max_on(f: &dyn Fn(&[f64]) -> f64, axes: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let total: usize = axes.iter().map(Vec::len).product();
    let mut best = (f64::NEG_INFINITY, axes.iter().map(|a| a[0]).collect::<Vec<_>>());
    let mut pt = best.1.clone();
    for idx in 0..total {
        let mut rest = idx;
        for (j, axis) in axes.iter().enumerate() {
            pt[j] = axis[rest % axis.len()];
            rest /= axis.len();
        }
        let v = f(&pt);
        if v > best.0 {
            best = (v, pt.clone());
        }
    }
    best
}

/// `n` evenly spaced nodes on `[a, b]`, `n >= 2`.
pub fn uniform_axis(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|m| a + (b - a) * m as f64 / (n - 1) as f64).collect()
}

/// Uniform nodes on `[-support, support]` merged with `n` nodes across each
/// cutoff ramp `plateau <= |x| <= support`.
pub fn blob_axis(plateau: f64, support: f64, n: usize) -> Vec<f64> {
    let mut nodes = uniform_axis(-support, support, n);
    nodes.extend(uniform_axis(plateau, support, n));
    nodes.extend(uniform_axis(-support, -plateau, n));
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    nodes
}

/// Maximises `f` over the box `[lo, hi]` on an `n`-per-axis lattice.
pub fn lattice_max(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], n: usize) -> (f64, Vec<f64>) {
    let axes: Vec<Vec<f64>> = lo.iter().zip(hi).map(|(a, b)| uniform_axis(*a, *b, n)).collect();
    lattice_max_on(f, &axes)
}

/// Golden-section maximisation of `g` on `[a, b]`.
fn golden_max(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Lattice maximum followed by one golden-section pass along each axis
/// between the neighbouring nodes of the best point. Never below the
/// lattice value.
pub fn refined_max_on(f: &dyn Fn(&[f64]) -> f64, axes: &[Vec<f64>]) -> f64 {
    let (mut best, mut pt) = lattice_max_on(f, axes);
    for (j, axis) in axes.iter().enumerate() {
        let k = axis.partition_point(|x| *x < pt[j]);
        let a = axis[k.saturating_sub(1)];
        let b = axis[(k + 1).min(axis.len() - 1)];
        if b <= a {
            continue;
        }
        let base = pt.clone();
        let g = |s: f64| {
            let mut q = base.clone();
            q[j] = s;
            f(&q)
        };
        let (s, v) = golden_max(&g, a, b, 60);
        if v > best {
            best = v;
            pt[j] = s;
        }
    }
    best
}

/// [`refined_max_on`] over an `n`-per-axis uniform lattice of `[lo, hi]`.
pub fn refined_max(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], n: usize) -> f64 {
    let axes: Vec<Vec<f64>> = lo.iter().zip(hi).map(|(a, b)| uniform_axis(*a, *b, n)).collect();
    refined_max_on(f, &axes)
}

/// The all-minus blob of stage `i`.
fn representative(c: &Construction, i: usize) -> Result<BlobSpec> {
    c.blob(i, &Address::uniform(c.dim(), i + 1, -1)?)
}

fn frame_point(blob: &BlobSpec, t: f64, xi: &[f64]) -> Vec<f64> {
    blob.center(t).coords().iter().zip(xi).map(|(c, x)| wrap(c + blob.side() * x)).collect()
}

/// Breakpoint-aligned Gauss–Legendre nodes across `[-r, r]` with the ramps
/// `[p, r]` and `[-r, -p]` split into [`RAMP_PANELS`] panels.
fn sobolev_nodes(plateau: f64, support: f64) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(GL_ORDER);
    let mut nodes = Vec::new();
    let ramp = (support - plateau) / RAMP_PANELS as f64;
    for k in 0..RAMP_PANELS {
        let a = -support + k as f64 * ramp;
        nodes.extend(gl.mapped(a, a + ramp));
    }
    nodes.extend(gl.mapped(-plateau, 0.0));
    nodes.extend(gl.mapped(0.0, plateau));
    for k in 0..RAMP_PANELS {
        let a = plateau + k as f64 * ramp;
        nodes.extend(gl.mapped(a, a + ramp));
    }
    nodes
}

/// Norms of `v_i`: sup norms on a lattice over the inflated support of one
/// blob at mid-window (time derivative over the whole window), with
/// `lattice` nodes across the support and again across each ramp, then
/// refined; `W^{1,p}` by tensor quadrature over one blob
/// scaled by the blob count.
pub fn stage_norms(params: &Params, i: usize, p: f64, lattice: usize) -> Result<NormReport> {
    if i >= params.depth {
        return Err(Error::InvalidParameter {
            name: "stage",
            reason: format!("stage {i} is not below depth {}", params.depth),
        });
    }
    if p < 1.0 {
        return Err(Error::InvalidParameter { name: "p", reason: format!("{p} < 1") });
    }
    let c = Construction::new(*params)?;
    let d = params.dim;
    let blob_count = (((i + 1) * d) as f64).exp2();
    let blob = representative(&c, i)?;
    let Some(stat) = blob.stationary() else {
        return Ok(NormReport {
            stage: i,
            sup_norm: 0.0,
            grad_sup_norm: 0.0,
            sobolev_norm: 0.0,
            p,
            time_deriv_sup: 0.0,
            lattice,
            blob_count,
        });
    };
    let cut = stat.cutoff();
    let r = cut.support_radius();
    let t_mid = 0.5 * (blob.t_start() + blob.t_end());

    let axis = blob_axis(cut.plateau_radius(), r, lattice);
    let space = vec![axis.clone(); d];
    let value = |xi: &[f64]| c.stage_value(i, t_mid, &frame_point(&blob, t_mid, xi)).norm();
    let grad = |xi: &[f64]| c.stage_jacobian(i, t_mid, &frame_point(&blob, t_mid, xi)).norm();
    let sup_norm = refined_max_on(&value, &space);
    let grad_sup_norm = refined_max_on(&grad, &space);

    let (ts, te) = (blob.t_start(), blob.t_end());
    let dt = |z: &[f64]| {
        let t = ts + (te - ts) * z[0];
        c.stage_time_derivative(i, t, &frame_point(&blob, t, &z[1..])).norm()
    };
    let mut spacetime = vec![uniform_axis(0.0, 1.0, lattice)];
    spacetime.extend(space);
    let time_deriv_sup = refined_max_on(&dt, &spacetime);

    let nodes = sobolev_nodes(cut.plateau_radius(), r);
    let m = nodes.len();
    let mut acc = KahanSum::default();
    let mut xi = vec![0.0; d];
    for idx in 0..m.pow(d as u32) {
        let mut rest = idx;
        let mut weight = 1.0;
        for x in xi.iter_mut() {
            let (node, w) = nodes[rest % m];
            rest /= m;
            *x = node;
            weight *= w;
        }
        let x = frame_point(&blob, t_mid, &xi);
        let v = c.stage_value(i, t_mid, &x).norm();
        let g = c.stage_jacobian(i, t_mid, &x).norm();
        acc.add(weight * (v.powf(p) + g.powf(p)));
    }
    let integral = acc.value() * blob.side().powi(d as i32) * blob_count;
    Ok(NormReport {
        stage: i,
        sup_norm,
        grad_sup_norm,
        sobolev_norm: integral.powf(1.0 / p),
        p,
        time_deriv_sup,
        lattice,
        blob_count,
    })
}

fn fit(quantity: String, stages: &[usize], values: &[f64], predicted: f64) -> Result<ExponentFit> {
    if stages.len() < 3 {
        return Err(Error::InvalidParameter { name: "stages", reason: "need at least 3 stages".into() });
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter {
            name: "quantity",
            reason: format!("{quantity} has non-positive or non-finite value {v}"),
        });
    }
    let xs: Vec<f64> = stages.iter().map(|&i| i as f64).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    let (slope, _, residual) = least_squares(&xs, &ys);
    Ok(ExponentFit {
        quantity,
        slope,
        predicted,
        deviation: slope - predicted,
        residual,
        stages: (stages[0], stages[stages.len() - 1]),
    })
}

/// One fit per quantity in the reports (sup, gradient sup, time derivative
/// sup, `W^{1,p}`), all reports sharing one `p`.
pub fn fit_exponents(params: &Params, reports: &[NormReport]) -> Result<Vec<ExponentFit>> {
    let stages: Vec<usize> = reports.iter().map(|r| r.stage).collect();
    let col = |f: fn(&NormReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let p = reports.first().map(|r| r.p).unwrap_or(params.p);
    Ok(vec![
        fit("sup_norm".into(), &stages, &col(|r| r.sup_norm), predicted::sup_norm(params))?,
        fit("grad_sup_norm".into(), &stages, &col(|r| r.grad_sup_norm), predicted::grad_sup_norm(params))?,
        fit("time_deriv_sup".into(), &stages, &col(|r| r.time_deriv_sup), predicted::time_deriv_sup(params))?,
        fit(format!("sobolev_norm_p{p}"), &stages, &col(|r| r.sobolev_norm), predicted::sobolev_norm(params, p))?,
    ])
}

/// Displacement of every stage-`i` blob relative to its asymptotic size:
/// `1 - 2^{-nu i}`.
pub fn displacement_factor(params: &Params, i: usize) -> f64 {
    -(-params.nu * i as f64 * std::f64::consts::LN_2).exp_m1()
}

/// As [`fit_exponents`] with the displacement factor divided out (squared
/// for the time derivative, whose dominant term is quadratic in the
/// displacement). Diagnostic only.
pub fn fit_exponents_normalized(params: &Params, reports: &[NormReport]) -> Result<Vec<ExponentFit>> {
    let adjusted: Vec<NormReport> = reports
        .iter()
        .map(|r| {
            let f = displacement_factor(params, r.stage);
            NormReport {
                sup_norm: r.sup_norm / f,
                grad_sup_norm: r.grad_sup_norm / f,
                time_deriv_sup: r.time_deriv_sup / (f * f),
                sobolev_norm: r.sobolev_norm / f,
                ..r.clone()
            }
        })
        .collect();
    let mut fits = fit_exponents(params, &adjusted)?;
    for f in &mut fits {
        f.quantity.push_str("_normalized");
    }
    Ok(fits)
}

/// Norm reports for every stage in `stages` and their exponent fits.
pub fn stage_exponents(
    params: &Params,
    stages: RangeInclusive<usize>,
    p: f64,
    lattice: usize,
) -> Result<(Vec<NormReport>, Vec<ExponentFit>)> {
    let reports = stages.map(|i| stage_norms(params, i, p, lattice)).collect::<Result<Vec<_>>>()?;
    let fits = fit_exponents(params, &reports)?;
    Ok((reports, fits))
}

/// Largest Hölder quotient found at one separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderScale {
    pub separation: f64,
    pub max_quotient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderSweep {
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
    /// Sampled times lie in `[0, t_max]`, `t_max = tau_N`.
    pub t_max: f64,
    pub scales: Vec<HolderScale>,
    /// Slope of `log2(max quotient)` against `log2(separation)`.
    pub slope: f64,
}

impl HolderSweep {
    /// No growth as the separation shrinks, up to `tol`.
    pub fn bounded(&self, tol: f64) -> bool {
        self.slope >= -tol
    }
}

/// `max |v(t1,x1) - v(t2,x2)| / r^alpha` over `samples` random pairs at
/// space-time distance `r = 2^{-k}` for each `k` in `exponents`.
pub fn holder_quotient(
    params: &Params,
    alpha: f64,
    samples: usize,
    exponents: RangeInclusive<u32>,
    seed: u64,
) -> Result<HolderSweep> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter { name: "alpha", reason: format!("{alpha} is not a finite nonnegative") });
    }
    let c = Construction::new(*params)?;
    let v = Velocity { construction: c };
    let d = params.dim;
    let t_max = params.tau(params.depth);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scales = Vec::new();
    for k in exponents {
        let r = (-(k as f64)).exp2();
        let mut best = 0.0f64;
        for _ in 0..samples {
            let t1 = rng.gen::<f64>() * t_max;
            let x1: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
            let dir = unit_vector(&mut rng, d + 1);
            let mut dt = r * dir[0];
            if !(0.0..=t_max).contains(&(t1 + dt)) {
                dt = -dt;
            }
            let x2: Vec<f64> = x1.iter().zip(&dir[1..]).map(|(x, e)| wrap(x + r * e)).collect();
            let diff = v.value(t1, &x1) - v.value(t1 + dt, &x2);
            best = best.max(diff.norm() / r.powf(alpha));
        }
        scales.push(HolderScale { separation: r, max_quotient: best });
    }
    let xs: Vec<f64> = scales.iter().map(|s| s.separation.log2()).collect();
    let ys: Vec<f64> = scales.iter().map(|s| s.max_quotient.max(f64::MIN_POSITIVE).log2()).collect();
    let slope = if xs.len() >= 2 { least_squares(&xs, &ys).0 } else { 0.0 };
    Ok(HolderSweep { alpha, samples, seed, t_max, scales, slope })
}

fn unit_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Analytic and finite-difference divergence over a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub field: String,
    pub samples: usize,
    pub max_trace: f64,
    pub steps: Vec<f64>,
    /// Max over samples of the centred-difference divergence, per step.
    pub fd_errors: Vec<f64>,
    /// Least-squares slope of `log(fd_errors)` against `log(steps)`; zero
    /// when the field is locally affine at every sample.
    pub fd_slope: f64,
}

/// Centred-difference divergence `sum_j (f_j(x + h e_j) - f_j(x - h e_j)) / 2h`.
pub fn fd_divergence(field: &dyn VectorField, t: f64, x: &[f64], h: f64) -> f64 {
    let mut y = x.to_vec();
    let mut acc = 0.0;
    for j in 0..x.len() {
        y[j] = x[j] + h;
        let fp = field.value(t, &y)[j];
        y[j] = x[j] - h;
        let fm = field.value(t, &y)[j];
        y[j] = x[j];
        acc += (fp - fm) / (2.0 * h);
    }
    acc
}

pub fn divergence_check(field: &dyn VectorField, points: &[(f64, Vec<f64>)], steps: &[f64]) -> DivergenceReport {
    let max_trace = points.iter().map(|(t, x)| field.jacobian(*t, x).trace().abs()).fold(0.0, f64::max);
    let fd_errors: Vec<f64> = steps
        .iter()
        .map(|&h| points.iter().map(|(t, x)| fd_divergence(field, *t, x, h).abs()).fold(0.0, f64::max))
        .collect();
    let fd_slope = if steps.len() >= 2 && fd_errors.iter().all(|e| *e > 0.0) {
        let xs: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = fd_errors.iter().map(|e| e.ln()).collect();
        least_squares(&xs, &ys).0
    } else {
        0.0
    };
    DivergenceReport { field: field.name(), samples: points.len(), max_trace, steps: steps.to_vec(), fd_errors, fd_slope }
}

/// A point near a random blob of stage `i` at time `t` (forward time), or a
/// uniform point when stage `i` has no moving blobs.
fn near_blob(c: &Construction, i: usize, t: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = c.dim();
    let count = 1u64 << ((i + 1) * d).min(62);
    let addr = Address::from_index(d, i + 1, rng.gen_range(0..count));
    match c.blob(i, &addr) {
        Ok(b) if !b.is_degenerate() => {
            let r = b.stationary().map(|s| s.cutoff().support_radius()).unwrap_or(0.5) * 1.05;
            let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-r..r)).collect();
            frame_point(&b, t, &xi)
        }
        _ => (0..d).map(|_| rng.gen::<f64>()).collect(),
    }
}

fn in_window(params: &Params, i: usize, rng: &mut ChaCha8Rng) -> f64 {
    let (a, b) = params.stage_window(i);
    a + (b - a) * rng.gen::<f64>()
}

/// `count` space-time samples for divergence checks of the given field kind,
/// concentrated on blob supports: stages are drawn uniformly from
/// `1..depth` (or fixed to `stage` for `vtilde` and `vi`), times from the
/// stage window, positions from the inflated support of a random blob.
pub fn sample_points(
    kind: FieldKind,
    params: &Params,
    stage: usize,
    eps: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = params.dim;
    let mut out = Vec::with_capacity(count);
    match kind {
        FieldKind::W => {
            let r = crate::blob::Cutoff::new(params.theta())?.support_radius() * 1.05;
            for _ in 0..count {
                out.push((0.0, (0..d).map(|_| rng.gen_range(-r..r)).collect()));
            }
        }
        FieldKind::Vtilde | FieldKind::Vi => {
            let c = Construction::new(*params)?;
            let blob = representative(&c, stage)?;
            let r = blob.stationary().map(|s| s.cutoff().support_radius()).unwrap_or(0.5) * 1.05;
            for _ in 0..count {
                let t = in_window(params, stage, &mut rng);
                let x = if kind == FieldKind::Vtilde {
                    let xi: Vec<f64> = (0..d).map(|_| rng.gen_range(-r..r)).collect();
                    frame_point(&blob, t, &xi)
                } else {
                    near_blob(&c, stage, t, &mut rng)
                };
                out.push((t, x));
            }
        }
        FieldKind::V | FieldKind::U => {
            let c = Construction::new(*params)?;
            let rev = Reversed { construction: c.clone() };
            for _ in 0..count {
                let i = rng.gen_range(1..params.depth.max(2)).min(params.depth - 1);
                let s = in_window(params, i, &mut rng);
                let x = near_blob(&c, i, s, &mut rng);
                let t = if kind == FieldKind::U { rev.reversed_time(s) } else { s };
                out.push((t, x));
            }
        }
        FieldKind::Usteady => {
            let lift = SteadyLift::new(*params, eps)?;
            let inner = lift.inner();
            let ip = *inner.construction.params();
            for _ in 0..count {
                let i = rng.gen_range(1..ip.depth.max(2)).min(ip.depth - 1);
                let s = in_window(&ip, i, &mut rng);
                let mut x = near_blob(&inner.construction, i, s, &mut rng);
                let tu = inner.reversed_time(s);
                x.push(wrap(1.0 - eps + eps * tu));
                out.push((0.0, x));
            }
        }
    }
    Ok(out)
}

/// Pushes the `M^d` node grid (shifted by `offset` spacings) through the
/// generation-`n` crushing map and tallies where the images land.
pub fn collapse_report(params: &Params, m: usize, n: usize, dump: bool, offset: f64) -> Result<FlowMapReport> {
    if m == 0 {
        return Err(Error::InvalidParameter { name: "grid", reason: "grid must be positive".into() });
    }
    let d = params.dim;
    let points = m.checked_pow(d as u32).ok_or_else(|| Error::InvalidParameter {
        name: "grid",
        reason: format!("{m}^{d} points overflow"),
    })?;
    let mut core_points = 0;
    let mut images_in_cantor = 0;
    let mut images_in_translated_cell = 0;
    let mut consistent_points = 0;
    let mut images = dump.then(|| Vec::with_capacity(points));
    for idx in 0..points {
        let x = grid_point(d, m, idx, offset);
        let e = collapse_entry(params, &x, n)?;
        core_points += e.core as usize;
        images_in_cantor += e.in_cantor as usize;
        images_in_translated_cell += e.in_cell as usize;
        consistent_points += (e.core == e.in_own_cube) as usize;
        if let Some(list) = images.as_mut() {
            list.push((x.into_coords(), e.image.into_coords()));
        }
    }
    let volume = generation_volume(params.nu, d, n);
    Ok(FlowMapReport {
        grid: m,
        generation: n,
        dim: d,
        nu: params.nu,
        points,
        core_points,
        core_fraction: core_points as f64 / points as f64,
        expected_core_fraction: (-(params.nu * (n * d) as f64)).exp2(),
        images_in_cantor,
        fraction: images_in_cantor as f64 / points as f64,
        images_in_translated_cell,
        consistent_points,
        volume,
        density_ratio: 1.0 / volume,
        images,
    })
}

/// Image of `x` under the generation-`n` crushing map, as a plain vector.
pub fn crush_point(params: &Params, x: &[f64], n: usize) -> Result<DVector<f64>> {
    let y = crate::flowmap::crush_map(params, &TorusPoint::from_slice(x), n)?;
    Ok(DVector::from_vec(y.into_coords()))
}
