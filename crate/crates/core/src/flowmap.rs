//! Trajectories and flow maps.
//!
//! Cantor-coded points have piecewise closed-form trajectories under `v`: in
//! each stage the point rides its blob's core by a pure translation. General
//! points are integrated with an adaptive Dormand–Prince 5(4) scheme on the
//! torus. The crush map is the finite-generation flow map of `u`, which
//! undoes the first `n` stage translations cell by cell.

use std::fmt::Write as _;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cantor::{
    cantor_address, center, decode_address, shifted_center, Address, Cube, ScaleSequence,
    TorusPoint, CONTAINMENT_TOL,
};
use crate::error::{Error, Result};
use crate::field::{Params, VectorField};
use crate::moving_blob::eta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Provenance {
    Analytic,
    Numeric { tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: TorusPoint,
    /// Local error estimate of the step that produced the sample.
    pub err_est: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub field: String,
    pub provenance: Provenance,
    pub start: TorusPoint,
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectories hold at least one sample")
    }

    /// CSV with header `t,x1,...,xd,err_est`.
    pub fn to_csv(&self) -> String {
        let d = self.start.dim();
        let mut out = String::from("t");
        for j in 1..=d {
            let _ = write!(out, ",x{j}");
        }
        out.push_str(",err_est\n");
        for s in &self.samples {
            let _ = write!(out, "{:.16e}", s.t);
            for c in s.x.coords() {
                let _ = write!(out, ",{c:.16e}");
            }
            let _ = writeln!(out, ",{:.16e}", s.err_est);
        }
        out
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive Dormand–Prince 5(4) integrator on the torus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

impl Integrator {
    pub fn new(tol: f64) -> Self {
        Self { rtol: tol, atol: tol, min_step: 1e-14, max_steps: 50_000_000 }
    }

    /// Integrates from `(t0, x0)` to `t1`, recording every accepted step.
    pub fn integrate(&self, field: &dyn VectorField, x0: &TorusPoint, t0: f64, t1: f64) -> Result<Trajectory> {
        let mut samples = vec![Sample { t: t0, x: x0.clone(), err_est: 0.0 }];
        self.run(field, x0, t0, &[t1], &mut |s, _| samples.push(s))?;
        Ok(Trajectory {
            field: field.name(),
            provenance: Provenance::Numeric { tolerance: self.rtol },
            start: x0.clone(),
            samples,
        })
    }

    /// Positions at each of the increasing `times` (all after `t0`), landing
    /// on them exactly.
    pub fn integrate_through(
        &self,
        field: &dyn VectorField,
        x0: &TorusPoint,
        t0: f64,
        times: &[f64],
    ) -> Result<Vec<TorusPoint>> {
        let mut out = Vec::with_capacity(times.len());
        self.run(field, x0, t0, times, &mut |s, hit| {
            if hit {
                out.push(s.x)
            }
        })?;
        Ok(out)
    }

    /// Endpoint only.
    pub fn flow(&self, field: &dyn VectorField, x0: &TorusPoint, t0: f64, t1: f64) -> Result<TorusPoint> {
        Ok(self.integrate_through(field, x0, t0, &[t1])?.pop().expect("one target"))
    }

    fn run(
        &self,
        field: &dyn VectorField,
        x0: &TorusPoint,
        t0: f64,
        targets: &[f64],
        emit: &mut dyn FnMut(Sample, bool),
    ) -> Result<()> {
        let d = x0.dim();
        if d != field.dim() {
            return Err(Error::DimensionMismatch { expected: field.dim(), got: d });
        }
        let mut prev = t0;
        for &t in targets {
            if !(t > prev) {
                return Err(Error::EmptyInterval { t0: prev, t1: t });
            }
            prev = t;
        }
        let mut t = t0;
        let mut y = DVector::from_column_slice(x0.coords());
        let mut k1 = field.value(t, y.as_slice());
        let total = targets[targets.len() - 1] - t0;
        let cap0 = field.max_step(t, y.as_slice()).unwrap_or(f64::INFINITY);
        let mut h = (0.01 * total).min(cap0);
        let mut steps = 0usize;
        let mut k = vec![DVector::zeros(d); 7];
        for &target in targets {
            while t < target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(Error::StepUnderflow { t, h, state: y.as_slice().to_vec() });
                }
                let cap = field.max_step(t, y.as_slice()).unwrap_or(f64::INFINITY);
                h = h.min(cap);
                let remaining = target - t;
                let last = h >= remaining;
                let step = if last { remaining } else { h };
                if step < self.min_step && !last {
                    return Err(Error::StepUnderflow { t, h: step, state: y.as_slice().to_vec() });
                }
                k[0].copy_from(&k1);
                for s in 1..7 {
                    let mut ys = y.clone();
                    for (r, kr) in k.iter().enumerate().take(s) {
                        if A[s][r] != 0.0 {
                            ys.axpy(step * A[s][r], kr, 1.0);
                        }
                    }
                    k[s] = field.value(t + C[s] * step, ys.as_slice());
                }
                let mut y_new = y.clone();
                for (r, kr) in k.iter().enumerate().take(6) {
                    if A[6][r] != 0.0 {
                        y_new.axpy(step * A[6][r], kr, 1.0);
                    }
                }
                let mut err = DVector::zeros(d);
                for (r, kr) in k.iter().enumerate() {
                    if E[r] != 0.0 {
                        err.axpy(step * E[r], kr, 1.0);
                    }
                }
                let mut ratio: f64 = 0.0;
                for j in 0..d {
                    let sc = self.atol + self.rtol * y[j].abs().max(y_new[j].abs());
                    ratio = ratio.max(err[j].abs() / sc);
                }
                if ratio <= 1.0 || step <= self.min_step {
                    t = if last { target } else { t + step };
                    let wrapped = TorusPoint::new(y_new.as_slice().to_vec());
                    y = DVector::from_column_slice(wrapped.coords());
                    k1 = k[6].clone();
                    emit(Sample { t, x: wrapped, err_est: err.amax() }, last);
                    let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                    if !last {
                        h = step * grow;
                    }
                } else {
                    h = step * (0.9 * ratio.powf(-0.2)).clamp(0.2, 1.0);
                    if h < self.min_step {
                        return Err(Error::StepUnderflow { t, h, state: y.as_slice().to_vec() });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Numeric trajectory from `(t0, x0)` to `t1` at tolerance `tol`.
pub fn integrate(field: &dyn VectorField, x0: &TorusPoint, t0: f64, t1: f64, tol: f64) -> Result<Trajectory> {
    Integrator::new(tol).integrate(field, x0, t0, t1)
}

/// Minimum-image translation taking `from` to `to`.
fn offset(from: &TorusPoint, to: &TorusPoint) -> Vec<f64> {
    from.displacement_to(to)
}

/// Translation carried out by stage `i` on the cell of `addr` (depth `i+1`):
/// from the shifted Cantor centre to the dyadic centre.
pub fn stage_translation(params: &Params, addr: &Address) -> Result<Vec<f64>> {
    Ok(offset(&shifted_center(params.nu, addr)?, &center(ScaleSequence::Theta, addr)?))
}

/// Where stage `i` carries a point `y` of the start cube of `addr`.
pub fn analytic_stage_step(params: &Params, i: usize, addr: &Address, y: &TorusPoint) -> Result<TorusPoint> {
    if addr.depth() != i + 1 {
        return Err(Error::InvalidParameter {
            name: "address",
            reason: format!("stage {i} needs depth {}, got {}", i + 1, addr.depth()),
        });
    }
    let start = Cube::new(shifted_center(params.nu, addr)?, ScaleSequence::phi(params.nu).length(i + 1));
    if !start.contains_closed(y) {
        return Err(Error::OutsideStartCube);
    }
    Ok(y.translated(&stage_translation(params, addr)?))
}

/// Position at `v`-time `t` of the point coded by `addr` (the depth-`N`
/// truncation of its limit point). Stages beyond the address depth or the
/// construction depth leave the point at rest.
pub fn analytic_cantor_trajectory(params: &Params, addr: &Address, t: f64) -> Result<TorusPoint> {
    let hi = params.tau_inf();
    if !(0.0..=hi).contains(&t) {
        return Err(Error::TimeOutOfRange { t, lo: 0.0, hi });
    }
    let x0 = center(ScaleSequence::phi(params.nu), addr)?;
    let mut shift = vec![0.0; addr.dim()];
    for i in 0..addr.depth().min(params.depth) {
        let (ws, we) = params.stage_window(i);
        if t <= ws {
            break;
        }
        let e = eta((t - ws) / (we - ws));
        for (s, dx) in shift.iter_mut().zip(stage_translation(params, &addr.truncate(i + 1))?) {
            *s += e * dx;
        }
    }
    Ok(x0.translated(&shift))
}

/// Analytic trajectory sampled at `times`.
pub fn analytic_cantor_path(params: &Params, addr: &Address, times: &[f64]) -> Result<Trajectory> {
    let samples = times
        .iter()
        .map(|&t| Ok(Sample { t, x: analytic_cantor_trajectory(params, addr, t)?, err_est: 0.0 }))
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        field: "v".into(),
        provenance: Provenance::Analytic,
        start: center(ScaleSequence::phi(params.nu), addr)?,
        samples,
    })
}

/// Position at `u`-time `t` of the reversed trajectory that ends on the
/// Cantor point of `addr`.
pub fn analytic_reversed_trajectory(params: &Params, addr: &Address, t: f64) -> Result<TorusPoint> {
    if !(0.0..=params.final_time).contains(&t) {
        return Err(Error::TimeOutOfRange { t, lo: 0.0, hi: params.final_time });
    }
    let s = (params.tau_inf() * (1.0 - t / params.final_time)).clamp(0.0, params.tau_inf());
    analytic_cantor_trajectory(params, addr, s)
}

fn check_generation(params: &Params, n: usize) -> Result<()> {
    if n > params.depth {
        return Err(Error::InvalidParameter {
            name: "generation",
            reason: format!("generation {n} exceeds depth {}", params.depth),
        });
    }
    Ok(())
}

/// Finite-generation crushing map: undoes the first `n` stage translations
/// on the dyadic cell of `x`, i.e. `x - P^n_Theta(s) + P^n_Phi(s)` with `s`
/// the depth-`n` dyadic address of `x`.
pub fn crush_map(params: &Params, x: &TorusPoint, n: usize) -> Result<TorusPoint> {
    check_generation(params, n)?;
    if n == 0 {
        return Ok(x.clone());
    }
    let addr = decode_address(x, n);
    let shift = offset(&center(ScaleSequence::Theta, &addr)?, &center(ScaleSequence::phi(params.nu), &addr)?);
    Ok(x.translated(&shift))
}

/// Inverse of [`crush_map`] on the generation-`n` Cantor union: the forward
/// flow of `v` up to `tau_n`. Points outside the union are rejected.
pub fn expand_map(params: &Params, x: &TorusPoint, n: usize) -> Result<TorusPoint> {
    check_generation(params, n)?;
    if n == 0 {
        return Ok(x.clone());
    }
    let addr = cantor_address(x, params.nu, n).ok_or(Error::OutsideStartCube)?;
    let shift = offset(&center(ScaleSequence::phi(params.nu), &addr)?, &center(ScaleSequence::Theta, &addr)?);
    Ok(x.translated(&shift))
}

/// Undoes stage `i` on the whole dyadic cell of `x` at depth `i+1`.
pub fn inverse_stage_step(params: &Params, i: usize, x: &TorusPoint) -> Result<TorusPoint> {
    let addr = decode_address(x, i + 1);
    let shift: Vec<f64> = stage_translation(params, &addr)?.into_iter().map(|c| -c).collect();
    Ok(x.translated(&shift))
}

/// Whether `x` lies in the Cantor core of its depth-`n` dyadic cell: the
/// closed cube of side `l^n_Phi` at the cell centre. These are exactly the
/// points the reversed flow carries into the generation-`n` Cantor union.
pub fn in_core(params: &Params, x: &TorusPoint, n: usize) -> bool {
    if n == 0 {
        return true;
    }
    let addr = decode_address(x, n);
    let c = center(ScaleSequence::Theta, &addr).expect("n >= 1");
    c.distance_inf(x) <= 0.5 * ScaleSequence::phi(params.nu).length(n) + CONTAINMENT_TOL
}

/// Max over interior samples of `|centred-difference velocity - field|`.
pub fn ode_residual(field: &dyn VectorField, traj: &Trajectory) -> f64 {
    let s = &traj.samples;
    let mut worst: f64 = 0.0;
    for k in 1..s.len().saturating_sub(1) {
        let (hm, hp) = (s[k].t - s[k - 1].t, s[k + 1].t - s[k].t);
        let fwd = s[k].x.displacement_to(&s[k + 1].x);
        let bwd = s[k - 1].x.displacement_to(&s[k].x);
        let f = field.value(s[k].t, s[k].x.coords());
        for j in 0..f.len() {
            let vel = (hm * hm * fwd[j] + hp * hp * bwd[j]) / (hm * hp * (hm + hp));
            worst = worst.max((vel - f[j]).abs());
        }
    }
    worst
}

/// Outcome of pushing a uniform grid through the crushing map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMapReport {
    pub grid: usize,
    pub generation: usize,
    pub dim: usize,
    pub nu: f64,
    pub points: usize,
    /// Grid points in the Cantor core of their dyadic cell.
    pub core_points: usize,
    pub core_fraction: f64,
    /// Per-cell volume ratio `(l^n_Phi / l^n_Theta)^d`.
    pub expected_core_fraction: f64,
    /// Images inside the generation-`n` Cantor union.
    pub images_in_cantor: usize,
    pub fraction: f64,
    /// Images inside the translated cell `Q(P^n_Phi(s), l^n_Theta)`.
    pub images_in_translated_cell: usize,
    /// Points for which "in the core" agrees with "image in the Cantor cube
    /// of the same address".
    pub consistent_points: usize,
    /// Volume of the generation-`n` Cantor union, `2^{-nu d n}`.
    pub volume: f64,
    /// Push-forward density on the image relative to Lebesgue measure.
    pub density_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl FlowMapReport {
    /// Every image in its translated cell and core bookkeeping consistent.
    pub fn is_consistent(&self) -> bool {
        self.images_in_translated_cell == self.points && self.consistent_points == self.points
    }
}

/// The point of an `M^d` node grid with linear index `idx`, shifted by
/// `offset` grid spacings.
pub fn grid_point(dim: usize, m: usize, idx: usize, offset: f64) -> TorusPoint {
    let mut rest = idx;
    let coords = (0..dim)
        .map(|_| {
            let k = rest % m;
            rest /= m;
            (k as f64 + offset) / m as f64
        })
        .collect();
    TorusPoint::new(coords)
}

/// Classifies one grid point for the collapse report.
pub(crate) struct CollapseEntry {
    pub core: bool,
    /// Image in the Cantor cube with the same address.
    pub in_own_cube: bool,
    /// Image anywhere in the Cantor union.
    pub in_cantor: bool,
    pub in_cell: bool,
    pub image: TorusPoint,
}

pub(crate) fn collapse_entry(params: &Params, x: &TorusPoint, n: usize) -> Result<CollapseEntry> {
    let image = crush_map(params, x, n)?;
    if n == 0 {
        return Ok(CollapseEntry { core: true, in_own_cube: true, in_cantor: true, in_cell: true, image });
    }
    let addr = decode_address(x, n);
    let target = center(ScaleSequence::phi(params.nu), &addr)?;
    let own = Cube::new(target.clone(), ScaleSequence::phi(params.nu).length(n));
    let cell = Cube::new(target, ScaleSequence::Theta.length(n));
    Ok(CollapseEntry {
        core: in_core(params, x, n),
        in_own_cube: own.contains_closed(&image),
        in_cantor: cantor_address(&image, params.nu, n).is_some(),
        in_cell: cell.contains_closed(&image),
        image,
    })
}
