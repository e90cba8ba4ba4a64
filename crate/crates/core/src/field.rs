//! The staged construction.
//!
//! Stage `i` occupies `(tau_i, tau_{i+1})`. During the middle third of that
//! interval every generation-`(i+1)` Cantor cube, already sitting at its
//! shifted centre, is carried by its own moving blob to the centre of the
//! dyadic cube with the same address. The blobs of one stage live in disjoint
//! dyadic cells, so evaluation only ever looks at the blob of the cell that
//! contains the query point.
//!
//! `v` runs the stages forward over `[0, tau_inf]` (truncated after `depth`
//! stages), `u` is its time reversal on `[0, T]`, and the steady lift embeds a
//! `(d-1)`-dimensional `u` into a thin slab of the `d`-torus, using the last
//! coordinate as a clock.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blob::{BlobDirection, StationaryBlob};
use crate::cantor::{
    center, decode_address, shifted_center, theta_margin, wrap, Address, ScaleSequence, TorusPoint,
};
use crate::error::{Error, Result};
use crate::moving_blob::BlobSpec;

/// Construction parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub dim: usize,
    pub nu: f64,
    pub beta: f64,
    /// Final time `T` of the reversed field.
    pub final_time: f64,
    /// Number of stages `N`; `v` vanishes after `tau_N`.
    pub depth: usize,
    /// Integrability exponent used in reports.
    pub p: f64,
    /// Hölder exponent used in reports.
    pub alpha: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self::new(2, 0.75).expect("default parameters are valid")
    }
}

impl Params {
    /// Parameters with `beta = 1 - nu^2`, `T = 1`, `N = 8`, `p = 1` and
    /// `alpha` half the Hölder bound.
    pub fn new(dim: usize, nu: f64) -> Result<Self> {
        let beta = 1.0 - nu * nu;
        let params = Self {
            dim,
            nu,
            beta,
            final_time: 1.0,
            depth: 8,
            p: 1.0,
            alpha: 0.5 * holder_bound(nu, beta),
        };
        params.validate()?;
        Ok(params)
    }

    /// Replaces `beta` and re-derives the default `alpha`.
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = beta;
        self.alpha = 0.5 * holder_bound(self.nu, beta);
        self.validate()?;
        Ok(self)
    }

    pub fn with_depth(mut self, depth: usize) -> Result<Self> {
        self.depth = depth;
        self.validate()?;
        Ok(self)
    }

    pub fn with_final_time(mut self, final_time: f64) -> Result<Self> {
        self.final_time = final_time;
        self.validate()?;
        Ok(self)
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        self.p = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        self.alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if self.dim < 2 {
            return bad("d", format!("dimension {} is below 2", self.dim));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return bad("nu", format!("{} not in (0, 1)", self.nu));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta", format!("{} not in (0, 1)", self.beta));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return bad("T", format!("{} is not a positive time", self.final_time));
        }
        if self.depth == 0 || self.depth > 40 {
            return bad("depth", format!("{} not in 1..=40", self.depth));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return bad("p", format!("{} is below 1", self.p));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha", format!("{} is negative", self.alpha));
        }
        Ok(())
    }

    /// Blob inflation `(2^nu - 1) / 8`.
    pub fn theta(&self) -> f64 {
        theta_margin(self.nu)
    }

    /// `tau_i = (1 - 2^{-(1-beta) i}) / (2^{1-beta} - 1)`.
    pub fn tau(&self, i: usize) -> f64 {
        let b = 1.0 - self.beta;
        -(-b * i as f64 * std::f64::consts::LN_2).exp_m1() / (b.exp2() - 1.0)
    }

    pub fn tau_inf(&self) -> f64 {
        1.0 / ((1.0 - self.beta).exp2() - 1.0)
    }

    /// `tau_{i+1} - tau_i = 2^{-(1-beta)(i+1)}`.
    pub fn stage_length(&self, i: usize) -> f64 {
        (-(1.0 - self.beta) * (i + 1) as f64).exp2()
    }

    /// Middle third of stage `i`, where its blobs move.
    pub fn stage_window(&self, i: usize) -> (f64, f64) {
        let (a, b) = (self.tau(i), self.tau(i + 1));
        ((2.0 * a + b) / 3.0, (a + 2.0 * b) / 3.0)
    }

    /// Largest `i` with `tau_i <= t`; `0` for `t < 0`, unbounded as `t -> tau_inf`.
    pub fn stage_floor(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let ratio = 1.0 - t / self.tau_inf();
        if ratio <= 0.0 {
            return usize::MAX;
        }
        let mut i = (-ratio.log2() / (1.0 - self.beta)).floor().max(0.0) as usize;
        while i > 0 && self.tau(i) > t {
            i -= 1;
        }
        while self.tau(i + 1) <= t {
            i += 1;
        }
        i
    }

    /// The stage whose open interval contains `t`; `None` on a stage boundary
    /// or at `tau_inf`.
    pub fn active_stage(&self, t: f64) -> Result<Option<usize>> {
        let hi = self.tau_inf();
        if !(0.0..=hi).contains(&t) {
            return Err(Error::TimeOutOfRange { t, lo: 0.0, hi });
        }
        if t >= hi {
            return Ok(None);
        }
        let i = self.stage_floor(t);
        Ok(if self.tau(i) == t { None } else { Some(i) })
    }

    /// `d nu / (1 + nu - beta)`: the `W^{1,p}` norms of the stages stay bounded
    /// for `p` below this value.
    pub fn sobolev_threshold(&self) -> f64 {
        self.dim as f64 * self.nu / (1.0 + self.nu - self.beta)
    }

    /// `min(beta / (1 - beta), beta / (1 + nu))`.
    pub fn holder_bound(&self) -> f64 {
        holder_bound(self.nu, self.beta)
    }
}

fn holder_bound(nu: f64, beta: f64) -> f64 {
    (beta / (1.0 - beta)).min(beta / (1.0 + nu))
}

/// All blobs of one stage, in [`Address::all`] order.
#[derive(Debug, Clone)]
pub struct StageField {
    pub stage: usize,
    pub blobs: Vec<(Address, BlobSpec)>,
}

/// The construction for fixed parameters. Stage blob lists are built lazily
/// and memoised; evaluation never needs them.
#[derive(Debug)]
pub struct Construction {
    params: Params,
    stages: Vec<OnceLock<StageField>>,
}

impl Construction {
    pub fn new(params: Params) -> Result<Arc<Self>> {
        params.validate()?;
        Ok(Arc::new(Self { params, stages: (0..params.depth).map(|_| OnceLock::new()).collect() }))
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    /// The blob of stage `i` for a depth-`(i+1)` address: from the shifted
    /// Cantor centre to the dyadic centre, over the middle third of the stage.
    pub fn blob(&self, i: usize, addr: &Address) -> Result<BlobSpec> {
        if addr.depth() != i + 1 {
            return Err(Error::InvalidParameter {
                name: "address",
                reason: format!("stage {i} needs depth {}, got {}", i + 1, addr.depth()),
            });
        }
        if addr.dim() != self.params.dim {
            return Err(Error::DimensionMismatch { expected: self.params.dim, got: addr.dim() });
        }
        let (ts, te) = self.params.stage_window(i);
        BlobSpec::new(
            shifted_center(self.params.nu, addr)?,
            center(ScaleSequence::Theta, addr)?,
            ts,
            te,
            ScaleSequence::phi(self.params.nu).length(i + 1),
            self.params.theta(),
        )
    }

    /// Every blob of stage `i < depth`.
    pub fn stage_field(&self, i: usize) -> &StageField {
        self.stages[i].get_or_init(|| StageField {
            stage: i,
            blobs: Address::all(self.params.dim, i + 1)
                .map(|a| {
                    let b = self.blob(i, &a).expect("stage addresses are well formed");
                    (a, b)
                })
                .collect(),
        })
    }

    /// The blob responsible for `x` at time `t` in stage `i`, if any can be
    /// nonzero there.
    fn responsible(&self, i: usize, t: f64, x: &[f64]) -> Option<(BlobSpec, Vec<f64>)> {
        if i >= self.params.depth || i == 0 {
            return None;
        }
        let (ts, te) = self.params.stage_window(i);
        if !(t > ts && t < te) {
            return None;
        }
        let p = TorusPoint::from_slice(x);
        let addr = decode_address(&p, i + 1);
        let blob = self.blob(i, &addr).ok()?;
        Some((blob, p.into_coords()))
    }

    pub fn stage_value(&self, i: usize, t: f64, x: &[f64]) -> DVector<f64> {
        match self.responsible(i, t, x) {
            Some((b, p)) => b.value(t, &p),
            None => DVector::zeros(self.dim()),
        }
    }

    pub fn stage_jacobian(&self, i: usize, t: f64, x: &[f64]) -> DMatrix<f64> {
        match self.responsible(i, t, x) {
            Some((b, p)) => b.jacobian(t, &p),
            None => DMatrix::zeros(self.dim(), self.dim()),
        }
    }

    pub fn stage_time_derivative(&self, i: usize, t: f64, x: &[f64]) -> DVector<f64> {
        match self.responsible(i, t, x) {
            Some((b, p)) => b.time_derivative(t, &p),
            None => DVector::zeros(self.dim()),
        }
    }

    /// Stage index whose open interval contains `t`, if it is below the depth.
    fn stage_at(&self, t: f64) -> Option<usize> {
        match self.params.active_stage(t) {
            Ok(Some(i)) if i < self.params.depth => Some(i),
            _ => None,
        }
    }

    /// `Delta tau / 12` of the stage containing `t`, clamped to the last stage.
    fn stage_step_cap(&self, t: f64) -> f64 {
        let i = self.params.stage_floor(t).min(self.params.depth - 1);
        self.params.stage_length(i) / 12.0
    }
}

/// An evaluable vector field on the torus (or, for [`StationaryBlob`], on
/// `R^d`). Positions are given as raw coordinates; torus fields reduce them
/// modulo 1.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, t: f64, x: &[f64]) -> DVector<f64>;
    fn jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64>;
    fn time_derivative(&self, t: f64, x: &[f64]) -> DVector<f64>;

    /// Largest step an integrator may take from `(t, x)` without risking
    /// skipping a feature of the field.
    fn max_step(&self, _t: f64, _x: &[f64]) -> Option<f64> {
        None
    }

    fn name(&self) -> String;
}

impl VectorField for StationaryBlob {
    fn dim(&self) -> usize {
        StationaryBlob::dim(self)
    }
    fn value(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        StationaryBlob::value(self, x)
    }
    fn jacobian(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        StationaryBlob::jacobian(self, x)
    }
    fn time_derivative(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(StationaryBlob::dim(self))
    }
    fn name(&self) -> String {
        "w".into()
    }
}

impl VectorField for BlobSpec {
    fn dim(&self) -> usize {
        BlobSpec::dim(self)
    }
    fn value(&self, t: f64, x: &[f64]) -> DVector<f64> {
        BlobSpec::value(self, t, x)
    }
    fn jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        BlobSpec::jacobian(self, t, x)
    }
    fn time_derivative(&self, t: f64, x: &[f64]) -> DVector<f64> {
        BlobSpec::time_derivative(self, t, x)
    }
    fn max_step(&self, _t: f64, _x: &[f64]) -> Option<f64> {
        Some(self.duration() / 12.0)
    }
    fn name(&self) -> String {
        "vtilde".into()
    }
}

/// `v_i`: a single stage.
#[derive(Debug, Clone)]
pub struct StageVelocity {
    pub construction: Arc<Construction>,
    pub stage: usize,
}

impl VectorField for StageVelocity {
    fn dim(&self) -> usize {
        self.construction.dim()
    }
    fn value(&self, t: f64, x: &[f64]) -> DVector<f64> {
        self.construction.stage_value(self.stage, t, x)
    }
    fn jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        self.construction.stage_jacobian(self.stage, t, x)
    }
    fn time_derivative(&self, t: f64, x: &[f64]) -> DVector<f64> {
        self.construction.stage_time_derivative(self.stage, t, x)
    }
    fn max_step(&self, _t: f64, _x: &[f64]) -> Option<f64> {
        Some(self.construction.params.stage_length(self.stage) / 12.0)
    }
    fn name(&self) -> String {
        format!("v{}", self.stage)
    }
}

/// `v`: the sum of all stages on `[0, tau_inf]`, zero outside.
#[derive(Debug, Clone)]
pub struct Velocity {
    pub construction: Arc<Construction>,
}

impl Velocity {
    /// Like [`VectorField::value`] but rejects times outside `[0, tau_inf]`.
    pub fn checked_value(&self, t: f64, x: &[f64]) -> Result<DVector<f64>> {
        let hi = self.construction.params.tau_inf();
        if !(0.0..=hi).contains(&t) {
            return Err(Error::TimeOutOfRange { t, lo: 0.0, hi });
        }
        Ok(self.value(t, x))
    }
}

impl VectorField for Velocity {
    fn dim(&self) -> usize {
        self.construction.dim()
    }
    fn value(&self, t: f64, x: &[f64]) -> DVector<f64> {
        match self.construction.stage_at(t) {
            Some(i) => self.construction.stage_value(i, t, x),
            None => DVector::zeros(self.dim()),
        }
    }
    fn jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        match self.construction.stage_at(t) {
            Some(i) => self.construction.stage_jacobian(i, t, x),
            None => DMatrix::zeros(self.dim(), self.dim()),
        }
    }
    fn time_derivative(&self, t: f64, x: &[f64]) -> DVector<f64> {
        match self.construction.stage_at(t) {
            Some(i) => self.construction.stage_time_derivative(i, t, x),
            None => DVector::zeros(self.dim()),
        }
    }
    fn max_step(&self, t: f64, _x: &[f64]) -> Option<f64> {
        Some(self.construction.stage_step_cap(t))
    }
    fn name(&self) -> String {
        "v".into()
    }
}

/// `u(t, x) = -(tau_inf / T) v(tau_inf (1 - t / T), x)` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct Reversed {
    pub construction: Arc<Construction>,
}

impl Reversed {
    fn scale(&self) -> f64 {
        self.construction.params.tau_inf() / self.construction.params.final_time
    }

    /// The `v`-time corresponding to `u`-time `t`.
    pub fn forward_time(&self, t: f64) -> f64 {
        let p = &self.construction.params;
        p.tau_inf() * (1.0 - t / p.final_time)
    }

    /// The `u`-time corresponding to `v`-time `s`.
    pub fn reversed_time(&self, s: f64) -> f64 {
        let p = &self.construction.params;
        p.final_time * (1.0 - s / p.tau_inf())
    }

    fn forward(&self) -> Velocity {
        Velocity { construction: self.construction.clone() }
    }

    /// Like [`VectorField::value`] but rejects times outside `[0, T]`.
    pub fn checked_value(&self, t: f64, x: &[f64]) -> Result<DVector<f64>> {
        let hi = self.construction.params.final_time;
        if !(0.0..=hi).contains(&t) {
            return Err(Error::TimeOutOfRange { t, lo: 0.0, hi });
        }
        Ok(self.value(t, x))
    }
}

impl VectorField for Reversed {
    fn dim(&self) -> usize {
        self.construction.dim()
    }
    fn value(&self, t: f64, x: &[f64]) -> DVector<f64> {
        self.forward().value(self.forward_time(t), x) * -self.scale()
    }
    fn jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        self.forward().jacobian(self.forward_time(t), x) * -self.scale()
    }
    fn time_derivative(&self, t: f64, x: &[f64]) -> DVector<f64> {
        let k = self.scale();
        self.forward().time_derivative(self.forward_time(t), x) * (k * k)
    }
    fn max_step(&self, t: f64, _x: &[f64]) -> Option<f64> {
        let s = self.forward_time(t);
        Some(self.construction.stage_step_cap(s) / self.scale())
    }
    fn name(&self) -> String {
        "u".into()
    }
}

/// Autonomous field on the `d`-torus, `d >= 3`: unit speed in `x_d`, and in
/// the slab `x_d >= 1 - eps` a `(d-1)`-dimensional reversed field run at
/// time `(x_d - (1 - eps)) / eps`.
#[derive(Debug, Clone)]
pub struct SteadyLift {
    inner: Reversed,
    eps: f64,
}

impl SteadyLift {
    /// `params` describes the full `d`-dimensional field; the embedded field
    /// uses dimension `d - 1` and `T = 1`.
    pub fn new(params: Params, eps: f64) -> Result<Self> {
        if params.dim < 3 {
            return Err(Error::InvalidParameter {
                name: "d",
                reason: format!("steady lift needs d >= 3, got {}", params.dim),
            });
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter { name: "eps", reason: format!("{eps} not in (0, 1)") });
        }
        let inner_params = Params { dim: params.dim - 1, final_time: 1.0, ..params };
        Ok(Self { inner: Reversed { construction: Construction::new(inner_params)? }, eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn inner(&self) -> &Reversed {
        &self.inner
    }

    /// Embedded time at height `x_d`, or `None` below the slab.
    pub fn slab_time(&self, x_last: f64) -> Option<f64> {
        let h = wrap(x_last);
        (h >= 1.0 - self.eps).then(|| ((h - (1.0 - self.eps)) / self.eps).min(1.0))
    }
}

impl VectorField for SteadyLift {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }
    fn value(&self, _t: f64, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(d);
        out[d - 1] = 1.0;
        if let Some(s) = self.slab_time(x[d - 1]) {
            let w = self.inner.value(s, &x[..d - 1]) / self.eps;
            out.rows_mut(0, d - 1).copy_from(&w);
        }
        out
    }
    fn jacobian(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut jac = DMatrix::zeros(d, d);
        if let Some(s) = self.slab_time(x[d - 1]) {
            let inner = self.inner.jacobian(s, &x[..d - 1]) / self.eps;
            jac.view_mut((0, 0), (d - 1, d - 1)).copy_from(&inner);
            let dt = self.inner.time_derivative(s, &x[..d - 1]) / (self.eps * self.eps);
            jac.view_mut((0, d - 1), (d - 1, 1)).copy_from(&dt);
        }
        jac
    }
    fn time_derivative(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim())
    }
    fn max_step(&self, _t: f64, x: &[f64]) -> Option<f64> {
        let s = self.slab_time(x[self.dim() - 1]).unwrap_or(0.0);
        self.inner.max_step(s, &x[..self.dim() - 1]).map(|h| h * self.eps)
    }
    fn name(&self) -> String {
        "usteady".into()
    }
}

/// The zero field.
#[derive(Debug, Clone, Copy)]
pub struct ZeroField {
    pub dim: usize,
}

impl VectorField for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }
    fn time_derivative(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
    fn name(&self) -> String {
        "zero".into()
    }
}

/// A constant field.
#[derive(Debug, Clone)]
pub struct ConstantField {
    pub value: DVector<f64>,
}

impl VectorField for ConstantField {
    fn dim(&self) -> usize {
        self.value.len()
    }
    fn value(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        self.value.clone()
    }
    fn jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.value.len(), self.value.len())
    }
    fn time_derivative(&self, _t: f64, _x: &[f64]) -> DVector<f64> {
        DVector::zeros(self.value.len())
    }
    fn name(&self) -> String {
        "constant".into()
    }
}

/// Field variants addressable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    W,
    Vtilde,
    Vi,
    V,
    U,
    Usteady,
}

impl std::str::FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "w" => FieldKind::W,
            "vtilde" => FieldKind::Vtilde,
            "vi" => FieldKind::Vi,
            "v" => FieldKind::V,
            "u" => FieldKind::U,
            "usteady" => FieldKind::Usteady,
            other => {
                return Err(Error::InvalidParameter {
                    name: "field",
                    reason: format!("unknown field {other:?}; expected w|vtilde|vi|v|u|usteady"),
                })
            }
        })
    }
}

impl FieldKind {
    pub const ALL: [FieldKind; 6] =
        [FieldKind::W, FieldKind::Vtilde, FieldKind::Vi, FieldKind::V, FieldKind::U, FieldKind::Usteady];

    /// Builds the field. `stage` selects `v_i`, and the blob shown for
    /// `vtilde` (the all-minus address of that stage). `w` uses the diagonal
    /// direction and offset `theta`; `usteady` uses slab width `eps`.
    pub fn build(&self, params: &Params, stage: usize, eps: f64) -> Result<Box<dyn VectorField>> {
        let stage_ok = || {
            if stage < params.depth {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: "stage",
                    reason: format!("stage {stage} is not below depth {}", params.depth),
                })
            }
        };
        Ok(match self {
            FieldKind::W => {
                let q = BlobDirection::new(vec![1.0; params.dim])?;
                Box::new(StationaryBlob::new(q, params.theta())?)
            }
            FieldKind::Vtilde => {
                stage_ok()?;
                let c = Construction::new(*params)?;
                Box::new(c.blob(stage, &Address::uniform(params.dim, stage + 1, -1)?)?)
            }
            FieldKind::Vi => {
                stage_ok()?;
                Box::new(StageVelocity { construction: Construction::new(*params)?, stage })
            }
            FieldKind::V => Box::new(Velocity { construction: Construction::new(*params)? }),
            FieldKind::U => Box::new(Reversed { construction: Construction::new(*params)? }),
            FieldKind::Usteady => Box::new(SteadyLift::new(*params, eps)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::Cube;

    fn params() -> Params {
        Params::default()
    }

    #[test]
    fn default_parameters() {
        let p = params();
        assert_eq!(p.dim, 2);
        assert_eq!(p.beta, 0.4375);
        assert_eq!(p.depth, 8);
        assert!((p.alpha - 0.125).abs() < 1e-15);
        assert!((p.sobolev_threshold() - 8.0 / 7.0).abs() < 1e-12);
        assert!(Params::new(1, 0.5).is_err());
        assert!(Params::new(2, 1.0).is_err());
    }

    #[test]
    fn stage_times() {
        let p = params().with_beta(0.75).unwrap();
        assert_eq!(p.tau(0), 0.0);
        assert!((p.tau(1) - 0.840_896_415_253_714_5).abs() < 1e-14);
        assert!((p.tau_inf() - 5.285_213_507_883_42).abs() < 1e-11);
        for i in 1..30 {
            let gap = p.tau(i) - p.tau(i - 1);
            assert!((gap - p.stage_length(i - 1)).abs() < 1e-14);
            assert!(gap > 0.0);
        }
        let p = params();
        assert!((p.tau_inf() - 1.0 / (2f64.powf(0.5625) - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn active_stage_lookup() {
        let p = params();
        assert_eq!(p.active_stage(0.5 * (p.tau(2) + p.tau(3))).unwrap(), Some(2));
        assert_eq!(p.active_stage(p.tau(5)).unwrap(), None);
        assert_eq!(p.active_stage(p.tau_inf()).unwrap(), None);
        assert_eq!(p.active_stage(0.0).unwrap(), None);
        assert!(p.active_stage(-0.1).is_err());
        assert!(p.active_stage(p.tau_inf() + 0.1).is_err());
        for i in 0..25 {
            let t = p.tau(i) + 0.37 * p.stage_length(i);
            assert_eq!(p.active_stage(t).unwrap(), Some(i));
        }
    }

    #[test]
    fn stage_zero_is_degenerate() {
        let c = Construction::new(params()).unwrap();
        for (_, b) in &c.stage_field(0).blobs {
            assert!(b.is_degenerate());
        }
        let v = Velocity { construction: c };
        let (a, b) = params().stage_window(0);
        assert!(v.value(0.5 * (a + b), &[0.25, 0.25]).iter().all(|&c| c == 0.0));
    }

    #[test]
    fn stage_blobs_stay_in_their_cells() {
        let p = params();
        let c = Construction::new(p).unwrap();
        for i in 1..=3 {
            for (addr, blob) in &c.stage_field(i).blobs {
                let cell = Cube::new(center(ScaleSequence::Theta, addr).unwrap(), ScaleSequence::Theta.length(i + 1));
                for k in 0..=10 {
                    let t = blob.t_start() + blob.duration() * k as f64 / 10.0;
                    let inflated = Cube::new(blob.center(t), (1.0 + p.theta()) * blob.side());
                    assert!(inflated.inside_margin(&cell) > 0.0, "stage {i} {addr}");
                }
            }
        }
    }

    #[test]
    fn core_value_is_blob_velocity() {
        let c = Construction::new(params()).unwrap();
        let addr = Address::parse("-+,+-,++").unwrap();
        let b = c.blob(2, &addr).unwrap();
        let t = 0.5 * (b.t_start() + b.t_end());
        let x = b.center(t);
        let v = Velocity { construction: c.clone() }.value(t, x.coords());
        let expect = b.velocity(t);
        for j in 0..2 {
            assert!((v[j] - expect[j]).abs() < 1e-14);
        }
        let (ws, _) = params().stage_window(2);
        let gap = 0.5 * (params().tau(2) + ws);
        assert!(Velocity { construction: c }.value(gap, x.coords()).iter().all(|&a| a == 0.0));
    }

    #[test]
    fn reversed_field_relation() {
        let c = Construction::new(params().with_final_time(2.0).unwrap()).unwrap();
        let u = Reversed { construction: c.clone() };
        let v = Velocity { construction: c };
        assert!(u.checked_value(0.0, &[0.3, 0.3]).unwrap().iter().all(|&a| a == 0.0));
        assert!(u.checked_value(2.0, &[0.3, 0.3]).unwrap().iter().all(|&a| a == 0.0));
        assert!(u.checked_value(2.5, &[0.3, 0.3]).is_err());
        let k = params().tau_inf() / 2.0;
        for (t, x) in [(0.7, [0.3, 0.71]), (1.1, [0.26, 0.77]), (1.9, [0.8, 0.2])] {
            let lhs = u.value(t, &x);
            let rhs = v.value(k * (2.0 - t), &x) * -k;
            assert!((lhs - rhs).norm() < 1e-14);
        }
    }

    #[test]
    fn steady_lift_branches() {
        let p = Params::new(3, 0.75).unwrap();
        let s = SteadyLift::new(p, 0.5).unwrap();
        assert_eq!(s.value(0.0, &[0.3, 0.3, 0.1]).as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(s.value(0.0, &[0.3, 0.3, 0.5]).as_slice(), &[0.0, 0.0, 1.0]);
        assert!(SteadyLift::new(params(), 0.5).is_err());
        assert!(SteadyLift::new(p, 1.5).is_err());
    }

    #[test]
    fn field_names_parse() {
        for k in FieldKind::ALL {
            let f = k.build(&Params::new(3, 0.75).unwrap(), 2, 0.5).unwrap();
            assert_eq!(f.dim(), 3);
        }
        assert!("bogus".parse::<FieldKind>().is_err());
        assert_eq!("U".parse::<FieldKind>().unwrap(), FieldKind::U);
    }
}
