//! A blob translated rigidly along a straight segment.
//!
//! The centre follows `x_p(t) = x_s + (x_e - x_s) eta(tau)` with
//! `tau = (t - t_s) / (t_e - t_s)`, and the field is
//! `|x_p'(t)| w((x - x_p(t)) / lambda; q, delta)` with `q` the direction of
//! travel. Inside the moving core cube the field equals `x_p'(t)`, so the core
//! is carried along without deformation.

use nalgebra::{DMatrix, DVector};

use crate::blob::{BlobDirection, StationaryBlob};
use crate::bump::bump;
use crate::cantor::{min_image, Cube, TorusPoint};
use crate::error::{Error, Result};

/// Smoothed unit step: 0 for `x <= 0`, 1 for `x >= 1`.
#[inline]
pub fn eta(x: f64) -> f64 {
    bump().cdf(x - 0.5)
}

#[inline]
pub fn eta_d1(x: f64) -> f64 {
    bump().phi(x - 0.5)
}

#[inline]
pub fn eta_d2(x: f64) -> f64 {
    bump().phi_d1(x - 0.5)
}

/// Data of one moving blob. A blob whose start and end coincide is the zero
/// field.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    start: TorusPoint,
    end: TorusPoint,
    t_start: f64,
    t_end: f64,
    side: f64,
    delta: f64,
    displacement: Vec<f64>,
    distance: f64,
    blob: Option<StationaryBlob>,
}

impl BlobSpec {
    pub fn new(start: TorusPoint, end: TorusPoint, t_start: f64, t_end: f64, side: f64, delta: f64) -> Result<Self> {
        if start.dim() != end.dim() {
            return Err(Error::DimensionMismatch { expected: start.dim(), got: end.dim() });
        }
        if !(t_start < t_end) {
            return Err(Error::InvalidParameter {
                name: "t_start",
                reason: format!("need t_start < t_end, got {t_start} >= {t_end}"),
            });
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(Error::InvalidParameter { name: "side", reason: format!("{side} is not positive") });
        }
        let displacement = start.displacement_to(&end);
        let distance = displacement.iter().map(|c| c * c).sum::<f64>().sqrt();
        let blob = if distance > 0.0 {
            Some(StationaryBlob::new(BlobDirection::new(displacement.clone())?, delta)?)
        } else {
            crate::blob::Cutoff::new(delta)?;
            None
        };
        Ok(Self { start, end, t_start, t_end, side, delta, displacement, distance, blob })
    }

    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    pub fn start(&self) -> &TorusPoint {
        &self.start
    }

    pub fn end(&self) -> &TorusPoint {
        &self.end
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Minimum-image displacement `x_e - x_s`.
    pub fn displacement(&self) -> &[f64] {
        &self.displacement
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn is_degenerate(&self) -> bool {
        self.blob.is_none()
    }

    pub fn direction(&self) -> Option<&BlobDirection> {
        self.blob.as_ref().map(|b| b.direction())
    }

    pub fn stationary(&self) -> Option<&StationaryBlob> {
        self.blob.as_ref()
    }

    /// Half-width of the spatial support around the centre.
    pub fn support_radius(&self) -> f64 {
        match &self.blob {
            Some(b) => self.side * b.cutoff().support_radius(),
            None => 0.0,
        }
    }

    #[inline]
    pub fn tau(&self, t: f64) -> f64 {
        (t - self.t_start) / self.duration()
    }

    /// Whether the field can be nonzero at time `t`.
    #[inline]
    pub fn is_active(&self, t: f64) -> bool {
        self.blob.is_some() && t > self.t_start && t < self.t_end
    }

    /// Centre `x_p(t)`.
    pub fn center(&self, t: f64) -> TorusPoint {
        let e = eta(self.tau(t));
        let delta: Vec<f64> = self.displacement.iter().map(|c| c * e).collect();
        self.start.translated(&delta)
    }

    /// `x_p'(t)`.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let k = eta_d1(self.tau(t)) / self.duration();
        self.displacement.iter().map(|c| c * k).collect()
    }

    /// `|x_p'(t)|`, largest at mid-window.
    pub fn speed(&self, t: f64) -> f64 {
        self.distance * eta_d1(self.tau(t)) / self.duration()
    }

    /// Blob-frame coordinates `(x - x_p(t)) / lambda` (minimum image).
    pub fn local_coords(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let e = eta(self.tau(t));
        x.iter()
            .zip(self.start.coords())
            .zip(&self.displacement)
            .map(|((xi, si), di)| min_image(xi - si - di * e) / self.side)
            .collect()
    }

    pub fn value(&self, t: f64, x: &[f64]) -> DVector<f64> {
        match &self.blob {
            Some(b) if self.is_active(t) => b.value(&self.local_coords(t, x)) * self.speed(t),
            _ => DVector::zeros(self.dim()),
        }
    }

    pub fn jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        match &self.blob {
            Some(b) if self.is_active(t) => b.jacobian(&self.local_coords(t, x)) * (self.speed(t) / self.side),
            _ => DMatrix::zeros(self.dim(), self.dim()),
        }
    }

    /// `d/dt` at fixed `x`: `s'(t) w(xi) - s(t) grad w(xi) x_p'(t) / lambda`.
    pub fn time_derivative(&self, t: f64, x: &[f64]) -> DVector<f64> {
        let Some(b) = &self.blob else {
            return DVector::zeros(self.dim());
        };
        if !self.is_active(t) {
            return DVector::zeros(self.dim());
        }
        let xi = self.local_coords(t, x);
        let dur = self.duration();
        let tau = self.tau(t);
        let s = self.speed(t);
        let s_dot = self.distance * eta_d2(tau) / (dur * dur);
        let vel = DVector::from_vec(self.velocity(t));
        b.value(&xi) * s_dot - b.jacobian(&xi) * vel * (s / self.side)
    }

    /// Closed-form path from `x` in the closed start cube `Q(x_s, lambda)`:
    /// `x + (x_e - x_s) eta(tau)`.
    pub fn analytic_trajectory(&self, x: &TorusPoint, t: f64) -> Result<TorusPoint> {
        if !Cube::new(self.start.clone(), self.side).contains_closed(x) {
            return Err(Error::OutsideStartCube);
        }
        let e = eta(self.tau(t));
        let delta: Vec<f64> = self.displacement.iter().map(|c| c * e).collect();
        Ok(x.translated(&delta))
    }
}
