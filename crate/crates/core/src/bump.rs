//! The normalised bump `phi(x) = c exp(1 / (x^2 - 1/4))` on `(-1/2, 1/2)`
//! and its cumulative distribution.
//!
//! Every smooth step in the construction (the cutoff ramps and the time
//! profile of a moving blob) is an affine rescaling of the cumulative
//! distribution `B(y) = int_{-inf}^y phi`. `B` has no elementary closed form,
//! so it is tabulated once on `[-1/2, 0]` and evaluated by quintic Hermite
//! interpolation using the exact values of `phi` and `phi'` at the nodes; the
//! upper half follows from `B(y) = 1 - B(-y)`.

use std::sync::OnceLock;

use crate::quad::{integrate_adaptive, GaussLegendre, KahanSum};

/// Table intervals on `[-1/2, 0]`.
const TABLE_INTERVALS: usize = 2048;

#[inline]
fn raw_bump(x: f64) -> f64 {
    let d = x * x - 0.25;
    if d >= 0.0 {
        0.0
    } else {
        (1.0 / d).exp()
    }
}

/// Unnormalised integral `int_{-1/2}^{1/2} exp(1 / (x^2 - 1/4)) dx` by
/// adaptive Gauss–Kronrod quadrature.
pub fn raw_bump_integral() -> f64 {
    integrate_adaptive(raw_bump, -0.5, 0.5, 1e-18)
}

#[derive(Debug)]
pub struct Bump {
    c: f64,
    step: f64,
    /// `B` at `-1/2 + k * step`, `k = 0..=TABLE_INTERVALS`.
    cdf: Vec<f64>,
}

static BUMP: OnceLock<Bump> = OnceLock::new();

/// The shared bump, built on first use.
pub fn bump() -> &'static Bump {
    BUMP.get_or_init(Bump::build)
}

impl Bump {
    fn build() -> Self {
        let c = 1.0 / raw_bump_integral();
        let step = 0.5 / TABLE_INTERVALS as f64;
        let rule = GaussLegendre::new(10);
        let mut cdf = Vec::with_capacity(TABLE_INTERVALS + 1);
        let mut acc = KahanSum::default();
        cdf.push(0.0);
        for k in 0..TABLE_INTERVALS {
            let a = -0.5 + k as f64 * step;
            acc.add(rule.integrate(raw_bump, a, a + step));
            cdf.push(acc.value());
        }
        // Pin B(0) = 1/2 exactly; the correction is at round-off level.
        let half = cdf[TABLE_INTERVALS];
        for v in &mut cdf {
            *v *= 0.5 / half;
        }
        Self { c, step, cdf }
    }

    /// Normalisation constant `c`.
    pub fn normalization(&self) -> f64 {
        self.c
    }

    #[inline]
    pub fn phi(&self, x: f64) -> f64 {
        self.c * raw_bump(x)
    }

    #[inline]
    pub fn phi_d1(&self, x: f64) -> f64 {
        let p = self.phi(x);
        if p == 0.0 {
            return 0.0;
        }
        let d = x * x - 0.25;
        p * (-2.0 * x / (d * d))
    }

    #[inline]
    pub fn phi_d2(&self, x: f64) -> f64 {
        let p = self.phi(x);
        if p == 0.0 {
            return 0.0;
        }
        let d = x * x - 0.25;
        let g1 = -2.0 * x / (d * d);
        let g2 = (6.0 * x * x + 0.5) / (d * d * d);
        p * (g1 * g1 + g2)
    }

    /// Standard mollifier `phi(x / eps) / eps`.
    #[inline]
    pub fn mollifier(&self, x: f64, eps: f64) -> f64 {
        self.phi(x / eps) / eps
    }

    /// Cumulative distribution `B(y)`: `0` for `y <= -1/2`, `1` for `y >= 1/2`.
    pub fn cdf(&self, y: f64) -> f64 {
        if y <= -0.5 {
            0.0
        } else if y >= 0.5 {
            1.0
        } else if y <= 0.0 {
            self.lower_half(y)
        } else {
            1.0 - self.lower_half(-y)
        }
    }

    fn lower_half(&self, y: f64) -> f64 {
        let s = (y + 0.5) / self.step;
        let k = (s.floor() as usize).min(TABLE_INTERVALS - 1);
        let t = s - k as f64;
        let h = self.step;
        let y0 = -0.5 + k as f64 * h;
        let y1 = y0 + h;
        let (f0, f1) = (self.cdf[k], self.cdf[k + 1]);
        let (d0, d1) = (self.phi(y0), self.phi(y1));
        let (s0, s1) = (self.phi_d1(y0), self.phi_d1(y1));
        let t2 = t * t;
        let t3 = t2 * t;
        let t4 = t3 * t;
        let t5 = t4 * t;
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
        f0 * h0 + h * d0 * h1 + h * h * s0 * h2 + f1 * h3 + h * d1 * h4 + h * h * s1 * h5
    }
}
