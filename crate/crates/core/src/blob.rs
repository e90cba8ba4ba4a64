//! The stationary blob: a divergence-free field equal to a fixed unit vector
//! `q` on the unit cube `[-1/2, 1/2]^d` and vanishing outside the inflated
//! cube of side `1 + delta`.
//!
//! It is the skew-gradient of the stream function `F1 = L(x) zeta_d(x)` with
//! `L(x) = sum_k (q_{2k-1} x_{2k} - q_{2k} x_{2k-1})`; in odd dimension the
//! unpaired last component of `q` is carried by a second stream function
//! `F2 = q_d x_1 zeta_d(x)` acting in the `(x_1, x_d)` plane.

use nalgebra::{DMatrix, DVector};

use crate::bump::bump;
use crate::error::{Error, Result};

/// A unit vector `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobDirection(Vec<f64>);

impl BlobDirection {
    /// Normalises `v`. Zero (or non-finite) vectors are rejected.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                reason: "direction must be a nonzero finite vector".into(),
            });
        }
        Ok(Self(v.into_iter().map(|c| c / norm).collect()))
    }

    /// The `j`-th coordinate axis.
    pub fn axis(dim: usize, j: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[j] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }
}

/// One-dimensional cutoff `zeta_1`: the indicator of
/// `[-1/2 - 3 delta/8, 1/2 + 3 delta/8]` mollified at width `delta / 8`.
///
/// Equal to 1 on `|x| <= 1/2 + 5 delta/16`, to 0 on `|x| >= 1/2 + 7 delta/16`,
/// and `1/2` at `|x| = 1/2 + 3 delta/8`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    delta: f64,
    edge: f64,
    eps: f64,
}

impl Cutoff {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter { name: "delta", reason: format!("{delta} not in (0, 1)") });
        }
        Ok(Self { delta, edge: 0.5 + 0.375 * delta, eps: delta / 8.0 })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Half-width of the support, `1/2 + 7 delta / 16`.
    pub fn support_radius(&self) -> f64 {
        self.edge + 0.5 * self.eps
    }

    /// Half-width of the plateau, `1/2 + 5 delta / 16`.
    pub fn plateau_radius(&self) -> f64 {
        self.edge - 0.5 * self.eps
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        bump().cdf((self.edge - x.abs()) / self.eps)
    }

    #[inline]
    pub fn d1(&self, x: f64) -> f64 {
        let p = bump().phi((self.edge - x.abs()) / self.eps) / self.eps;
        if x >= 0.0 {
            -p
        } else {
            p
        }
    }

    #[inline]
    pub fn d2(&self, x: f64) -> f64 {
        bump().phi_d1((self.edge - x.abs()) / self.eps) / (self.eps * self.eps)
    }
}

/// `w(.; q, delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryBlob {
    q: BlobDirection,
    cutoff: Cutoff,
}

/// Per-coordinate cutoff values and derivatives.
struct Factors {
    z: Vec<f64>,
    z1: Vec<f64>,
    z2: Vec<f64>,
}

impl Factors {
    fn product_except(&self, skip: &[usize]) -> f64 {
        self.z
            .iter()
            .enumerate()
            .filter(|(j, _)| !skip.contains(j))
            .map(|(_, z)| z)
            .product()
    }

    fn zeta(&self) -> f64 {
        self.z.iter().product()
    }

    fn gradient(&self) -> Vec<f64> {
        (0..self.z.len()).map(|k| self.z1[k] * self.product_except(&[k])).collect()
    }

    fn hessian(&self) -> DMatrix<f64> {
        let d = self.z.len();
        let mut h = DMatrix::zeros(d, d);
        for k in 0..d {
            h[(k, k)] = self.z2[k] * self.product_except(&[k]);
            for l in k + 1..d {
                let v = self.z1[k] * self.z1[l] * self.product_except(&[k, l]);
                h[(k, l)] = v;
                h[(l, k)] = v;
            }
        }
        h
    }
}

/// Value, gradient and Hessian of `M(x) zeta_d(x)` for an affine `M` with
/// constant gradient `m_grad`.
fn product_derivatives(m: f64, m_grad: &[f64], f: &Factors) -> (f64, Vec<f64>, DMatrix<f64>) {
    let z = f.zeta();
    let zg = f.gradient();
    let zh = f.hessian();
    let d = m_grad.len();
    let grad = (0..d).map(|i| m_grad[i] * z + m * zg[i]).collect();
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = m_grad[i] * zg[j] + m_grad[j] * zg[i] + m * zh[(i, j)];
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    (m * z, grad, hess)
}

impl StationaryBlob {
    pub fn new(q: BlobDirection, delta: f64) -> Result<Self> {
        if q.dim() < 2 {
            return Err(Error::InvalidParameter { name: "d", reason: "dimension must be at least 2".into() });
        }
        Ok(Self { q, cutoff: Cutoff::new(delta)? })
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn direction(&self) -> &BlobDirection {
        &self.q
    }

    pub fn cutoff(&self) -> &Cutoff {
        &self.cutoff
    }

    /// Whether `x` is outside the closed support cube.
    #[inline]
    fn outside(&self, x: &[f64]) -> bool {
        let r = self.cutoff.support_radius();
        x.iter().any(|c| c.abs() >= r)
    }

    fn factors(&self, x: &[f64]) -> Factors {
        Factors {
            z: x.iter().map(|&c| self.cutoff.value(c)).collect(),
            z1: x.iter().map(|&c| self.cutoff.d1(c)).collect(),
            z2: x.iter().map(|&c| self.cutoff.d2(c)).collect(),
        }
    }

    /// `zeta_d(x) = prod_j zeta_1(x_j)`.
    pub fn zeta_d(&self, x: &[f64]) -> f64 {
        x.iter().map(|&c| self.cutoff.value(c)).product()
    }

    /// `L(x)` and its gradient.
    fn pairing(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let q = self.q.components();
        let d = q.len();
        let mut l = 0.0;
        let mut grad = vec![0.0; d];
        for m in 0..d / 2 {
            let (a, b) = (2 * m, 2 * m + 1);
            l += q[a] * x[b] - q[b] * x[a];
            grad[b] = q[a];
            grad[a] = -q[b];
        }
        (l, grad)
    }

    /// `x_1 q_d` and its gradient (odd `d` only).
    fn odd_part(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let q = self.q.components();
        let mut grad = vec![0.0; q.len()];
        grad[0] = q[q.len() - 1];
        (q[q.len() - 1] * x[0], grad)
    }

    /// Stream functions `(F1, F2)`; `F2` only in odd dimension.
    pub fn stream(&self, x: &[f64]) -> (f64, Option<f64>) {
        let z = self.zeta_d(x);
        let f1 = self.pairing(x).0 * z;
        let f2 = (self.dim() % 2 == 1).then(|| self.odd_part(x).0 * z);
        (f1, f2)
    }

    pub fn value(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        let mut w = DVector::zeros(d);
        if self.outside(x) {
            return w;
        }
        let f = self.factors(x);
        let z = f.zeta();
        let zg = f.gradient();
        let (l, lg) = self.pairing(x);
        let g1: Vec<f64> = (0..d).map(|i| lg[i] * z + l * zg[i]).collect();
        for m in 0..d / 2 {
            w[2 * m] = g1[2 * m + 1];
            w[2 * m + 1] = -g1[2 * m];
        }
        if d % 2 == 1 {
            let (mv, mg) = self.odd_part(x);
            let g2: Vec<f64> = (0..d).map(|i| mg[i] * z + mv * zg[i]).collect();
            w[0] -= g2[d - 1];
            w[d - 1] = g2[0];
        }
        w
    }

    /// `J[i][j] = d w_i / d x_j`, assembled from the stream-function Hessians
    /// so that the trace cancels to round-off.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let mut jac = DMatrix::zeros(d, d);
        if self.outside(x) {
            return jac;
        }
        let f = self.factors(x);
        let (l, lg) = self.pairing(x);
        let (_, _, h1) = product_derivatives(l, &lg, &f);
        for m in 0..d / 2 {
            for j in 0..d {
                jac[(2 * m, j)] = h1[(2 * m + 1, j)];
                jac[(2 * m + 1, j)] = -h1[(2 * m, j)];
            }
        }
        if d % 2 == 1 {
            let (mv, mg) = self.odd_part(x);
            let (_, _, h2) = product_derivatives(mv, &mg, &f);
            for j in 0..d {
                jac[(0, j)] -= h2[(d - 1, j)];
                jac[(d - 1, j)] = h2[(0, j)];
            }
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_adaptive;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const DELTA: f64 = 0.085_219_5;

    fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> BlobDirection {
        BlobDirection::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn cutoff_landmarks() {
        for delta in [0.05, DELTA, 0.2, 0.9] {
            let c = Cutoff::new(delta).unwrap();
            assert_eq!(c.value(0.0), 1.0);
            assert_eq!(c.value(0.5), 1.0);
            assert_eq!(c.value(-0.5), 1.0);
            assert_eq!(c.value(0.5 + delta / 4.0), 1.0);
            assert_eq!(c.value(0.5 + delta / 2.0), 0.0);
            assert!((c.value(0.5 + 3.0 * delta / 8.0) - 0.5).abs() < 1e-15);
            assert_eq!(c.d1(0.3), 0.0);
        }
        assert!(Cutoff::new(0.0).is_err());
        assert!(Cutoff::new(1.0).is_err());
    }

    #[test]
    fn cutoff_matches_direct_convolution() {
        let c = Cutoff::new(DELTA).unwrap();
        let (a, eps) = (0.5 + 3.0 * DELTA / 8.0, DELTA / 8.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-0.6..0.6);
            let lo = (x - eps / 2.0).max(-a);
            let hi = (x + eps / 2.0).min(a);
            let direct = if lo < hi {
                integrate_adaptive(|y| bump().mollifier(x - y, eps), lo, hi, 1e-14)
            } else {
                0.0
            };
            assert!((c.value(x) - direct).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn cutoff_derivatives_match_differences() {
        let c = Cutoff::new(0.2).unwrap();
        let h = 1e-6;
        for x in [-0.57, -0.56, 0.56, 0.575, 0.58] {
            let fd1 = (c.value(x + h) - c.value(x - h)) / (2.0 * h);
            let fd2 = (c.d1(x + h) - c.d1(x - h)) / (2.0 * h);
            assert!((fd1 - c.d1(x)).abs() < 1e-5 * (1.0 + c.d1(x).abs()), "x={x}");
            assert!((fd2 - c.d2(x)).abs() < 1e-4 * (1.0 + c.d2(x).abs()), "x={x}");
        }
    }

    #[test]
    fn stream_function_examples() {
        let b = StationaryBlob::new(BlobDirection::axis(2, 0), DELTA).unwrap();
        let (f1, f2) = b.stream(&[0.2, -0.3]);
        assert_eq!(f1, -0.3);
        assert!(f2.is_none());
        let b = StationaryBlob::new(BlobDirection::axis(3, 2), DELTA).unwrap();
        let (f1, f2) = b.stream(&[0.2, -0.3, 0.1]);
        assert_eq!(f1, 0.0);
        assert_eq!(f2, Some(0.2));
        assert_eq!(b.stream(&[0.2, 0.6, 0.1]), (0.0, Some(0.0)));
    }

    #[test]
    fn interior_identity_on_lattice() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2, 3] {
            let q = random_unit(&mut rng, d);
            let b = StationaryBlob::new(q.clone(), DELTA).unwrap();
            let n = 17usize;
            for idx in 0..n.pow(d as u32) {
                let x: Vec<f64> = (0..d).map(|j| (idx / n.pow(j as u32) % n) as f64 / 16.0 - 0.5).collect();
                let w = b.value(&x);
                for j in 0..d {
                    assert!((w[j] - q.components()[j]).abs() <= 1e-10);
                }
                assert!(b.jacobian(&x).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn vanishes_outside_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2, 3, 4] {
            let b = StationaryBlob::new(random_unit(&mut rng, d), DELTA).unwrap();
            for _ in 0..1000 {
                let mut x: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.8..0.8)).collect();
                let j = rng.gen_range(0..d);
                x[j] = rng.gen_range((1.0 + DELTA) / 2.0..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                assert!(b.value(&x).iter().all(|&v| v == 0.0));
                assert!(b.jacobian(&x).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn jacobian_vanishes_on_the_plateau() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = StationaryBlob::new(random_unit(&mut rng, 2), DELTA).unwrap();
        for _ in 0..1000 {
            let x = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
            let h = 1e-4;
            for j in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                assert!(((b.value(&xp) - b.value(&xm)) / (2.0 * h)).norm() <= 1e-5);
            }
        }
    }

    #[test]
    fn jacobian_matches_differences_with_zero_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2, 3] {
            let b = StationaryBlob::new(random_unit(&mut rng, d), 0.3).unwrap();
            let lo = b.cutoff().plateau_radius();
            let hi = b.cutoff().support_radius();
            for _ in 0..300 {
                let mut x: Vec<f64> = (0..d).map(|_| rng.gen_range(-hi..hi)).collect();
                x[0] = rng.gen_range(lo..hi);
                let jac = b.jacobian(&x);
                assert!(jac.trace().abs() <= 1e-9);
                let scale = (8.0 / 0.3f64).powi(2);
                let err = |h: f64| {
                    let mut worst: f64 = 0.0;
                    for j in 0..d {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[j] += h;
                        xm[j] -= h;
                        let col = (b.value(&xp) - b.value(&xm)) / (2.0 * h);
                        for i in 0..d {
                            worst = worst.max((col[i] - jac[(i, j)]).abs());
                        }
                    }
                    worst
                };
                let (e1, e2) = (err(1e-5), err(5e-6));
                assert!(e1 <= 1e-4 * scale, "d={d} x={x:?} err={e1}");
                if e1 > 1e-7 * scale {
                    let rate = (e1 / e2).log2();
                    assert!((rate - 2.0).abs() < 0.3, "d={d} x={x:?} rate={rate}");
                }
            }
        }
    }

    #[test]
    fn sup_norms_scale_with_delta() {
        let q = BlobDirection::new(vec![0.6, 0.8]).unwrap();
        let mut products = Vec::new();
        for delta in [0.2, 0.1, 0.05] {
            let b = StationaryBlob::new(q.clone(), delta).unwrap();
            let r = b.cutoff().support_radius();
            let n = 400;
            let (mut wmax, mut gmax, mut zgmax) = (0.0f64, 0.0f64, 0.0f64);
            for i in 0..=n {
                for j in 0..=n {
                    let x = [-r + 2.0 * r * i as f64 / n as f64, -r + 2.0 * r * j as f64 / n as f64];
                    wmax = wmax.max(b.value(&x).norm());
                    gmax = gmax.max(b.jacobian(&x).norm());
                    let f = b.factors(&x);
                    zgmax = zgmax.max(f.gradient().iter().map(|v| v * v).sum::<f64>().sqrt());
                }
            }
            products.push((wmax * delta, gmax * delta * delta, zgmax * delta));
        }
        for k in 1..products.len() {
            for (a, b) in [
                (products[k].0, products[0].0),
                (products[k].1, products[0].1),
                (products[k].2, products[0].2),
            ] {
                assert!(a / b < 2.0 && a / b > 0.25, "{products:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(BlobDirection::new(vec![0.0, 0.0]).is_err());
        assert!(StationaryBlob::new(BlobDirection::axis(1, 0), 0.1).is_err());
        let q = BlobDirection::new(vec![3.0, 4.0]).unwrap();
        assert!((q.components()[0] - 0.6).abs() < 1e-15);
    }
}
