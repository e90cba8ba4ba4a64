//! Cantor-set geometry on the unit torus.
//!
//! A generation-`n` cube is named by an [`Address`]: one sign vector per
//! generation, each sign choosing the lower (-1) or upper (+1) half along a
//! coordinate. The same address names a cube in two families:
//!
//! * the dyadic family ([`ScaleSequence::Theta`]), side `2^-n`, which tiles
//!   the torus;
//! * the Cantor family ([`ScaleSequence::Phi`]), side `2^-(1+nu)n`, whose
//!   cubes are pairwise disjoint and nested, shrinking onto a set of
//!   dimension `d / (1 + nu)`.
//!
//! Infinite sign sequences are only ever represented by finite truncations;
//! the truncation error of a depth-`N` point is bounded by `length(psi, N) / 2`
//! per coordinate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-cube containment slack. Points within this distance of a face are
/// treated as on the face.
pub const CONTAINMENT_TOL: f64 = 1e-12;

/// Reduces a coordinate to `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Minimum-image representative of a coordinate difference, in `[-1/2, 1/2)`.
#[inline]
pub fn min_image(dx: f64) -> f64 {
    dx - (dx + 0.5).floor()
}

/// A sign vector in `{-1, +1}^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(components: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = components.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSign(bad));
        }
        Ok(Self(components))
    }

    /// All components equal to `sign`.
    pub fn uniform(dim: usize, sign: i8) -> Result<Self> {
        Self::new(vec![sign; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Component `j` as a float (`-1.0` or `1.0`).
    #[inline]
    pub fn get(&self, j: usize) -> f64 {
        f64::from(self.0[j])
    }

    pub fn components(&self) -> &[i8] {
        &self.0
    }
}

/// A finite address `(s_1, ..., s_n)`; `n = 0` is the root (the whole torus).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Address {
    dim: usize,
    signs: Vec<SignVector>,
}

impl Address {
    pub fn root(dim: usize) -> Self {
        Self { dim, signs: Vec::new() }
    }

    pub fn new(dim: usize, signs: Vec<SignVector>) -> Result<Self> {
        for s in &signs {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.dim() });
            }
        }
        Ok(Self { dim, signs })
    }

    /// The address repeating `sign` in every coordinate for `depth` generations.
    pub fn uniform(dim: usize, depth: usize, sign: i8) -> Result<Self> {
        let s = SignVector::uniform(dim, sign)?;
        Ok(Self { dim, signs: vec![s; depth] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.signs.len()
    }

    pub fn is_root(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[SignVector] {
        &self.signs
    }

    /// Sign vector of generation `generation` (1-based).
    pub fn generation(&self, generation: usize) -> &SignVector {
        &self.signs[generation - 1]
    }

    /// Drops the last generation; `None` at the root.
    pub fn parent(&self) -> Option<Address> {
        if self.is_root() {
            None
        } else {
            Some(self.truncate(self.depth() - 1))
        }
    }

    /// The first `n` generations (`sigma_n`). Saturates at the full depth.
    pub fn truncate(&self, n: usize) -> Address {
        Address { dim: self.dim, signs: self.signs[..n.min(self.depth())].to_vec() }
    }

    pub fn child(&self, s: SignVector) -> Result<Address> {
        if s.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: s.dim() });
        }
        let mut signs = self.signs.clone();
        signs.push(s);
        Ok(Address { dim: self.dim, signs })
    }

    /// Every address of the given depth, `2^(dim * depth)` in total, in a
    /// fixed order (bit `k` of the index set means sign `+1`).
    pub fn all(dim: usize, depth: usize) -> impl Iterator<Item = Address> {
        let bits = dim * depth;
        assert!(bits < 63, "address enumeration too large");
        (0u64..(1u64 << bits)).map(move |index| Address::from_index(dim, depth, index))
    }

    /// Address whose sign bits are the low `dim * depth` bits of `index`.
    pub fn from_index(dim: usize, depth: usize, index: u64) -> Address {
        let signs = (0..depth)
            .map(|g| {
                SignVector(
                    (0..dim)
                        .map(|j| if index >> (g * dim + j) & 1 == 1 { 1 } else { -1 })
                        .collect(),
                )
            })
            .collect();
        Address { dim, signs }
    }

    /// Parses `+`/`-` characters per coordinate, comma-separated per
    /// generation, e.g. `"+-,-+"` is depth 2 in dimension 2.
    pub fn parse(input: &str) -> Result<Address> {
        let malformed = |reason: &str| Error::MalformedAddress {
            input: input.to_string(),
            reason: reason.to_string(),
        };
        let trimmed = input.trim();
        if trimmed.is_empty() {
            return Err(malformed("empty address"));
        }
        let mut signs = Vec::new();
        for part in trimmed.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(malformed("empty generation"));
            }
            let comps = part
                .chars()
                .map(|c| match c {
                    '+' => Ok(1),
                    '-' => Ok(-1),
                    other => Err(malformed(&format!("unexpected character {other:?}"))),
                })
                .collect::<Result<Vec<i8>>>()?;
            signs.push(SignVector(comps));
        }
        let dim = signs[0].dim();
        if signs.iter().any(|s| s.dim() != dim) {
            return Err(malformed("generations have different lengths"));
        }
        Ok(Address { dim, signs })
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (g, s) in self.signs.iter().enumerate() {
            if g > 0 {
                f.write_str(",")?;
            }
            for &c in &s.0 {
                f.write_str(if c > 0 { "+" } else { "-" })?;
            }
        }
        Ok(())
    }
}

/// The contraction sequence `psi_i` of a Cantor family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScaleSequence {
    /// `psi_i = 2^-nu` for every `i`.
    Phi { nu: f64 },
    /// `psi_i = 1`: the dyadic family.
    Theta,
}

impl ScaleSequence {
    pub fn phi(nu: f64) -> Self {
        ScaleSequence::Phi { nu }
    }

    /// `psi_i` (1-based; identical for every `i` in both families).
    pub fn psi(&self, _i: usize) -> f64 {
        match *self {
            ScaleSequence::Phi { nu } => (-nu).exp2(),
            ScaleSequence::Theta => 1.0,
        }
    }

    /// Side length of generation-`n` cubes: `prod(psi_i) / 2^n`, `1` at `n = 0`.
    pub fn length(&self, n: usize) -> f64 {
        match *self {
            ScaleSequence::Phi { nu } => (-((1.0 + nu) * n as f64)).exp2(),
            ScaleSequence::Theta => (-(n as f64)).exp2(),
        }
    }
}

/// Side length of generation-`n` cubes of `seq`.
pub fn length(seq: ScaleSequence, n: usize) -> f64 {
    seq.length(n)
}

/// A point of the torus with every coordinate in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint(Vec<f64>);

impl TorusPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self(coords.into_iter().map(wrap).collect())
    }

    pub fn from_slice(coords: &[f64]) -> Self {
        Self(coords.iter().copied().map(wrap).collect())
    }

    pub fn splat(dim: usize, value: f64) -> Self {
        Self::new(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// Minimum-image displacement `other - self`, coordinate-wise.
    pub fn displacement_to(&self, other: &TorusPoint) -> Vec<f64> {
        self.0.iter().zip(&other.0).map(|(a, b)| min_image(b - a)).collect()
    }

    /// Max-norm torus distance.
    pub fn distance_inf(&self, other: &TorusPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| min_image(b - a).abs())
            .fold(0.0, f64::max)
    }

    /// Translates by `delta` and wraps.
    pub fn translated(&self, delta: &[f64]) -> TorusPoint {
        TorusPoint(self.0.iter().zip(delta).map(|(a, d)| wrap(a + d)).collect())
    }

    /// Equality up to the library-wide tolerance of `1e-12`.
    pub fn approx_eq(&self, other: &TorusPoint) -> bool {
        self.dim() == other.dim() && self.distance_inf(other) <= 1e-12
    }
}

/// An axis-aligned cube on the torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub center: TorusPoint,
    pub side: f64,
}

impl Cube {
    pub fn new(center: TorusPoint, side: f64) -> Self {
        Self { center, side }
    }

    /// Closed containment with slack [`CONTAINMENT_TOL`].
    pub fn contains_closed(&self, x: &TorusPoint) -> bool {
        self.center.distance_inf(x) <= 0.5 * self.side + CONTAINMENT_TOL
    }

    /// Strict (open) containment.
    pub fn contains_open(&self, x: &TorusPoint) -> bool {
        self.center.distance_inf(x) < 0.5 * self.side
    }

    /// Smallest gap between the faces of `self` and of `outer`. Positive
    /// exactly when the closed cube `self` lies inside the open cube `outer`.
    pub fn inside_margin(&self, outer: &Cube) -> f64 {
        0.5 * outer.side - 0.5 * self.side - outer.center.distance_inf(&self.center)
    }

    pub fn corners(&self) -> Vec<TorusPoint> {
        let d = self.center.dim();
        (0u32..(1 << d))
            .map(|mask| {
                let delta: Vec<f64> = (0..d)
                    .map(|j| if mask >> j & 1 == 1 { 0.5 * self.side } else { -0.5 * self.side })
                    .collect();
                self.center.translated(&delta)
            })
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(self.center.dim() as i32)
    }
}

/// Raw (unwrapped) centre coordinates `1/2 + 1/4 sum_i s_i^j length(i-1)`.
fn center_raw(seq: ScaleSequence, addr: &Address) -> Vec<f64> {
    (0..addr.dim())
        .map(|j| {
            let sum: f64 = addr
                .signs()
                .iter()
                .enumerate()
                .map(|(i, s)| s.get(j) * seq.length(i))
                .sum();
            0.5 + 0.25 * sum
        })
        .collect()
}

/// Centre of the generation-`n` cube named by `addr` in the family `seq`.
pub fn center(seq: ScaleSequence, addr: &Address) -> Result<TorusPoint> {
    if addr.is_root() {
        return Err(Error::EmptyAddress);
    }
    Ok(TorusPoint::new(center_raw(seq, addr)))
}

/// Centre of the generation-`n` Cantor cube after generations `1..n-1` have
/// been aligned with their dyadic cells: dyadic partial sum through `n - 1`
/// plus the generation-`n` Cantor offset.
pub fn shifted_center(nu: f64, addr: &Address) -> Result<TorusPoint> {
    let n = addr.depth();
    if n == 0 {
        return Err(Error::EmptyAddress);
    }
    let last = addr.generation(n);
    let offset = ScaleSequence::phi(nu).length(n - 1);
    let coords = (0..addr.dim())
        .map(|j| {
            let dyadic: f64 = addr.signs()[..n - 1]
                .iter()
                .enumerate()
                .map(|(i, s)| s.get(j) * ScaleSequence::Theta.length(i))
                .sum();
            0.5 + 0.25 * dyadic + 0.25 * last.get(j) * offset
        })
        .collect();
    Ok(TorusPoint::new(coords))
}

/// Depth-`N` truncation of the limit point of the sequence that starts with
/// `addr`. Within `length(seq, N) / 2` of the true limit in each coordinate.
pub fn limit_point(seq: ScaleSequence, addr: &Address) -> Result<TorusPoint> {
    center(seq, addr)
}

/// Per-coordinate bound on the truncation error of [`limit_point`] at depth `n`.
pub fn tail_bound(seq: ScaleSequence, n: usize) -> f64 {
    0.5 * seq.length(n)
}

/// The closed cube of generation `addr.depth()` named by `addr`.
pub fn cube(seq: ScaleSequence, addr: &Address) -> Result<Cube> {
    Ok(Cube::new(center(seq, addr)?, seq.length(addr.depth())))
}

/// Dyadic address of depth `n` whose closed cell contains `x`.
///
/// A coordinate exactly on a dyadic grid line goes to the cell on its upper
/// side (sign `+1`); decoding at depth `n` truncates decoding at depth `n + 1`.
pub fn decode_address(x: &TorusPoint, n: usize) -> Address {
    let d = x.dim();
    let mut signs = vec![Vec::with_capacity(d); n];
    for &coord in x.coords() {
        let mut c = 0.5;
        for (i, gen) in signs.iter_mut().enumerate() {
            let s: i8 = if coord >= c { 1 } else { -1 };
            gen.push(s);
            c += 0.25 * f64::from(s) * ScaleSequence::Theta.length(i);
        }
    }
    Address { dim: d, signs: signs.into_iter().map(SignVector).collect() }
}

/// Address of the generation-`n` Cantor cube containing `x`, if any.
///
/// Greedy descent: at each generation only the child on `x`'s side of the
/// parent centre can contain it, so one containment test per level suffices.
pub fn cantor_address(x: &TorusPoint, nu: f64, n: usize) -> Option<Address> {
    let seq = ScaleSequence::phi(nu);
    let d = x.dim();
    let mut centre = vec![0.5; d];
    let mut signs = Vec::with_capacity(n);
    for i in 0..n {
        let step = 0.25 * seq.length(i);
        let half = 0.5 * seq.length(i + 1) + CONTAINMENT_TOL;
        let mut s = Vec::with_capacity(d);
        for j in 0..d {
            let rel = min_image(x.coords()[j] - centre[j]);
            let sign: i8 = if rel >= 0.0 { 1 } else { -1 };
            centre[j] += f64::from(sign) * step;
            if min_image(x.coords()[j] - centre[j]).abs() > half {
                return None;
            }
            s.push(sign);
        }
        signs.push(SignVector(s));
    }
    Some(Address { dim: d, signs })
}

/// Whether `x` lies in the union of closed generation-`n` Cantor cubes.
pub fn in_generation_set(x: &TorusPoint, nu: f64, n: usize) -> bool {
    cantor_address(x, nu, n).is_some()
}

/// Counting dimension `log(2^(nd)) / log(1 / length(Phi, n))`; equals
/// `d / (1 + nu)` at every `n >= 1`.
pub fn box_dimension(nu: f64, dim: usize, n: usize) -> f64 {
    let count_log = (n * dim) as f64 * std::f64::consts::LN_2;
    let inv_len_log = (1.0 + nu) * n as f64 * std::f64::consts::LN_2;
    count_log / inv_len_log
}

/// Relative inflation `(2^nu - 1) / 8` that keeps a moving inflated cube
/// inside its dyadic cell.
pub fn theta_margin(nu: f64) -> f64 {
    (nu.exp2() - 1.0) / 8.0
}

/// Lebesgue volume of the generation-`n` Cantor union, `2^(-nu d n)`.
pub fn generation_volume(nu: f64, dim: usize, n: usize) -> f64 {
    (-(nu * (dim * n) as f64)).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;

    const NU: f64 = 0.75;

    fn addr(s: &str) -> Address {
        Address::parse(s).unwrap()
    }

    #[test]
    fn lengths() {
        assert_eq!(length(ScaleSequence::Theta, 3), 0.125);
        let l = length(ScaleSequence::phi(0.75), 2);
        assert!((l - 0.088_388_347_648_318_44).abs() < 1e-15);
        assert_eq!(length(ScaleSequence::phi(0.3), 0), 1.0);
        for n in 1..12 {
            for seq in [ScaleSequence::Theta, ScaleSequence::phi(0.4)] {
                assert!(seq.length(n) <= seq.length(n - 1) / 2.0 + 1e-18);
            }
        }
    }

    #[test]
    fn centres_match_hand_values() {
        let c = center(ScaleSequence::phi(NU), &addr("--")).unwrap();
        assert!(c.approx_eq(&TorusPoint::new(vec![0.25, 0.25])));
        let c = center(ScaleSequence::Theta, &addr("+++")).unwrap();
        assert!(c.approx_eq(&TorusPoint::splat(3, 0.75)));
        // 1/4 - 2^(-7/4)/4 by hand
        let expect = 0.25 - 0.25 * 2f64.powf(-1.75);
        let c = center(ScaleSequence::phi(NU), &addr("--,--")).unwrap();
        assert!(c.approx_eq(&TorusPoint::new(vec![expect, expect])));
    }

    #[test]
    fn root_has_no_centre() {
        assert_eq!(center(ScaleSequence::Theta, &Address::root(2)), Err(Error::EmptyAddress));
        assert_eq!(shifted_center(NU, &Address::root(2)), Err(Error::EmptyAddress));
    }

    #[test]
    fn shifted_centre_identity_and_value() {
        let a = addr("-+");
        assert_eq!(shifted_center(NU, &a).unwrap(), center(ScaleSequence::phi(NU), &a).unwrap());

        let a = addr("--,++");
        let expect = 0.25 + 0.25 * 2f64.powf(-1.75);
        let direct = shifted_center(NU, &a).unwrap();
        assert!(direct.approx_eq(&TorusPoint::new(vec![expect, expect])));

        for a in Address::all(2, 3) {
            let parent = a.parent().unwrap();
            let phi = ScaleSequence::phi(NU);
            let via_identity: Vec<f64> = (0..2)
                .map(|j| {
                    center(phi, &a).unwrap().coords()[j] - center(phi, &parent).unwrap().coords()[j]
                        + center(ScaleSequence::Theta, &parent).unwrap().coords()[j]
                })
                .collect();
            assert!(shifted_center(NU, &a).unwrap().approx_eq(&TorusPoint::new(via_identity)));
        }
    }

    #[test]
    fn decode_examples_and_tie_break() {
        assert_eq!(decode_address(&TorusPoint::new(vec![0.1, 0.1]), 1), addr("--"));
        assert_eq!(decode_address(&TorusPoint::new(vec![0.1, 0.9]), 1), addr("-+"));
        assert_eq!(decode_address(&TorusPoint::new(vec![0.5, 0.25]), 2), addr("+-,-+"));
        for n in 1..=4 {
            for a in Address::all(2, n) {
                let c = center(ScaleSequence::Theta, &a).unwrap();
                assert_eq!(decode_address(&c, n), a);
            }
        }
    }

    #[test]
    fn decode_is_consistent_across_depths() {
        let x = TorusPoint::new(vec![0.3141, 0.8123, 0.5]);
        let deep = decode_address(&x, 9);
        for n in 0..9 {
            assert_eq!(decode_address(&x, n), deep.truncate(n));
        }
    }

    #[test]
    fn generation_set_membership() {
        for a in Address::all(2, 3) {
            let c = center(ScaleSequence::phi(NU), &a).unwrap();
            assert!(in_generation_set(&c, NU, 3));
            assert_eq!(cantor_address(&c, NU, 3), Some(a));
        }
        for nu in [0.1, 0.5, 0.75, 0.99] {
            assert!(!in_generation_set(&TorusPoint::splat(2, 0.5), nu, 1));
        }
    }

    #[test]
    fn dimension_and_margin() {
        assert!((box_dimension(0.75, 2, 4) - 8.0 / 7.0).abs() < 1e-12);
        assert!((box_dimension(1.0, 3, 5) - 1.5).abs() < 1e-12);
        assert!((box_dimension(1e-9, 3, 2) - 3.0).abs() < 1e-8);
        assert_eq!(theta_margin(1.0), 0.125);
        assert!((theta_margin(0.75) - 0.085_224_103_813).abs() < 1e-11);
    }

    #[test]
    fn address_strings() {
        let a = addr("+-,-+");
        assert_eq!(a.depth(), 2);
        assert_eq!(a.to_string(), "+-,-+");
        assert!(Address::parse("").is_err());
        assert!(Address::parse("+-,+").is_err());
        assert!(Address::parse("+x").is_err());
        assert!(Address::parse("+-,,-+").is_err());
    }

    #[test]
    fn sign_vector_validation() {
        assert!(SignVector::new(vec![1, -1]).is_ok());
        assert_eq!(SignVector::new(vec![1, 0]), Err(Error::InvalidSign(0)));
        let s = SignVector::new(vec![1, 1, 1]).unwrap();
        assert!(Address::root(2).child(s).is_err());
    }

    #[test]
    fn torus_wrapping() {
        assert_eq!(wrap(1.25), 0.25);
        assert_eq!(wrap(-0.25), 0.75);
        assert_eq!(wrap(1.0), 0.0);
        assert_eq!(min_image(0.75), -0.25);
        let a = TorusPoint::new(vec![0.95, 0.5]);
        let b = TorusPoint::new(vec![0.05, 0.5]);
        assert!((a.distance_inf(&b) - 0.1).abs() < 1e-15);
    }
}
