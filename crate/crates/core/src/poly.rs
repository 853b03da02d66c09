//! Polynomial algebra for the closed-loop design: characteristic polynomials
//! built from real pole multisets, binomial observer gains, the numerator
//! family that maps observer error into tracking error, and partial-fraction
//! residues with their time-domain decay polynomials.
//!
//! Coefficients are always stored in ascending-degree order.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative separation below which two configured poles count as coincident.
pub const POLE_SEPARATION_TOL: f64 = 1e-9;

/// Real polynomial, ascending-degree coefficients, no trailing zeros.
///
/// The zero polynomial is stored as `[0.0]` and has degree 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    /// `s^k`
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Poly { coeffs: c }
    }

    /// `s + a`
    pub fn linear(a: f64) -> Self {
        Poly::new(vec![a, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == 1.0
    }

    /// Coefficient of `s^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, factor: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * factor).collect())
    }

    pub fn pow(&self, exp: u32) -> Poly {
        (0..exp).fold(Poly::constant(1.0), |acc, _| &acc * self)
    }

    /// Euclidean division `self = q * divisor + r` with `deg r < deg divisor`.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        assert!(!divisor.is_zero(), "division by the zero polynomial");
        let dd = divisor.degree();
        if self.degree() < dd {
            return (Poly::zero(), self.clone());
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (i, &d) in divisor.coeffs.iter().enumerate() {
                rem[k + i] -= q * d;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd.max(1));
        (Poly::new(quot), Poly::new(rem))
    }

    /// Coefficients of `p(w + a)` in powers of `w`, i.e. the Taylor
    /// coefficients `p^(k)(a) / k!` (repeated synthetic division).
    pub fn taylor_shift(&self, a: f64) -> Poly {
        let mut c = self.coeffs.clone();
        let n = c.len();
        for i in 0..n {
            for k in (i..n - 1).rev() {
                c[k] += a * c[k + 1];
            }
        }
        Poly::new(c)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 && !(k == 0 && first) {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 if a == 1.0 => write!(f, "s")?,
                1 => write!(f, "{a}s")?,
                _ if a == 1.0 => write!(f, "s^{k}")?,
                _ => write!(f, "{a}s^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

/// One real closed-loop pole `-rate` with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub rate: f64,
    pub multiplicity: u32,
}

/// Multiset of real Hurwitz poles `(s + s_j)^{d_j}`.
///
/// Only real poles are supported: the decay polynomials and the closed-loop
/// bound are formulated for real `s_j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Pole>", into = "Vec<Pole>")]
pub struct PoleSpec {
    poles: Vec<Pole>,
}

impl PoleSpec {
    pub fn new(poles: Vec<Pole>) -> Result<Self> {
        if poles.is_empty() {
            return Err(Error::InvalidPoles("at least one pole is required".into()));
        }
        for p in &poles {
            if !(p.rate.is_finite() && p.rate > 0.0) {
                return Err(Error::InvalidPoles(format!(
                    "pole rate {} is not a positive finite number",
                    p.rate
                )));
            }
            if p.multiplicity == 0 {
                return Err(Error::InvalidPoles(format!(
                    "pole at -{} has zero multiplicity",
                    p.rate
                )));
            }
        }
        let max = poles.iter().map(|p| p.rate).fold(0.0, f64::max);
        for (i, a) in poles.iter().enumerate() {
            for b in &poles[i + 1..] {
                if (a.rate - b.rate).abs() < POLE_SEPARATION_TOL * max {
                    return Err(Error::InvalidPoles(format!(
                        "poles at -{} and -{} coincide; merge them into one entry with a higher multiplicity",
                        a.rate, b.rate
                    )));
                }
            }
        }
        Ok(PoleSpec { poles })
    }

    /// Convenience constructor from `(rate, multiplicity)` pairs.
    pub fn from_pairs(pairs: &[(f64, u32)]) -> Result<Self> {
        PoleSpec::new(
            pairs
                .iter()
                .map(|&(rate, multiplicity)| Pole { rate, multiplicity })
                .collect(),
        )
    }

    /// `(s + rate)^order`, the usual bandwidth parameterisation.
    pub fn repeated(rate: f64, order: u32) -> Result<Self> {
        PoleSpec::from_pairs(&[(rate, order)])
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn degree(&self) -> usize {
        self.poles.iter().map(|p| p.multiplicity as usize).sum()
    }

    pub fn slowest_rate(&self) -> f64 {
        self.poles
            .iter()
            .map(|p| p.rate)
            .fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<Pole>> for PoleSpec {
    type Error = Error;
    fn try_from(v: Vec<Pole>) -> Result<Self> {
        PoleSpec::new(v)
    }
}

impl From<PoleSpec> for Vec<Pole> {
    fn from(p: PoleSpec) -> Self {
        p.poles
    }
}

/// Monic characteristic polynomial together with its state-feedback row.
#[derive(Clone, Debug, PartialEq)]
pub struct CharPoly {
    pub poly: Poly,
    /// `k_1..k_n` with `Δ(s) = s^n + k_n s^{n-1} + ... + k_1`.
    pub gains: Vec<f64>,
}

/// Expands `Π (s + s_j)^{d_j}` and reads off the feedback gains.
pub fn char_poly(spec: &PoleSpec) -> CharPoly {
    let poly = spec.poles.iter().fold(Poly::constant(1.0), |acc, p| {
        &acc * &Poly::linear(p.rate).pow(p.multiplicity)
    });
    let n = poly.degree();
    let gains = poly.coeffs()[..n].to_vec();
    CharPoly { poly, gains }
}

fn binomial_u128(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Binomial coefficient as `f64` (exact for the observer orders in use).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    binomial_u128(n, k) as f64
}

/// `C(order, i) * ω^i` computed in integer arithmetic, if `ω` is integral and
/// the product fits; the single rounding then happens on the final cast.
fn exact_gain(order: u32, i: u32, omega: f64) -> Option<f64> {
    if omega.fract() != 0.0 || omega > 9.0e15 {
        return None;
    }
    let w = omega as u128;
    let mut p = binomial_u128(order, i);
    for _ in 0..i {
        p = p.checked_mul(w)?;
    }
    Some(p as f64)
}

/// Observer gains `β_1..β_order` from `(s + ω_o)^order`.
pub fn leso_gains(order: usize, omega_o: f64) -> Result<Vec<f64>> {
    if order < 2 {
        return Err(Error::config(
            "order",
            format!("observer order must be at least 2, got {order}"),
        ));
    }
    if !(omega_o.is_finite() && omega_o > 0.0) {
        return Err(Error::config(
            "omega_o",
            format!("observer bandwidth must be positive, got {omega_o}"),
        ));
    }
    let order = order as u32;
    Ok((1..=order)
        .map(|i| {
            exact_gain(order, i, omega_o)
                .unwrap_or_else(|| binomial(order, i) * omega_o.powi(i as i32))
        })
        .collect())
}

/// The numerator family `g_0..g_n`.
///
/// `g_n` shapes how the measurable observer error `ẽ_1` reaches the tracking
/// error; `g_i` (`i < n`) weights the initial estimation error of state
/// `n - i`. With `k_{n+1} = β_0 = 1`:
///
/// * `g_n(s) = Σ_{i=0}^{n} (Σ_{j=0}^{i} β_j k_{n+1-i+j}) s^{n-i}`
/// * `g_i(s) = Σ_{j=0}^{i} k_{n+1-j} s^{i-j}`, monic of degree `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct GFamily {
    polys: Vec<Poly>,
}

impl GFamily {
    pub fn n(&self) -> usize {
        self.polys.len() - 1
    }

    pub fn g(&self, i: usize) -> &Poly {
        &self.polys[i]
    }

    pub fn g_n(&self) -> &Poly {
        self.polys.last().unwrap()
    }
}

pub fn build_g_family(gains: &[f64], beta: &[f64], n: usize) -> Result<GFamily> {
    if n == 0 || gains.len() != n {
        return Err(Error::Dimension(format!(
            "expected {n} feedback gains, got {}",
            gains.len()
        )));
    }
    if beta.len() < n {
        return Err(Error::Dimension(format!(
            "observer of order {} is too small for plant order {n}",
            beta.len()
        )));
    }
    // 1-based views with k_{n+1} = β_0 = 1.
    let k = |idx: usize| if idx == n + 1 { 1.0 } else { gains[idx - 1] };
    let b = |idx: usize| if idx == 0 { 1.0 } else { beta[idx - 1] };

    let mut polys = Vec::with_capacity(n + 1);
    for i in 0..n {
        let mut c = vec![0.0; i + 1];
        for j in 0..=i {
            c[i - j] = k(n + 1 - j);
        }
        polys.push(Poly::new(c));
    }
    let mut c = vec![0.0; n + 1];
    for i in 0..=n {
        c[n - i] = (0..=i).map(|j| b(j) * k(n + 1 - i + j)).sum();
    }
    polys.push(Poly::new(c));
    Ok(GFamily { polys })
}

/// Partial-fraction coefficients of a strictly proper `g(s)/Δ(s)`.
///
/// `per_pole[j][k-1]` multiplies `1 / (s + s_j)^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Residues {
    pub per_pole: Vec<Vec<f64>>,
}

impl Residues {
    /// Coefficient `c_{j,k}` of `1/(s+s_j)^k` (1-based `k`).
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.per_pole[j][k - 1]
    }

    /// Evaluates the expansion at a point that is not a pole.
    pub fn reconstruct(&self, spec: &PoleSpec, s: f64) -> f64 {
        spec.poles
            .iter()
            .zip(&self.per_pole)
            .map(|(p, cs)| {
                let w = s + p.rate;
                cs.iter()
                    .enumerate()
                    .map(|(k, c)| c / w.powi(k as i32 + 1))
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.per_pole.iter().flatten().all(|&c| c == 0.0)
    }
}

/// Residues of `numerator / Δ` about each pole.
///
/// With `h_j(s) = (s+s_j)^{d_j} g(s)/Δ(s) = g(s)/Q_j(s)`, the coefficient of
/// `1/(s+s_j)^{d_j-k}` is `h_j^{(k)}(-s_j)/k!`. Both `g` and `Q_j` are written
/// in `w = s + s_j` and the Taylor coefficients of the quotient follow from
/// power-series division, so no sampling is involved.
pub fn residues(numerator: &Poly, spec: &PoleSpec) -> Result<Residues> {
    let den_degree = spec.degree();
    if !numerator.is_zero() && numerator.degree() >= den_degree {
        return Err(Error::ImproperRational {
            numerator: numerator.degree(),
            denominator: den_degree,
        });
    }
    let per_pole = spec
        .poles
        .iter()
        .enumerate()
        .map(|(j, pole)| {
            let d = pole.multiplicity as usize;
            // Q_j in powers of w, built from the pole differences so that
            // nearby poles do not cancel
            let q_shift = spec
                .poles
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != j)
                .fold(Poly::constant(1.0), |acc, (_, p)| {
                    &acc * &Poly::linear(p.rate - pole.rate).pow(p.multiplicity)
                });
            let g_shift = numerator.taylor_shift(-pole.rate);
            let series = series_divide(g_shift.coeffs(), q_shift.coeffs(), d);
            // series[k] multiplies 1/(s+s_j)^{d-k}
            let mut cs = vec![0.0; d];
            for (k, v) in series.into_iter().enumerate() {
                cs[d - 1 - k] = v;
            }
            cs
        })
        .collect();
    Ok(Residues { per_pole })
}

/// First `terms` coefficients of the power series `num / den` (den[0] != 0).
fn series_divide(num: &[f64], den: &[f64], terms: usize) -> Vec<f64> {
    let mut out = vec![0.0; terms];
    for k in 0..terms {
        let mut acc = num.get(k).copied().unwrap_or(0.0);
        for i in 1..=k.min(den.len() - 1) {
            acc -= den[i] * out[k - i];
        }
        out[k] = acc / den[0];
    }
    out
}

/// Residues of `g_{n-i}(s)/Δ(s)` for `i = 1..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidueTable {
    rows: Vec<Residues>,
}

impl ResidueTable {
    pub fn build(family: &GFamily, spec: &PoleSpec) -> Result<Self> {
        let n = family.n();
        if spec.degree() != n {
            return Err(Error::Dimension(format!(
                "pole spec has degree {}, numerator family is for order {n}",
                spec.degree()
            )));
        }
        let rows = (1..=n)
            .map(|i| residues(family.g(n - i), spec))
            .collect::<Result<_>>()?;
        Ok(ResidueTable { rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Residues of `g_{n-i}/Δ`, `1 <= i <= n`.
    pub fn row(&self, i: usize) -> &Residues {
        &self.rows[i - 1]
    }
}

/// Time-domain weights `p_j(τ)` so that
/// `L^{-1}[g/Δ](τ) = Σ_j e^{-s_j τ} p_j(τ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayPolys {
    pub per_pole: Vec<Poly>,
    rates: Vec<f64>,
}

impl DecayPolys {
    pub fn eval(&self, tau: f64) -> f64 {
        self.rates
            .iter()
            .zip(&self.per_pole)
            .map(|(r, p)| (-r * tau).exp() * p.eval(tau))
            .sum()
    }

    /// `Σ_j e^{-s_j τ} |p_j|(τ)` with absolute-valued coefficients.
    pub fn envelope(&self, tau: f64) -> f64 {
        self.rates
            .iter()
            .zip(&self.per_pole)
            .map(|(r, p)| {
                let abs = Poly::new(p.coeffs().iter().map(|c| c.abs()).collect());
                (-r * tau).exp() * abs.eval(tau)
            })
            .sum()
    }
}

/// `p_j(τ) = Σ_k c_{j,k} τ^{k-1} / (k-1)!`.
pub fn decay_polys(res: &Residues, spec: &PoleSpec) -> DecayPolys {
    let per_pole = res
        .per_pole
        .iter()
        .map(|cs| {
            let mut fact = 1.0;
            Poly::new(
                cs.iter()
                    .enumerate()
                    .map(|(k, c)| {
                        if k > 0 {
                            fact *= k as f64;
                        }
                        c / fact
                    })
                    .collect(),
            )
        })
        .collect();
    DecayPolys {
        per_pole,
        rates: spec.poles.iter().map(|p| p.rate).collect(),
    }
}
