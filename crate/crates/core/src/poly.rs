//! Complex multivariate polynomials and parametric polynomial systems.
//!
//! [`MPoly`] keeps its terms in a map keyed by exponent tuples under
//! graded-lex order. [`PolySystem`] splits a shared variable space into
//! unknowns followed by parameters and carries a compiled sparse form for
//! fast evaluation and differentiation.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::{Add, Mul, Neg, Sub};

#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::linalg::CMatrix;
use crate::C64;

/// Coefficients whose modulus falls below this are dropped.
pub const PRUNE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("expression is not homogeneous in the coefficient variables")]
    NonHomogeneous,
    #[error("expression has no terms")]
    Empty,
    #[error("root finding did not converge")]
    RootsNotConverged,
}

/// An exponent tuple. Ordered graded-lex: lower total degree first, and
/// within a degree the lexicographically larger tuple first (so `x0^d`
/// leads its degree).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All exponent tuples of `num_vars` variables with total degree `d`, in
/// graded-lex order.
pub fn monomials_of_degree(num_vars: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(left: usize, d: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if left == 1 {
            prefix.push(d);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=d).rev() {
            prefix.push(e);
            rec(left - 1, d - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if num_vars == 0 {
        if d == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(num_vars, d, &mut Vec::with_capacity(num_vars), &mut out);
    out
}

/// d! / prod(alpha_i!) in exact integer arithmetic.
pub fn multinomial(exponents: &[u32]) -> u128 {
    let mut acc: u128 = 1;
    let mut n: u128 = 0;
    for &e in exponents {
        for k in 1..=e as u128 {
            n += 1;
            // each intermediate equals prev * C(s + k, k), so the division is exact
            acc = acc * n / k;
        }
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct MPoly {
    num_vars: usize,
    terms: BTreeMap<Monomial, C64>,
}

impl MPoly {
    pub fn zero(num_vars: usize) -> Self {
        MPoly { num_vars, terms: BTreeMap::new() }
    }

    pub fn constant(num_vars: usize, c: C64) -> Self {
        let mut p = Self::zero(num_vars);
        p.add_term(vec![0; num_vars], c);
        p
    }

    /// The coordinate function x_i.
    pub fn var(num_vars: usize, i: usize) -> Self {
        let mut e = vec![0; num_vars];
        e[i] = 1;
        let mut p = Self::zero(num_vars);
        p.add_term(e, C64::new(1.0, 0.0));
        p
    }

    pub fn from_terms<I>(num_vars: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (Vec<u32>, C64)>,
    {
        let mut p = Self::zero(num_vars);
        for (e, c) in terms {
            if e.len() != num_vars {
                return Err(PolyError::DimensionMismatch { expected: num_vars, got: e.len() });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], C64)> {
        self.terms.iter().map(|(m, c)| (m.exponents(), *c))
    }

    pub fn coefficient(&self, exponents: &[u32]) -> C64 {
        self.terms
            .get(&Monomial(exponents.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    fn add_term(&mut self, exponents: Vec<u32>, c: C64) {
        let key = Monomial(exponents);
        let entry = self.terms.entry(key.clone()).or_default();
        *entry += c;
        if entry.norm() < PRUNE_TOL {
            self.terms.remove(&key);
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = Self::zero(self.num_vars);
        for (m, c) in &self.terms {
            out.add_term(m.0.clone(), c * s);
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(self.num_vars, C64::new(1.0, 0.0));
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn evaluate(&self, z: &[C64]) -> C64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                m.0.iter()
                    .zip(z)
                    .fold(*c, |acc, (&e, x)| if e == 0 { acc } else { acc * x.powu(e) })
            })
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.num_vars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e > 0 {
                let mut ex = m.0.clone();
                ex[i] -= 1;
                out.add_term(ex, c * e as f64);
            }
        }
        out
    }

    /// Re-indexes variables into a space of `num_vars` variables; variable
    /// `i` of `self` becomes variable `map[i]`.
    pub fn embed(&self, num_vars: usize, map: &[usize]) -> Self {
        let mut out = Self::zero(num_vars);
        for (m, c) in &self.terms {
            let mut ex = vec![0; num_vars];
            for (i, &e) in m.0.iter().enumerate() {
                ex[map[i]] += e;
            }
            out.add_term(ex, *c);
        }
        out
    }
}

impl Add for &MPoly {
    type Output = MPoly;
    fn add(self, rhs: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.0.clone(), *c);
        }
        out
    }
}

impl Sub for &MPoly {
    type Output = MPoly;
    fn sub(self, rhs: &MPoly) -> MPoly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.0.clone(), -c);
        }
        out
    }
}

impl Neg for &MPoly {
    type Output = MPoly;
    fn neg(self) -> MPoly {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &MPoly {
    type Output = MPoly;
    fn mul(self, rhs: &MPoly) -> MPoly {
        let mut out = MPoly::zero(self.num_vars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let ex = ma.0.iter().zip(&mb.0).map(|(a, b)| a + b).collect();
                out.add_term(ex, ca * cb);
            }
        }
        out
    }
}

/// `scale * (sum_h coeffs[h] x_h)^d`, expanded with exact multinomial
/// coefficients.
pub fn power_of_linear_form(coeffs: &[C64], d: u32, scale: C64) -> MPoly {
    let n = coeffs.len();
    let mut p = MPoly::zero(n);
    for ex in monomials_of_degree(n, d) {
        let mut c = scale * multinomial(&ex) as f64;
        for (h, &e) in ex.iter().enumerate() {
            if e > 0 {
                c *= coeffs[h].powu(e);
            }
        }
        p.add_term(ex, c);
    }
    p
}

/// Splits `expr`, a polynomial over `[unknowns | params | x-variables]`,
/// along the x-variables: one equation per degree-d monomial in x, holding
/// that monomial's coefficient as a polynomial in unknowns and parameters.
pub fn extract_coefficient_system(
    expr: &MPoly,
    num_unknowns: usize,
    num_params: usize,
) -> Result<PolySystem, PolyError> {
    let inner = num_unknowns + num_params;
    if expr.num_vars() < inner {
        return Err(PolyError::DimensionMismatch { expected: inner, got: expr.num_vars() });
    }
    let num_x = expr.num_vars() - inner;
    let mut degree = None;
    for (ex, _) in expr.terms() {
        let dx: u32 = ex[inner..].iter().sum();
        match degree {
            None => degree = Some(dx),
            Some(d) if d != dx => return Err(PolyError::NonHomogeneous),
            _ => {}
        }
    }
    let d = degree.ok_or(PolyError::Empty)?;

    let basis = monomials_of_degree(num_x, d);
    let index: BTreeMap<Monomial, usize> = basis
        .iter()
        .enumerate()
        .map(|(i, e)| (Monomial(e.clone()), i))
        .collect();
    let mut polys = vec![MPoly::zero(inner); basis.len()];
    for (ex, c) in expr.terms() {
        let row = index[&Monomial(ex[inner..].to_vec())];
        polys[row].add_term(ex[..inner].to_vec(), c);
    }
    PolySystem::new(polys, num_unknowns, num_params)
}

#[derive(Debug, Clone)]
struct Term {
    coef: C64,
    factors: Vec<(u32, u32)>,
}

/// Ordered list of polynomials over `num_unknowns` unknowns followed by
/// `num_params` parameters.
#[derive(Debug, Clone)]
pub struct PolySystem {
    polys: Vec<MPoly>,
    num_unknowns: usize,
    num_params: usize,
    compiled: Vec<Vec<Term>>,
    max_exp: Vec<u32>,
}

/// Values of a system together with the per-equation sum of term moduli,
/// which is the scale used for relative residuals.
pub(crate) struct Evaluation {
    pub values: Vec<C64>,
    pub scales: Vec<f64>,
}

impl Evaluation {
    /// max_i |f_i| / (1 + sum of |terms of f_i|).
    pub fn relative_residual(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.scales)
            .map(|(v, s)| v.norm() / (1.0 + s))
            .fold(0.0, f64::max)
    }
}

impl PolySystem {
    pub fn new(polys: Vec<MPoly>, num_unknowns: usize, num_params: usize) -> Result<Self, PolyError> {
        let nv = num_unknowns + num_params;
        for p in &polys {
            if p.num_vars() != nv {
                return Err(PolyError::DimensionMismatch { expected: nv, got: p.num_vars() });
            }
        }
        let mut max_exp = vec![0u32; nv];
        let compiled = polys
            .iter()
            .map(|p| {
                p.terms()
                    .map(|(ex, c)| {
                        let factors = ex
                            .iter()
                            .enumerate()
                            .filter(|(_, &e)| e > 0)
                            .map(|(v, &e)| {
                                max_exp[v] = max_exp[v].max(e);
                                (v as u32, e)
                            })
                            .collect();
                        Term { coef: c, factors }
                    })
                    .collect()
            })
            .collect();
        Ok(PolySystem { polys, num_unknowns, num_params, compiled, max_exp })
    }

    pub fn polys(&self) -> &[MPoly] {
        &self.polys
    }

    pub fn num_polys(&self) -> usize {
        self.polys.len()
    }

    pub fn num_unknowns(&self) -> usize {
        self.num_unknowns
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn is_square(&self) -> bool {
        self.polys.len() == self.num_unknowns
    }

    fn check(&self, point: &[C64], params: &[C64]) -> Result<(), PolyError> {
        if point.len() != self.num_unknowns {
            return Err(PolyError::DimensionMismatch { expected: self.num_unknowns, got: point.len() });
        }
        if params.len() != self.num_params {
            return Err(PolyError::DimensionMismatch { expected: self.num_params, got: params.len() });
        }
        Ok(())
    }

    /// Power table: `pw[off[v] + e] = z_v^e`.
    fn powers(&self, point: &[C64], params: &[C64]) -> (Vec<usize>, Vec<C64>) {
        let mut off = Vec::with_capacity(self.max_exp.len());
        let mut pw = Vec::new();
        for (v, &m) in self.max_exp.iter().enumerate() {
            let z = if v < self.num_unknowns { point[v] } else { params[v - self.num_unknowns] };
            off.push(pw.len());
            let mut acc = C64::new(1.0, 0.0);
            pw.push(acc);
            for _ in 0..m {
                acc *= z;
                pw.push(acc);
            }
        }
        (off, pw)
    }

    pub(crate) fn evaluate_scaled(&self, point: &[C64], params: &[C64]) -> Result<Evaluation, PolyError> {
        self.check(point, params)?;
        let (off, pw) = self.powers(point, params);
        let mut values = Vec::with_capacity(self.compiled.len());
        let mut scales = Vec::with_capacity(self.compiled.len());
        for terms in &self.compiled {
            let mut v = C64::new(0.0, 0.0);
            let mut s = 0.0;
            for t in terms {
                let mut tv = t.coef;
                for &(var, e) in &t.factors {
                    tv *= pw[off[var as usize] + e as usize];
                }
                s += tv.norm();
                v += tv;
            }
            values.push(v);
            scales.push(s);
        }
        Ok(Evaluation { values, scales })
    }

    /// Residual vector at `(point, params)`.
    pub fn evaluate(&self, point: &[C64], params: &[C64]) -> Result<Vec<C64>, PolyError> {
        Ok(self.evaluate_scaled(point, params)?.values)
    }

    /// Relative residual: max over equations of |f_i| / (1 + sum |terms|).
    pub fn relative_residual(&self, point: &[C64], params: &[C64]) -> Result<f64, PolyError> {
        Ok(self.evaluate_scaled(point, params)?.relative_residual())
    }

    /// Partial derivatives with respect to the unknowns only.
    pub fn jacobian(&self, point: &[C64], params: &[C64]) -> Result<CMatrix, PolyError> {
        self.check(point, params)?;
        let (off, pw) = self.powers(point, params);
        let mut jac = CMatrix::zeros(self.polys.len(), self.num_unknowns);
        for (i, terms) in self.compiled.iter().enumerate() {
            for t in terms {
                for (j, &(var, e)) in t.factors.iter().enumerate() {
                    if var as usize >= self.num_unknowns {
                        continue;
                    }
                    let mut dv = t.coef * e as f64 * pw[off[var as usize] + e as usize - 1];
                    for (k, &(ov, oe)) in t.factors.iter().enumerate() {
                        if k != j {
                            dv *= pw[off[ov as usize] + oe as usize];
                        }
                    }
                    jac[(i, var as usize)] += dv;
                }
            }
        }
        Ok(jac)
    }

    /// Directional derivative along the parameters: sum_j dF/dp_j * dparams_j.
    pub fn param_derivative(
        &self,
        point: &[C64],
        params: &[C64],
        dparams: &[C64],
    ) -> Result<Vec<C64>, PolyError> {
        self.check(point, params)?;
        if dparams.len() != self.num_params {
            return Err(PolyError::DimensionMismatch { expected: self.num_params, got: dparams.len() });
        }
        let (off, pw) = self.powers(point, params);
        let mut out = vec![C64::new(0.0, 0.0); self.polys.len()];
        for (i, terms) in self.compiled.iter().enumerate() {
            for t in terms {
                for (j, &(var, e)) in t.factors.iter().enumerate() {
                    let var = var as usize;
                    if var < self.num_unknowns {
                        continue;
                    }
                    let mut dv = t.coef * e as f64 * pw[off[var] + e as usize - 1];
                    for (k, &(ov, oe)) in t.factors.iter().enumerate() {
                        if k != j {
                            dv *= pw[off[ov as usize] + oe as usize];
                        }
                    }
                    out[i] += dv * dparams[var - self.num_unknowns];
                }
            }
        }
        Ok(out)
    }
}

/// All complex roots of `sum_k coeffs[k] y^k` by Aberth–Ehrlich iteration.
/// Leading zero coefficients are trimmed.
pub fn univariate_roots(coeffs: &[C64]) -> Result<Vec<C64>, PolyError> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|z| z.norm() == 0.0) {
        c.pop();
    }
    if c.len() <= 1 {
        return Ok(Vec::new());
    }
    let deg = c.len() - 1;
    let lead = c[deg];
    let monic: Vec<C64> = c.iter().map(|z| z / lead).collect();
    let radius = 1.0 + monic[..deg].iter().map(|z| z.norm()).fold(0.0, f64::max);

    let eval = |z: C64| {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for &a in monic.iter().rev() {
            dp = dp * z + p;
            p = p * z + a;
        }
        (p, dp)
    };

    let mut roots: Vec<C64> = (0..deg)
        .map(|k| {
            let th = core::f64::consts::TAU * k as f64 / deg as f64 + 0.4;
            C64::from_polar(0.5 * radius, th)
        })
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = eval(roots[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut repulse = C64::new(0.0, 0.0);
            for (j, rj) in roots.iter().enumerate() {
                if j != i {
                    repulse += (roots[i] - rj).inv();
                }
            }
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulse);
            roots[i] -= step;
            moved = moved.max(step.norm() / (1.0 + roots[i].norm()));
        }
        if moved < 1e-15 {
            return Ok(roots);
        }
    }
    let ok = roots.iter().all(|&z| {
        let (p, _) = eval(z);
        p.norm() < 1e-8 * (1.0 + z.norm().powi(deg as i32))
    });
    if ok {
        Ok(roots)
    } else {
        Err(PolyError::RootsNotConverged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sys(polys: Vec<MPoly>, u: usize, p: usize) -> PolySystem {
        PolySystem::new(polys, u, p).unwrap()
    }

    #[test]
    fn graded_lex_order_puts_x0_power_first() {
        let m = monomials_of_degree(3, 2);
        assert_eq!(m[0], vec![2, 0, 0]);
        assert_eq!(m[1], vec![1, 1, 0]);
        assert_eq!(m.last().unwrap(), &vec![0, 0, 2]);
        assert_eq!(m.len(), 6);
        let mut sorted: Vec<Monomial> = m.iter().cloned().map(Monomial::new).collect();
        sorted.sort();
        assert_eq!(sorted.into_iter().map(|x| x.0).collect::<Vec<_>>(), m);
    }

    #[test]
    fn multinomials() {
        assert_eq!(multinomial(&[1, 1, 1]), 6);
        assert_eq!(multinomial(&[3, 3, 2]), 560);
        assert_eq!(multinomial(&[7, 0, 0]), 1);
        assert_eq!(multinomial(&[4, 4]), 70);
    }

    #[test]
    fn evaluate_sqrt_two() {
        let x = MPoly::var(1, 0);
        let p = &x.pow(2) - &MPoly::constant(1, c(2.0, 0.0));
        let s = sys(vec![p], 1, 0);
        let r = s.evaluate(&[c(2f64.sqrt(), 0.0)], &[]).unwrap();
        assert!(r[0].norm() < 1e-12);
    }

    #[test]
    fn evaluate_quadric_at_conjugate_point() {
        let v = |i| MPoly::var(4, i);
        let q1 = &(&(&v(0).pow(2) + &v(1).pow(2)) - &v(2).pow(2)) - &v(3).pow(2);
        let s = sys(vec![q1], 4, 0);
        let r = s.evaluate(&[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)], &[]).unwrap();
        assert_eq!(r[0], c(0.0, 0.0));
    }

    #[test]
    fn evaluate_zero_factor() {
        let p = &MPoly::var(2, 0) * &MPoly::var(2, 1);
        let s = sys(vec![p], 2, 0);
        assert_eq!(s.evaluate(&[c(3.0, 0.0), c(0.0, 0.0)], &[]).unwrap()[0], c(0.0, 0.0));
    }

    #[test]
    fn evaluate_rejects_bad_lengths() {
        let s = sys(vec![MPoly::var(2, 0)], 1, 1);
        assert!(matches!(
            s.evaluate(&[c(1.0, 0.0)], &[]),
            Err(PolyError::DimensionMismatch { expected: 1, got: 0 })
        ));
        assert!(s.jacobian(&[], &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn jacobian_small_examples() {
        let x = MPoly::var(1, 0);
        let s = sys(vec![&x.pow(2) - &MPoly::constant(1, c(2.0, 0.0))], 1, 0);
        let j = s.jacobian(&[c(3.0, 0.0)], &[]).unwrap();
        assert_eq!(j[(0, 0)], c(6.0, 0.0));

        let x0 = MPoly::var(2, 0);
        let x1 = MPoly::var(2, 1);
        let s = sys(vec![&x0 * &x1, &x0 + &x1], 2, 0);
        let j = s.jacobian(&[c(1.0, 0.0), c(2.0, 0.0)], &[]).unwrap();
        assert_eq!(j[(0, 0)], c(2.0, 0.0));
        assert_eq!(j[(0, 1)], c(1.0, 0.0));
        assert_eq!(j[(1, 0)], c(1.0, 0.0));
        assert_eq!(j[(1, 1)], c(1.0, 0.0));
    }

    fn random_cubic_system(rng: &mut ChaCha8Rng, n: usize, np: usize) -> PolySystem {
        let nv = n + np;
        let polys = (0..n)
            .map(|_| {
                let mut p = MPoly::zero(nv);
                for d in 0..=3 {
                    for ex in monomials_of_degree(nv, d) {
                        if rng.random_bool(0.5) {
                            let t = MPoly::from_terms(
                                nv,
                                [(ex, c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))],
                            )
                            .unwrap();
                            p = &p + &t;
                        }
                    }
                }
                p
            })
            .collect();
        sys(polys, n, np)
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let s = random_cubic_system(&mut rng, 3, 1);
            let x: Vec<C64> = (0..3).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let p = [c(0.3, -0.2)];
            let jac = s.jacobian(&x, &p).unwrap();
            let h = 1e-6;
            for j in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fp = s.evaluate(&xp, &p).unwrap();
                let fm = s.evaluate(&xm, &p).unwrap();
                for i in 0..3 {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    let err = (fd - jac[(i, j)]).norm() / (1.0 + jac[(i, j)].norm());
                    assert!(err < 1e-5, "entry ({i},{j}) off by {err}");
                }
            }
            let dp = [c(0.7, 0.1)];
            let dir = s.param_derivative(&x, &p, &dp).unwrap();
            let pp = [p[0] + dp[0] * h];
            let pm = [p[0] - dp[0] * h];
            let fp = s.evaluate(&x, &pp).unwrap();
            let fm = s.evaluate(&x, &pm).unwrap();
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                assert!((fd - dir[i]).norm() < 1e-5 * (1.0 + dir[i].norm()));
            }
        }
    }

    #[test]
    fn binomial_square() {
        let p = power_of_linear_form(&[c(1.0, 0.0), c(2.0, 0.0)], 2, c(1.0, 0.0));
        assert_eq!(p.num_terms(), 3);
        assert_eq!(p.coefficient(&[2, 0]), c(1.0, 0.0));
        assert_eq!(p.coefficient(&[1, 1]), c(4.0, 0.0));
        assert_eq!(p.coefficient(&[0, 2]), c(4.0, 0.0));
    }

    #[test]
    fn single_variable_power() {
        let p = power_of_linear_form(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)], 7, c(5.0, 0.0));
        assert_eq!(p.num_terms(), 1);
        assert_eq!(p.coefficient(&[7, 0, 0]), c(5.0, 0.0));
    }

    #[test]
    fn trinomial_cube() {
        let one = c(1.0, 0.0);
        let p = power_of_linear_form(&[one, one, one], 3, one);
        assert_eq!(p.num_terms(), 10);
        assert_eq!(p.coefficient(&[1, 1, 1]), c(6.0, 0.0));
        assert_eq!(p.coefficient(&[2, 1, 0]), c(3.0, 0.0));
        assert_eq!(p.coefficient(&[0, 0, 3]), one);
    }

    /// (num_x - 1 + d choose d) equations from a generic form of degree d.
    fn generic_form_system(num_x: usize, d: u32) -> PolySystem {
        let basis = monomials_of_degree(num_x, d);
        let np = basis.len();
        let nv = np + num_x;
        let mut expr = MPoly::zero(nv);
        for (i, ex) in basis.iter().enumerate() {
            let mut full = vec![0; nv];
            full[i] = 1;
            full[np..].copy_from_slice(ex);
            expr = &expr + &MPoly::from_terms(nv, [(full, c(1.0, 0.0))]).unwrap();
        }
        extract_coefficient_system(&expr, 0, np).unwrap()
    }

    #[test]
    fn coefficient_system_counts() {
        assert_eq!(generic_form_system(3, 7).num_polys(), 36);
        assert_eq!(generic_form_system(3, 8).num_polys(), 45);
        assert_eq!(generic_form_system(2, 1).num_polys(), 2);
    }

    #[test]
    fn coefficient_system_rejects_inhomogeneous() {
        // u * x0^2 + x1 over [u | x0, x1]
        let expr = MPoly::from_terms(3, [(vec![1, 2, 0], c(1.0, 0.0)), (vec![0, 0, 1], c(1.0, 0.0))]).unwrap();
        assert_eq!(extract_coefficient_system(&expr, 1, 0).unwrap_err(), PolyError::NonHomogeneous);
        assert_eq!(extract_coefficient_system(&MPoly::zero(3), 1, 0).unwrap_err(), PolyError::Empty);
    }

    #[test]
    fn roots_of_cubic() {
        // (y - 1)(y + 2)(y - i) = y^3 + (1 - i) y^2 + (-2 - i) y + 2i
        let r = univariate_roots(&[c(0.0, 2.0), c(-2.0, -1.0), c(1.0, -1.0), c(1.0, 0.0)]).unwrap();
        for want in [c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0)] {
            assert!(r.iter().any(|z| (z - want).norm() < 1e-12), "missing {want}");
        }
    }

    fn arb_c() -> impl Strategy<Value = C64> {
        (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b))
    }

    proptest! {
        #[test]
        fn power_form_evaluates_to_power(
            coeffs in proptest::collection::vec(arb_c(), 3),
            point in proptest::collection::vec(arb_c(), 3),
            d in 1u32..9,
            s in arb_c(),
        ) {
            let p = power_of_linear_form(&coeffs, d, s);
            let lin: C64 = coeffs.iter().zip(&point).map(|(a, b)| a * b).sum();
            let want = s * lin.powu(d);
            let got = p.evaluate(&point);
            let scale: f64 = s.norm() * coeffs.iter().zip(&point).map(|(a, b)| (a * b).norm()).sum::<f64>().powi(d as i32);
            prop_assert!((got - want).norm() <= 1e-10 * (scale + want.norm()).max(1e-300));
        }

        #[test]
        fn extraction_is_linear(
            a in proptest::collection::vec(arb_c(), 3),
            b in proptest::collection::vec(arb_c(), 3),
            d in 1u32..5,
        ) {
            // Forms over [u | x0, x1, x2]: u * (a.x)^d and u * (b.x)^d.
            let lift = |p: &MPoly| &MPoly::var(4, 0) * &p.embed(4, &[1, 2, 3]);
            let pa = lift(&power_of_linear_form(&a, d, C64::new(1.0, 0.0)));
            let pb = lift(&power_of_linear_form(&b, d, C64::new(1.0, 0.0)));
            let sum = &pa + &pb;
            let (sa, sb, ss) = (
                extract_coefficient_system(&pa, 1, 0),
                extract_coefficient_system(&pb, 1, 0),
                extract_coefficient_system(&sum, 1, 0),
            );
            prop_assume!(sa.is_ok() && sb.is_ok() && ss.is_ok());
            let (sa, sb, ss) = (sa.unwrap(), sb.unwrap(), ss.unwrap());
            let u = [C64::new(0.7, -0.3)];
            let (fa, fb, fs) = (sa.evaluate(&u, &[]).unwrap(), sb.evaluate(&u, &[]).unwrap(), ss.evaluate(&u, &[]).unwrap());
            for i in 0..fs.len() {
                prop_assert!((fa[i] + fb[i] - fs[i]).norm() < 1e-12 * (1.0 + fs[i].norm()));
            }
        }
    }
}
