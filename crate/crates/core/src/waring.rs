//! Waring decompositions of symmetric tensors as square polynomial systems.
//!
//! A degree-d form T in x0..xn is written as `sum_i λ_i ℓ_i^d` with every
//! linear form in the fixed chart `ℓ_i = x0 + sum_h l_h^i x_h`. Matching
//! coefficients monomial by monomial gives one equation per degree-d
//! monomial; in the perfect case `r(n+1) = C(n+d, d)` the system is square.
//!
//! Unknowns are ordered `(l^1, λ_1, l^2, λ_2, ...)`; parameters are the
//! coefficients of T in the graded-lex monomial basis, each stored as the
//! full coefficient of its monomial (multinomial factors included).
//!
//! Forms with a summand whose x0 coefficient vanishes lie outside the chart.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::homotopy::newton_refine;
use crate::linalg::{null_vector, solve, CMatrix};
use crate::poly::{
    extract_coefficient_system, monomials_of_degree, multinomial, power_of_linear_form, univariate_roots, MPoly,
    PolyError, PolySystem,
};
use crate::util::{binomial, random_disk};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaringError {
    #[error(transparent)]
    Inadmissible(#[from] Inadmissible),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("form is not generic: {0}")]
    NonGeneric(&'static str),
    #[error("a summand lies outside the chart x0 + sum l_h x_h")]
    OutOfChart,
    #[error("start point does not solve its own system (relative residual {0:e})")]
    BadStart(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Inadmissible {
    #[error("not a perfect case: r(n+1) = {unknowns} but C(n+d, d) = {equations}")]
    NotPerfect { unknowns: u64, equations: u64 },
    #[error("Alexander–Hirschowitz exception (d = {d}, n = {n})")]
    AlexanderHirschowitz { d: u32, n: usize },
    #[error("degree and rank must be positive")]
    Trivial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaringSpec {
    pub d: u32,
    pub n: usize,
    pub r: usize,
}

impl WaringSpec {
    pub fn new(d: u32, n: usize, r: usize) -> Self {
        WaringSpec { d, n, r }
    }

    /// C(n+d, d), the number of degree-d monomials in n+1 variables.
    pub fn num_equations(&self) -> usize {
        binomial(self.n as u64 + self.d as u64, self.d as u64) as usize
    }

    pub fn num_unknowns(&self) -> usize {
        self.r * (self.n + 1)
    }

    pub fn is_perfect(&self) -> bool {
        self.num_unknowns() == self.num_equations()
    }

    /// Perfect and not one of the classical defective cases: quadrics with
    /// n >= 2, quartics with n in {2, 3, 4}, cubics with n = 4.
    pub fn is_admissible(&self) -> Result<(), Inadmissible> {
        if self.d == 0 || self.r == 0 {
            return Err(Inadmissible::Trivial);
        }
        if !self.is_perfect() {
            return Err(Inadmissible::NotPerfect {
                unknowns: self.num_unknowns() as u64,
                equations: self.num_equations() as u64,
            });
        }
        let exception = match self.d {
            2 => self.n >= 2,
            4 => (2..=4).contains(&self.n),
            3 => self.n == 4,
            _ => false,
        };
        if exception {
            return Err(Inadmissible::AlexanderHirschowitz { d: self.d, n: self.n });
        }
        Ok(())
    }

    /// Degree-d monomials of x0..xn in graded-lex order; the parameter basis.
    pub fn monomials(&self) -> Vec<Vec<u32>> {
        monomials_of_degree(self.n + 1, self.d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summand {
    /// Chart coefficients l_1..l_n; the x0 coefficient is implicitly 1.
    pub l: Vec<C64>,
    pub lambda: C64,
}

impl Summand {
    pub fn conj(&self) -> Summand {
        Summand { l: self.l.iter().map(|z| z.conj()).collect(), lambda: self.lambda.conj() }
    }

    /// (1, l_1, ..., l_n)
    pub fn linear_form(&self) -> Vec<C64> {
        let mut v = Vec::with_capacity(self.l.len() + 1);
        v.push(C64::new(1.0, 0.0));
        v.extend_from_slice(&self.l);
        v
    }

    /// (l_1, ..., l_n, λ)
    pub fn coordinates(&self) -> Vec<C64> {
        let mut v = self.l.clone();
        v.push(self.lambda);
        v
    }
}

/// An unordered collection of r summands. Two decompositions are the same
/// when they agree up to a permutation of summands; see
/// [`crate::monodromy::canonical_distance`].
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub summands: Vec<Summand>,
}

impl Decomposition {
    pub fn new(summands: Vec<Summand>) -> Self {
        Decomposition { summands }
    }

    pub fn rank(&self) -> usize {
        self.summands.len()
    }

    pub fn n(&self) -> usize {
        self.summands.first().map_or(0, |s| s.l.len())
    }

    pub fn from_unknowns(spec: &WaringSpec, x: &[C64]) -> Result<Self, WaringError> {
        let stride = spec.n + 1;
        if x.len() != spec.r * stride {
            return Err(WaringError::Shape { expected: spec.r * stride, got: x.len() });
        }
        let summands = x
            .chunks(stride)
            .map(|c| Summand { l: c[..spec.n].to_vec(), lambda: c[spec.n] })
            .collect();
        Ok(Decomposition { summands })
    }

    pub fn to_unknowns(&self) -> Vec<C64> {
        self.summands.iter().flat_map(Summand::coordinates).collect()
    }

    pub fn conj(&self) -> Decomposition {
        Decomposition { summands: self.summands.iter().map(Summand::conj).collect() }
    }

    /// `sum_i λ_i ℓ_i^d` in the graded-lex monomial basis.
    pub fn tensor(&self, d: u32) -> TensorParams {
        let n = self.n();
        let mut acc = MPoly::zero(n + 1);
        for s in &self.summands {
            acc = &acc + &power_of_linear_form(&s.linear_form(), d, s.lambda);
        }
        let coeffs = monomials_of_degree(n + 1, d).iter().map(|e| acc.coefficient(e)).collect();
        TensorParams { d, n, coeffs }
    }

    /// Coefficient-wise relative reconstruction error against `t`: for each
    /// monomial, |T'_α - T_α| over |T_α| plus the moduli of the summand
    /// contributions to that monomial; the maximum over monomials.
    pub fn reconstruction_error(&self, t: &TensorParams) -> f64 {
        let basis = monomials_of_degree(t.n + 1, t.d);
        let mine = self.tensor(t.d);
        basis
            .iter()
            .enumerate()
            .map(|(k, ex)| {
                let m = multinomial(ex) as f64;
                let scale: f64 = self
                    .summands
                    .iter()
                    .map(|s| {
                        let mono = s.l.iter().zip(&ex[1..]).fold(C64::new(1.0, 0.0), |a, (z, &e)| a * z.powu(e));
                        (s.lambda * mono).norm() * m
                    })
                    .sum();
                (mine.coeffs[k] - t.coeffs[k]).norm() / (t.coeffs[k].norm() + scale).max(1e-300)
            })
            .fold(0.0, f64::max)
    }
}

/// Coefficients of a degree-d form in n+1 variables (graded-lex basis).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorParams {
    pub d: u32,
    pub n: usize,
    pub coeffs: Vec<C64>,
}

impl TensorParams {
    pub fn new(d: u32, n: usize, coeffs: Vec<C64>) -> Result<Self, WaringError> {
        let expected = binomial(n as u64 + d as u64, d as u64) as usize;
        if coeffs.len() != expected {
            return Err(WaringError::Shape { expected, got: coeffs.len() });
        }
        Ok(TensorParams { d, n, coeffs })
    }

    pub fn is_real(&self, tol: f64) -> bool {
        crate::realcert::is_real_point(&self.coeffs, tol)
    }
}

/// Diagonal change of coordinates `x_h -> s_h x_h`, `T -> μ T`. It maps
/// decompositions to decompositions (`l_h -> s_h l_h`, `λ -> μ λ`), keeps
/// the chart and preserves realness, so it can be used to balance the
/// coefficient magnitudes of a badly scaled tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartScaling {
    pub s: Vec<f64>,
    pub mu: f64,
}

impl ChartScaling {
    pub fn identity(n: usize) -> Self {
        ChartScaling { s: vec![1.0; n], mu: 1.0 }
    }

    /// Scales that give every chart variable and λ unit RMS modulus over
    /// the summands of `dec`.
    pub fn balancing(dec: &Decomposition) -> Self {
        let r = dec.rank().max(1) as f64;
        let inv_rms = |f: &dyn Fn(&Summand) -> f64| {
            let rms = (dec.summands.iter().map(|s| f(s).powi(2)).sum::<f64>() / r).sqrt();
            if rms > 0.0 && rms.is_finite() { 1.0 / rms } else { 1.0 }
        };
        let s = (0..dec.n()).map(|h| inv_rms(&|x: &Summand| x.l[h].norm())).collect();
        ChartScaling { s, mu: inv_rms(&|x: &Summand| x.lambda.norm()) }
    }

    pub fn apply(&self, dec: &Decomposition) -> Decomposition {
        self.map(dec, |s| s, self.mu)
    }

    pub fn undo(&self, dec: &Decomposition) -> Decomposition {
        self.map(dec, |s| 1.0 / s, 1.0 / self.mu)
    }

    fn map(&self, dec: &Decomposition, f: impl Fn(f64) -> f64, mu: f64) -> Decomposition {
        Decomposition::new(
            dec.summands
                .iter()
                .map(|x| Summand {
                    l: x.l.iter().zip(&self.s).map(|(z, &s)| z * f(s)).collect(),
                    lambda: x.lambda * mu,
                })
                .collect(),
        )
    }

    pub fn apply_tensor(&self, t: &TensorParams) -> TensorParams {
        let coeffs = monomials_of_degree(t.n + 1, t.d)
            .iter()
            .zip(&t.coeffs)
            .map(|(ex, c)| {
                let w: f64 = ex[1..].iter().zip(&self.s).map(|(&e, &s)| s.powi(e as i32)).product();
                c * (w * self.mu)
            })
            .collect();
        TensorParams { d: t.d, n: t.n, coeffs }
    }
}

/// The square system for `T - sum_i λ_i ℓ_i^d = 0` over
/// `[unknowns (l^1, λ_1, ...) | params (T coefficients)]`.
pub fn build_system(spec: &WaringSpec) -> Result<PolySystem, WaringError> {
    spec.is_admissible()?;
    let nu = spec.num_unknowns();
    let np = spec.num_equations();
    let nx = spec.n + 1;
    let nv = nu + np + nx;
    let x0 = nu + np;

    let mut expr = MPoly::zero(nv);
    for (k, ex) in spec.monomials().iter().enumerate() {
        let mut full = vec![0u32; nv];
        full[nu + k] = 1;
        full[x0..].copy_from_slice(ex);
        expr = &expr + &MPoly::from_terms(nv, [(full, C64::new(1.0, 0.0))])?;
    }
    for i in 0..spec.r {
        let base = i * (spec.n + 1);
        let mut form = MPoly::var(nv, x0);
        for h in 0..spec.n {
            form = &form + &(&MPoly::var(nv, base + h) * &MPoly::var(nv, x0 + 1 + h));
        }
        let term = &MPoly::var(nv, base + spec.n) * &form.pow(spec.d);
        expr = &expr - &term;
    }
    Ok(extract_coefficient_system(&expr, nu, np)?)
}

/// Random real start: every l uniform in `[-magnitude, magnitude]`, every λ
/// uniform in `[-magnitude^d, magnitude^d]`. Returns the decomposition and
/// the tensor it defines; the pair solves [`build_system`] by construction.
pub fn random_real_start(spec: &WaringSpec, seed: u64, magnitude: f64) -> Result<(Decomposition, TensorParams), WaringError> {
    spec.is_admissible()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lam_scale = magnitude.powi(spec.d as i32);
    let summands = (0..spec.r)
        .map(|_| {
            let l = (0..spec.n).map(|_| C64::new(rng.random_range(-magnitude..magnitude), 0.0)).collect();
            let lambda = C64::new(rng.random_range(-lam_scale..lam_scale), 0.0);
            Summand { l, lambda }
        })
        .collect();
    let dec = Decomposition::new(summands);
    let t = dec.tensor(spec.d);
    Ok((dec, t))
}

/// Start pair from printed real triples `(l_1..l_n, λ)`; the tensor is
/// recomputed from the values, which are then polished against it.
pub fn fixture_start(spec: &WaringSpec, rows: &[(Vec<f64>, f64)]) -> Result<(Decomposition, TensorParams), WaringError> {
    spec.is_admissible()?;
    if rows.len() != spec.r {
        return Err(WaringError::Shape { expected: spec.r, got: rows.len() });
    }
    let mut summands = Vec::with_capacity(rows.len());
    for (l, lambda) in rows {
        if l.len() != spec.n {
            return Err(WaringError::Shape { expected: spec.n, got: l.len() });
        }
        summands.push(Summand {
            l: l.iter().map(|&v| C64::new(v, 0.0)).collect(),
            lambda: C64::new(*lambda, 0.0),
        });
    }
    let dec = Decomposition::new(summands);
    let t = dec.tensor(spec.d);
    Ok((dec, t))
}

/// Checks that `dec` solves the system at `t`, polishing it once with
/// Newton; returns the polished decomposition and its relative residual.
pub fn polish_start(
    sys: &PolySystem,
    spec: &WaringSpec,
    dec: &Decomposition,
    t: &TensorParams,
    tol: f64,
) -> Result<(Decomposition, f64), WaringError> {
    match newton_refine(sys, &t.coeffs, &dec.to_unknowns(), tol, 4) {
        Ok(r) => Ok((Decomposition::from_unknowns(spec, &r.point)?, r.residual)),
        Err(crate::homotopy::NewtonError::NotConverged { residual, .. }) => Err(WaringError::BadStart(residual)),
        Err(_) => Err(WaringError::BadStart(f64::INFINITY)),
    }
}

/// A random complex rank-r tensor on the scale of `like`: chart
/// coefficients are drawn from a disk whose radius is the RMS of the
/// |l| in `like`, and the result is rescaled to the max-norm of the tensor
/// of `like`. Loops through such tensors stay on the same scale as the base
/// tensor, which keeps solution paths short.
pub fn random_complex_tensor<R: Rng + ?Sized>(spec: &WaringSpec, like: &Decomposition, rng: &mut R) -> TensorParams {
    let ls: Vec<f64> = like.summands.iter().flat_map(|s| s.l.iter()).map(|z| z.norm_sqr()).collect();
    let l_scale = if ls.is_empty() { 1.0 } else { (ls.iter().sum::<f64>() / ls.len() as f64).sqrt().max(1e-3) };
    let summands = (0..spec.r)
        .map(|_| Summand {
            l: (0..spec.n).map(|_| random_disk(rng) * l_scale).collect(),
            lambda: random_disk(rng),
        })
        .collect();
    let mut t = Decomposition::new(summands).tensor(spec.d);
    let target = crate::util::max_abs(&like.tensor(spec.d).coeffs);
    let current = crate::util::max_abs(&t.coeffs);
    if target > 0.0 && current > 0.0 {
        for z in &mut t.coeffs {
            *z *= target / current;
        }
    }
    t
}

/// The rank-r decomposition of a generic binary form of degree 2r - 1 by
/// Sylvester's catalecticant method: the kernel of the r x (r+1) Hankel
/// matrix of normalized coefficients is a degree-r polynomial whose roots
/// are the chart coefficients l_i; the λ_i then solve a Vandermonde system.
pub fn sylvester_oracle(form: &TensorParams, r: usize) -> Result<Decomposition, WaringError> {
    let d = form.d as usize;
    if form.n != 1 || r == 0 || d + 1 != 2 * r {
        return Err(WaringError::NonGeneric("need a binary form of degree 2r - 1"));
    }
    let a: Vec<C64> = form
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c / binomial(d as u64, k as u64) as f64)
        .collect();
    let hankel = CMatrix::from_rows(&(0..r).map(|i| a[i..=i + r].to_vec()).collect::<Vec<_>>());
    let g = null_vector(&hankel, 1e-12).ok_or(WaringError::NonGeneric("catalecticant kernel is not one-dimensional"))?;
    let gmax = g.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if g[r].norm() < 1e-10 * gmax {
        return Err(WaringError::OutOfChart);
    }
    let roots = univariate_roots(&g)?;
    let scale = 1.0 + roots.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if (roots[i] - roots[j]).norm() < 1e-6 * scale {
                return Err(WaringError::NonGeneric("repeated root in the apolar polynomial"));
            }
        }
    }
    let vander = CMatrix::from_rows(
        &(0..r)
            .map(|k| roots.iter().map(|m| m.powu(k as u32)).collect())
            .collect::<Vec<_>>(),
    );
    let lambdas = solve(&vander, &a[..r]).map_err(|_| WaringError::NonGeneric("singular Vandermonde system"))?;
    let dec = Decomposition::new(
        roots
            .iter()
            .zip(&lambdas)
            .map(|(m, lam)| Summand { l: vec![*m], lambda: *lam })
            .collect(),
    );
    if dec.reconstruction_error(form) > 1e-6 {
        return Err(WaringError::NonGeneric("decomposition does not reproduce the form"));
    }
    Ok(dec)
}

/// The twelve printed `(l_1, l_2, λ)` triples of the real degree-7 rank-12
/// start point in three variables.
pub const DEG7_RANK12_START: [[f64; 3]; 12] = [
    [-3.831393646843184, 1.346964775131610e-1, 2.425782032500251e2],
    [9.931270838081495e-1, -6.769701755660390e-1, 4.146536442894879e2],
    [3.183385725212400, -7.633860595893790e-1, 4.843082801697150e2],
    [-8.878812851871381e-1, 9.326430222177290e-1, -3.093559475729942e1],
    [-8.333546205381460e-1, 4.787791245905811, 5.913320307260028e2],
    [1.150535726607133, -7.356530267574411, 1.863359371761127e2],
    [-6.333358363820080e-1, 3.556043275765582, -6.986594239306317e2],
    [2.649721933021775, -2.942789804855117, 9.082119499105495e1],
    [9.281823004496396e-1, 5.416247221839678e-1, -3.774941091391256e1],
    [-3.760716164753004, 1.290194389580469, -8.149598050955672e-1],
    [2.159937720250393, -1.622029661864421, 5.360726064748198],
    [-8.097853608809100e-1, 5.078077230490563e-1, -1.967556570270287e1],
];

pub fn deg7_fixture_rows() -> Vec<(Vec<f64>, f64)> {
    DEG7_RANK12_START.iter().map(|t| (vec![t[0], t[1]], t[2])).collect()
}
