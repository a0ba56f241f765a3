//! Linear sections of two-factor Segre varieties `ℙ^a1 × ℙ^a2 ⊂ ℙ^N`,
//! `N = (a1+1)(a2+1) - 1`.
//!
//! Ambient coordinates are the entries of `y zᵀ`, flattened row-major:
//! index `(i, j) -> i·(a2+1) + j`. A linear space of codimension `a1 + a2`
//! meets the Segre in `C(a1+a2, a1)` points.
//!
//! Sections are solved in one random complex bi-chart
//! `y = y0 + Σ u_a Y_a`, `z = z0 + Σ v_b Z_b`, which misses no point of a
//! generic section. The start system is a product of random affine forms
//! `α_k(u)·β_k(v)`, one per equation; its solutions pick which `a1` of the
//! equations vanish through `α` and are exactly `C(a1+a2, a1)` in number, so
//! no path is wasted.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::ParallelMap;
use crate::homotopy::{solve_start_target, HomotopyError, TrackSettings};
use crate::linalg::{real_null_space, solve, CMatrix};
use crate::poly::MPoly;
use crate::realcert::{is_real_point, REAL_TOL};
use crate::util::{binomial, proj_dist, proj_normalize, random_complex_vec, random_real_vec, random_unit};
use crate::C64;

/// Section points closer than this (projectively) are merged.
pub const MERGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegreError {
    #[error("only two-factor Segre products with positive dimensions are supported")]
    Unsupported,
    #[error("linear space has shape {rows} x {cols}, expected {expected_rows} x {expected_cols}")]
    Shape { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("linear space equations are not of full row rank")]
    RankDeficient,
    #[error("found {found} of {expected} section points; the linear space is not transverse")]
    Deficient { found: usize, expected: usize },
    #[error("no section with the target signature in {attempts} attempts")]
    NotFound { attempts: usize },
    #[error("target ({real}, {nonreal}) must sum to the degree {degree} with an even non-real count")]
    BadTarget { real: usize, nonreal: usize, degree: usize },
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegreSpec {
    pub a1: usize,
    pub a2: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Profile {
    pub a_q: usize,
    pub degree: usize,
    pub parity: Parity,
}

impl SegreSpec {
    pub fn new(dims: &[usize]) -> Result<Self, SegreError> {
        match dims {
            &[a1, a2] if a1 > 0 && a2 > 0 => Ok(SegreSpec { a1, a2 }),
            _ => Err(SegreError::Unsupported),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        (self.a1 + 1) * (self.a2 + 1) - 1
    }

    /// Number of homogeneous ambient coordinates.
    pub fn num_coords(&self) -> usize {
        self.ambient_dim() + 1
    }

    pub fn codim(&self) -> usize {
        self.a1 + self.a2
    }

    /// `(a1 + a2)! / (a1! a2!)`.
    pub fn degree(&self) -> usize {
        binomial((self.a1 + self.a2) as u64, self.a1 as u64) as usize
    }

    /// Last factor dimension of the almost unbalanced product
    /// `ℙ^a1 × ℙ^a2 × ℙ^a_q`, i.e. `(a1+1)(a2+1) - a1 - a2`.
    pub fn a_q(&self) -> usize {
        self.num_coords() - self.codim()
    }

    pub fn profile(&self) -> Profile {
        let (a_q, degree) = (self.a_q(), self.degree());
        let parity = if degree.abs_diff(a_q) % 2 == 0 { Parity::Even } else { Parity::Odd };
        Profile { a_q, degree, parity }
    }

    /// The Segre point `y ⊗ z` in ambient coordinates.
    pub fn embed<T: Copy + core::ops::Mul<Output = T>>(&self, y: &[T], z: &[T]) -> Vec<T> {
        y.iter().flat_map(|&a| z.iter().map(move |&b| a * b)).collect()
    }
}

/// A real linear space given by its equations; codimension = row count.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpace {
    equations: Vec<Vec<f64>>,
}

impl LinearSpace {
    pub fn new(equations: Vec<Vec<f64>>) -> Result<Self, SegreError> {
        let cols = equations.first().map_or(0, Vec::len);
        if cols == 0 || equations.iter().any(|r| r.len() != cols) {
            return Err(SegreError::RankDeficient);
        }
        let (_, rank) = real_null_space(&equations, cols, 1e-10);
        if rank != equations.len() {
            return Err(SegreError::RankDeficient);
        }
        Ok(LinearSpace { equations })
    }

    /// The linear space spanned by the given real points.
    pub fn span_of(points: &[Vec<f64>]) -> Result<Self, SegreError> {
        let cols = points.first().map_or(0, Vec::len);
        let (null, rank) = real_null_space(points, cols, 1e-10);
        if rank != points.len() || null.is_empty() {
            return Err(SegreError::RankDeficient);
        }
        LinearSpace::new(null)
    }

    pub fn equations(&self) -> &[Vec<f64>] {
        &self.equations
    }

    pub fn codim(&self) -> usize {
        self.equations.len()
    }

    pub fn num_coords(&self) -> usize {
        self.equations[0].len()
    }

    /// Largest |ℓ·x| / |x| over the equations.
    pub fn residual(&self, x: &[C64]) -> f64 {
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        self.equations
            .iter()
            .map(|r| r.iter().zip(x).map(|(a, b)| b * *a).sum::<C64>().norm())
            .fold(0.0, f64::max)
            / norm
    }

    /// Same space, with orthonormal equations.
    fn orthonormalized(&self) -> Vec<Vec<f64>> {
        let (null, _) = real_null_space(&self.equations, self.num_coords(), 1e-10);
        if null.is_empty() {
            return self.equations.clone();
        }
        real_null_space(&null, self.num_coords(), 1e-10).0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionResult {
    /// Ambient points, scaled so the largest coordinate is 1.
    pub points: Vec<Vec<C64>>,
    pub real_count: usize,
    pub nonreal_count: usize,
    pub degree_expected: usize,
}

impl SectionResult {
    pub fn signature(&self) -> (usize, usize) {
        (self.real_count, self.nonreal_count)
    }
}

fn check_shape(spec: &SegreSpec, l: &LinearSpace) -> Result<(), SegreError> {
    let (rows, cols) = (l.codim(), l.num_coords());
    if rows != spec.codim() || cols != spec.num_coords() {
        return Err(SegreError::Shape { rows, cols, expected_rows: spec.codim(), expected_cols: spec.num_coords() });
    }
    Ok(())
}

fn random_affine(rng: &mut ChaCha8Rng, nv: usize, vars: core::ops::Range<usize>) -> (MPoly, Vec<C64>) {
    let c = random_complex_vec(rng, vars.len() + 1);
    let mut p = MPoly::constant(nv, c[0]);
    for (k, v) in vars.enumerate() {
        p = &p + &MPoly::var(nv, v).scale(c[k + 1]);
    }
    (p, c)
}

/// Solutions of the linear system `c_k[0] + Σ c_k[i+1] x_i = 0`.
fn solve_affine(rows: &[&Vec<C64>]) -> Option<Vec<C64>> {
    if rows.is_empty() {
        return Some(Vec::new());
    }
    let m = CMatrix::from_rows(&rows.iter().map(|r| r[1..].to_vec()).collect::<Vec<_>>());
    let b: Vec<C64> = rows.iter().map(|r| -r[0]).collect();
    solve(&m, &b).ok()
}

/// All `k`-subsets of `0..n`, in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// All points of the Segre variety on `l`, with their realness signature.
pub fn solve_section(spec: &SegreSpec, l: &LinearSpace, settings: &TrackSettings) -> Result<SectionResult, SegreError> {
    check_shape(spec, l)?;
    let degree = spec.degree();
    let mut last = None;
    for attempt in 0..3u64 {
        let res = section_once(spec, l, settings, 0x5e64e + attempt)?;
        if res.points.len() == degree {
            return Ok(res);
        }
        last = Some(res.points.len());
    }
    Err(SegreError::Deficient { found: last.unwrap_or(0), expected: degree })
}

fn section_once(spec: &SegreSpec, l: &LinearSpace, settings: &TrackSettings, seed: u64) -> Result<SectionResult, SegreError> {
    let (a1, a2) = (spec.a1, spec.a2);
    let nv = a1 + a2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y0 = random_complex_vec(&mut rng, a1 + 1);
    let ys: Vec<Vec<C64>> = (0..a1).map(|_| random_complex_vec(&mut rng, a1 + 1)).collect();
    let z0 = random_complex_vec(&mut rng, a2 + 1);
    let zs: Vec<Vec<C64>> = (0..a2).map(|_| random_complex_vec(&mut rng, a2 + 1)).collect();
    let chart = |x: &[C64]| -> (Vec<C64>, Vec<C64>) {
        let y = (0..=a1).map(|i| y0[i] + (0..a1).map(|a| x[a] * ys[a][i]).sum::<C64>()).collect();
        let z = (0..=a2).map(|j| z0[j] + (0..a2).map(|b| x[a1 + b] * zs[b][j]).sum::<C64>()).collect();
        (y, z)
    };
    let ypoly: Vec<MPoly> = (0..=a1)
        .map(|i| (0..a1).fold(MPoly::constant(nv, y0[i]), |p, a| &p + &MPoly::var(nv, a).scale(ys[a][i])))
        .collect();
    let zpoly: Vec<MPoly> = (0..=a2)
        .map(|j| (0..a2).fold(MPoly::constant(nv, z0[j]), |p, b| &p + &MPoly::var(nv, a1 + b).scale(zs[b][j])))
        .collect();
    let eqs = l.orthonormalized();
    let target: Vec<MPoly> = eqs
        .iter()
        .map(|row| {
            let mut p = MPoly::zero(nv);
            for i in 0..=a1 {
                // Σ_j ℓ_ij z_j, then times y_i.
                let zi = (0..=a2).fold(MPoly::zero(nv), |acc, j| {
                    let c = row[i * (a2 + 1) + j];
                    if c == 0.0 {
                        acc
                    } else {
                        &acc + &zpoly[j].scale(C64::new(c, 0.0))
                    }
                });
                p = &p + &(&ypoly[i] * &zi);
            }
            p
        })
        .collect();

    let (alphas, betas): (Vec<_>, Vec<_>) = (0..nv)
        .map(|_| (random_affine(&mut rng, nv, 0..a1), random_affine(&mut rng, nv, a1..nv)))
        .unzip();
    let start: Vec<MPoly> = alphas.iter().zip(&betas).map(|(a, b)| &a.0 * &b.0).collect();
    let mut starts = Vec::new();
    for s in subsets(nv, a1) {
        let rest: Vec<usize> = (0..nv).filter(|k| !s.contains(k)).collect();
        let u = solve_affine(&s.iter().map(|&k| &alphas[k].1).collect::<Vec<_>>());
        let v = solve_affine(&rest.iter().map(|&k| &betas[k].1).collect::<Vec<_>>());
        if let (Some(u), Some(v)) = (u, v) {
            starts.push([u, v].concat());
        }
    }
    let gamma = random_unit(&mut rng);
    let results = solve_start_target(&start, &target, &starts, gamma, settings)?;

    let mut points: Vec<Vec<C64>> = Vec::new();
    for r in results.iter().filter(|r| r.is_success()) {
        let (y, z) = chart(&r.endpoint);
        let x = proj_normalize(&spec.embed(&y, &z));
        if points.iter().all(|p| proj_dist(p, &x) > MERGE_TOL) {
            points.push(x);
        }
    }
    // Real points first; otherwise keep path order, which is deterministic.
    points.sort_by_key(|p| !is_real_point(p, REAL_TOL));
    let real_count = points.iter().filter(|p| is_real_point(p, REAL_TOL)).count();
    Ok(SectionResult { nonreal_count: points.len() - real_count, real_count, points, degree_expected: spec.degree() })
}

/// Random real Segre points `y ⊗ z` with `y, z` uniform in the unit cube.
pub fn sample_real_points<R: Rng + ?Sized>(spec: &SegreSpec, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..k)
        .map(|_| {
            let y = random_real_vec(rng, spec.a1 + 1);
            let z = random_real_vec(rng, spec.a2 + 1);
            spec.embed(&y, &z)
        })
        .collect()
}

/// Span of `k` random real Segre points, padded with random real ambient
/// points up to codimension `a1 + a2` when `k` is smaller than `a_q`.
/// Returns the space and the Segre points it was built from.
fn span_with_points<R: Rng + ?Sized>(spec: &SegreSpec, k: usize, rng: &mut R) -> Result<(LinearSpace, Vec<Vec<f64>>), SegreError> {
    let k = k.min(spec.a_q());
    for _ in 0..16 {
        let pts = sample_real_points(spec, k, rng);
        let mut all = pts.clone();
        all.extend((k..spec.a_q()).map(|_| random_real_vec(rng, spec.num_coords())));
        if let Ok(l) = LinearSpace::span_of(&all) {
            return Ok((l, pts));
        }
    }
    Err(SegreError::RankDeficient)
}

/// The span of `k` random real Segre points (padded with random real
/// ambient points to the square codimension when `k < a_q`).
pub fn span_through_points(spec: &SegreSpec, k: usize, seed: u64) -> Result<(LinearSpace, Vec<Vec<f64>>), SegreError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    span_with_points(spec, k, &mut rng)
}

pub fn random_real_space<R: Rng + ?Sized>(spec: &SegreSpec, rng: &mut R) -> Result<LinearSpace, SegreError> {
    for _ in 0..16 {
        let rows: Vec<Vec<f64>> = (0..spec.codim()).map(|_| random_real_vec(rng, spec.num_coords())).collect();
        if let Ok(l) = LinearSpace::new(rows) {
            return Ok(l);
        }
    }
    Err(SegreError::RankDeficient)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchWitness {
    pub space: LinearSpace,
    pub section: SectionResult,
    /// 1-based attempt that succeeded.
    pub attempt: usize,
}

/// Looks for a real linear space whose section has the target signature.
/// Even attempts span `target.0` real Segre points, odd attempts use fully
/// random real spaces; each attempt has its own seed, so the outcome does
/// not depend on the executor.
pub fn search_signature<P: ParallelMap>(
    spec: &SegreSpec,
    target: (usize, usize),
    max_attempts: usize,
    seed: u64,
    settings: &TrackSettings,
    exec: &P,
) -> Result<SearchWitness, SegreError> {
    let degree = spec.degree();
    if target.0 + target.1 != degree || target.1 % 2 != 0 {
        return Err(SegreError::BadTarget { real: target.0, nonreal: target.1, degree });
    }
    let attempts: Vec<usize> = (0..max_attempts).collect();
    let outcomes = exec.map(attempts, |i| -> Option<(LinearSpace, SectionResult)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64));
        let space = if i % 2 == 0 {
            span_with_points(spec, target.0, &mut rng).ok()?.0
        } else {
            random_real_space(spec, &mut rng).ok()?
        };
        let section = solve_section(spec, &space, settings).ok()?;
        (section.signature() == target).then_some((space, section))
    });
    outcomes
        .into_iter()
        .enumerate()
        .find_map(|(i, o)| o.map(|(space, section)| SearchWitness { space, section, attempt: i + 1 }))
        .ok_or(SegreError::NotFound { attempts: max_attempts })
}
