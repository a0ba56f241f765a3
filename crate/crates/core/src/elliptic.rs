//! Real secant geometry of elliptic normal quartics `C = Q1 ∩ Q2` in ℙ³.
//!
//! A real plane meets C in four points, of which 0, 2 or 4 are real. A
//! general real point P of ℙ³ lies on exactly two secant lines of C, and the
//! realness pattern of those lines and their points gives one of four types:
//!
//! * s1: four real points;
//! * s2: one line with two real points, one real line with a conjugate pair;
//! * s3: two real lines, each carrying a conjugate pair;
//! * s4: two non-real lines, conjugate to each other.
//!
//! Plane sections are solved as two conics in a random complex chart of the
//! plane; secant lines through P come from a 4 x 4 system solved from a
//! total-degree start.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::ParallelMap;
use crate::homotopy::{solve_start_target, total_degree_start, HomotopyError, PathResult, TrackSettings};
use crate::linalg::{null_vector, real_null_space, CMatrix, Lu};
use crate::poly::{univariate_roots, MPoly, PolySystem};
use crate::realcert::{is_real_point, REAL_TOL};
use crate::util::{max_abs, proj_dist, proj_normalize, random_complex_vec, random_unit};
use crate::C64;

/// Two intersection points closer than this (projectively) are one double
/// point.
pub const TANGENCY_TOL: f64 = 1e-6;
/// Endpoints of a double root only agree to about the square root of the
/// working precision; roots this close mean a plane within ~1e-8 of tangency.
pub const DOUBLE_ROOT_TOL: f64 = 1e-4;

/// Retries with a fresh random chart before giving up on a solve.
const ATTEMPTS: u64 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipticError {
    #[error("quadric matrix must be symmetric")]
    NotSymmetric,
    #[error("quadric matrix must be nonzero")]
    ZeroQuadric,
    #[error("plane is tangent to the curve")]
    Tangent { point: [C64; 4] },
    #[error("plane meets the curve in a component or not in four points")]
    DegeneratePlane,
    #[error("degenerate configuration: {0}")]
    Degenerate(&'static str),
    #[error("the base line x2 = x3 = 0 does not meet the curve in two points")]
    BaseLine,
    #[error("construction failed: {0}")]
    ConstructionFailed(&'static str),
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadric {
    m: [[f64; 4]; 4],
}

impl Quadric {
    pub fn new(m: [[f64; 4]; 4]) -> Result<Self, EllipticError> {
        let scale = m.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(EllipticError::ZeroQuadric);
        }
        for i in 0..4 {
            for j in 0..i {
                if (m[i][j] - m[j][i]).abs() > 1e-14 * scale {
                    return Err(EllipticError::NotSymmetric);
                }
            }
        }
        Ok(Quadric { m })
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.m
    }

    pub fn eval(&self, x: &[C64; 4]) -> C64 {
        self.bilinear(x, x)
    }

    pub fn bilinear(&self, x: &[C64; 4], y: &[C64; 4]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                acc += x[i] * y[j] * self.m[i][j];
            }
        }
        acc
    }

    fn poly(&self, x: &[MPoly]) -> MPoly {
        let nv = x[0].num_vars();
        let mut acc = MPoly::zero(nv);
        for i in 0..4 {
            for j in 0..4 {
                if self.m[i][j] != 0.0 {
                    acc = &acc + &(&x[i] * &x[j]).scale(C64::new(self.m[i][j], 0.0));
                }
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadricPencil {
    pub q1: Quadric,
    pub q2: Quadric,
}

impl QuadricPencil {
    /// `x0² + x1² - x2² - x3²` and `x0² - x0x3 + x1² - x1x3 - 2x2² - 2x3²`,
    /// two real hyperboloids through `[1:±i:0:0]`.
    pub fn example() -> Self {
        let q1 = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0], [0.0, 0.0, 0.0, -1.0]];
        let q2 = [[1.0, 0.0, 0.0, -0.5], [0.0, 1.0, 0.0, -0.5], [0.0, 0.0, -2.0, 0.0], [-0.5, -0.5, 0.0, -2.0]];
        QuadricPencil { q1: Quadric { m: q1 }, q2: Quadric { m: q2 } }
    }

    /// Relative residual of `x` on both quadrics.
    pub fn residual(&self, x: &[C64; 4]) -> f64 {
        let n = x.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if n == 0.0 {
            return f64::INFINITY;
        }
        let scale = |q: &Quadric| q.m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        (self.q1.eval(x).norm() / scale(&self.q1)).max(self.q2.eval(x).norm() / scale(&self.q2)) / n
    }

    pub fn contains(&self, x: &[C64; 4], tol: f64) -> bool {
        self.residual(x) < tol
    }

    /// Probes smoothness of the base curve: the singular quadrics of the
    /// pencil are the roots of `det(cos θ Q1 + sin θ Q2)`; the curve is a
    /// smooth quartic iff those four roots are distinct and no cone vertex
    /// lies on the curve.
    pub fn smoothness_probe(&self) -> SmoothnessReport {
        // A fixed irrational rotation keeps the quartic's leading
        // coefficient away from zero when Q2 itself is singular.
        let theta = 0.618_033_988_749_895f64;
        let (c, s) = (theta.cos(), theta.sin());
        let a = |t: C64| -> [[C64; 4]; 4] {
            let mut m = [[C64::new(0.0, 0.0); 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] = (C64::new(c, 0.0) - t * s) * self.q1.m[i][j] + (C64::new(s, 0.0) + t * c) * self.q2.m[i][j];
                }
            }
            m
        };
        // Interpolate the quartic det(a(t)) at five roots of unity.
        let nodes: Vec<C64> = (0..5).map(|k| C64::from_polar(1.0, core::f64::consts::TAU * k as f64 / 5.0)).collect();
        let vals: Vec<C64> = nodes.iter().map(|&t| det4(&a(t))).collect();
        let coeffs: Vec<C64> = (0..5)
            .map(|j| nodes.iter().zip(&vals).map(|(t, v)| v * t.powi(-(j as i32))).sum::<C64>() / 5.0)
            .collect();
        let scale = max_abs(&coeffs);
        if scale == 0.0 {
            return SmoothnessReport { smooth: false, cone_vertices: Vec::new() };
        }
        let mut degree = 4;
        while degree > 0 && coeffs[degree].norm() < 1e-12 * scale {
            degree -= 1;
        }
        let roots = match univariate_roots(&coeffs[..=degree]) {
            Ok(r) if degree == 4 => r,
            _ => return SmoothnessReport { smooth: false, cone_vertices: Vec::new() },
        };
        let mut smooth = true;
        for i in 0..4 {
            for j in i + 1..4 {
                if (roots[i] - roots[j]).norm() < 1e-8 * (1.0 + roots[i].norm()) {
                    smooth = false;
                }
            }
        }
        let mut cone_vertices = Vec::new();
        for t in &roots {
            let m = a(*t);
            let rows: Vec<Vec<C64>> = m.iter().map(|r| r.to_vec()).collect();
            match null_vector(&CMatrix::from_rows(&rows), 1e-9) {
                Some(v) => {
                    let v = [v[0], v[1], v[2], v[3]];
                    if self.contains(&v, 1e-9) {
                        smooth = false;
                    }
                    cone_vertices.push(v);
                }
                None => smooth = false,
            }
        }
        SmoothnessReport { smooth, cone_vertices }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothnessReport {
    pub smooth: bool,
    /// Vertices of the four quadric cones of the pencil.
    pub cone_vertices: Vec<[C64; 4]>,
}

fn det4(m: &[[C64; 4]; 4]) -> C64 {
    let mut a = *m;
    let mut det = C64::new(1.0, 0.0);
    for k in 0..4 {
        let p = (k..4).max_by(|&i, &j| a[i][k].norm().total_cmp(&a[j][k].norm())).unwrap_or(k);
        if a[p][k].norm() == 0.0 {
            return C64::new(0.0, 0.0);
        }
        if p != k {
            a.swap(p, k);
            det = -det;
        }
        det *= a[k][k];
        for i in k + 1..4 {
            let f = a[i][k] / a[k][k];
            for j in k..4 {
                let u = a[k][j];
                a[i][j] -= f * u;
            }
        }
    }
    det
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlaneSignature {
    pub real_count: usize,
    pub nonreal_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneIntersection {
    /// Chart-normalized points (largest coordinate 1).
    pub points: Vec<[C64; 4]>,
    pub signature: PlaneSignature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecantLine {
    /// Direction from the base point, scaled so its largest coordinate is 1.
    pub direction: [C64; 4],
    /// The line meets C at `P + t1·direction` and `P + t2·direction`, with
    /// `(Re t1, Im t1) <= (Re t2, Im t2)` lexicographically.
    pub t1: C64,
    pub t2: C64,
    /// The two points, chart-normalized, in the order of `t1`, `t2`.
    pub points: [[C64; 4]; 2],
    pub is_real_line: bool,
    pub points_real: (bool, bool),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointType {
    S1,
    S2,
    S3,
    S4,
    Degenerate,
}

impl PointType {
    pub fn tag(&self) -> &'static str {
        match self {
            PointType::S1 => "s1",
            PointType::S2 => "s2",
            PointType::S3 => "s3",
            PointType::S4 => "s4",
            PointType::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointClassification {
    pub point: [f64; 4],
    pub point_type: PointType,
    pub lines: Vec<SecantLine>,
}

fn to_c4(v: &[C64]) -> [C64; 4] {
    [v[0], v[1], v[2], v[3]]
}

fn real_to_c4(v: &[f64; 4]) -> [C64; 4] {
    v.map(|x| C64::new(x, 0.0))
}

fn normalized(v: &[C64; 4]) -> [C64; 4] {
    to_c4(&proj_normalize(v))
}

fn is_real_proj(v: &[C64; 4]) -> bool {
    is_real_point(&normalized(v), REAL_TOL)
}

fn conj4(v: &[C64; 4]) -> [C64; 4] {
    v.map(|z| z.conj())
}

/// Plain Newton at the target, without a conditioning check: converges
/// (linearly) onto double roots where the tracker gives up.
fn polish_near_singular(sys: &PolySystem, params: &[C64], x: &[C64]) -> Vec<C64> {
    let mut x = x.to_vec();
    for _ in 0..200 {
        let (Ok(f), Ok(j)) = (sys.evaluate(&x, params), sys.jacobian(&x, params)) else {
            break;
        };
        let Ok(lu) = Lu::factor(&j) else { break };
        let dx = lu.solve(&f.iter().map(|v| -v).collect::<Vec<_>>());
        if !dx.iter().all(|z| z.is_finite()) {
            break;
        }
        for (a, d) in x.iter_mut().zip(&dx) {
            *a += d;
        }
        if max_abs(&dx) < 1e-15 * (1.0 + max_abs(&x)) {
            break;
        }
    }
    x
}

/// The target system of a start/target solve sits at parameters `(0, 1)`.
const TARGET: [C64; 2] = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];

/// Four intersection points of C with the real plane `h·x = 0`.
pub fn intersect_plane(pencil: &QuadricPencil, plane: &[f64; 4]) -> Result<PlaneIntersection, EllipticError> {
    if plane.iter().all(|&x| x == 0.0) {
        return Err(EllipticError::DegeneratePlane);
    }
    let (basis, _) = real_null_space(&[plane.to_vec()], 4, 1e-12);
    if basis.len() != 3 {
        return Err(EllipticError::DegeneratePlane);
    }
    let mut last = EllipticError::DegeneratePlane;
    for attempt in 0..ATTEMPTS {
        match intersect_plane_once(pencil, &basis, 0x9e37_79b9 + attempt) {
            Ok(r) => return Ok(r),
            Err(e @ EllipticError::Tangent { .. }) => return Err(e),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn intersect_plane_once(pencil: &QuadricPencil, basis: &[Vec<f64>], seed: u64) -> Result<PlaneIntersection, EllipticError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Random complex chart u = u0 + y1 v1 + y2 v2 of the plane's ℙ².
    let u0 = random_complex_vec(&mut rng, 3);
    let v1 = random_complex_vec(&mut rng, 3);
    let v2 = random_complex_vec(&mut rng, 3);
    let to_ambient = |y: &[C64]| -> [C64; 4] {
        let u: Vec<C64> = (0..3).map(|i| u0[i] + y[0] * v1[i] + y[1] * v2[i]).collect();
        let mut x = [C64::new(0.0, 0.0); 4];
        for (k, xk) in x.iter_mut().enumerate() {
            *xk = (0..3).map(|i| u[i] * basis[i][k]).sum();
        }
        x
    };
    let coords: Vec<MPoly> = (0..4)
        .map(|k| {
            let mut p = MPoly::zero(2);
            for i in 0..3 {
                let b = basis[i][k];
                p = &p + &MPoly::constant(2, u0[i] * b);
                p = &p + &MPoly::var(2, 0).scale(v1[i] * b);
                p = &p + &MPoly::var(2, 1).scale(v2[i] * b);
            }
            p
        })
        .collect();
    let target = vec![pencil.q1.poly(&coords), pencil.q2.poly(&coords)];
    let (start, starts) = total_degree_start(&target);
    let gamma = random_unit(&mut rng);
    let results = solve_start_target(&start, &target, &starts, gamma, &TrackSettings::default())?;
    let sys = crate::homotopy::start_target_system(&start, &target)?;
    let points = collect_points(&sys, &results, |y| to_ambient(y));

    // Two coincident endpoints mean a double intersection point.
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if proj_dist(&points[i], &points[j]) < DOUBLE_ROOT_TOL {
                let (a, b) = (&points[i], &points[j]);
                let k = (0..4).max_by(|&p, &q| a[p].norm().total_cmp(&a[q].norm())).unwrap_or(0);
                let mid: Vec<C64> = a.iter().zip(b).map(|(x, y)| (x / a[k] + y / b[k]) * 0.5).collect();
                return Err(EllipticError::Tangent { point: normalized(&to_c4(&mid)) });
            }
        }
    }
    if points.len() != 4 {
        return Err(EllipticError::DegeneratePlane);
    }
    let real_count = points.iter().filter(|p| is_real_proj(p)).count();
    Ok(PlaneIntersection { points, signature: PlaneSignature { real_count, nonreal_count: 4 - real_count } })
}

/// Endpoints of successful paths, plus paths that stalled near the end
/// (double roots) after plain Newton at the target; chart-normalized.
fn collect_points(sys: &PolySystem, results: &[PathResult], map: impl Fn(&[C64]) -> [C64; 4]) -> Vec<[C64; 4]> {
    results
        .iter()
        .filter_map(|r| {
            if r.is_success() {
                Some(polish_near_singular(sys, &TARGET, &r.endpoint))
            } else if r.t > 0.9 && max_abs(&r.endpoint) < 1e6 {
                let x = polish_near_singular(sys, &TARGET, &r.endpoint);
                let res = sys.relative_residual(&x, &TARGET).ok()?;
                (res < 1e-12).then_some(x)
            } else {
                None
            }
        })
        .map(|y| normalized(&map(&y)))
        .collect()
}

/// The two secant lines of C through the real point P.
pub fn secant_lines_through(pencil: &QuadricPencil, p: &[f64; 4]) -> Result<Vec<SecantLine>, EllipticError> {
    let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(EllipticError::Degenerate("zero point"));
    }
    let p = p.map(|x| x / norm);
    let pc = real_to_c4(&p);
    if pencil.contains(&pc, 1e-10) {
        return Err(EllipticError::Degenerate("point lies on the curve"));
    }
    let mut last = EllipticError::Degenerate("secant solve failed");
    for attempt in 0..ATTEMPTS {
        match secants_once(pencil, &pc, 0x5eca_17 + attempt) {
            Ok(lines) => return Ok(lines),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn secants_once(pencil: &QuadricPencil, p: &[C64; 4], seed: u64) -> Result<Vec<SecantLine>, EllipticError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // X1 = P + w, X2 = P + s·w, with w = sum_a z_a E_a in a random complex
    // complement of P. Removing the factor (1 - s) of Q_j(P + s w) given
    // Q_j(P + w) = 0 leaves Q_j(P)(1 + s) + 2 s B_j(P, w) = 0.
    let e: Vec<Vec<C64>> = (0..3).map(|_| random_complex_vec(&mut rng, 4)).collect();
    let nv = 4;
    let w: Vec<MPoly> = (0..4)
        .map(|k| (0..3).fold(MPoly::zero(nv), |acc, a| &acc + &MPoly::var(nv, a).scale(e[a][k])))
        .collect();
    let x1: Vec<MPoly> = (0..4).map(|k| &MPoly::constant(nv, p[k]) + &w[k]).collect();
    let s = MPoly::var(nv, 3);
    let one = MPoly::constant(nv, C64::new(1.0, 0.0));
    let mut target = Vec::new();
    for q in [&pencil.q1, &pencil.q2] {
        target.push(q.poly(&x1));
    }
    for q in [&pencil.q1, &pencil.q2] {
        let qp = q.eval(p);
        let b = (0..4).fold(MPoly::zero(nv), |acc, k| {
            let coeff: C64 = (0..4).map(|i| p[i] * q.m[i][k]).sum();
            &acc + &w[k].scale(coeff)
        });
        let lhs = &(&one + &s).scale(qp) + &(&s * &b).scale(C64::new(2.0, 0.0));
        target.push(lhs);
    }
    let (start, starts) = total_degree_start(&target);
    let gamma = random_unit(&mut rng);
    let results = solve_start_target(&start, &target, &starts, gamma, &TrackSettings::default())?;

    let point_of = |z: &[C64], t: C64| -> [C64; 4] {
        let mut x = *p;
        for (k, xk) in x.iter_mut().enumerate() {
            *xk += t * (0..3).map(|a| z[a] * e[a][k]).sum::<C64>();
        }
        x
    };
    let mut lines: Vec<SecantLine> = Vec::new();
    for r in results.iter().filter(|r| r.is_success()) {
        let z = &r.endpoint;
        let (a, b) = (point_of(z, C64::new(1.0, 0.0)), point_of(z, z[3]));
        if !pencil.contains(&a, 1e-9) || !pencil.contains(&b, 1e-9) {
            continue;
        }
        if proj_dist(&a, &b) < 1e-8 {
            return Err(EllipticError::Degenerate("tangent line through the point"));
        }
        let (na, nb) = (normalized(&a), normalized(&b));
        let known = lines.iter().any(|l| {
            (proj_dist(&l.points[0], &na) < TANGENCY_TOL && proj_dist(&l.points[1], &nb) < TANGENCY_TOL)
                || (proj_dist(&l.points[0], &nb) < TANGENCY_TOL && proj_dist(&l.points[1], &na) < TANGENCY_TOL)
        });
        if known {
            continue;
        }
        let wdir: [C64; 4] = point_of(z, C64::new(1.0, 0.0)).iter().zip(p).map(|(x, y)| x - y).collect::<Vec<_>>()
            .try_into()
            .expect("four coordinates");
        let pivot = wdir.iter().copied().fold(C64::new(0.0, 0.0), |m, v| if v.norm() > m.norm() { v } else { m });
        let direction = wdir.map(|v| v / pivot);
        let (mut t1, mut t2, mut pts) = (pivot, pivot * z[3], [na, nb]);
        if (t2.re, t2.im) < (t1.re, t1.im) {
            core::mem::swap(&mut t1, &mut t2);
            pts.swap(0, 1);
        }
        let points_real = (is_real_proj(&pts[0]), is_real_proj(&pts[1]));
        let is_real_line = (points_real.0 && points_real.1)
            || proj_dist(&conj4(&pts[0]), &pts[1]) < TANGENCY_TOL;
        lines.push(SecantLine { direction, t1, t2, points: pts, is_real_line, points_real });
    }
    if lines.len() != 2 {
        return Err(EllipticError::Degenerate("expected exactly two secant lines"));
    }
    // Real lines first, then by the real parts of the first point.
    lines.sort_by(|a, b| {
        b.is_real_line
            .cmp(&a.is_real_line)
            .then_with(|| (b.points_real.0 as u8 + b.points_real.1 as u8).cmp(&(a.points_real.0 as u8 + a.points_real.1 as u8)))
    });
    Ok(lines)
}

/// Type of a real point from the realness pattern of its secant lines.
pub fn classify_point(pencil: &QuadricPencil, p: &[f64; 4]) -> Result<PointClassification, EllipticError> {
    let lines = secant_lines_through(pencil, p)?;
    Ok(PointClassification { point: *p, point_type: type_of(&lines), lines })
}

fn type_of(lines: &[SecantLine]) -> PointType {
    let [l, m] = lines else { return PointType::Degenerate };
    let both_real = |x: &SecantLine| x.points_real.0 && x.points_real.1;
    let conj_pair = |x: &SecantLine| x.is_real_line && !x.points_real.0 && !x.points_real.1;
    match (l.is_real_line, m.is_real_line) {
        (true, true) if both_real(l) && both_real(m) => PointType::S1,
        (true, true) if (both_real(l) && conj_pair(m)) || (conj_pair(l) && both_real(m)) => PointType::S2,
        (true, true) if conj_pair(l) && conj_pair(m) => PointType::S3,
        (false, false) => {
            let swapped = |a: &[C64; 4], b: &[C64; 4]| proj_dist(&conj4(a), b) < TANGENCY_TOL;
            let conjugate = (swapped(&l.points[0], &m.points[0]) && swapped(&l.points[1], &m.points[1]))
                || (swapped(&l.points[0], &m.points[1]) && swapped(&l.points[1], &m.points[0]));
            if conjugate {
                PointType::S4
            } else {
                PointType::Degenerate
            }
        }
        _ => PointType::Degenerate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScanOutcome {
    Signature(PlaneSignature),
    Tangent { point: [C64; 4] },
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub k: f64,
    pub outcome: ScanOutcome,
}

/// Signatures of the planes `x2 = k·x3` of the pencil through the line
/// `x2 = x3 = 0`, which must meet C in exactly two points.
pub fn pencil_scan<P: ParallelMap>(pencil: &QuadricPencil, ks: &[f64], exec: &P) -> Result<Vec<ScanRecord>, EllipticError> {
    // On the base line both quadrics restrict to binary forms in (x0, x1);
    // they must be proportional and nondegenerate.
    let block = |q: &Quadric| [q.m[0][0], q.m[0][1], q.m[1][1]];
    let (a, b) = (block(&pencil.q1), block(&pencil.q2));
    let cross = (a[0] * b[1] - a[1] * b[0]).abs() + (a[0] * b[2] - a[2] * b[0]).abs() + (a[1] * b[2] - a[2] * b[1]).abs();
    let scale = a.iter().chain(&b).map(|x| x.abs()).fold(0.0, f64::max);
    let disc = a[1] * a[1] - a[0] * a[2];
    if scale == 0.0 || cross > 1e-12 * scale * scale || disc.abs() < 1e-12 * scale * scale || a.iter().all(|&x| x == 0.0) {
        return Err(EllipticError::BaseLine);
    }
    Ok(exec.map(ks.to_vec(), |k| {
        let outcome = match intersect_plane(pencil, &[0.0, 0.0, 1.0, -k]) {
            Ok(r) => ScanOutcome::Signature(r.signature),
            Err(EllipticError::Tangent { point }) => ScanOutcome::Tangent { point },
            Err(_) => ScanOutcome::Degenerate,
        };
        ScanRecord { k, outcome }
    }))
}

/// A real point built as the meet of two lines through plane-section points.
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub point: [f64; 4],
    pub plane: [f64; 4],
    pub plane_points: Vec<[C64; 4]>,
}

fn random_plane<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    core::array::from_fn(|_| rng.random_range(-1.0..1.0))
}

/// Real points of C, sampled from sections by random real planes.
pub fn real_curve_points<R: Rng + ?Sized>(pencil: &QuadricPencil, count: usize, rng: &mut R) -> Result<Vec<[f64; 4]>, EllipticError> {
    let mut out: Vec<[f64; 4]> = Vec::new();
    for _ in 0..50 * count.max(1) {
        if out.len() >= count {
            break;
        }
        let Ok(sec) = intersect_plane(pencil, &random_plane(rng)) else { continue };
        // One point per plane keeps the sample spread out.
        if let Some(p) = sec.points.iter().find(|p| is_real_proj(p)) {
            let re = p.map(|z| z.re);
            if out.iter().all(|q| proj_dist(&real_to_c4(q), &real_to_c4(&re)) > 1e-3) {
                out.push(re);
            }
        }
    }
    if out.len() < count {
        return Err(EllipticError::ConstructionFailed("could not sample enough real curve points"));
    }
    Ok(out)
}

/// Meet of the coplanar lines AB and CD.
fn meet(a: &[C64; 4], b: &[C64; 4], c: &[C64; 4], d: &[C64; 4]) -> Option<[C64; 4]> {
    let rows: Vec<Vec<C64>> = (0..4).map(|k| vec![a[k], b[k], -c[k], -d[k]]).collect();
    let v = null_vector(&CMatrix::from_rows(&rows), 1e-10)?;
    Some(core::array::from_fn(|k| v[0] * a[k] + v[1] * b[k]))
}

fn real_point(p: &[C64; 4]) -> Option<[f64; 4]> {
    let n = normalized(p);
    is_real_point(&n, 1e-7).then(|| n.map(|z| z.re))
}

/// Index of the conjugate partner of `points[i]` among `points`.
fn partner(points: &[[C64; 4]], i: usize) -> Option<usize> {
    (0..points.len()).find(|&j| j != i && proj_dist(&conj4(&points[i]), &points[j]) < TANGENCY_TOL)
}

/// Builds a real point of the requested type: for s1 the meet of two
/// secants through four real coplanar points; for s2 the meet of the line
/// through the two real points of a (2,2) plane with the line through its
/// conjugate pair; for s3 the meet of the lines through the two conjugate
/// pairs `{A, B}`, `{C, D}` of a (0,4) plane; for s4 the meet of the
/// conjugate lines AD and BC of the same plane.
pub fn construct_point<R: Rng + ?Sized>(pencil: &QuadricPencil, kind: PointType, rng: &mut R) -> Result<Construction, EllipticError> {
    for _ in 0..200 {
        let plane = match kind {
            PointType::S1 => {
                let pts = real_curve_points(pencil, 3, rng)?;
                let rows: Vec<Vec<f64>> = pts.iter().map(|p| p.to_vec()).collect();
                let (null, rank) = real_null_space(&rows, 4, 1e-10);
                if rank != 3 || null.len() != 1 {
                    continue;
                }
                [null[0][0], null[0][1], null[0][2], null[0][3]]
            }
            PointType::S2 | PointType::S3 | PointType::S4 => random_plane(rng),
            PointType::Degenerate => return Err(EllipticError::ConstructionFailed("no construction for degenerate points")),
        };
        let Ok(sec) = intersect_plane(pencil, &plane) else { continue };
        let pts = &sec.points;
        let want_real = match kind {
            PointType::S1 => 4,
            PointType::S2 => 2,
            _ => 0,
        };
        if sec.signature.real_count != want_real {
            continue;
        }
        let (a, b, c, d) = match kind {
            PointType::S1 => (pts[0], pts[1], pts[2], pts[3]),
            PointType::S2 => {
                let real: Vec<usize> = (0..4).filter(|&i| is_real_proj(&pts[i])).collect();
                let cplx: Vec<usize> = (0..4).filter(|&i| !is_real_proj(&pts[i])).collect();
                if partner(pts, cplx[0]) != Some(cplx[1]) {
                    continue;
                }
                (pts[real[0]], pts[real[1]], pts[cplx[0]], pts[cplx[1]])
            }
            _ => {
                let Some(j) = partner(pts, 0) else { continue };
                let rest: Vec<usize> = (1..4).filter(|&i| i != j).collect();
                if partner(pts, rest[0]) != Some(rest[1]) {
                    continue;
                }
                let (a3, b3, c3, d3) = (pts[0], pts[j], pts[rest[0]], pts[rest[1]]);
                if kind == PointType::S3 {
                    (a3, b3, c3, d3)
                } else {
                    (a3, d3, b3, c3)
                }
            }
        };
        let Some(p) = meet(&a, &b, &c, &d).and_then(|p| real_point(&p)) else { continue };
        return Ok(Construction { point: p, plane, plane_points: sec.points.clone() });
    }
    Err(EllipticError::ConstructionFailed("no suitable plane found"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn d_point() -> [C64; 4] {
        [c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)]
    }

    #[test]
    fn example_pencil_contains_known_points() {
        let pencil = QuadricPencil::example();
        for p in [
            [c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(1.0, 0.0), c(0.0, -1.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
            d_point(),
        ] {
            assert!(pencil.contains(&p, 1e-15));
        }
    }

    #[test]
    fn quadric_validation() {
        assert_eq!(Quadric::new([[0.0; 4]; 4]), Err(EllipticError::ZeroQuadric));
        let mut m = [[0.0; 4]; 4];
        m[0][1] = 1.0;
        assert_eq!(Quadric::new(m), Err(EllipticError::NotSymmetric));
    }

    #[test]
    fn example_pencil_is_smooth() {
        let rep = QuadricPencil::example().smoothness_probe();
        assert!(rep.smooth);
        assert_eq!(rep.cone_vertices.len(), 4);
    }

    #[test]
    fn cone_pencil_is_flagged() {
        // x0² + x1² - x2² and x0 x3 share the vertex [0:0:0:1] on the curve.
        let q1 = Quadric::new([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, -1.0, 0.0], [0.0; 4]]).unwrap();
        let q2 = Quadric::new([[0.0, 0.0, 0.0, 0.5], [0.0; 4], [0.0; 4], [0.5, 0.0, 0.0, 0.0]]).unwrap();
        assert!(!QuadricPencil { q1, q2 }.smoothness_probe().smooth);
    }

    #[test]
    fn plane_x2_zero_is_two_two() {
        let pencil = QuadricPencil::example();
        let sec = intersect_plane(&pencil, &[0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(sec.signature, PlaneSignature { real_count: 2, nonreal_count: 2 });
        let a = normalized(&[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(sec.points.iter().any(|p| proj_dist(p, &a) < 1e-8));
        for p in &sec.points {
            assert!(pencil.contains(p, 1e-9));
        }
    }

    #[test]
    fn steep_plane_is_zero_four() {
        let sec = intersect_plane(&QuadricPencil::example(), &[0.0, 0.0, 1.0, -2.0]).unwrap();
        assert_eq!(sec.signature.real_count, 0);
    }

    #[test]
    fn tangent_plane_reports_d() {
        match intersect_plane(&QuadricPencil::example(), &[0.0, 0.0, 1.0, -1.0]) {
            Err(EllipticError::Tangent { point }) => assert!(proj_dist(&point, &d_point()) < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn both_tangent_planes_and_their_neighbours() {
        let pencil = QuadricPencil::example();
        let other = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)];
        match intersect_plane(&pencil, &[0.0, 0.0, 1.0, 1.0]) {
            Err(EllipticError::Tangent { point }) => assert!(proj_dist(&point, &other) < 1e-6),
            other => panic!("{other:?}"),
        }
        for (k, real) in [(-0.9999, 2), (-0.99999999, 2), (-1.0001, 0), (0.9999, 2), (1.0001, 0)] {
            let sec = intersect_plane(&pencil, &[0.0, 0.0, 1.0, -k]).unwrap();
            assert_eq!(sec.signature.real_count, real, "k = {k}");
        }
    }

    #[test]
    fn pencil_scan_rejects_bad_base_line() {
        let q = Quadric::new([[1.0, 0.0, 0.0, 0.0], [0.0, -1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]).unwrap();
        let pencil = QuadricPencil { q1: q, q2: QuadricPencil::example().q2 };
        assert_eq!(pencil_scan(&pencil, &[0.0], &Sequential), Err(EllipticError::BaseLine));
    }

    /// The secant lines through P lie on the pencil quadric through P, so
    /// they are its two rulings through P: the tangent plane at P cuts that
    /// quadric in exactly these lines.
    fn rulings_through(pencil: &QuadricPencil, p: &[f64; 4]) -> Vec<[C64; 4]> {
        let pc = real_to_c4(p);
        let lam = -pencil.q1.eval(&pc) / pencil.q2.eval(&pc);
        let mut m = [[C64::new(0.0, 0.0); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = pencil.q1.m[i][j] + lam * pencil.q2.m[i][j];
            }
        }
        let grad: Vec<C64> = (0..4).map(|i| (0..4).map(|j| m[i][j] * pc[j]).sum()).collect();
        // Basis e1, e2 of the tangent plane modulo P: null space of [grad; p].
        let rows = CMatrix::from_rows(&[grad.clone(), pc.to_vec()]);
        let mut es = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        while es.len() < 2 {
            let r = random_complex_vec(&mut rng, 4);
            let rows3 = CMatrix::from_rows(&[rows.row(0).to_vec(), rows.row(1).to_vec(), r]);
            if let Some(v) = null_vector(&rows3, 1e-12) {
                es.push(to_c4(&v));
            }
        }
        let q = |x: &[C64; 4], y: &[C64; 4]| -> C64 {
            (0..4).map(|i| (0..4).map(|j| x[i] * m[i][j] * y[j]).sum::<C64>()).sum()
        };
        // q(a e1 + e2) = a² q11 + 2a q12 + q22.
        let (q11, q12, q22) = (q(&es[0], &es[0]), q(&es[0], &es[1]), q(&es[1], &es[1]));
        let disc = (q12 * q12 - q11 * q22).sqrt();
        [(-q12 + disc) / q11, (-q12 - disc) / q11]
            .iter()
            .map(|a| core::array::from_fn(|k| a * es[0][k] + es[1][k]))
            .collect()
    }

    /// x lies on the line through p and dir iff every 3 x 3 minor of
    /// [p dir x] vanishes.
    fn on_line(p: &[f64; 4], dir: &[C64; 4], x: &[C64; 4]) -> bool {
        let cols = [real_to_c4(p), normalized(dir), normalized(x)];
        let det3 = |r: [usize; 3]| -> C64 {
            let m = |i: usize, j: usize| cols[j][r[i]];
            m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
                + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
        };
        [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]].iter().all(|&r| det3(r).norm() < 1e-8)
    }

    #[test]
    fn secants_are_the_rulings_of_the_pencil_quadric() {
        let pencil = QuadricPencil::example();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let p: [f64; 4] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let lines = secant_lines_through(&pencil, &p).unwrap();
            assert_eq!(lines.len(), 2);
            let rulings = rulings_through(&pencil, &p);
            for l in &lines {
                for x in &l.points {
                    assert!(pencil.contains(x, 1e-9));
                }
                assert!(rulings.iter().any(|r| on_line(&p, r, &l.points[0]) && on_line(&p, r, &l.points[1])));
            }
        }
    }

    #[test]
    fn known_secant_is_recovered() {
        let pencil = QuadricPencil::example();
        let a = [0.0, 1.0, 0.0, -1.0];
        let b = [1.0, 1.0, -1.0, -1.0];
        let p: [f64; 4] = core::array::from_fn(|k| 0.3 * a[k] + 0.7 * b[k]);
        let lines = secant_lines_through(&pencil, &p).unwrap();
        let target = [normalized(&real_to_c4(&a)), normalized(&real_to_c4(&b))];
        assert!(lines.iter().any(|l| {
            l.points.iter().all(|x| target.iter().any(|t| proj_dist(x, t) < 1e-8)) && l.points_real == (true, true)
        }));
    }

    #[test]
    fn point_on_a_cone_of_the_pencil_is_degenerate() {
        // Q1 - Q2 = x2² + x3(x0 + x1 + x3) is a cone containing the secant
        // through [0:1:0:-1] and [1:0:0:-1]; its two rulings coincide there.
        let err = secant_lines_through(&QuadricPencil::example(), &[0.7, 0.3, 0.0, -1.0]).unwrap_err();
        assert!(matches!(err, EllipticError::Degenerate(_)));
    }

    #[test]
    fn point_on_curve_is_degenerate() {
        let err = secant_lines_through(&QuadricPencil::example(), &[0.0, 1.0, 0.0, -1.0]).unwrap_err();
        assert!(matches!(err, EllipticError::Degenerate(_)));
    }

    #[test]
    fn constructions_have_their_types() {
        let pencil = QuadricPencil::example();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in [PointType::S1, PointType::S2, PointType::S3, PointType::S4] {
            let cons = construct_point(&pencil, kind, &mut rng).unwrap();
            let cls = classify_point(&pencil, &cons.point).unwrap();
            assert_eq!(cls.point_type, kind, "{cls:?}");
        }
    }
}
