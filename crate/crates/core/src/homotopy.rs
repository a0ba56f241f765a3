//! Predictor–corrector tracking along segment homotopies in parameter space.
//!
//! A [`SegmentHomotopy`] moves the parameters of a square [`PolySystem`]
//! along `p(t) = (1 - t)·γ·p0 + t·p1` for `t` in `[0, 1]`. With `γ = 1`
//! this is the plain segment. A non-trivial `γ` is only meaningful when the
//! system is homogeneous in its parameters (start/target blends `a·G + b·F`),
//! where `γ·p0` and `p0` have the same solutions.
//!
//! The predictor is an explicit Euler step on the Davidenko equation
//! `J_x ẋ = -∂F/∂p · ṗ`; the corrector runs a few Newton steps at fixed `t`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::{LinalgError, Lu};
use crate::poly::{MPoly, PolyError, PolySystem};
use crate::util::max_abs;
use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HomotopyError {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("system must be square, got {polys} equations in {unknowns} unknowns")]
    NotSquare { polys: usize, unknowns: usize },
    #[error("gamma must have unit modulus, got |gamma| = {0}")]
    BadGamma(f64),
    #[error("invalid track settings: {0}")]
    BadSettings(&'static str),
    #[error("start point is not a solution at t = 0 (relative residual {0:e})")]
    BadStart(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error("Jacobian is numerically singular (condition estimate {0:e})")]
    Singular(f64),
    #[error("Newton did not converge; best relative residual {residual:e}")]
    NotConverged { point: Vec<C64>, residual: f64 },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Jacobians with a larger pivot-ratio estimate are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackSettings {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Relative residual required of polished endpoints.
    pub corrector_tol: f64,
    pub max_corrector_iters: usize,
    pub max_steps: usize,
    pub divergence_norm: f64,
    /// Relative Newton update below which a corrector step counts as
    /// converged while following the path.
    pub path_tol: f64,
    /// Jacobians met while following a path count as singular above this
    /// condition estimate. Endpoints are always polished under
    /// [`MAX_CONDITION`].
    pub max_condition: f64,
}

impl Default for TrackSettings {
    fn default() -> Self {
        TrackSettings {
            initial_step: 0.05,
            min_step: 1e-7,
            max_step: 0.1,
            corrector_tol: 1e-10,
            max_corrector_iters: 4,
            max_steps: 10_000,
            divergence_norm: 1e8,
            path_tol: 1e-8,
            max_condition: MAX_CONDITION,
        }
    }
}

impl TrackSettings {
    pub fn validate(&self) -> Result<(), HomotopyError> {
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step) {
            return Err(HomotopyError::BadSettings("need 0 < min_step <= initial_step"));
        }
        if !(self.initial_step <= self.max_step && self.max_step < 1.0) {
            return Err(HomotopyError::BadSettings("need initial_step <= max_step < 1"));
        }
        if !(self.corrector_tol > 0.0 && self.path_tol > 0.0 && self.divergence_norm > 0.0 && self.max_condition > 1.0) {
            return Err(HomotopyError::BadSettings("tolerances must be positive"));
        }
        if self.max_corrector_iters == 0 || self.max_steps == 0 {
            return Err(HomotopyError::BadSettings("iteration limits must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SegmentHomotopy<'a> {
    system: &'a PolySystem,
    params_start: Vec<C64>,
    params_end: Vec<C64>,
    gamma: C64,
}

impl<'a> SegmentHomotopy<'a> {
    pub fn new(system: &'a PolySystem, params_start: Vec<C64>, params_end: Vec<C64>) -> Result<Self, HomotopyError> {
        if !system.is_square() {
            return Err(HomotopyError::NotSquare { polys: system.num_polys(), unknowns: system.num_unknowns() });
        }
        for p in [&params_start, &params_end] {
            if p.len() != system.num_params() {
                return Err(PolyError::DimensionMismatch { expected: system.num_params(), got: p.len() }.into());
            }
        }
        Ok(SegmentHomotopy { system, params_start, params_end, gamma: C64::new(1.0, 0.0) })
    }

    pub fn with_gamma(mut self, gamma: C64) -> Result<Self, HomotopyError> {
        if (gamma.norm() - 1.0).abs() > 1e-12 {
            return Err(HomotopyError::BadGamma(gamma.norm()));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn system(&self) -> &PolySystem {
        self.system
    }

    pub fn gamma(&self) -> C64 {
        self.gamma
    }

    pub fn params_at(&self, t: f64) -> Vec<C64> {
        if t == 1.0 {
            return self.params_end.clone();
        }
        if t == 0.0 && self.gamma == C64::new(1.0, 0.0) {
            return self.params_start.clone();
        }
        let a = self.gamma * (1.0 - t);
        self.params_start
            .iter()
            .zip(&self.params_end)
            .map(|(p0, p1)| a * p0 + p1 * t)
            .collect()
    }

    fn dparams(&self) -> Vec<C64> {
        self.params_start
            .iter()
            .zip(&self.params_end)
            .map(|(p0, p1)| p1 - self.gamma * p0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    Success,
    /// The solution norm exceeded `divergence_norm`.
    Diverged,
    /// The step size fell below `min_step`, or the endpoint is singular.
    Singular,
    StepLimitReached,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub status: PathStatus,
    /// Last accepted point (the polished endpoint on success).
    pub endpoint: Vec<C64>,
    pub final_residual: f64,
    pub steps_taken: usize,
    /// Last accepted value of `t`.
    pub t: f64,
}

impl PathResult {
    pub fn is_success(&self) -> bool {
        self.status == PathStatus::Success
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub point: Vec<C64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Max over coordinates of |dx_k| / (1 + |x_k|).
fn rel_step(dx: &[C64], x: &[C64]) -> f64 {
    dx.iter().zip(x).map(|(d, v)| d.norm() / (1.0 + v.norm())).fold(0.0, f64::max)
}

fn factor_jacobian(sys: &PolySystem, x: &[C64], params: &[C64], max_condition: f64) -> Result<Lu, NewtonError> {
    let jac = sys.jacobian(x, params)?;
    match Lu::factor(&jac) {
        Ok(lu) if lu.condition_estimate() < max_condition => Ok(lu),
        Ok(lu) => Err(NewtonError::Singular(lu.condition_estimate())),
        Err(LinalgError::Singular) | Err(LinalgError::NotSquare { .. }) => Err(NewtonError::Singular(f64::INFINITY)),
    }
}

/// Newton's method at fixed parameters until the relative residual drops
/// to `tol`.
pub fn newton_refine(
    sys: &PolySystem,
    params: &[C64],
    point: &[C64],
    tol: f64,
    max_iters: usize,
) -> Result<Refined, NewtonError> {
    let mut x = point.to_vec();
    let mut best = (x.clone(), f64::INFINITY);
    for it in 0..=max_iters {
        let ev = sys.evaluate_scaled(&x, params)?;
        let res = ev.relative_residual();
        if res < best.1 {
            best = (x.clone(), res);
        }
        if res <= tol {
            let (point, residual) = sharpen(sys, params, x, res);
            return Ok(Refined { point, residual, iterations: it });
        }
        if it == max_iters || !res.is_finite() {
            break;
        }
        let lu = factor_jacobian(sys, &x, params, MAX_CONDITION)?;
        let rhs: Vec<C64> = ev.values.iter().map(|v| -v).collect();
        let dx = lu.solve(&rhs);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    Err(NewtonError::NotConverged { point: best.0, residual: best.1 })
}

/// A small residual does not mean a small error when the Jacobian is
/// moderately ill-conditioned, so keep stepping while the residual falls.
fn sharpen(sys: &PolySystem, params: &[C64], mut x: Vec<C64>, mut res: f64) -> (Vec<C64>, f64) {
    for _ in 0..3 {
        let Ok(ev) = sys.evaluate_scaled(&x, params) else { break };
        let Ok(lu) = factor_jacobian(sys, &x, params, MAX_CONDITION) else { break };
        let dx = lu.solve(&ev.values.iter().map(|v| -v).collect::<Vec<_>>());
        let y: Vec<C64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let Ok(next) = sys.evaluate_scaled(&y, params).map(|e| e.relative_residual()) else { break };
        if !(next < res) {
            break;
        }
        (x, res) = (y, next);
    }
    (x, res)
}

/// Corrector: at most `max_corrector_iters` Newton steps, each required to
/// contract the previous one. Converged once the update drops below
/// `path_tol` or the relative residual below `corrector_tol`; the latter
/// matters for ill-conditioned Jacobians, whose updates bottom out at
/// round-off level.
fn correct(sys: &PolySystem, params: &[C64], guess: Vec<C64>, s: &TrackSettings) -> Option<Vec<C64>> {
    let mut x = guess;
    let mut prev = f64::INFINITY;
    for it in 0..=s.max_corrector_iters {
        let ev = sys.evaluate_scaled(&x, params).ok()?;
        if it > 0 && ev.relative_residual() <= s.corrector_tol {
            return Some(x);
        }
        if it == s.max_corrector_iters {
            break;
        }
        let lu = factor_jacobian(sys, &x, params, s.max_condition).ok()?;
        let rhs: Vec<C64> = ev.values.iter().map(|v| -v).collect();
        let dx = lu.solve(&rhs);
        let step = rel_step(&dx, &x);
        if !step.is_finite() || step > 0.1 || (step > 0.5 * prev && step > s.path_tol) {
            return None;
        }
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        if step < s.path_tol {
            return Some(x);
        }
        prev = step;
    }
    None
}

/// Follows the solution path starting at `start` (a solution at `t = 0`)
/// to `t = 1`.
pub fn track(h: &SegmentHomotopy<'_>, start: &[C64], settings: &TrackSettings) -> Result<PathResult, HomotopyError> {
    settings.validate()?;
    let sys = h.system;
    let p0 = h.params_at(0.0);
    let res0 = sys.relative_residual(start, &p0)?;
    let mut x = start.to_vec();
    if res0 > settings.corrector_tol {
        match newton_refine(sys, &p0, start, settings.corrector_tol, 3) {
            Ok(r) if rel_step(
                &r.point.iter().zip(start).map(|(a, b)| a - b).collect::<Vec<_>>(),
                start,
            ) < 1e-6 =>
            {
                x = r.point
            }
            _ => return Err(HomotopyError::BadStart(res0)),
        }
    }
    let dp = h.dparams();
    let mut t = 0.0f64;
    let mut step = settings.initial_step;
    let mut streak = 0;
    let mut steps = 0;

    let fail = |status, x: Vec<C64>, t: f64, steps: usize| {
        let final_residual = sys.relative_residual(&x, &h.params_at(t)).unwrap_or(f64::INFINITY);
        Ok(PathResult { status, endpoint: x, final_residual, steps_taken: steps, t })
    };

    while t < 1.0 {
        if steps >= settings.max_steps {
            return fail(PathStatus::StepLimitReached, x, t, steps);
        }
        steps += 1;
        let t_next = if t + step >= 1.0 { 1.0 } else { t + step };
        let dt = t_next - t;

        let pt = h.params_at(t);
        let predicted = (|| {
            let lu = factor_jacobian(sys, &x, &pt, settings.max_condition).ok()?;
            let rhs: Vec<C64> = sys.param_derivative(&x, &pt, &dp).ok()?.iter().map(|v| -v).collect();
            let xdot = lu.solve(&rhs);
            Some(x.iter().zip(&xdot).map(|(a, b)| a + b * dt).collect::<Vec<_>>())
        })();

        let corrected = predicted.and_then(|guess| correct(sys, &h.params_at(t_next), guess, settings));
        match corrected {
            Some(xc) => {
                x = xc;
                t = t_next;
                streak += 1;
                if streak >= 3 {
                    step = (2.0 * step).min(settings.max_step);
                    streak = 0;
                }
                if max_abs(&x) > settings.divergence_norm {
                    return fail(PathStatus::Diverged, x, t, steps);
                }
            }
            None => {
                step *= 0.5;
                streak = 0;
                if step < settings.min_step {
                    return fail(PathStatus::Singular, x, t, steps);
                }
            }
        }
    }

    let p1 = h.params_at(1.0);
    match newton_refine(sys, &p1, &x, settings.corrector_tol, 8) {
        Ok(r) => Ok(PathResult {
            status: PathStatus::Success,
            endpoint: r.point,
            final_residual: r.residual,
            steps_taken: steps,
            t: 1.0,
        }),
        Err(_) => fail(PathStatus::Singular, x, 1.0, steps),
    }
}

/// The blended system `a·G + b·F` over `[unknowns | a, b]`. Tracking it from
/// parameters `(1, 0)` to `(0, 1)` with a random `γ` is the classic
/// gamma-trick homotopy from start system `G` to target `F`.
pub fn start_target_system(start: &[MPoly], target: &[MPoly]) -> Result<PolySystem, HomotopyError> {
    if start.len() != target.len() {
        return Err(HomotopyError::NotSquare { polys: target.len(), unknowns: start.len() });
    }
    let n = target.first().map_or(0, MPoly::num_vars);
    let map: Vec<usize> = (0..n).collect();
    let a = MPoly::var(n + 2, n);
    let b = MPoly::var(n + 2, n + 1);
    let polys = start
        .iter()
        .zip(target)
        .map(|(g, f)| {
            if g.num_vars() != n || f.num_vars() != n {
                return Err(PolyError::DimensionMismatch { expected: n, got: g.num_vars().min(f.num_vars()) });
            }
            Ok(&(&a * &g.embed(n + 2, &map)) + &(&b * &f.embed(n + 2, &map)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolySystem::new(polys, n, 2)?)
}

/// Tracks every start solution of `G` to `F` along the gamma-trick blend.
pub fn solve_start_target(
    start: &[MPoly],
    target: &[MPoly],
    start_solutions: &[Vec<C64>],
    gamma: C64,
    settings: &TrackSettings,
) -> Result<Vec<PathResult>, HomotopyError> {
    let sys = start_target_system(start, target)?;
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let h = SegmentHomotopy::new(&sys, vec![one, zero], vec![zero, one])?.with_gamma(gamma)?;
    start_solutions.iter().map(|s| track(&h, s, settings)).collect()
}

/// Total-degree start system `x_i^{d_i} - 1` for the given target and its
/// `prod d_i` roots.
pub fn total_degree_start(target: &[MPoly]) -> (Vec<MPoly>, Vec<Vec<C64>>) {
    let n = target.len();
    let degrees: Vec<u32> = target.iter().map(|p| p.total_degree().max(1)).collect();
    let start = degrees
        .iter()
        .enumerate()
        .map(|(i, &d)| &MPoly::var(n, i).pow(d) - &MPoly::constant(n, C64::new(1.0, 0.0)))
        .collect();
    let mut sols: Vec<Vec<C64>> = vec![Vec::new()];
    for &d in &degrees {
        let roots: Vec<C64> = (0..d)
            .map(|k| C64::from_polar(1.0, core::f64::consts::TAU * k as f64 / d as f64))
            .collect();
        sols = sols
            .into_iter()
            .flat_map(|s| {
                roots.iter().map(move |r| {
                    let mut s = s.clone();
                    s.push(*r);
                    s
                })
            })
            .collect();
    }
    (start, sols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::{random_unit, rel_dist};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// x^2 - p over [x | p].
    fn sqrt_system() -> PolySystem {
        let x = MPoly::var(2, 0);
        let p = MPoly::var(2, 1);
        PolySystem::new(vec![&x.pow(2) - &p], 1, 1).unwrap()
    }

    #[test]
    fn tracks_square_root_branches() {
        let sys = sqrt_system();
        let h = SegmentHomotopy::new(&sys, vec![c(1.0, 0.0)], vec![c(4.0, 0.0)]).unwrap();
        let s = TrackSettings::default();
        let r = track(&h, &[c(1.0, 0.0)], &s).unwrap();
        assert!(r.is_success());
        assert!((r.endpoint[0] - c(2.0, 0.0)).norm() < 1e-10);
        assert!(r.final_residual < s.corrector_tol);
        let r = track(&h, &[c(-1.0, 0.0)], &s).unwrap();
        assert!((r.endpoint[0] - c(-2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn rejects_non_solution_start() {
        let sys = sqrt_system();
        let h = SegmentHomotopy::new(&sys, vec![c(1.0, 0.0)], vec![c(4.0, 0.0)]).unwrap();
        assert!(matches!(
            track(&h, &[c(3.0, 0.0)], &TrackSettings::default()),
            Err(HomotopyError::BadStart(_))
        ));
    }

    #[test]
    fn gamma_must_be_unit() {
        let sys = sqrt_system();
        let h = SegmentHomotopy::new(&sys, vec![c(1.0, 0.0)], vec![c(4.0, 0.0)]).unwrap();
        assert!(matches!(h.with_gamma(c(2.0, 0.0)), Err(HomotopyError::BadGamma(_))));
    }

    #[test]
    fn params_hit_both_ends() {
        let sys = sqrt_system();
        let h = SegmentHomotopy::new(&sys, vec![c(1.0, 2.0)], vec![c(4.0, -1.0)]).unwrap();
        assert_eq!(h.params_at(0.0), vec![c(1.0, 2.0)]);
        assert_eq!(h.params_at(1.0), vec![c(4.0, -1.0)]);
    }

    #[test]
    fn settings_validation() {
        let mut s = TrackSettings::default();
        assert!(s.validate().is_ok());
        s.min_step = 0.2;
        assert!(s.validate().is_err());
    }

    #[test]
    fn newton_on_sqrt_two() {
        let x = MPoly::var(1, 0);
        let sys = PolySystem::new(vec![&x.pow(2) - &MPoly::constant(1, c(2.0, 0.0))], 1, 0).unwrap();
        let r = newton_refine(&sys, &[], &[c(1.4, 0.0)], 1e-15, 10).unwrap();
        assert!(r.iterations <= 3);
        assert!((r.point[0].re - core::f64::consts::SQRT_2).abs() < 1e-15);

        let exact = [c(core::f64::consts::SQRT_2, 0.0)];
        let r = newton_refine(&sys, &[], &exact, 1e-15, 10).unwrap();
        assert!((r.point[0] - exact[0]).norm() < 1e-14);
    }

    #[test]
    fn newton_reports_singular_jacobian() {
        // x^2 at x = 0 has a zero derivative.
        let x = MPoly::var(1, 0);
        let sys = PolySystem::new(vec![&x.pow(2) + &MPoly::constant(1, c(1.0, 0.0))], 1, 0).unwrap();
        assert!(matches!(
            newton_refine(&sys, &[], &[c(0.0, 0.0)], 1e-12, 5),
            Err(NewtonError::Singular(_))
        ));
    }

    /// A real quadratic target in two unknowns solved from the total-degree
    /// start system.
    fn real_target() -> Vec<MPoly> {
        let x = MPoly::var(2, 0);
        let y = MPoly::var(2, 1);
        let k = |v: f64| MPoly::constant(2, c(v, 0.0));
        vec![
            &(&(&x.pow(2) + &y.pow(2)) - &k(4.0)) + &(&x * &k(0.3)),
            &(&(&x * &y) - &k(1.0)) + &(&y * &k(-0.7)),
        ]
    }

    #[test]
    fn total_degree_solve_finds_all_roots() {
        let target = real_target();
        let (start, sols) = total_degree_start(&target);
        assert_eq!(sols.len(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gamma = random_unit(&mut rng);
        let res = solve_start_target(&start, &target, &sols, gamma, &TrackSettings::default()).unwrap();
        let ends: Vec<_> = res.iter().filter(|r| r.is_success()).map(|r| r.endpoint.clone()).collect();
        assert_eq!(ends.len(), 4);
        for i in 0..4 {
            for j in i + 1..4 {
                assert!(rel_dist(&ends[i], &ends[j]) > 1e-6);
            }
        }
    }

    #[test]
    fn conjugate_gamma_gives_conjugate_endpoints() {
        let target = real_target();
        let (start, sols) = total_degree_start(&target);
        let gamma = c(0.6, 0.8);
        let s = TrackSettings::default();
        let fwd = solve_start_target(&start, &target, &sols, gamma, &s).unwrap();
        let conj_sols: Vec<Vec<C64>> = sols.iter().map(|v| v.iter().map(|z| z.conj()).collect()).collect();
        let bwd = solve_start_target(&start, &target, &conj_sols, gamma.conj(), &s).unwrap();
        for (a, b) in fwd.iter().zip(&bwd) {
            assert_eq!(a.status, b.status);
            let bc: Vec<C64> = b.endpoint.iter().map(|z| z.conj()).collect();
            assert!(rel_dist(&a.endpoint, &bc) < 1e-6);
        }
    }

    #[test]
    fn halving_max_step_keeps_the_branch() {
        let target = real_target();
        let (start, sols) = total_degree_start(&target);
        let gamma = c(0.28, -0.96);
        let s = TrackSettings::default();
        let fine = TrackSettings { max_step: s.max_step / 2.0, initial_step: s.initial_step / 2.0, ..s };
        let a = solve_start_target(&start, &target, &sols, gamma, &s).unwrap();
        let b = solve_start_target(&start, &target, &sols, gamma, &fine).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!(x.is_success() && y.is_success());
            assert!(rel_dist(&x.endpoint, &y.endpoint) < 1e-6);
        }
    }
}
