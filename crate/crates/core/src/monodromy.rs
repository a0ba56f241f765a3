//! Monodromy solving for Waring decompositions.
//!
//! Starting from one known decomposition of a base tensor, every known
//! solution is carried around a triangle `base -> P1 -> P2 -> base` in
//! parameter space, with P1 and P2 random complex tensors drawn fresh for
//! each loop. Endpoints that are new modulo summand permutation join the
//! registry; the run stops once the registry stops growing.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::ParallelMap;
use crate::homotopy::{newton_refine, track, HomotopyError, SegmentHomotopy, TrackSettings};
use crate::poly::PolySystem;
use crate::util::rel_dist;
use crate::waring::{build_system, random_complex_tensor, ChartScaling, Decomposition, TensorParams, WaringError, WaringSpec};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonodromyError {
    #[error(transparent)]
    Waring(#[from] WaringError),
    #[error(transparent)]
    Homotopy(#[from] HomotopyError),
    #[error("base tensor does not match the decomposition shape")]
    Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopPolicy {
    /// Stop after this many consecutive loops without a new solution.
    pub stable_loops: usize,
    /// Stop as soon as this many solutions are known.
    pub target_count: Option<usize>,
    pub max_loops: usize,
}

impl Default for StopPolicy {
    fn default() -> Self {
        StopPolicy { stable_loops: 8, target_count: None, max_loops: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyConfig {
    pub track: TrackSettings,
    pub policy: StopPolicy,
    /// Decompositions closer than this in [`canonical_distance`] coincide.
    pub dedup_tol: f64,
    /// Relative residual endpoints are polished to before registration.
    pub polish_tol: f64,
    /// Endpoints with some |λ_i| below this (relative to the largest |λ|)
    /// are degenerate and dropped.
    pub degenerate_tol: f64,
    pub seed: u64,
}

impl Default for MonodromyConfig {
    fn default() -> Self {
        MonodromyConfig {
            // Start tensors can carry summands several orders of magnitude
            // below the rest; their paths need very small first steps. Paths
            // that pass near the chart boundary (λ -> 0, l large) have badly
            // scaled Jacobians long before they are singular, so tracking
            // relies on corrector convergence rather than a pivot-ratio
            // cutoff. Endpoints are still polished under MAX_CONDITION.
            track: TrackSettings { min_step: 1e-13, max_steps: 50_000, max_condition: 1e22, ..TrackSettings::default() },
            policy: StopPolicy::default(),
            dedup_tol: 1e-6,
            polish_tol: 1e-10,
            degenerate_tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoopRecord {
    pub index: usize,
    pub paths: usize,
    pub failed: usize,
    pub new: usize,
    pub total: usize,
}

/// Distinct decompositions of one tensor, modulo summand permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRegistry {
    pub spec: WaringSpec,
    pub tensor: TensorParams,
    entries: Vec<Decomposition>,
    history: Vec<LoopRecord>,
    stabilized: bool,
    dedup_tol: f64,
}

impl SolutionRegistry {
    pub fn new(spec: WaringSpec, tensor: TensorParams, dedup_tol: f64) -> Self {
        SolutionRegistry { spec, tensor, entries: Vec::new(), history: Vec::new(), stabilized: false, dedup_tol }
    }

    /// Adds `dec` unless an equivalent one is known; returns whether it was new.
    pub fn insert(&mut self, dec: Decomposition) -> bool {
        if self.contains(&dec) {
            return false;
        }
        self.entries.push(dec);
        true
    }

    pub fn contains(&self, dec: &Decomposition) -> bool {
        self.entries.iter().any(|e| canonical_distance(e, dec) < self.dedup_tol)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn decompositions(&self) -> &[Decomposition] {
        &self.entries
    }

    pub fn history(&self) -> &[LoopRecord] {
        &self.history
    }

    pub fn loops_run(&self) -> usize {
        self.history.len()
    }

    /// Whether the stop policy was met before `max_loops` ran out.
    pub fn is_stabilized(&self) -> bool {
        self.stabilized
    }

    pub fn dedup_tol(&self) -> f64 {
        self.dedup_tol
    }
}

/// Bottleneck distance between two decompositions: the minimum over summand
/// matchings of the largest per-summand coordinate distance, where
/// coordinates `(l, λ)` are compared relatively, |a - b| / max(1, |a|, |b|).
pub fn canonical_distance(a: &Decomposition, b: &Decomposition) -> f64 {
    let r = a.rank();
    if r != b.rank() || a.n() != b.n() {
        return f64::INFINITY;
    }
    if r == 0 {
        return 0.0;
    }
    let ca: Vec<Vec<C64>> = a.summands.iter().map(|s| s.coordinates()).collect();
    let cb: Vec<Vec<C64>> = b.summands.iter().map(|s| s.coordinates()).collect();
    let cost: Vec<Vec<f64>> = ca.iter().map(|x| cb.iter().map(|y| rel_dist(x, y)).collect()).collect();
    let mut levels: Vec<f64> = cost.iter().flatten().copied().collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    // Smallest threshold admitting a perfect matching.
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if has_perfect_matching(&cost, levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    levels[lo]
}

fn has_perfect_matching(cost: &[Vec<f64>], threshold: f64) -> bool {
    let r = cost.len();
    let mut owner: Vec<Option<usize>> = alloc::vec![None; r];
    for i in 0..r {
        let mut seen = alloc::vec![false; r];
        if !augment(i, cost, threshold, &mut owner, &mut seen) {
            return false;
        }
    }
    true
}

fn augment(i: usize, cost: &[Vec<f64>], threshold: f64, owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for j in 0..cost.len() {
        if cost[i][j] <= threshold && !seen[j] {
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, cost, threshold, owner, seen)) {
                owner[j] = Some(i);
                return true;
            }
        }
    }
    false
}

/// Carries `start` (a solution at `base`) along `base -> p1 -> p2 -> base`.
/// Returns the unpolished endpoint, or `None` if any leg fails.
pub fn triangle_loop(
    sys: &PolySystem,
    base: &[C64],
    p1: &[C64],
    p2: &[C64],
    start: &[C64],
    settings: &TrackSettings,
) -> Result<Option<Vec<C64>>, HomotopyError> {
    let mut x = start.to_vec();
    for (from, to) in [(base, p1), (p1, p2), (p2, base)] {
        let h = SegmentHomotopy::new(sys, from.to_vec(), to.to_vec())?;
        let res = match track(&h, &x, settings) {
            Ok(res) => res,
            Err(HomotopyError::BadStart(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !res.is_success() {
            return Ok(None);
        }
        x = res.endpoint;
    }
    Ok(Some(x))
}

/// Runs monodromy loops from one known decomposition of `base` until the
/// stop policy is met. Loops are reproducible from `config.seed` and
/// independent of the executor.
pub fn solve<P: ParallelMap>(
    spec: &WaringSpec,
    base: &TensorParams,
    start: &Decomposition,
    config: &MonodromyConfig,
    exec: &P,
) -> Result<SolutionRegistry, MonodromyError> {
    config.track.validate()?;
    let sys = build_system(spec)?;
    if base.coeffs.len() != spec.num_equations() || start.rank() != spec.r || start.n() != spec.n {
        return Err(MonodromyError::Shape);
    }
    let polished = newton_refine(&sys, &base.coeffs, &start.to_unknowns(), config.polish_tol, 8)
        .map_err(|e| match e {
            crate::homotopy::NewtonError::NotConverged { residual, .. } => WaringError::BadStart(residual),
            _ => WaringError::BadStart(f64::INFINITY),
        })?;
    let start = Decomposition::from_unknowns(spec, &polished.point)?;

    // Loops run in balanced coordinates; the registry stays in the caller's.
    let scaling = ChartScaling::balancing(&start);
    let scaled_base = scaling.apply_tensor(base).coeffs;
    let scaled_start = scaling.apply(&start);

    let mut registry = SolutionRegistry::new(*spec, base.clone(), config.dedup_tol);
    registry.insert(start);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let policy = config.policy;
    let mut quiet = 0;

    for index in 0..policy.max_loops {
        if policy.target_count.is_some_and(|t| registry.len() >= t) {
            registry.stabilized = true;
            break;
        }
        let p1 = random_complex_tensor(spec, &scaled_start, &mut rng).coeffs;
        let p2 = random_complex_tensor(spec, &scaled_start, &mut rng).coeffs;
        let known: Vec<Vec<C64>> = registry.entries.iter().map(|d| scaling.apply(d).to_unknowns()).collect();
        let paths = known.len();
        let ends = exec.map(known, |x| {
            let end = triangle_loop(&sys, &scaled_base, &p1, &p2, &x, &config.track).ok().flatten()?;
            let refined = newton_refine(&sys, &scaled_base, &end, config.polish_tol, 8).ok()?;
            let dec = scaling.undo(&Decomposition::from_unknowns(spec, &refined.point).ok()?);
            let polished = newton_refine(&sys, &base.coeffs, &dec.to_unknowns(), config.polish_tol, 4).ok()?;
            let dec = Decomposition::from_unknowns(spec, &polished.point).ok()?;
            let lam_max = dec.summands.iter().map(|s| s.lambda.norm()).fold(0.0, f64::max);
            if dec.summands.iter().any(|s| s.lambda.norm() <= config.degenerate_tol * lam_max) {
                return None;
            }
            Some(dec)
        });
        let failed = ends.iter().filter(|e| e.is_none()).count();
        let new = ends.into_iter().flatten().filter(|d| registry.insert(d.clone())).count();
        registry.history.push(LoopRecord { index, paths, failed, new, total: registry.len() });
        quiet = if new == 0 { quiet + 1 } else { 0 };
        if policy.target_count.is_some_and(|t| registry.len() >= t) || quiet >= policy.stable_loops {
            registry.stabilized = true;
            break;
        }
    }
    Ok(registry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::waring::{random_real_start, Summand};
    use alloc::vec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn dec(rows: &[(f64, f64)]) -> Decomposition {
        Decomposition::new(rows.iter().map(|&(l, lam)| Summand { l: vec![c(l, 0.0)], lambda: c(lam, 0.0) }).collect())
    }

    #[test]
    fn canonical_distance_ignores_order() {
        let a = dec(&[(1.0, 2.0), (-3.0, 0.5), (0.25, 7.0)]);
        let b = dec(&[(0.25, 7.0), (1.0, 2.0), (-3.0, 0.5)]);
        assert_eq!(canonical_distance(&a, &b), 0.0);
        let c2 = dec(&[(0.25, 7.0), (1.0, 2.0), (-3.0, 0.6)]);
        let d = canonical_distance(&a, &c2);
        assert!((d - 0.1).abs() < 1e-12, "{d}");
    }

    #[test]
    fn canonical_distance_is_bottleneck_not_greedy() {
        // Greedy matching of the first summand to its nearest would force
        // a large second distance.
        let a = dec(&[(0.0, 1.0), (0.1, 1.0)]);
        let b = dec(&[(0.05, 1.0), (0.2, 1.0)]);
        assert!((canonical_distance(&a, &b) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn registry_deduplicates() {
        let spec = WaringSpec::new(3, 1, 2);
        let (d, t) = random_real_start(&spec, 0, 1.0).unwrap();
        let mut reg = SolutionRegistry::new(spec, t, 1e-6);
        assert!(reg.insert(d.clone()));
        let mut swapped = d.clone();
        swapped.summands.reverse();
        assert!(!reg.insert(swapped));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn binary_cubic_has_one_decomposition() {
        let spec = WaringSpec::new(3, 1, 2);
        let (d, t) = random_real_start(&spec, 11, 2.0).unwrap();
        let reg = solve(&spec, &t, &d, &MonodromyConfig::default(), &Sequential).unwrap();
        assert_eq!(reg.len(), 1);
        assert!(reg.is_stabilized());
        assert_eq!(reg.loops_run(), 8);
    }

    #[test]
    fn target_count_stops_early() {
        let spec = WaringSpec::new(3, 1, 2);
        let (d, t) = random_real_start(&spec, 4, 2.0).unwrap();
        let config = MonodromyConfig {
            policy: StopPolicy { target_count: Some(1), ..StopPolicy::default() },
            ..MonodromyConfig::default()
        };
        let reg = solve(&spec, &t, &d, &config, &Sequential).unwrap();
        assert_eq!(reg.loops_run(), 0);
        assert!(reg.is_stabilized());
    }

    #[test]
    fn rejects_wrong_start() {
        let spec = WaringSpec::new(3, 1, 2);
        let (d, t) = random_real_start(&spec, 5, 2.0).unwrap();
        let (other, _) = random_real_start(&spec, 6, 2.0).unwrap();
        assert!(solve(&spec, &t, &other, &MonodromyConfig::default(), &Sequential).is_err());
        let wrong = WaringSpec::new(5, 1, 3);
        assert!(solve(&wrong, &t, &d, &MonodromyConfig::default(), &Sequential).is_err());
    }
}
