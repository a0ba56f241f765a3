//! JSON reports, fixtures, a rayon executor and the command implementations
//! behind the `realid` binary.
//!
//! Every report is self-contained: it carries the schema id and the full run
//! configuration, and nothing time-dependent, so a sequential run with a
//! fixed seed is byte-identical across invocations.

pub mod cli;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use realid_core::elliptic::{self, EllipticError, PointClassification, PointType, QuadricPencil, ScanOutcome, SecantLine};
use realid_core::monodromy::{self, MonodromyConfig, SolutionRegistry, StopPolicy};
use realid_core::realcert::{self, DecompositionClass};
use realid_core::segre::{self, LinearSpace, SectionResult, SegreError, SegreSpec};
use realid_core::waring::{self, Decomposition, WaringSpec};
use realid_core::{ParallelMap, TrackSettings};

pub const SCHEMA: &str = "realid.report/1";

/// Default directory for reports when `--output` is not given.
pub const OUTPUT_DIR_ENV: &str = "REALID_OUTPUT_DIR";

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_UNSTABILIZED: i32 = 2;
pub const EXIT_NOT_FOUND: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Threads {
    Count(usize),
    #[serde(with = "auto")]
    Auto,
}

mod auto {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("auto")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "auto" {
            Ok(())
        } else {
            Err(serde::de::Error::custom("expected \"auto\""))
        }
    }
}

impl std::str::FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Threads::Auto),
            _ => match s.parse::<usize>() {
                Ok(n) if n > 0 => Ok(Threads::Count(n)),
                _ => Err(format!("threads must be a positive integer or \"auto\", got {s:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSettingsJson {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub corrector_tol: f64,
    pub max_corrector_iters: usize,
    pub max_steps: usize,
    pub divergence_norm: f64,
    pub path_tol: f64,
    pub max_condition: f64,
}

impl From<TrackSettings> for TrackSettingsJson {
    fn from(t: TrackSettings) -> Self {
        TrackSettingsJson {
            initial_step: t.initial_step,
            min_step: t.min_step,
            max_step: t.max_step,
            corrector_tol: t.corrector_tol,
            max_corrector_iters: t.max_corrector_iters,
            max_steps: t.max_steps,
            divergence_norm: t.divergence_norm,
            path_tol: t.path_tol,
            max_condition: t.max_condition,
        }
    }
}

impl From<TrackSettingsJson> for TrackSettings {
    fn from(t: TrackSettingsJson) -> Self {
        TrackSettings {
            initial_step: t.initial_step,
            min_step: t.min_step,
            max_step: t.max_step,
            corrector_tol: t.corrector_tol,
            max_corrector_iters: t.max_corrector_iters,
            max_steps: t.max_steps,
            divergence_norm: t.divergence_norm,
            path_tol: t.path_tol,
            max_condition: t.max_condition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopPolicyJson {
    pub stable_loops: usize,
    pub target_count: Option<usize>,
    pub max_loops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub settings: TrackSettingsJson,
    pub stop: StopPolicyJson,
    pub real_tol: f64,
    pub dedup_tol: f64,
    pub output_path: Option<PathBuf>,
    pub threads: Threads,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MonodromyConfig::default();
        RunConfig {
            seed: 0,
            settings: TrackSettings::default().into(),
            stop: StopPolicyJson {
                stable_loops: m.policy.stable_loops,
                target_count: m.policy.target_count,
                max_loops: m.policy.max_loops,
            },
            real_tol: realcert::REAL_TOL,
            dedup_tol: m.dedup_tol,
            output_path: None,
            threads: Threads::Count(1),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.settings;
        let positive = [
            ("real_tol", self.real_tol),
            ("dedup_tol", self.dedup_tol),
            ("initial_step", s.initial_step),
            ("min_step", s.min_step),
            ("max_step", s.max_step),
            ("corrector_tol", s.corrector_tol),
            ("path_tol", s.path_tol),
            ("divergence_norm", s.divergence_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive, got {v}");
            }
        }
        TrackSettings::from(*s).validate()?;
        Ok(())
    }

    pub fn monodromy(&self) -> MonodromyConfig {
        MonodromyConfig {
            track: self.settings.into(),
            policy: StopPolicy {
                stable_loops: self.stop.stable_loops,
                target_count: self.stop.target_count,
                max_loops: self.stop.max_loops,
            },
            dedup_tol: self.dedup_tol,
            seed: self.seed,
            ..MonodromyConfig::default()
        }
    }
}

/// Order-preserving parallel map on a dedicated rayon pool.
pub struct RayonMap {
    pool: rayon::ThreadPool,
}

impl RayonMap {
    pub fn new(threads: Threads) -> Result<Self> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Threads::Count(n) = threads {
            b = b.num_threads(n);
        }
        Ok(RayonMap { pool: b.build()? })
    }
}

impl ParallelMap for RayonMap {
    fn map<T, U, F>(&self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send,
    {
        self.pool.install(|| items.into_par_iter().map(f).collect())
    }
}

/// A finished command: exit code plus report.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit: i32,
    pub report: Value,
}

fn report(command: &str, config: &RunConfig, body: Value) -> Value {
    let mut r = json!({ "schema": SCHEMA, "command": command, "config": config });
    if let (Value::Object(r), Value::Object(b)) = (&mut r, body) {
        r.extend(b);
    }
    r
}

/// Where a report goes: the explicit path, else `$REALID_OUTPUT_DIR/<name>`.
pub fn output_path(config: &RunConfig, default_name: &str) -> Option<PathBuf> {
    config
        .output_path
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(|d| Path::new(&d).join(default_name)))
}

pub fn write_report(path: &Path, report: &Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, to_pretty(report)).with_context(|| format!("writing {}", path.display()))
}

pub fn to_pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports are plain JSON");
    s.push('\n');
    s
}

fn cjson(z: &C64) -> Value {
    json!([z.re, z.im])
}

fn cvec(v: &[C64]) -> Value {
    Value::Array(v.iter().map(cjson).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRow {
    pub l: Vec<f64>,
    pub lambda: f64,
}

pub fn load_fixture(path: &Path) -> Result<Vec<(Vec<f64>, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading fixture {}", path.display()))?;
    let rows: Vec<FixtureRow> = serde_json::from_str(&text).with_context(|| format!("parsing fixture {}", path.display()))?;
    Ok(rows.into_iter().map(|r| (r.l, r.lambda)).collect())
}

pub fn fixture_json(rows: &[(Vec<f64>, f64)]) -> String {
    let rows: Vec<FixtureRow> = rows.iter().map(|(l, lambda)| FixtureRow { l: l.clone(), lambda: *lambda }).collect();
    let mut s = serde_json::to_string_pretty(&rows).expect("fixture rows are plain JSON");
    s.push('\n');
    s
}

pub fn decomposition_json(d: &Decomposition) -> Value {
    json!({
        "summands": d.summands.iter().map(|s| json!({ "l": cvec(&s.l), "lambda": cjson(&s.lambda) })).collect::<Vec<_>>()
    })
}

pub fn registry_json(reg: &SolutionRegistry) -> Value {
    json!({
        "r": reg.spec.r,
        "n": reg.spec.n,
        "d": reg.spec.d,
        "solutions": reg.decompositions().iter().map(decomposition_json).collect::<Vec<_>>(),
        "history": reg.history().iter().map(|h| json!({
            "loop": h.index, "paths": h.paths, "failed": h.failed, "new": h.new, "total": h.total
        })).collect::<Vec<_>>(),
    })
}

fn class_json(c: &DecompositionClass) -> Value {
    match c {
        DecompositionClass::Real => json!({ "class": "real" }),
        DecompositionClass::Autoconjugate => json!({ "class": "autoconjugate" }),
        DecompositionClass::ConjugatePairMember { partner } => json!({ "class": "conjugate_pair", "partner": partner }),
    }
}

pub fn classified_json(c: &realcert::ClassifiedSet) -> Value {
    json!({
        "total": c.total(),
        "real": c.real(),
        "autoconjugate": c.autoconjugate(),
        "conjugate_pairs": c.pair_members(),
        "identifiable_over_R": c.identifiable_over_r(),
        "identifiable_over_C": c.identifiable_over_c(),
        "real_tolerance": c.real_tolerance,
        "classes": c.classes.iter().map(class_json).collect::<Vec<_>>(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum WaringSource {
    Random { magnitude: f64 },
    Fixture(PathBuf),
}

pub fn cmd_waring<P: ParallelMap>(spec: WaringSpec, source: &WaringSource, config: &RunConfig, exec: &P) -> Result<Outcome> {
    config.validate()?;
    spec.is_admissible()?;
    let (start, tensor) = match source {
        WaringSource::Random { magnitude } => waring::random_real_start(&spec, config.seed, *magnitude)?,
        WaringSource::Fixture(path) => waring::fixture_start(&spec, &load_fixture(path)?)?,
    };
    let reg = monodromy::solve(&spec, &tensor, &start, &config.monodromy(), exec)?;
    let errors: Vec<f64> = reg.decompositions().iter().map(|d| d.reconstruction_error(&tensor)).collect();
    let source_json = match source {
        WaringSource::Random { magnitude } => json!({ "random": { "magnitude": magnitude } }),
        WaringSource::Fixture(p) => json!({ "fixture": p }),
    };
    let (classification, class_error) = match realcert::classify(&reg, config.real_tol) {
        Ok(c) => (classified_json(&c), Value::Null),
        Err(e) => (Value::Null, json!(e.to_string())),
    };
    let exit = if reg.is_stabilized() && class_error.is_null() { EXIT_OK } else { EXIT_UNSTABILIZED };
    let body = json!({
        "spec": { "d": spec.d, "n": spec.n, "r": spec.r },
        "source": source_json,
        "tensor": cvec(&tensor.coeffs),
        "stabilized": reg.is_stabilized(),
        "loops": reg.loops_run(),
        "registry": registry_json(&reg),
        "reconstruction_errors": errors,
        "classification": classification,
        "classification_error": class_error,
    });
    Ok(Outcome { exit, report: report("waring", config, body) })
}

#[derive(Debug, Clone, PartialEq)]
pub enum EllipticCommand {
    /// Classify a given point, or build one of the four types and classify it.
    Point { coords: Option<[f64; 4]>, construct: Option<PointType>, perturbations: usize },
    Plane { coeffs: [f64; 4] },
    PencilScan { from: f64, to: f64, steps: usize },
}

fn secant_json(l: &SecantLine) -> Value {
    json!({
        "direction": cvec(&l.direction),
        "t1": cjson(&l.t1),
        "t2": cjson(&l.t2),
        "points": l.points.iter().map(|p| cvec(p)).collect::<Vec<_>>(),
        "is_real_line": l.is_real_line,
        "points_real": [l.points_real.0, l.points_real.1],
    })
}

fn classification_json(c: &PointClassification) -> Value {
    json!({ "P": c.point, "type": c.point_type.tag(), "lines": c.lines.iter().map(secant_json).collect::<Vec<_>>() })
}

pub fn parse_point_type(s: &str) -> Result<PointType> {
    Ok(match s {
        "s1" => PointType::S1,
        "s2" => PointType::S2,
        "s3" => PointType::S3,
        "s4" => PointType::S4,
        _ => bail!("unknown point type {s:?}; expected s1, s2, s3 or s4"),
    })
}

/// Classification of `p`, with degenerate configurations reported as such.
fn classify_or_degenerate(pencil: &QuadricPencil, p: &[f64; 4]) -> Result<Value> {
    match elliptic::classify_point(pencil, p) {
        Ok(c) => Ok(classification_json(&c)),
        Err(EllipticError::Degenerate(why)) => Ok(json!({ "P": p, "type": "degenerate", "reason": why, "lines": [] })),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_elliptic<P: ParallelMap>(
    pencil: &QuadricPencil,
    command: &EllipticCommand,
    config: &RunConfig,
    exec: &P,
) -> Result<Outcome> {
    use rand::{Rng, SeedableRng};
    config.validate()?;
    let body = match command {
        EllipticCommand::Point { coords, construct, perturbations } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
            let (p, construction) = match (coords, construct) {
                (Some(p), None) => (*p, Value::Null),
                (None, Some(kind)) => {
                    let c = elliptic::construct_point(pencil, *kind, &mut rng)?;
                    (c.point, json!({ "kind": kind.tag(), "plane": c.plane, "plane_points": c.plane_points.iter().map(|q| cvec(q)).collect::<Vec<_>>() }))
                }
                _ => bail!("give exactly one of --coords and --construct"),
            };
            let main = classify_or_degenerate(pencil, &p)?;
            let norm = p.iter().map(|x| x * x).sum::<f64>().sqrt();
            let perturbed: Vec<Value> = (0..*perturbations)
                .map(|_| {
                    let q: [f64; 4] = std::array::from_fn(|k| p[k] / norm + 1e-4 * rng.random_range(-1.0..1.0));
                    let tag = match elliptic::classify_point(pencil, &q) {
                        Ok(c) => c.point_type.tag(),
                        Err(_) => "degenerate",
                    };
                    json!({ "P": q, "type": tag })
                })
                .collect();
            json!({ "classification": main, "construction": construction, "perturbations": perturbed })
        }
        EllipticCommand::Plane { coeffs } => match elliptic::intersect_plane(pencil, coeffs) {
            Ok(sec) => json!({
                "plane": coeffs,
                "signature": [sec.signature.real_count, sec.signature.nonreal_count],
                "points": sec.points.iter().map(|q| cvec(q)).collect::<Vec<_>>(),
            }),
            Err(EllipticError::Tangent { point }) => json!({ "plane": coeffs, "tangent": cvec(&point) }),
            Err(EllipticError::DegeneratePlane) => json!({ "plane": coeffs, "degenerate": true }),
            Err(e) => return Err(e.into()),
        },
        EllipticCommand::PencilScan { from, to, steps } => {
            if *steps == 0 {
                bail!("--steps must be positive");
            }
            let ks: Vec<f64> = if *steps == 1 {
                vec![*from]
            } else {
                (0..*steps).map(|i| from + (to - from) * i as f64 / (*steps - 1) as f64).collect()
            };
            let records = elliptic::pencil_scan(pencil, &ks, exec)?;
            let records: Vec<Value> = records
                .iter()
                .map(|r| match &r.outcome {
                    ScanOutcome::Signature(s) => json!({ "k": r.k, "signature": [s.real_count, s.nonreal_count] }),
                    ScanOutcome::Tangent { point } => json!({ "k": r.k, "tangent": cvec(point) }),
                    ScanOutcome::Degenerate => json!({ "k": r.k, "degenerate": true }),
                })
                .collect();
            json!({ "records": records })
        }
    };
    let smooth = pencil.smoothness_probe().smooth;
    let q = |m: &[[f64; 4]; 4]| m.to_vec();
    let mut body = body;
    body["pencil"] = json!({ "q1": q(pencil.q1.matrix()), "q2": q(pencil.q2.matrix()), "smooth": smooth });
    Ok(Outcome { exit: EXIT_OK, report: report("elliptic", config, body) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilFile {
    pub q1: [[f64; 4]; 4],
    pub q2: [[f64; 4]; 4],
}

pub fn load_pencil(path: &Path) -> Result<QuadricPencil> {
    let text = fs::read_to_string(path).with_context(|| format!("reading pencil {}", path.display()))?;
    let f: PencilFile = serde_json::from_str(&text).with_context(|| format!("parsing pencil {}", path.display()))?;
    Ok(QuadricPencil { q1: elliptic::Quadric::new(f.q1)?, q2: elliptic::Quadric::new(f.q2)? })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegreCommand {
    Profile,
    /// Section by the span of `span_real` random real Segre points, or by a
    /// random real space when `None`.
    Section { span_real: Option<usize> },
    Search { target: (usize, usize), max_attempts: usize },
}

fn section_json(spec: &SegreSpec, l: &LinearSpace, s: &SectionResult) -> Value {
    json!({
        "spec": [spec.a1, spec.a2],
        "degree": s.degree_expected,
        "signature": [s.real_count, s.nonreal_count],
        "L": l.equations(),
        "points": s.points.iter().map(|p| cvec(p)).collect::<Vec<_>>(),
    })
}

pub fn cmd_segre<P: ParallelMap>(spec: SegreSpec, command: &SegreCommand, config: &RunConfig, exec: &P) -> Result<Outcome> {
    use rand::SeedableRng;
    config.validate()?;
    let settings: TrackSettings = config.settings.into();
    let (exit, body) = match command {
        SegreCommand::Profile => {
            let p = spec.profile();
            let parity = match p.parity {
                segre::Parity::Even => "even",
                segre::Parity::Odd => "odd",
            };
            (EXIT_OK, json!({ "spec": [spec.a1, spec.a2], "a_q": p.a_q, "D": p.degree, "parity": parity }))
        }
        SegreCommand::Section { span_real } => {
            let (l, spanning) = match span_real {
                Some(k) => {
                    if *k > spec.a_q() {
                        bail!("--span-real {k} exceeds a_q = {}", spec.a_q());
                    }
                    segre::span_through_points(&spec, *k, config.seed)?
                }
                None => {
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
                    (segre::random_real_space(&spec, &mut rng)?, Vec::new())
                }
            };
            let s = segre::solve_section(&spec, &l, &settings)?;
            let mut body = section_json(&spec, &l, &s);
            body["spanning_points"] = json!(spanning);
            (EXIT_OK, body)
        }
        SegreCommand::Search { target, max_attempts } => {
            match segre::search_signature(&spec, *target, *max_attempts, config.seed, &settings, exec) {
                Ok(w) => {
                    let mut body = section_json(&spec, &w.space, &w.section);
                    body["attempt"] = json!(w.attempt);
                    body["found"] = json!(true);
                    (EXIT_OK, body)
                }
                Err(SegreError::NotFound { attempts }) => (
                    EXIT_NOT_FOUND,
                    json!({ "spec": [spec.a1, spec.a2], "target": [target.0, target.1], "found": false, "attempts": attempts }),
                ),
                Err(e) => return Err(e.into()),
            }
        }
    };
    Ok(Outcome { exit, report: report("segre", config, body) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threads_parse() {
        assert_eq!("auto".parse::<Threads>(), Ok(Threads::Auto));
        assert_eq!("3".parse::<Threads>(), Ok(Threads::Count(3)));
        assert!("0".parse::<Threads>().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut c = RunConfig { threads: Threads::Auto, ..RunConfig::default() };
        c.output_path = Some("out/x.json".into());
        let back: RunConfig = serde_json::from_value(serde_json::to_value(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(serde_json::to_value(&c).unwrap()["threads"], json!("auto"));
    }

    #[test]
    fn bad_tolerance_is_rejected() {
        let c = RunConfig { real_tol: -1.0, ..RunConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn rayon_map_keeps_order() {
        let m = RayonMap::new(Threads::Count(3)).unwrap();
        assert_eq!(m.map((0..100).collect(), |x: i32| x * 2), (0..100).map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn fixture_round_trip() {
        let rows = waring::deg7_fixture_rows();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        fs::write(&path, fixture_json(&rows)).unwrap();
        assert_eq!(load_fixture(&path).unwrap(), rows);
    }
}
