//! Sorting a set of decompositions by their behaviour under conjugation.
//!
//! A decomposition is real when every coordinate is real. It is
//! autoconjugate when it is not real but its conjugate is the same
//! decomposition after permuting summands (summands then come in conjugate
//! pairs, plus possibly real ones). All others must pair up with a distinct
//! conjugate partner; the solution set of a real tensor is closed under
//! conjugation, so a missing partner means the set is incomplete.

use alloc::vec::Vec;

use thiserror::Error;

use crate::monodromy::{canonical_distance, SolutionRegistry};
use crate::util::max_abs;
use crate::waring::Decomposition;
use crate::C64;

/// Default relative tolerance on imaginary parts.
pub const REAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecompositionClass {
    Real,
    Autoconjugate,
    /// Member of a conjugate pair; `partner` indexes the other member.
    ConjugatePairMember { partner: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealCertError {
    #[error("decomposition {0} has no conjugate partner in the set; the registry is incomplete")]
    Unpaired(usize),
}

/// max |Im v_k| < tol · (1 + max |v_k|)
pub fn is_real_point(v: &[C64], tol: f64) -> bool {
    let im = v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    im < tol * (1.0 + max_abs(v))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedSet {
    pub decompositions: Vec<Decomposition>,
    pub classes: Vec<DecompositionClass>,
    pub real_tolerance: f64,
}

impl ClassifiedSet {
    pub fn total(&self) -> usize {
        self.classes.len()
    }

    pub fn real(&self) -> usize {
        self.count(|c| matches!(c, DecompositionClass::Real))
    }

    pub fn autoconjugate(&self) -> usize {
        self.count(|c| matches!(c, DecompositionClass::Autoconjugate))
    }

    /// Decompositions that belong to a conjugate pair (twice the pair count).
    pub fn pair_members(&self) -> usize {
        self.count(|c| matches!(c, DecompositionClass::ConjugatePairMember { .. }))
    }

    pub fn identifiable_over_c(&self) -> bool {
        self.total() == 1
    }

    /// Exactly one decomposition has all summands real.
    pub fn identifiable_over_r(&self) -> bool {
        self.real() == 1
    }

    fn count(&self, f: impl Fn(&DecompositionClass) -> bool) -> usize {
        self.classes.iter().filter(|c| f(c)).count()
    }
}

/// Classifies the registry's decompositions, identifying decompositions with
/// the registry's own deduplication tolerance.
pub fn classify(registry: &SolutionRegistry, real_tol: f64) -> Result<ClassifiedSet, RealCertError> {
    classify_decompositions(registry.decompositions(), real_tol, registry.dedup_tol())
}

pub fn classify_decompositions(
    decs: &[Decomposition],
    real_tol: f64,
    dedup_tol: f64,
) -> Result<ClassifiedSet, RealCertError> {
    let mut classes: Vec<Option<DecompositionClass>> = alloc::vec![None; decs.len()];
    for (i, d) in decs.iter().enumerate() {
        if is_real_point(&d.to_unknowns(), real_tol) {
            classes[i] = Some(DecompositionClass::Real);
        } else if canonical_distance(d, &d.conj()) < dedup_tol {
            classes[i] = Some(DecompositionClass::Autoconjugate);
        }
    }
    for i in 0..decs.len() {
        if classes[i].is_some() {
            continue;
        }
        let conj = decs[i].conj();
        let partner = (0..decs.len())
            .filter(|&j| j != i && classes[j].is_none())
            .map(|j| (j, canonical_distance(&conj, &decs[j])))
            .filter(|&(_, dist)| dist < dedup_tol)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match partner {
            Some((j, _)) => {
                classes[i] = Some(DecompositionClass::ConjugatePairMember { partner: j });
                classes[j] = Some(DecompositionClass::ConjugatePairMember { partner: i });
            }
            None => return Err(RealCertError::Unpaired(i)),
        }
    }
    Ok(ClassifiedSet {
        decompositions: decs.to_vec(),
        classes: classes.into_iter().map(|c| c.expect("every entry classified")).collect(),
        real_tolerance: real_tol,
    })
}
