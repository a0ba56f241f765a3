use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::C64;

/// Largest modulus in a complex slice.
pub(crate) fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max over coordinates of |a - b| / max(1, |a|, |b|).
pub(crate) fn rel_dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm() / 1f64.max(x.norm()).max(y.norm()))
        .fold(0.0, f64::max)
}

/// Uniform sample from the unit disk of ℂ.
pub(crate) fn random_disk<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    loop {
        let re: f64 = rng.random_range(-1.0..1.0);
        let im: f64 = rng.random_range(-1.0..1.0);
        if re * re + im * im <= 1.0 {
            return C64::new(re, im);
        }
    }
}

pub(crate) fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let theta: f64 = rng.random_range(0.0..core::f64::consts::TAU);
    C64::new(theta.cos(), theta.sin())
}

pub(crate) fn random_complex_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<C64> {
    (0..len).map(|_| random_disk(rng)).collect()
}

pub(crate) fn random_real_vec<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Scales a projective point so that its largest-modulus coordinate is 1.
pub(crate) fn proj_normalize(v: &[C64]) -> Vec<C64> {
    let pivot = v
        .iter()
        .copied()
        .fold(C64::new(0.0, 0.0), |best, z| if z.norm() > best.norm() { z } else { best });
    if pivot.norm() == 0.0 {
        return v.to_vec();
    }
    v.iter().map(|z| z / pivot).collect()
}

/// Distance between two projective points: both are normalized on the
/// largest coordinate of `a`, then compared coordinate-wise.
pub(crate) fn proj_dist(a: &[C64], b: &[C64]) -> f64 {
    let (k, _) = a
        .iter()
        .enumerate()
        .fold((0, 0.0), |(bk, bv), (i, z)| if z.norm() > bv { (i, z.norm()) } else { (bk, bv) });
    if a[k].norm() == 0.0 || b[k].norm() < 1e-300 {
        return f64::INFINITY;
    }
    let an: Vec<C64> = a.iter().map(|z| z / a[k]).collect();
    let bn: Vec<C64> = b.iter().map(|z| z / b[k]).collect();
    an.iter().zip(&bn).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}
