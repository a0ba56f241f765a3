//! Dense complex matrices, equilibrated LU with partial pivoting, and
//! small null-space helpers.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
}

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            m.data[i * cols..(i + 1) * cols].copy_from_slice(r);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

/// PA = LU of the row- and column-equilibrated matrix D_r M D_c.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    pivot_ratio: f64,
}

impl Lu {
    pub fn factor(m: &CMatrix) -> Result<Lu, LinalgError> {
        if m.rows != m.cols {
            return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
        }
        let n = m.rows;
        let mut lu = m.data.clone();
        let mut row_scale = vec![1.0; n];
        for i in 0..n {
            let s = lu[i * n..(i + 1) * n].iter().map(|z| z.norm()).fold(0.0, f64::max);
            if s == 0.0 || !s.is_finite() {
                return Err(LinalgError::Singular);
            }
            row_scale[i] = 1.0 / s;
            for z in &mut lu[i * n..(i + 1) * n] {
                *z *= row_scale[i];
            }
        }
        let mut col_scale = vec![1.0; n];
        for j in 0..n {
            let s = (0..n).map(|i| lu[i * n + j].norm()).fold(0.0, f64::max);
            if s == 0.0 {
                return Err(LinalgError::Singular);
            }
            col_scale[j] = 1.0 / s;
            for i in 0..n {
                lu[i * n + j] *= col_scale[j];
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let (mut pmax, mut pmin) = (0.0f64, f64::INFINITY);
        for k in 0..n {
            let (mut best, mut best_val) = (k, 0.0);
            for i in k..n {
                let v = lu[i * n + k].norm();
                if v > best_val {
                    best = i;
                    best_val = v;
                }
            }
            if best_val == 0.0 {
                return Err(LinalgError::Singular);
            }
            if best != k {
                for j in 0..n {
                    lu.swap(k * n + j, best * n + j);
                }
                perm.swap(k, best);
            }
            pmax = pmax.max(best_val);
            pmin = pmin.min(best_val);
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f.norm() == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= f * u;
                }
            }
        }
        Ok(Lu { n, lu, perm, row_scale, col_scale, pivot_ratio: pmax / pmin })
    }

    /// Ratio of the largest to the smallest pivot; a cheap stand-in for the
    /// condition number of the equilibrated matrix.
    pub fn condition_estimate(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p] * self.row_scale[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        for (z, s) in x.iter_mut().zip(&self.col_scale) {
            *z *= s;
        }
        x
    }
}

pub fn solve(m: &CMatrix, b: &[C64]) -> Result<Vec<C64>, LinalgError> {
    Ok(Lu::factor(m)?.solve(b))
}

/// A unit vector spanning the (assumed one-dimensional) kernel of `m`,
/// computed by Gaussian elimination with complete pivoting. Returns `None`
/// when the numerical rank is not `cols - 1`.
pub fn null_vector(m: &CMatrix, rank_tol: f64) -> Option<Vec<C64>> {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.data.clone();
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let mut colperm: Vec<usize> = (0..cols).collect();
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let (mut bi, mut bj, mut bv) = (k, k, 0.0);
        for i in k..rows {
            for j in k..cols {
                let v = a[i * cols + j].norm();
                if v > bv {
                    (bi, bj, bv) = (i, j, v);
                }
            }
        }
        if bv <= rank_tol * scale {
            break;
        }
        for j in 0..cols {
            a.swap(k * cols + j, bi * cols + j);
        }
        for i in 0..rows {
            a.swap(i * cols + k, i * cols + bj);
        }
        colperm.swap(k, bj);
        let p = a[k * cols + k];
        for i in k + 1..rows {
            let f = a[i * cols + k] / p;
            for j in k..cols {
                let u = a[k * cols + j];
                a[i * cols + j] -= f * u;
            }
        }
        rank += 1;
    }
    if rank + 1 != cols {
        return None;
    }
    // Upper-triangular rank x cols block; set the free coordinate to 1.
    let mut y = vec![C64::new(0.0, 0.0); cols];
    y[cols - 1] = C64::new(1.0, 0.0);
    for i in (0..rank).rev() {
        let mut s = C64::new(0.0, 0.0);
        for j in i + 1..cols {
            s -= a[i * cols + j] * y[j];
        }
        y[i] = s / a[i * cols + i];
    }
    let mut x = vec![C64::new(0.0, 0.0); cols];
    for (k, &c) in colperm.iter().enumerate() {
        x[c] = y[k];
    }
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Some(x.into_iter().map(|z| z / norm).collect())
}

/// Orthonormal basis of the orthogonal complement of the row space of a real
/// matrix (i.e. its right null space), plus the numerical rank.
pub fn real_null_space(rows: &[Vec<f64>], cols: usize, rank_tol: f64) -> (Vec<Vec<f64>>, usize) {
    // Orthonormalize the rows (modified Gram-Schmidt, twice), then complete
    // with coordinate vectors.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let scale = rows
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x.abs())
        .fold(0.0, f64::max)
        .max(1e-300);
    for r in rows {
        if let Some(v) = orthogonalize(r, &basis, rank_tol * scale) {
            basis.push(v);
        }
    }
    let rank = basis.len();
    let mut null = Vec::new();
    for j in 0..cols {
        if basis.len() == cols {
            break;
        }
        let mut e = vec![0.0; cols];
        e[j] = 1.0;
        if let Some(v) = orthogonalize(&e, &basis, 1e-8) {
            basis.push(v.clone());
            null.push(v);
        }
    }
    (null, rank)
}

fn orthogonalize(v: &[f64], basis: &[Vec<f64>], tol: f64) -> Option<Vec<f64>> {
    let mut w = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let d: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in w.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
    }
    let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= tol {
        return None;
    }
    Some(w.into_iter().map(|x| x / norm).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn lu_solves_small_system() {
        let m = CMatrix::from_rows(&[
            vec![c(0.0, 0.0), c(2.0, 1.0), c(1.0, 0.0)],
            vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, -1.0)],
            vec![c(3.0, 0.0), c(0.0, 0.0), c(1e6, 0.0)],
        ]);
        let x = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let b = m.mul_vec(&x);
        let got = solve(&m, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).norm() < 1e-9);
        }
    }

    #[test]
    fn lu_reports_singular() {
        let m = CMatrix::from_rows(&[vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(2.0, 0.0), c(4.0, 0.0)]]);
        match Lu::factor(&m) {
            Err(LinalgError::Singular) => {}
            Ok(lu) => assert!(lu.condition_estimate() > 1e12),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn null_vector_of_rank_deficient() {
        let m = CMatrix::from_rows(&[
            vec![c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(1.0, 1.0), c(-1.0, -1.0)],
        ]);
        let v = null_vector(&m, 1e-12).unwrap();
        let r = m.mul_vec(&v);
        assert!(r.iter().all(|z| z.norm() < 1e-12));
        assert!((v.iter().map(|z| z.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn real_null_space_is_orthogonal_complement() {
        let rows = vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.0, 1.0, 0.0, 1.0]];
        let (null, rank) = real_null_space(&rows, 4, 1e-12);
        assert_eq!(rank, 2);
        assert_eq!(null.len(), 2);
        for v in &null {
            for r in &rows {
                let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                assert!(d.abs() < 1e-12);
            }
        }
    }
}
