//! Barycentric spanner construction over path incidence vectors.
//!
//! A spanner is a subset `B` of the enumerated paths whose incidence
//! vectors form a basis of the full set's span, such that every enumerated
//! path is a linear combination of `B` with coefficients in `[-C, C]`.
//! Learning then only has to track `|B|` paths instead of the whole
//! (potentially exponential) path set.
//!
//! Construction is the classical determinant-swap scheme: seed a basis
//! greedily by residual volume, then repeatedly swap in any path whose
//! expansion coefficient exceeds `C` in absolute value. Each swap grows the
//! basis volume by a factor `> C >= 1`, so the loop terminates; on exit no
//! coefficient exceeds `C`, which is exactly the spanner property.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::topology::Path;

/// Numerical tolerance for rank decisions on 0/1 incidence vectors.
const RANK_TOL: f64 = 1e-7;
/// Slack added to the swap threshold so ties cannot cycle.
const SWAP_EPS: f64 = 1e-9;
/// Residual norm above which a vector is declared outside the span.
const SPAN_TOL: f64 = 1e-6;

/// Inputs are exactly maximized (C = 1) up to this path count; larger
/// inputs use the C-approximate variant for polynomial time.
const EXACT_LIMIT: usize = 32;

/// A barycentric spanner: the chosen base paths and the coefficient bound
/// they guarantee.
#[derive(Debug, Clone)]
pub struct SpannerSet {
    /// Base paths, each carrying its original enumeration id.
    pub base_paths: Vec<Path>,
    /// Coefficient bound C actually enforced during construction.
    pub coefficient_bound: f64,
    /// Incidence dimension (number of graph links).
    n_links: usize,
    /// Row-major basis incidence matrix, rows parallel to `base_paths`.
    basis: Matrix,
}

impl SpannerSet {
    /// Number of base paths (L in the regret bound).
    pub fn len(&self) -> usize {
        self.base_paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_paths.is_empty()
    }

    /// Enumeration ids of the base paths.
    pub fn path_ids(&self) -> Vec<usize> {
        self.base_paths.iter().map(|p| p.id).collect()
    }

    /// Absolute Gram determinant of the basis (squared volume). Invariant
    /// under input permutation up to tie structure, useful for audits.
    pub fn gram_det(&self) -> f64 {
        gram_abs_det(&self.basis)
    }
}

/// Builds a barycentric spanner over `paths` (incidence vectors of length
/// `n_links`). `approx_c >= 1` bounds the expansion coefficients; inputs of
/// at most 32 paths are maximized exactly (C = 1).
pub fn build_spanner(paths: &[Path], n_links: usize, approx_c: f64) -> SpannerSet {
    assert!(!paths.is_empty(), "spanner needs at least one path");
    assert!(approx_c >= 1.0, "approx_c must be >= 1");
    let c = if paths.len() <= EXACT_LIMIT { 1.0 } else { approx_c };

    let incidence: Vec<Vec<f64>> = paths.iter().map(|p| p.incidence(n_links)).collect();

    // Greedy volume seeding: repeatedly take the path with the largest
    // residual against the current basis, lowest id on ties.
    let mut chosen: Vec<usize> = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (idx, vec) in incidence.iter().enumerate() {
            if chosen.contains(&idx) {
                continue;
            }
            let res2 = residual_norm2(&incidence, &chosen, vec);
            match best {
                Some((_, b)) if res2 <= b + RANK_TOL => {}
                _ => {
                    // Strictly-better-by-tolerance keeps the lowest id on
                    // effective ties because of iteration order.
                    if best.map_or(true, |(_, b)| res2 > b + RANK_TOL) {
                        best = Some((idx, res2));
                    }
                }
            }
        }
        match best {
            Some((idx, res2)) if res2 > RANK_TOL => chosen.push(idx),
            _ => break,
        }
    }

    // Swap phase: while some path's expansion coefficient exceeds C, swap
    // it into the offending basis slot. |det| grows by |coeff| > C each
    // time, so this terminates.
    let mut basis = Matrix::from_rows(chosen.iter().map(|&i| incidence[i].clone()).collect(), n_links);
    let mut swapped = true;
    while swapped {
        swapped = false;
        for (idx, vec) in incidence.iter().enumerate() {
            if chosen.contains(&idx) {
                continue;
            }
            let Some(coeffs) = linalg::express_in_basis(&basis, vec, 1e-12) else {
                continue;
            };
            let (pos, max_c) = coeffs
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, v.abs()))
                .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if max_c > c + SWAP_EPS {
                chosen[pos] = idx;
                basis = Matrix::from_rows(
                    chosen.iter().map(|&i| incidence[i].clone()).collect(),
                    n_links,
                );
                swapped = true;
            }
        }
    }

    SpannerSet {
        base_paths: chosen.iter().map(|&i| paths[i].clone()).collect(),
        coefficient_bound: c,
        n_links,
        basis,
    }
}

/// Expresses `p` as a linear combination of the spanner's base paths.
/// Errors when `p` lies outside the span.
pub fn express_in_spanner(p: &Path, s: &SpannerSet) -> Result<Vec<f64>> {
    let target = p.incidence(s.n_links);
    let coeffs = linalg::express_in_basis(&s.basis, &target, 1e-12)
        .ok_or(Error::OutsideSpan { residual: f64::INFINITY })?;
    let res = linalg::residual(&s.basis, &coeffs, &target);
    let res_norm = linalg::norm2(&res).sqrt();
    if res_norm > SPAN_TOL {
        return Err(Error::OutsideSpan { residual: res_norm });
    }
    Ok(coeffs)
}

fn residual_norm2(incidence: &[Vec<f64>], chosen: &[usize], target: &[f64]) -> f64 {
    if chosen.is_empty() {
        return linalg::norm2(target);
    }
    let basis = Matrix::from_rows(
        chosen.iter().map(|&i| incidence[i].clone()).collect(),
        target.len(),
    );
    match linalg::express_in_basis(&basis, target, 1e-12) {
        Some(coeffs) => linalg::norm2(&linalg::residual(&basis, &coeffs, target)),
        None => 0.0,
    }
}

fn gram_abs_det(basis: &Matrix) -> f64 {
    let r = basis.rows;
    if r == 0 {
        return 0.0;
    }
    let mut gram = Matrix::zeros(r, r);
    for i in 0..r {
        for j in i..r {
            let v = linalg::dot(basis.row(i), basis.row(j));
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    // LU without pivot-sign tracking; we only need |det|.
    let mut det: f64 = 1.0;
    let mut m = gram;
    for col in 0..r {
        let mut pivot = col;
        let mut best = m.get(col, col).abs();
        for row in col + 1..r {
            if m.get(row, col).abs() > best {
                best = m.get(row, col).abs();
                pivot = row;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for cc in 0..r {
                let tmp = m.get(col, cc);
                m.set(col, cc, m.get(pivot, cc));
                m.set(pivot, cc, tmp);
            }
        }
        det *= m.get(col, col);
        for row in col + 1..r {
            let f = m.get(row, col) / m.get(col, col);
            for cc in col..r {
                let v = m.get(row, cc) - f * m.get(col, cc);
                m.set(row, cc, v);
            }
        }
    }
    det.abs()
}
