//! A dense two-phase simplex method for small standard-form linear programs
//!
//! ```text
//! minimize cᵀx  subject to  A x = b,  x ≥ 0.
//! ```
//!
//! Bland's rule is used for both entering and leaving variables, which rules
//! out cycling at the price of speed; the programs solved here (polytope
//! gauges with d ≤ 16 rows) are tiny.

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const EPS: f64 = 1e-11;

/// Optimal primal/dual pair of a standard-form LP.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Dual multipliers `y` with `Aᵀy ≤ c` and `bᵀy = cᵀx`.
    pub y: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `m` constraint rows of length `width + 1` (last entry is the rhs).
    rows: Vec<Vec<f64>>,
    /// Reduced-cost row of length `width + 1` (last entry is −objective).
    cost: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for k in 0..=w {
                    row[k] -= f * prow[k];
                }
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for k in 0..=w {
                self.cost[k] -= f * prow[k];
            }
        }
        self.basis[r] = c;
    }

    /// Run simplex iterations allowing only columns `< allowed` to enter.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        let w = self.width;
        let max_iter = 50_000;
        for _ in 0..max_iter {
            let Some(enter) = (0..allowed).find(|&j| self.cost[j] < -EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > EPS {
                    let ratio = row[w] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - EPS || (ratio <= lr + EPS && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::InvalidInput("linear program is unbounded".into()));
            };
            self.pivot(r, enter);
        }
        Err(Error::NoConvergence("simplex iteration cap reached".into()))
    }
}

/// Solve `min cᵀx s.t. A x = b, x ≥ 0`.
///
/// Errors with [`Error::InvalidInput`] when the program is infeasible or
/// unbounded.
pub fn solve_standard_form(a: &Matrix, b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let (m, nv) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::LengthMismatch { expected: m, found: b.len() });
    }
    if c.len() != nv {
        return Err(Error::LengthMismatch { expected: nv, found: c.len() });
    }
    let width = nv + m;
    let flip: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let mut rows = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; width + 1];
        for j in 0..nv {
            row[j] = flip[i] * a[(i, j)];
        }
        row[nv + i] = 1.0;
        row[width] = flip[i] * b[i];
        rows.push(row);
    }
    // Phase 1: minimize the sum of artificials.
    let mut cost = vec![0.0; width + 1];
    for row in &rows {
        for j in 0..nv {
            cost[j] -= row[j];
        }
        cost[width] -= row[width];
    }
    let mut t = Tableau { rows, cost, basis: (nv..nv + m).collect(), width };
    t.optimize(nv)?;
    let scale = 1.0 + b.iter().map(|v| v.abs()).sum::<f64>();
    if -t.cost[width] > 1e-9 * scale {
        return Err(Error::InvalidInput("linear program is infeasible".into()));
    }
    // Drive artificials out of the basis where possible.
    for r in 0..m {
        if t.basis[r] >= nv {
            if let Some(j) = (0..nv).find(|&j| t.rows[r][j].abs() > 1e-9) {
                t.pivot(r, j);
            }
        }
    }
    // Phase 2 reduced costs: r_j = c_j − c_Bᵀ (B⁻¹A)_j, artificials cost 0.
    let cb: Vec<f64> = t.basis.iter().map(|&j| if j < nv { c[j] } else { 0.0 }).collect();
    let mut cost = vec![0.0; width + 1];
    for j in 0..=width {
        let base = if j < nv { c[j] } else { 0.0 };
        cost[j] = base - (0..m).map(|i| cb[i] * t.rows[i][j]).sum::<f64>();
    }
    t.cost = cost;
    t.optimize(nv)?;
    let mut x = vec![0.0; nv];
    for (i, &j) in t.basis.iter().enumerate() {
        if j < nv {
            x[j] = t.rows[i][width];
        }
    }
    let y = (0..m).map(|i| -flip[i] * t.cost[nv + i]).collect();
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpSolution { x, y, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_program_with_duals() {
        // min x1 + 2 x2 + 3 x3  s.t.  x1 + x2 + x3 = 1,  x1 - x2 = -0.5
        let a = Matrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.0]]).unwrap();
        let b = [1.0, -0.5];
        let c = [1.0, 2.0, 3.0];
        let s = solve_standard_form(&a, &b, &c).unwrap();
        // Optimum: x1 = 0.25, x2 = 0.75.
        assert!((s.objective - 1.75).abs() < 1e-12);
        let dual_obj: f64 = s.y.iter().zip(&b).map(|(y, b)| y * b).sum();
        assert!((dual_obj - s.objective).abs() < 1e-12);
        for j in 0..3 {
            let aty: f64 = (0..2).map(|i| a[(i, j)] * s.y[i]).sum();
            assert!(aty <= c[j] + 1e-12);
        }
    }

    #[test]
    fn infeasible_program_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(solve_standard_form(&a, &[-1.0], &[1.0, 1.0]).is_err());
    }
}
