//! Random instances shared by checks, calibration and suites.

use nsgap::linalg::Matrix;
use nsgap::mazur::WeightedVectorFunction;
use nsgap::spaces::{Configuration, MetricSpace, SpaceKind};
use rand::Rng;

/// A random nonconstant configuration of `n` points in `space`: uniform
/// coordinates in `[-1, 1]` for normed spaces, uniform indices for finite
/// ones. `None` when the space has a single point.
pub fn configuration<R: Rng + ?Sized>(space: &MetricSpace, n: usize, rng: &mut R) -> Option<Configuration> {
    match space.kind() {
        SpaceKind::Finite { dist } => {
            let m = dist.rows();
            if m < 2 || n < 2 {
                return None;
            }
            let mut idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
            if idx.iter().all(|&i| i == idx[0]) {
                let k = rng.random_range(0..n);
                idx[k] = (idx[k] + 1 + rng.random_range(0..m - 1)) % m;
            }
            Some(Configuration::Indices(idx))
        }
        _ => {
            let d = space.dim()?;
            Some(Configuration::Vectors(uniform_matrix(n, d, rng)))
        }
    }
}

pub fn uniform_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("sizes agree")
}

/// Shortest-path metric of the complete graph with edge weights uniform in
/// `[0.5, 3)`; always a metric with positive off-diagonal entries.
pub fn finite_metric<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Matrix {
    let mut d = Matrix::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let w = rng.random_range(0.5..3.0);
            d.row_mut(i)[j] = w;
            d.row_mut(j)[i] = w;
        }
    }
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let via = d.row(i)[k] + d.row(k)[j];
                if via < d.row(i)[j] {
                    d.row_mut(i)[j] = via;
                }
            }
        }
    }
    d
}

/// A probability vector with entries bounded away from zero.
pub fn probability<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// A random weighted function with `1..=max_atoms` atoms in `ℝ^dim`;
/// one value is zeroed with probability 1/4 to exercise the zero case.
pub fn weighted_function<R: Rng + ?Sized>(max_atoms: usize, dim: usize, rng: &mut R) -> WeightedVectorFunction {
    let m = rng.random_range(1..=max_atoms);
    let mut values = Matrix::from_vec(m, dim, (0..m * dim).map(|_| rng.random_range(-2.0..2.0)).collect()).expect("sizes agree");
    if rng.random_bool(0.25) {
        let k = rng.random_range(0..m);
        values.row_mut(k).fill(0.0);
    }
    WeightedVectorFunction::new(probability(m, rng), values).expect("weights form a probability vector")
}

/// Corners of `{−1, 1}^d` indexed by bit pattern.
pub fn cube_vertices(d: usize) -> Vec<Vec<f64>> {
    (0..1usize << d).map(|m| (0..d).map(|k| if m >> k & 1 == 1 { 1.0 } else { -1.0 }).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nsgap::num::rng_stream;

    #[test]
    fn finite_configurations_are_nonconstant() {
        let space = MetricSpace::finite(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).unwrap();
        let mut rng = rng_stream(0, 0);
        for _ in 0..200 {
            let Some(Configuration::Indices(v)) = configuration(&space, 3, &mut rng) else { panic!() };
            assert!(v.iter().any(|&i| i != v[0]));
        }
    }

    #[test]
    fn random_metrics_validate() {
        let mut rng = rng_stream(1, 0);
        for m in 2..7 {
            assert!(MetricSpace::finite(finite_metric(m, &mut rng)).is_ok());
        }
    }
}
