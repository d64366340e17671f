//! Average-distortion embeddings, duality witnesses and expander tools.
//!
//! The 4-cycle embedding is checked against a symmetry-reduced oracle: for a
//! cycle-invariant Gram matrix the only free quantities are the squared
//! adjacent and antipodal distances, and realizability is tested by
//! classical multidimensional scaling with nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};
use nsgap::embed::*;
use nsgap::expander::*;
use nsgap::linalg::Matrix;
use nsgap::markov::*;
use nsgap::rayleigh::{HeuristicOptions, Implication};
use nsgap::Error;

fn cycle_metric(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        let k = i.abs_diff(j);
        k.min(n - k) as f64
    })
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// True when the squared-distance matrix is Euclidean (double-centred Gram
/// matrix PSD).
fn euclidean_realizable(sq: &DMatrix<f64>) -> bool {
    let n = sq.nrows();
    let j = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let g = -0.5 * &j * sq * &j;
    SymmetricEigen::new(g).eigenvalues.iter().all(|v| *v >= -1e-12)
}

/// Best quadratic average distortion of a cycle-invariant embedding of the
/// 4-cycle with `d^{2θ}` constraints, by grid search over `(s1, s2)`.
fn circulant_oracle(theta: f64) -> f64 {
    let (c1, c2) = (1.0f64, 2f64.powf(2.0 * theta));
    let steps = 400;
    let mut best = 0.0f64;
    for a in 0..=steps {
        for b in 0..=steps {
            let (s1, s2) = (c1 * a as f64 / steps as f64, c2 * b as f64 / steps as f64);
            let sq = DMatrix::from_fn(4, 4, |i, j| match i.abs_diff(j) {
                0 => 0.0,
                2 => s2,
                _ => s1,
            });
            if euclidean_realizable(&sq) {
                best = best.max(8.0 * s1 + 4.0 * s2);
            }
        }
    }
    ((8.0 * c1 + 4.0 * c2) / best).sqrt()
}

fn gram_check(e: &GramEmbedding, dist: &Matrix) {
    let n = dist.rows();
    let g = DMatrix::from_fn(n, n, |i, j| e.g.row(i)[j]);
    let min_ev = SymmetricEigen::new(g.clone()).eigenvalues.min();
    assert!(min_ev >= -1e-9, "Gram not PSD: {min_ev}");
    assert!(e.factor.cols() <= n);
    for i in 0..n {
        for j in 0..n {
            let sq: f64 = e.factor.row(i).iter().zip(e.factor.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!((sq - (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)])).abs() < 1e-9);
            if i != j {
                let bound = dist.row(i)[j].powf(2.0 * e.theta);
                assert!(sq <= bound * (1.0 + 1e-6), "Lipschitz constraint ({i},{j}): {sq} > {bound}");
            }
        }
    }
    let ev = evaluate_average_distortion(&e.factor, dist, &e.mu, 2.0, e.theta).unwrap();
    assert!((ev.lip - e.lip).abs() < 1e-9 && (ev.spread - e.spread).abs() < 1e-9);
}

#[test]
fn two_points_embed_isometrically() {
    let dist = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    let e = average_embed_hilbert(&dist, &uniform(2), 0.5).unwrap();
    gram_check(&e, &dist);
    assert!(e.d_achieved <= 1.0 + 1e-4);
    assert!(e.d_lower_bound <= e.d_achieved + 1e-12);
}

#[test]
fn equilateral_sets_embed_as_simplices() {
    for n in [3, 5, 8] {
        let dist = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 });
        for theta in [0.3, 1.0] {
            let e = average_embed_hilbert(&dist, &uniform(n), theta).unwrap();
            gram_check(&e, &dist);
            assert!(e.d_achieved <= 1.0 + 1e-4, "n={n}: {}", e.d_achieved);
        }
    }
}

#[test]
fn four_cycle_matches_circulant_oracle() {
    let dist = cycle_metric(4);
    for theta in [0.5, 1.0] {
        let e = average_embed_hilbert(&dist, &uniform(4), theta).unwrap();
        gram_check(&e, &dist);
        let oracle = circulant_oracle(theta);
        assert!((e.d_achieved - oracle).abs() < 1e-4, "theta={theta}: {} vs {oracle}", e.d_achieved);
    }
}

#[test]
fn objective_history_is_monotone() {
    let dist = cycle_metric(7);
    let e = average_embed_hilbert(&dist, &uniform(7), 0.5).unwrap();
    assert!(e.objective_history.windows(2).all(|w| w[1] >= w[0]));
    gram_check(&e, &dist);
}

#[test]
fn nonuniform_measure_on_random_graph_metric() {
    let g = random_regular_graph(12, 3, 4).unwrap();
    let dist = g.metric().unwrap();
    let raw: Vec<f64> = (0..12).map(|i| 1.0 + i as f64).collect();
    let s: f64 = raw.iter().sum();
    let mu: Vec<f64> = raw.iter().map(|x| x / s).collect();
    let e = average_embed_hilbert(&dist, &mu, 0.5).unwrap();
    gram_check(&e, &dist);
    assert!(e.converged);
    assert!(e.d_lower_bound <= e.d_achieved * (1.0 + 1e-9));
}

#[test]
fn solver_input_validation() {
    let dist = cycle_metric(4);
    assert!(matches!(average_embed_hilbert(&dist, &[0.5, 0.5, 0.0, 0.0], 0.5), Err(Error::ZeroWeight(2))));
    let bad = Matrix::from_rows(&[vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]]).unwrap();
    assert!(matches!(average_embed_hilbert(&bad, &uniform(3), 0.5), Err(Error::NotAMetric(_))));
}

#[test]
fn distortion_examples() {
    let pts = Matrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, -1.0]]).unwrap();
    let dist = Matrix::from_fn(3, 3, |i, j| {
        pts.row(i).iter().zip(pts.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    });
    let mu = [0.2, 0.3, 0.5];
    let r = evaluate_average_distortion(&pts, &dist, &mu, 2.0, 1.0).unwrap();
    assert!((r.d - 1.0).abs() < 1e-12);
    let scaled = pts.scaled(7.5);
    let s = evaluate_average_distortion(&scaled, &dist, &mu, 3.0, 0.5).unwrap();
    let t = evaluate_average_distortion(&pts, &dist, &mu, 3.0, 0.5).unwrap();
    assert!((s.d - t.d).abs() < 1e-12 * t.d);
    let collapsed = Matrix::zeros(3, 2);
    let c = evaluate_average_distortion(&collapsed, &dist, &mu, 2.0, 1.0).unwrap();
    assert_eq!((c.spread, c.d), (0.0, f64::INFINITY));
    assert!(matches!(evaluate_average_distortion(&collapsed, &dist, &mu[..2], 2.0, 1.0), Err(Error::SizeMismatch { .. })));
}

#[test]
fn forward_duality_on_four_cycle_witness() {
    let dist = cycle_metric(4);
    let e = average_embed_hilbert(&dist, &uniform(4), 0.5).unwrap();
    let c = graph_chain(&RegularGraph::cycle(4).unwrap()).unwrap();
    let lazy = lazy_power(&c, 1).unwrap();
    let r = duality_forward_check(&e, &lazy, &dist, 0.5, 2.0).unwrap();
    assert!(r.slack >= -1e-9 && r.gamma_source_le && r.product_ok);
    // Independent evaluation of both sides.
    let pi = lazy.pi();
    let (mut lhs, mut edge) = (0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            lhs += pi[i] * pi[j] * dist.row(i)[j];
            edge += pi[i] * lazy.a(i, j) * dist.row(i)[j];
        }
    }
    assert!((r.lhs - lhs).abs() < 1e-12);
    assert!((r.rhs - r.d * r.d * 2.0 * edge).abs() < 1e-9);
}

#[test]
fn forward_duality_is_tight_on_eigenvector_data() {
    // Square with side 1: isometric for θ = 1/2 on the 4-cycle, and the
    // coordinates are eigenvectors of the cycle walk.
    let dist = cycle_metric(4);
    let e = average_embed_hilbert(&dist, &uniform(4), 0.5).unwrap();
    let c = graph_chain(&RegularGraph::cycle(4).unwrap()).unwrap();
    let r = duality_forward_check(&e, &c, &dist, 0.5, 2.0).unwrap();
    assert!(r.slack.abs() < 1e-6, "{r:?}");
}

#[test]
fn forward_duality_rejects_foreign_measure() {
    let dist = cycle_metric(3);
    let e = average_embed_hilbert(&dist, &[0.2, 0.3, 0.5], 1.0).unwrap();
    let c = graph_chain(&RegularGraph::complete(3).unwrap()).unwrap();
    assert!(matches!(duality_forward_check(&e, &c, &dist, 1.0, 2.0), Err(Error::MismatchedStationary)));
    let e = average_embed_hilbert(&dist, &uniform(3), 1.0).unwrap();
    assert!(matches!(duality_forward_check(&e, &c, &dist, 1.0, 3.0), Err(Error::UnsupportedSpace(_))));
}

#[test]
fn witness_check_on_simplex_and_negative_control() {
    let dist = Matrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
    let h = 3f64.sqrt() / 2.0;
    let tri = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, h]]).unwrap();
    let r = duality_witness_check(&[1.0], std::slice::from_ref(&tri), &dist, &uniform(3), 2.0, 1.0, 1.0, 1e-9).unwrap();
    assert!(r.lipschitz_ok && r.average_ok);
    let half = tri.scaled(0.5);
    let r = duality_witness_check(&[1.0], &[half], &dist, &uniform(3), 2.0, 1.0, 1.0, 1e-9).unwrap();
    assert!(r.lipschitz_ok && !r.average_ok);
    assert!(matches!(duality_witness_check(&[], &[], &dist, &uniform(3), 2.0, 1.0, 1.0, 0.0), Err(Error::EmptyDecomposition)));
}

#[test]
fn witness_check_on_assembled_weights() {
    let dist = Matrix::from_rows(&[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.5], vec![2.0, 1.5, 0.0]]).unwrap();
    let mu = [0.2, 0.5, 0.3];
    let y1 = Matrix::from_rows(&[vec![0.0], vec![0.7], vec![1.9]]).unwrap();
    let y2 = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.0, 0.6], vec![1.2, 1.0]]).unwrap();
    let configs = [y1, y2];
    let w = assemble_weights(&[0.4, 0.6], &configs, &dist, &mu, 2.0, 1.0).unwrap();
    let r = duality_witness_check(&w, &configs, &dist, &mu, 2.0, 1.0, f64::MAX, 0.0).unwrap();
    assert!(r.average_ok && r.lipschitz_ok);
    assert!((r.average - r.target_average).abs() < 1e-12 * r.target_average);
    // With D set to the actual Lipschitz constant the check is tight.
    let r2 = duality_witness_check(&w, &configs, &dist, &mu, 2.0, 1.0, r.lip, 1e-12).unwrap();
    assert!(r2.lipschitz_ok);
    let r3 = duality_witness_check(&w, &configs, &dist, &mu, 2.0, 1.0, r.lip * 0.99, 0.0).unwrap();
    assert!(!r3.lipschitz_ok);
}

#[test]
fn embedding_json_uses_documented_keys() {
    let dist = cycle_metric(4);
    let e = average_embed_hilbert(&dist, &uniform(4), 0.5).unwrap();
    let v = serde_json::to_value(&e).unwrap();
    for key in ["G", "factor", "lip", "spread", "D_achieved", "iterations"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

// ---- expander ----

#[test]
fn generator_examples() {
    let k4 = random_regular_graph(4, 3, 0).unwrap();
    assert_eq!(k4.edges().len(), 6);
    let g = random_regular_graph(8, 3, 1).unwrap();
    assert!(g.adjacency().iter().all(|a| a.len() == 3));
    assert!(g.is_connected());
    assert!(matches!(random_regular_graph(5, 3, 0), Err(Error::ParityViolation { .. })));
}

#[test]
fn generated_graphs_are_simple_regular_and_deterministic() {
    for (n, seed) in [(16, 0), (32, 3), (64, 9), (128, 11)] {
        let g = random_regular_graph(n, 3, seed).unwrap();
        assert_eq!(g, random_regular_graph(n, 3, seed).unwrap());
        for (u, nb) in g.adjacency().iter().enumerate() {
            assert_eq!(nb.len(), 3);
            assert!(!nb.contains(&u));
            let mut s = nb.clone();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 3);
            assert!(nb.iter().all(|&v| g.has_edge(v, u)));
        }
        assert!(g.is_connected());
    }
}

#[test]
fn graph_chain_spectra() {
    let s = spectral_data(&graph_chain(&RegularGraph::complete(4).unwrap()).unwrap()).unwrap();
    assert!((s.lambda2 + 1.0 / 3.0).abs() < 1e-12);
    assert!((s.gamma_classical - 0.75).abs() < 1e-12);
    let s = spectral_data(&graph_chain(&RegularGraph::cycle(4).unwrap()).unwrap()).unwrap();
    assert!(s.lambda2.abs() < 1e-12);
    let two_triangles = RegularGraph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
    assert!(!two_triangles.is_connected());
    let s = spectral_data(&graph_chain(&two_triangles).unwrap()).unwrap();
    assert!((s.lambda2 - 1.0).abs() < 1e-12);
    assert_eq!(s.gamma_classical, f64::INFINITY);
}

#[test]
fn spread_examples() {
    let r = distance_spread_check(&RegularGraph::cycle(4).unwrap()).unwrap();
    assert_eq!((r.threshold, r.count, r.holds), (1, 3, true));
    let r = distance_spread_check(&RegularGraph::complete(4).unwrap()).unwrap();
    assert_eq!(r.threshold, 0);
    assert!(r.holds);
    let r = distance_spread_check(&random_regular_graph(64, 3, 5).unwrap()).unwrap();
    assert!(r.holds);
    let disc = RegularGraph::from_edges(6, &[(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)]).unwrap();
    assert!(matches!(distance_spread_check(&disc), Err(Error::Disconnected)));
}

#[test]
fn spread_threshold_matches_floor_log() {
    for d in 2..6usize {
        for n in (d + 1)..300 {
            let expected = ((n as f64 / 2.0).ln() / (d as f64).ln() + 1e-12).floor().max(0.0) as u32;
            assert_eq!(spread_threshold(n, d), expected, "n={n}, d={d}");
        }
    }
}

#[test]
fn bound_calculator_examples() {
    assert!((dimension_lower_bound(1024.0, 4.0, 1.0, 1.0, 2.0, 1.0).unwrap() - 5f64.exp()).abs() < 1e-9);
    assert!((dimension_lower_bound(1024.0, 4.0, 1.0, 1.0, 2.0, 1.0).unwrap() - 148.41).abs() < 1e-2);
    assert_eq!(dimension_lower_bound(1024.0, 4.0, 1.0, f64::INFINITY, 2.0, 1.0).unwrap(), 1.0);
    assert!(dimension_lower_bound(1024.0, 4.0, 1.0, 1e9, 2.0, 1.0).unwrap() - 1.0 < 1e-6);
    assert_eq!(dimension_lower_bound(50.0, 3.0, 2.0, 3.0, 1.0, 0.0).unwrap(), 1.0);
    assert!((avg_distortion_lower_bound(1024.0, 4.0, 2.0, 2.0).unwrap() - 3.5355).abs() < 1e-4);
    assert!((avg_distortion_lower_bound(7.0, 7.0, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
    assert!((avg_distortion_lower_bound(1024.0, 4.0, 2.0, 1e12).unwrap() - 5.0).abs() < 1e-9);
    assert!((coarse_obstruction(2.0, 1.0, 2.0, 64, 3).unwrap().max_modulus - 2.0).abs() < 1e-12);
    assert!((coarse_obstruction(0.5, 1.0, 1.0, 64, 3).unwrap().max_modulus - 1.0).abs() < 1e-12);
    assert_eq!(coarse_obstruction(3.0, 0.0, 2.0, 64, 3).unwrap().max_modulus, 0.0);
}

#[test]
fn lp_gap_examples() {
    let opts = HeuristicOptions { restarts: 8, ..HeuristicOptions::default() };
    let c = graph_chain(&RegularGraph::cycle(4).unwrap()).unwrap();
    let lazy = lazy_power(&c, 1).unwrap();
    let r = lp_gap_check(&lazy, 2.0, 4, 0, &opts).unwrap();
    assert!((r.heuristic_gamma.value - 2.0).abs() < 1e-12);
    assert!((r.bound - 8.0).abs() < 1e-12);
    let r = lp_gap_check(&lazy, 4.0, 4, 0, &opts).unwrap();
    assert_eq!(r.status, Implication::Holds);
    assert!(r.ratio.unwrap() <= 1.0);
    let id = build_reversible_chain(&Matrix::identity(3), Some(&uniform(3))).unwrap();
    let r = lp_gap_check(&id, 4.0, 2, 0, &opts).unwrap();
    assert_eq!(r.status, Implication::Vacuous);
}

#[test]
fn graph_text_and_json_parsing() {
    let g = RegularGraph::hypercube(3).unwrap();
    assert_eq!(parse_graph(&g.to_edge_list()).unwrap(), g);
    assert_eq!(parse_graph(&serde_json::to_string(&g).unwrap()).unwrap(), g);
    assert!(parse_graph("0 1\n1 2\n").is_err());
}

#[test]
fn hypercube_metric_is_hamming() {
    let g = RegularGraph::hypercube(4).unwrap();
    let m = g.metric().unwrap();
    for i in 0..16usize {
        for j in 0..16usize {
            assert_eq!(m.row(i)[j], (i ^ j).count_ones() as f64);
        }
    }
}

#[test]
fn random_cubic_graphs_usually_expand() {
    for n in [16usize, 32, 64] {
        let mut good = 0;
        for seed in 0..100u64 {
            let g = random_regular_graph(n, 3, seed).unwrap();
            let adj = DMatrix::from_fn(n, n, |i, j| if g.has_edge(i, j) { 1.0 / 3.0 } else { 0.0 });
            let mut ev: Vec<f64> = SymmetricEigen::new(adj).eigenvalues.iter().copied().collect();
            ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if ev[1] <= 0.95 {
                good += 1;
            }
        }
        assert!(good >= 95, "n = {n}: only {good}/100 with lambda2 <= 0.95");
    }
}
