//! Property-based checks of the structural invariants.

use nalgebra::{DMatrix, SymmetricEigen};
use nsgap::embed::*;
use nsgap::expander::*;
use nsgap::john::*;
use nsgap::linalg::Matrix;
use nsgap::markov::*;
use nsgap::mazur::*;
use nsgap::num::rng_stream;
use nsgap::rayleigh::*;
use nsgap::spaces::*;
use proptest::prelude::*;
use rand::Rng;

fn chain_from_seed(n: usize, seed: u64) -> StochasticChain {
    random_reversible_chain(n, 0.6, &mut rng_stream(seed, 0)).unwrap()
}

fn config(n: usize, d: usize, seed: u64) -> Configuration {
    let mut rng = rng_stream(seed, 1);
    Configuration::Vectors(Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap())
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn lazy_power_is_additive(n in 2usize..7, seed in any::<u64>(), s in 1u32..5, t in 1u32..5) {
        let c = chain_from_seed(n, seed);
        let direct = lazy_power(&c, s + t).unwrap();
        let split = lazy_power(&c, s).unwrap().compose(&lazy_power(&c, t).unwrap()).unwrap();
        prop_assert!(direct.matrix().max_abs_diff(split.matrix()) <= 1e-12);
        prop_assert!(direct.is_reversible());
    }

    #[test]
    fn symmetrization_preserves_spectrum(n in 2usize..9, seed in any::<u64>()) {
        // Eigenvalues of the (non-symmetric) transition matrix by nalgebra's
        // general Schur decomposition against the library's symmetric ones.
        let c = chain_from_seed(n, seed);
        let a = DMatrix::from_fn(n, n, |i, j| c.a(i, j));
        let ev = a.complex_eigenvalues();
        prop_assert!(ev.iter().all(|z| z.im.abs() < 1e-8));
        let general = sorted_desc(ev.iter().map(|z| z.re).collect());
        let ours = spectral_data(&c).unwrap().eigenvalues;
        for (x, y) in general.iter().zip(&ours) {
            prop_assert!((x - y).abs() < 1e-9, "{general:?} vs {ours:?}");
        }
        prop_assert!((ours[0] - 1.0).abs() < 1e-10);
        prop_assert!(ours.iter().all(|v| v.abs() <= 1.0 + 1e-10));
    }

    #[test]
    fn classical_poincare_inequality(n in 2usize..7, seed in any::<u64>()) {
        let c = chain_from_seed(n, seed);
        let g = gamma_hilbert_exact(&c).unwrap();
        let space = MetricSpace::lp(2.0, 3).unwrap();
        for k in 0..20 {
            let x = config(n, 3, seed.wrapping_add(k));
            if let Ok(r) = rayleigh_quotient(&space, &x, &c, 2.0) {
                prop_assert!(1.0 / r <= g.value * (1.0 + 1e-9));
            }
        }
        // The eigenvector witness attains the gap, so a slightly smaller
        // constant fails on it.
        if let Some(Witness::Single(w)) = &g.witness {
            let r = rayleigh_quotient(&MetricSpace::lp(2.0, 1).unwrap(), w, &c, 2.0).unwrap();
            prop_assert!(1.0 / r > g.value * (1.0 - 1e-3));
        }
    }

    #[test]
    fn squared_chain_rayleigh_identity(n in 2usize..7, seed in any::<u64>(), d in 1usize..4) {
        // For mean-zero x: R(x; B², ‖·‖²) = 1 − ‖Bx‖²_π/‖x‖²_π.
        let b = chain_from_seed(n, seed);
        let pi = b.pi().to_vec();
        let Configuration::Vectors(raw) = config(n, d, seed) else { unreachable!() };
        let mean: Vec<f64> = (0..d).map(|k| (0..n).map(|i| pi[i] * raw.row(i)[k]).sum()).collect();
        let x = Matrix::from_fn(n, d, |i, k| raw.row(i)[k] - mean[k]);
        let bx = b.matrix().matmul(&x).unwrap();
        let norm = |m: &Matrix| (0..n).map(|i| pi[i] * m.row(i).iter().map(|v| v * v).sum::<f64>()).sum::<f64>();
        let expected = 1.0 - norm(&bx) / norm(&x);
        let b2 = b.compose(&b).unwrap();
        let r = rayleigh_quotient(&MetricSpace::lp(2.0, d).unwrap(), &Configuration::Vectors(x), &b2, 2.0).unwrap();
        prop_assert!((r - expected).abs() < 1e-10, "{r} vs {expected}");
    }

    #[test]
    fn bruteforce_witness_reproduces_value(n in 2usize..5, m in 2usize..4, seed in any::<u64>(), p in 1.0f64..3.0) {
        let c = chain_from_seed(n, seed);
        let space = MetricSpace::finite(nsgap::spaces::graph_metric(&(0..m).map(|i| vec![(i + 1) % m, (i + m - 1) % m]).collect::<Vec<_>>()).unwrap()).unwrap();
        let g = gamma_bruteforce(&c, &space, p).unwrap();
        if let Some(Witness::Single(w)) = &g.witness {
            let r = rayleigh_quotient(&space, w, &c, p).unwrap();
            prop_assert!((1.0 / r - g.value).abs() <= 1e-9 * g.value);
        }
    }

    #[test]
    fn calculus_rules(seed in any::<u64>(), lambda in 0.0f64..=1.0, t in 1u32..5, p in 1.0f64..4.0) {
        let mut rng = rng_stream(seed, 2);
        let a = random_reversible_chain(4, 0.7, &mut rng).unwrap();
        let b = random_chain_with_pi(a.pi(), 0.7, &mut rng).unwrap();
        let x = config(4, 2, seed);
        let r = rayleigh_calculus_check(&MetricSpace::lp(1.5, 2).unwrap(), &x, &a, &b, lambda, t, p).unwrap();
        prop_assert!(r.all_ok(), "{r:?}");
    }

    #[test]
    fn snowflake_monotonicity(base in 1e-3f64..1e3, t1 in 0.01f64..=1.0, t2 in 0.01f64..=1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let s_lo = MetricSpace::lp(2.0, 1).unwrap().with_theta(lo).unwrap().snowflake(base);
        let s_hi = MetricSpace::lp(2.0, 1).unwrap().with_theta(hi).unwrap().snowflake(base);
        if base >= 1.0 {
            prop_assert!(s_lo <= s_hi * (1.0 + 1e-15));
        } else {
            prop_assert!(s_lo >= s_hi * (1.0 - 1e-15));
        }
    }

    #[test]
    fn snowflake_is_a_metric(seed in any::<u64>(), theta in 0.05f64..=1.0) {
        let space = MetricSpace::lp(1.0, 3).unwrap().with_theta(theta).unwrap();
        let Configuration::Vectors(p) = config(3, 3, seed) else { unreachable!() };
        let d = |i: usize, j: usize| space.distance(&Point::Vector(p.row(i)), &Point::Vector(p.row(j))).unwrap();
        prop_assert!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-12);
    }

    #[test]
    fn gauge_homogeneity(seed in any::<u64>(), lambda in -10.0f64..10.0, kind in 0usize..4) {
        let space = match kind {
            0 => MetricSpace::lp(1.0, 3).unwrap(),
            1 => MetricSpace::lp(3.5, 3).unwrap(),
            2 => MetricSpace::lp(f64::INFINITY, 3).unwrap(),
            _ => MetricSpace::polytope(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 1.0]]).unwrap(),
        };
        let Configuration::Vectors(p) = config(1, 3, seed) else { unreachable!() };
        let b = p.row(0);
        let lb: Vec<f64> = b.iter().map(|v| v * lambda).collect();
        let zero = [0.0; 3];
        let lhs = space.distance(&Point::Vector(&zero), &Point::Vector(&lb)).unwrap();
        let rhs = lambda.abs() * space.distance(&Point::Vector(&zero), &Point::Vector(b)).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
    }

    #[test]
    fn product_metric_triangle(seed in any::<u64>(), p in 1.0f64..6.0) {
        let mut rng = rng_stream(seed, 3);
        let raw: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let pi: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let space = MetricSpace::lp(2.0, 2).unwrap();
        let (x, y, z) = (config(5, 2, seed), config(5, 2, seed ^ 1), config(5, 2, seed ^ 2));
        let xz = product_distance(&pi, &space, p, &x, &z).unwrap();
        let via = product_distance(&pi, &space, p, &x, &y).unwrap() + product_distance(&pi, &space, p, &y, &z).unwrap();
        prop_assert!(xz <= via + 1e-9);
    }

    #[test]
    fn mazur_roundtrip_and_norm_transfer(seed in any::<u64>(), p in 1.0f64..4.0, q in 1.0f64..4.0) {
        let mut rng = rng_stream(seed, 4);
        let m = rng.random_range(1..6);
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let w = raw.iter().map(|v| v / s).collect();
        let vals = Matrix::from_vec(m, 3, (0..3 * m).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let f = WeightedVectorFunction::new(w, vals).unwrap();
        let r = mazur_roundtrip_check(&f, &MetricSpace::lp(1.5, 3).unwrap(), p, q).unwrap();
        prop_assert!(r.ok, "{r:?}");
    }

    #[test]
    fn mvee_containment_and_sandwich(seed in any::<u64>(), d in 2usize..5, extra in 0usize..8) {
        let mut rng = rng_stream(seed, 5);
        let pts: Vec<Vec<f64>> = (0..d + extra).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let Ok(m) = mvee_detailed(&pts, MVEE_TOL) else { return Ok(()) };
        for v in &m.points {
            prop_assert!(m.ellipsoid.norm(v).powi(2) <= 1.0 + 1e-9);
        }
        // The polytope spanned by the points, seen through its John
        // ellipsoid, obeys the √d sandwich.
        let space = MetricSpace::polytope(pts).unwrap();
        let hd = hilbert_distance(&space).unwrap();
        prop_assert!(hd.d_x <= (d as f64).sqrt() + 1e-3);
        for _ in 0..200 {
            let u: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (nh, nx) = (hd.h.norm(&u), space.norm(&u).unwrap());
            prop_assert!(nh <= nx * (1.0 + 1e-6) && nx <= hd.d_x * nh * (1.0 + 1e-6));
        }
    }

    #[test]
    fn generated_graphs_are_regular(n in 4usize..40, d in 3usize..6, seed in any::<u64>()) {
        prop_assume!(n > d && (n * d) % 2 == 0);
        let g = random_regular_graph(n, d, seed).unwrap();
        prop_assert!(g.adjacency().iter().enumerate().all(|(u, nb)| nb.len() == d && !nb.contains(&u)));
        prop_assert_eq!(g.edges().len(), n * d / 2);
        prop_assert!(g.is_connected());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn embedding_is_feasible(n in 3usize..9, seed in any::<u64>(), theta in 0.2f64..=1.0) {
        let mut rng = rng_stream(seed, 6);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let dist = Matrix::from_fn(n, n, |i, j| (pts[i][0] - pts[j][0]).abs() + (pts[i][1] - pts[j][1]).abs());
        let mu = vec![1.0 / n as f64; n];
        let e = average_embed_hilbert(&dist, &mu, theta).unwrap();
        let g = DMatrix::from_fn(n, n, |i, j| e.g.row(i)[j]);
        prop_assert!(SymmetricEigen::new(g).eigenvalues.min() >= -1e-9);
        for i in 0..n {
            for j in (i + 1)..n {
                let sq: f64 = e.factor.row(i).iter().zip(e.factor.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                prop_assert!(sq <= dist.row(i)[j].powf(2.0 * theta) * (1.0 + 1e-6));
            }
        }
        prop_assert!(e.d_achieved >= 1.0 - 1e-9);
        prop_assert!(e.d_lower_bound <= e.d_achieved * (1.0 + 1e-9));
    }
}
