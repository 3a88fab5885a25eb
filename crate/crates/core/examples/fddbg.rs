//! Scratch: isolate which gradient-check family misbehaves.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smixup_core::gnn::{classifier_loss_record, Backbone, GnnConfig, GnnParams, Readout, GIN_EPS};
use smixup_core::graph::Graph;
use smixup_core::matcher::{matcher_loss_record, MatcherConfig, MatcherParams, Normalizer};
use smixup_core::numerics::{Metric, Record};
use smixup_core::Matrix;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_shape_fn((rows, cols), |_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
}

fn random_unit_adjacency(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Matrix {
    let mut a = Matrix::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(p) {
                a[[i, j]] = 1.0;
                a[[j, i]] = 1.0;
            }
        }
    }
    a
}

fn gcn_norm_local(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let mut hat = a.clone();
    for i in 0..n {
        hat[[i, i]] += 1.0;
    }
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / hat.row(i).sum().sqrt()).collect();
    Matrix::from_shape_fn((n, n), |(i, j)| inv_sqrt[i] * hat[[i, j]] * inv_sqrt[j])
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    let eps = 1e-5;

    let mut worst_gcn: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(2..=6);
        let d = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let a = random_unit_adjacency(&mut rng, n, 0.5);
        let h = random_matrix(&mut rng, n, d, 1.0);
        let w = random_matrix(&mut rng, d, k, 0.8);
        let b = random_matrix(&mut rng, 1, k, 0.8);

        let mut rec = Record::new();
        let hc = rec.constant(h.clone());
        let norm = rec.constant(gcn_norm_local(&a));
        let wp = rec.parameter("w", w.clone());
        let bp = rec.parameter("b", b.clone());
        let prop = rec.matmul(norm, hc);
        let z = rec.matmul(prop, wp);
        let zb = rec.add_row(z, bp);
        let out = rec.relu(zb);
        let root = rec.sum_all(out);
        rec.set_root(root);
        let e = rec.finite_diff_check(eps).unwrap();
        if e > worst_gcn {
            worst_gcn = e;
            if e > 1e-4 {
                println!("gcn instance {i}: err {e:.3e} n={n} d={d} k={k}");
                println!("  z values: {:?}", rec.value(zb));
            }
        }
    }
    println!("worst gcn: {worst_gcn:.3e}");

    let mut worst_gin: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(2..=6);
        let d = rng.random_range(1..=4);
        let k = rng.random_range(1..=4);
        let a = random_unit_adjacency(&mut rng, n, 0.5);
        let h = random_matrix(&mut rng, n, d, 1.0);
        let w1v = random_matrix(&mut rng, d, k, 0.8);
        let b1v = random_matrix(&mut rng, 1, k, 0.8);
        let w2v = random_matrix(&mut rng, k, k, 0.8);
        let b2v = random_matrix(&mut rng, 1, k, 0.8);

        let mut rec = Record::new();
        let hc = rec.constant(h.clone());
        let ac = rec.constant(a.clone());
        let w1 = rec.parameter("w1", w1v);
        let b1 = rec.parameter("b1", b1v);
        let w2 = rec.parameter("w2", w2v);
        let b2 = rec.parameter("b2", b2v);
        let neighbors = rec.matmul(ac, hc);
        let scaled = rec.scalar_mul(hc, 1.0 + GIN_EPS);
        let agg = rec.add(scaled, neighbors);
        let z1 = rec.matmul(agg, w1);
        let z1b = rec.add_row(z1, b1);
        let hidden = rec.relu(z1b);
        let z2 = rec.matmul(hidden, w2);
        let out = rec.add_row(z2, b2);
        let root = rec.sum_all(out);
        rec.set_root(root);
        let e = rec.finite_diff_check(eps).unwrap();
        if e > worst_gin {
            worst_gin = e;
            if e > 1e-4 {
                println!("gin instance {i}: err {e:.3e} n={n} d={d} k={k}");
            }
        }
        let _ = (w1, b1, w2, b2, z1, z1b, hidden, z2, out, root);
    }
    println!("worst gin: {worst_gin:.3e}");

    let mut worst_comp: f64 = 0.0;
    for i in 0..100 {
        let backbone = if i % 2 == 0 { Backbone::Gcn } else { Backbone::Gin };
        let n = rng.random_range(2..=6);
        let d = rng.random_range(1..=4);
        let classes = rng.random_range(2..=4);
        let mut cfg = GnnConfig::new(backbone, classes, d);
        cfg.num_layers = rng.random_range(1..=3);
        cfg.hidden = rng.random_range(1..=4);
        cfg.readout = if i % 4 < 2 { Readout::Mean } else { Readout::Sum };

        let init = GnnParams::init(&cfg, 1000 + i as u64).expect("valid config");
        let noised: BTreeMap<String, Matrix> = init
            .to_named()
            .into_iter()
            .map(|(name, m)| {
                let noise = random_matrix(&mut rng, m.nrows(), m.ncols(), 0.5);
                (name, m + noise)
            })
            .collect();
        let params = GnnParams::from_named(&cfg, &noised).expect("shapes preserved");

        let mut label = vec![0.0; classes];
        label[rng.random_range(0..classes)] = 1.0;
        let g = Graph::new(
            random_unit_adjacency(&mut rng, n, 0.5),
            random_matrix(&mut rng, n, d, 1.0),
            label,
        )
        .expect("valid graph");

        let mut rec = classifier_loss_record(&[g], &params, &cfg).expect("valid batch");
        let e = rec.finite_diff_check(eps).unwrap();
        if e > 1e-4 {
            println!("comp instance {i}: err {e:.3e} backbone={backbone:?} n={n} d={d} classes={classes} layers={} hidden={}", cfg.num_layers, cfg.hidden);
        }
        worst_comp = worst_comp.max(e);
    }
    println!("worst composite: {worst_comp:.3e}");

    let mut worst_trip: f64 = 0.0;
    for i in 0..100 {
        let d = rng.random_range(1..=4);
        let cfg = MatcherConfig {
            num_layers: rng.random_range(1..=2),
            hidden: rng.random_range(1..=4),
            feature_dim: d,
            metric: if i % 2 == 0 { Metric::Cosine } else { Metric::NegSqEuclidean },
            normalizer: Normalizer::Softmax,
        };
        let init = MatcherParams::init(&cfg, 2000 + i as u64).expect("valid config");
        let noised: BTreeMap<String, Matrix> = init
            .to_named()
            .into_iter()
            .map(|(name, m)| {
                let noise = random_matrix(&mut rng, m.nrows(), m.ncols(), 0.5);
                (name, m + noise)
            })
            .collect();
        let params = MatcherParams::from_named(&cfg, &noised).expect("shapes preserved");
        let graph = |rng: &mut ChaCha8Rng| {
            let n = rng.random_range(2..=6);
            Graph::new(
                random_unit_adjacency(rng, n, 0.5),
                random_matrix(rng, n, d, 1.0),
                vec![1.0],
            )
            .expect("valid graph")
        };
        let (g1, g2, g3) = (graph(&mut rng), graph(&mut rng), graph(&mut rng));
        let mut rec =
            matcher_loss_record(&g1, &g2, &g3, 1.0, &params, &cfg).expect("valid triplet");
        let e = rec.finite_diff_check(eps).unwrap();
        if e > 1e-4 {
            println!(
                "trip instance {i}: err {e:.3e} metric={:?} layers={} hidden={} d={d} n1={} n2={} n3={}",
                cfg.metric,
                cfg.num_layers,
                cfg.hidden,
                g1.n(),
                g2.n(),
                g3.n()
            );
            for finer in [1e-6, 1e-7, 1e-8] {
                let ef = rec.finite_diff_check(finer).unwrap();
                println!("    eps {finer:.0e}: err {ef:.3e}");
            }
            dissect(&g1, &g2, &g3, &params, &cfg, eps, &mut rec);
        }
        worst_trip = worst_trip.max(e);
    }
    println!("worst triplet: {worst_trip:.3e}");
}

/// Forward pass through the public API: embeddings, pooled rows, hinge
/// argument, and the final loss.
fn forward_pieces(
    g1: &Graph,
    g2: &Graph,
    g3: &Graph,
    params: &MatcherParams,
    cfg: &MatcherConfig,
) -> (f64, f64) {
    use smixup_core::matcher::{embed_pair, triplet_loss};
    let pool = |h: &Matrix| -> Matrix {
        let mut out = Matrix::zeros((1, h.ncols()));
        for row in h.rows() {
            for (k, &x) in row.iter().enumerate() {
                out[[0, k]] += x;
            }
        }
        out
    };
    let (h1, h2) = embed_pair(g1, g2, params, cfg).unwrap();
    let (h1a, h3) = embed_pair(g1, g3, params, cfg).unwrap();
    let (r1, r2, r1a, r3) = (pool(&h1), pool(&h2), pool(&h1a), pool(&h3));
    let loss = triplet_loss(&r1, &r2, &r1a, &r3, 1.0, cfg.metric).unwrap();
    // hinge argument: loss = max(0, arg); recover arg from the similarities
    let sim = |a: &Matrix, b: &Matrix| -> f64 {
        use smixup_core::numerics::pairwise_similarity;
        pairwise_similarity(a, b, cfg.metric).unwrap()[[0, 0]]
    };
    let arg = sim(&r1a, &r3) - sim(&r1, &r2) + 1.0;
    (loss, arg)
}

fn dissect(
    g1: &Graph,
    g2: &Graph,
    g3: &Graph,
    params: &MatcherParams,
    cfg: &MatcherConfig,
    eps: f64,
    rec: &mut Record,
) {
    let analytic = rec.gradients().unwrap();
    let named = params.to_named();
    let mut worst = (String::new(), 0usize, 0usize, 0.0f64);
    for (name, m) in &named {
        let an = &analytic[name];
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let mut plus = named.clone();
                plus.get_mut(name).unwrap()[[i, j]] += eps;
                let mut minus = named.clone();
                minus.get_mut(name).unwrap()[[i, j]] -= eps;
                let pp = MatcherParams::from_named(cfg, &plus).unwrap();
                let pm = MatcherParams::from_named(cfg, &minus).unwrap();
                let (fp, argp) = forward_pieces(g1, g2, g3, &pp, cfg);
                let (fm, argm) = forward_pieces(g1, g2, g3, &pm, cfg);
                let fd = (fp - fm) / (2.0 * eps);
                let a = an[[i, j]];
                let rel = (fd - a).abs() / a.abs().max(1.0);
                if rel > worst.3 {
                    worst = (name.clone(), i, j, rel);
                    if rel > 1e-4 {
                        let (f0, arg0) = forward_pieces(g1, g2, g3, params, cfg);
                        println!(
                            "  worst coord {name}[{i},{j}]: rel {rel:.3e} fd {fd:.6} an {a:.6}"
                        );
                        println!(
                            "    f(-) {fm:.9} f(0) {f0:.9} f(+) {fp:.9}  arg(-) {argm:.9} arg(0) {arg0:.9} arg(+) {argp:.9}"
                        );
                    }
                }
            }
        }
    }
    println!(
        "  => worst {}[{},{}] rel {:.3e}",
        worst.0, worst.1, worst.2, worst.3
    );
}
