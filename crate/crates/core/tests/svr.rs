mod oracle;

use hybridcast_core::series::{Column, LagMatrix};
use hybridcast_core::svr::{
    self, dual_objective, gram_matrix, grid_search, solve_dual, CvScoring, DualSolution,
    KernelSpec, SvrConfig,
};
use oracle::TestRng;

fn matrix(rows: &[Vec<f64>], y: &[f64]) -> LagMatrix {
    let p = rows[0].len();
    let cols = (0..p)
        .map(|j| Column {
            variable: format!("x{j}"),
            lag: 1,
        })
        .collect();
    LagMatrix::from_parts(cols, rows.concat(), y.to_vec()).unwrap()
}

fn tight(cost: f64, epsilon: f64, kernel: KernelSpec) -> SvrConfig {
    SvrConfig {
        kkt_tolerance: 1e-10,
        max_passes: 5_000_000,
        standardize: false,
        ..SvrConfig::new(cost, epsilon, kernel)
    }
}

/// Feasibility and complementarity of a dual solution.
fn assert_kkt(gram: &[f64], y: &[f64], sol: &DualSolution, cost: f64, eps: f64, tol: f64) {
    let n = y.len();
    let sum: f64 = sol.beta.iter().sum();
    assert!(sum.abs() <= 1e-8 * cost * n as f64, "Σβ = {sum}");
    for (i, b) in sol.beta.iter().enumerate() {
        assert!(b.abs() <= cost + 1e-12, "|β_{i}| = {} > C", b.abs());
        if b.abs() < cost - tol {
            let f: f64 = (0..n).map(|j| gram[i * n + j] * sol.beta[j]).sum::<f64>() + sol.bias;
            let r = y[i] - f;
            assert!(
                r >= -eps - tol && r <= eps + tol,
                "row {i}: residual {r} outside tube (β = {b})"
            );
        }
    }
}

fn random_problem(rng: &mut TestRng, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.range(-1.5, 1.5)).collect())
        .collect();
    let y = rows
        .iter()
        .map(|r| r.iter().map(|v| v.sin()).sum::<f64>() + 0.2 * rng.normal())
        .collect();
    (rows, y)
}

#[test]
fn smo_matches_dense_qp_oracle() {
    let kernels = [
        KernelSpec::linear(),
        KernelSpec::rbf(0.5),
        KernelSpec::polynomial(0.5, 1.0, 2),
        KernelSpec::sigmoid(0.05, 0.0),
    ];
    let mut rng = TestRng::new(2024);
    for case in 0..50 {
        let n = 6 + case % 20;
        let d = 1 + case % 3;
        let (rows, y) = random_problem(&mut rng, n, d);
        let kernel = kernels[case % 4];
        let cost = [0.5, 1.0, 4.0][case % 3];
        let eps = [0.05, 0.1][case % 2];
        let cfg = tight(cost, eps, kernel);
        let flat = rows.concat();
        let gram = gram_matrix(&kernel, &flat, d);
        let sol = solve_dual(&gram, &y, &cfg).unwrap();
        assert!(sol.converged);
        let ours = dual_objective(&gram, &y, &sol.beta, eps);
        let (beta_ref, reference) = oracle::svr_dual_qp(&gram, &y, cost, eps, 60_000);
        let rel = (ours - reference).abs() / reference.abs().max(1e-12);
        assert!(
            rel <= 1e-6,
            "case {case} ({:?}): smo {ours} vs oracle {reference}",
            kernel.kind
        );
        assert_kkt(&gram, &y, &sol, cost, eps, 1e-6);
        let b_ref = oracle::svr_bias(&gram, &y, &beta_ref, cost, eps);
        for i in 0..n {
            let f: f64 = (0..n).map(|j| gram[i * n + j] * sol.beta[j]).sum::<f64>() + sol.bias;
            let g: f64 = (0..n).map(|j| gram[i * n + j] * beta_ref[j]).sum::<f64>() + b_ref;
            assert!((f - g).abs() <= 1e-4, "case {case} row {i}: {f} vs {g}");
        }
    }
}

#[test]
fn linear_tube_fit() {
    let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    let y: Vec<f64> = (0..10).map(|i| 2.0 * i as f64).collect();
    let m = matrix(&rows, &y);
    let cfg = SvrConfig {
        kkt_tolerance: 1e-6,
        ..SvrConfig::new(1000.0, 0.01, KernelSpec::linear())
    };
    let (model, sol, gram) = svr::train_detailed(&m, &cfg).unwrap();
    for (r, t) in rows.iter().zip(&y) {
        let f = model.predict(r).unwrap();
        assert!((f - t).abs() <= 0.01 + 1e-3, "{f} vs {t}");
    }
    let p = model.predict(&[5.5]).unwrap();
    assert!((10.98..=11.02).contains(&p), "predict(5.5) = {p}");
    for (i, b) in sol.beta.iter().enumerate() {
        if *b != 0.0 {
            assert!((model.predict(&rows[i]).unwrap() - y[i]).abs() <= 0.01 + 1e-3);
        }
    }
    // standardized inputs, so the oracle runs on the solver's own Gram matrix
    let (_, reference) = oracle::svr_dual_qp(&gram, &y, 1000.0, 0.01, 200_000);
    let ours = dual_objective(&gram, &y, &sol.beta, 0.01);
    assert!((ours - reference).abs() <= 1e-6 * reference.abs());
}

#[test]
fn small_rbf_problem() {
    let mut rng = TestRng::new(6);
    let (rows, y) = random_problem(&mut rng, 6, 2);
    let cfg = tight(1.0, 0.1, KernelSpec::rbf(0.5));
    let gram = gram_matrix(&cfg.kernel, &rows.concat(), 2);
    let sol = solve_dual(&gram, &y, &cfg).unwrap();
    let (beta_ref, reference) = oracle::svr_dual_qp(&gram, &y, 1.0, 0.1, 100_000);
    let ours = dual_objective(&gram, &y, &sol.beta, 0.1);
    assert!((ours - reference).abs() <= 1e-6 * reference.abs());
    let b_ref = oracle::svr_bias(&gram, &y, &beta_ref, 1.0, 0.1);
    let model = svr::train(&matrix(&rows, &y), &cfg).unwrap();
    for (i, r) in rows.iter().enumerate() {
        let g: f64 = (0..6).map(|j| gram[i * 6 + j] * beta_ref[j]).sum::<f64>() + b_ref;
        assert!((model.predict(r).unwrap() - g).abs() <= 1e-4);
    }
}

#[test]
fn permutation_invariance() {
    let mut rng = TestRng::new(77);
    let (rows, y) = random_problem(&mut rng, 18, 2);
    let cfg = tight(2.0, 0.05, KernelSpec::rbf(0.8));
    let base = svr::train(&matrix(&rows, &y), &cfg).unwrap();
    let (_, base_sol, base_gram) = svr::train_detailed(&matrix(&rows, &y), &cfg).unwrap();
    let base_obj = dual_objective(&base_gram, &y, &base_sol.beta, 0.05);
    let mut order: Vec<usize> = (0..18).collect();
    for round in 0..5 {
        for i in (1..order.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let r2: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
        let y2: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let (m2, s2, g2) = svr::train_detailed(&matrix(&r2, &y2), &cfg).unwrap();
        let obj = dual_objective(&g2, &y2, &s2.beta, 0.05);
        assert!((obj - base_obj).abs() <= 1e-8 * base_obj.abs(), "round {round}");
        for r in &rows {
            assert!((m2.predict(r).unwrap() - base.predict(r).unwrap()).abs() <= 1e-6);
        }
    }
}

#[test]
fn tube_loss_non_increasing_in_cost() {
    let mut rng = TestRng::new(31);
    let (rows, y) = random_problem(&mut rng, 25, 2);
    let m = matrix(&rows, &y);
    let mut prev = f64::INFINITY;
    for cost in [0.1, 1.0, 10.0, 100.0] {
        let cfg = SvrConfig {
            kkt_tolerance: 1e-9,
            max_passes: 10_000_000,
            ..SvrConfig::new(cost, 0.05, KernelSpec::rbf(1.0))
        };
        let model = svr::train(&m, &cfg).unwrap();
        let loss: f64 = rows
            .iter()
            .zip(&y)
            .map(|(r, t)| ((model.predict(r).unwrap() - t).abs() - 0.05).max(0.0))
            .sum();
        assert!(loss <= prev + 1e-6, "C = {cost}: loss {loss} > {prev}");
        prev = loss;
    }
}

#[test]
fn kkt_holds_on_default_tolerance_models() {
    let mut rng = TestRng::new(5);
    for kernel in [
        KernelSpec::linear(),
        KernelSpec::rbf(0.3),
        KernelSpec::polynomial(0.3, 1.0, 3),
        KernelSpec::sigmoid(0.02, 0.0),
    ] {
        let (rows, y) = random_problem(&mut rng, 40, 3);
        let cfg = SvrConfig::new(3.0, 0.1, kernel);
        let (_, sol, gram) = svr::train_detailed(&matrix(&rows, &y), &cfg).unwrap();
        assert!(sol.converged);
        assert_kkt(&gram, &y, &sol, 3.0, 0.1, 1e-3);
    }
}

#[test]
fn grid_search_rules() {
    let rows: Vec<Vec<f64>> = (0..24).map(|i| vec![i as f64]).collect();
    let y: Vec<f64> = (0..24).map(|i| 10.0 + 0.5 * i as f64).collect();
    let m = matrix(&rows, &y);

    let one = SvrConfig::new(1.0, 0.01, KernelSpec::linear());
    let r = grid_search(&m, &[one], 4, CvScoring::Mape).unwrap();
    assert_eq!(r.best, one);
    assert_eq!(r.table.len(), 1);
    assert_eq!(r.best_score, r.table[0].score);

    // on noiseless linear data a stiff linear model extrapolates exactly, a
    // narrow RBF does not
    let lin = SvrConfig::new(100.0, 0.001, KernelSpec::linear());
    let rbf = SvrConfig::new(100.0, 0.001, KernelSpec::rbf(8.0));
    let r = grid_search(&m, &[rbf, lin], 4, CvScoring::Mape).unwrap();
    assert_eq!(r.best, lin);
    assert!(r.table[1].score < 0.1);
    assert!(r.table[0].score > r.table[1].score);

    // identical scores: lexicographically smallest (C, ε, γ) wins
    let flat: Vec<f64> = vec![5.0; 24];
    let m = matrix(&rows, &flat);
    let grid = [
        SvrConfig::new(4.0, 0.1, KernelSpec::linear()),
        SvrConfig::new(1.0, 0.5, KernelSpec::linear()),
        SvrConfig::new(1.0, 0.1, KernelSpec::rbf(2.0)),
        SvrConfig::new(1.0, 0.1, KernelSpec::rbf(0.5)),
    ];
    let r = grid_search(&m, &grid, 4, CvScoring::Mape).unwrap();
    assert!(r.table.iter().all(|e| e.score == 0.0));
    assert_eq!(r.best, grid[3]);
}
