//! Acceptance checks, one line per criterion. Runs sequentially (timings
//! matter) and exits non-zero if any criterion fails. Pass criterion
//! numbers as arguments to run a subset.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::io::Write;
use std::time::Instant;

use common::*;
use nalgebra::DMatrix;
use tucker_completion::bench::{case_spec, gen_instance, init_point, run_case, CaseReport, InstanceSpec, DEFAULT_SEEDS};
use tucker_completion::manifold::{
    gaussian_ambient, group_act, group_act_tangent, horizontal_defect, metric, project_horizontal,
    project_tangent, rand_tangent, retract, tangent_defect, vertical_vector,
};
use tucker_completion::random::{gaussian_matrix, rng};
use tucker_completion::smallmat::{coupled_lyap_solve, polar_factor, CoreGrams};
use tucker_completion::tensor::{sparse_core_contract, sparse_eval_tucker, sparse_kron_contract};
use tucker_completion::{
    solve, CompletionProblem, GroupElement, QuotientGeometry, SkewTriple, SolverConfig, TuckerPoint, TuckerTangent,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn tangent_rel(a: &TuckerTangent<f64>, b: &TuckerTangent<f64>) -> f64 {
    a.sub(b).euclid_norm() / b.euclid_norm().max(f64::MIN_POSITIVE)
}

fn rand_skew(ranks: [usize; 3], seed: u64) -> SkewTriple<f64> {
    let mut r = rng(seed);
    SkewTriple(ranks.map(|k| {
        let m: DMatrix<f64> = gaussian_matrix(&mut r, k, k);
        &m - m.transpose()
    }))
}

fn rand_group(ranks: [usize; 3], seed: u64) -> GroupElement<f64> {
    let mut r = rng(seed);
    GroupElement::new(ranks.map(|k| polar_factor(&gaussian_matrix(&mut r, k, k)).unwrap())).unwrap()
}

fn kernels() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let (dims, ranks) = rand_shape(seed, 6, 3);
        let x = point(dims, ranks, seed + 1);
        let total: usize = dims.iter().product();
        let s = rand_sparse(dims, 1 + (seed as usize * 7) % total, seed + 2);
        let dense_s = s.to_dense();
        let full = dense_tucker(&x);
        let got = sparse_eval_tucker(&x, s.pattern()).unwrap();
        let want: Vec<f64> = s.indices().iter().map(|i| full.get(i[0], i[1], i[2])).collect();
        let num: f64 = got.values().iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = want.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(num / den);
        for d in 1..=3 {
            worst = worst.max(rel_err(&sparse_kron_contract(&s, &x, d).unwrap(), &dense_kron_contract(&dense_s, &x, d)));
        }
        worst = worst.max(rel_err_t(&sparse_core_contract(&s, &x).unwrap(), &dense_core_contract(&dense_s, &x)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-12 && secs < 10.0, format!("max relative error {worst:.2e} (≤ 1e-12), {secs:.2}s (< 10s)"))
}

fn geometry() -> Outcome {
    let start = Instant::now();
    let geom = QuotientGeometry::default();
    let mut failures = Vec::new();
    let mut check = |name: &str, seed: u64, value: f64, tol: f64| {
        if !(value <= tol) {
            failures.push(format!("{name} seed {seed}: {value:.2e} > {tol:.0e}"));
        }
    };
    for seed in 0..50 {
        let (dims, ranks) = rand_shape(seed, 7, 3);
        let x = point(dims, ranks, seed);
        let y = gaussian_ambient(&x, seed + 1);
        let p = project_tangent(&x, &y).unwrap();
        check("Ψ idempotency", seed, tangent_rel(&project_tangent(&x, &p).unwrap(), &p), 1e-9);
        check("tangency", seed, tangent_defect(&x, &p), 1e-12);

        let (h, omega) = geom.horizontal_split(&x, &p).unwrap();
        check("Π idempotency", seed, tangent_rel(&project_horizontal(&x, &h).unwrap(), &h), 1e-9);
        check("horizontality", seed, horizontal_defect(&x, &h).unwrap(), 1e-10);
        let v = vertical_vector(&x, &omega).unwrap();
        check("vertical reconstruction", seed, tangent_rel(&h.axpy(1.0, &v), &p), 1e-9);
        let eta_norm_sq = metric(&x, &p, &p).unwrap();
        check("Π(η) ⟂ vertical", seed, metric(&x, &h, &v).unwrap().abs() / eta_norm_sq, 1e-9);

        let vert = vertical_vector(&x, &rand_skew(ranks, seed + 2)).unwrap();
        // All-rank-1 shapes have a trivial vertical space.
        if vert.euclid_norm() > 0.0 {
            check(
                "vertical annihilation",
                seed,
                project_horizontal(&x, &vert).unwrap().euclid_norm() / vert.euclid_norm(),
                1e-9,
            );
        }

        let xi = rand_tangent(&x, seed + 3).unwrap();
        let g = metric(&x, &xi, &xi).unwrap();
        check("metric positivity", seed, if g > 0.0 { 0.0 } else { 1.0 }, 0.0);
        let zero = TuckerTangent::zeros_at(&x);
        check("metric at zero", seed, metric(&x, &zero, &zero).unwrap().abs(), 1e-13);

        let o = rand_group(ranks, seed + 4);
        let xo = group_act(&x, &o).unwrap();
        check("dense invariance", seed, rel_err_t(&dense_tucker(&xo), &dense_tucker(&x)), 1e-12);
        let eta = rand_tangent(&x, seed + 5).unwrap();
        let gm = metric(&x, &xi, &eta).unwrap();
        let gmo = metric(&xo, &group_act_tangent(&xi, &o).unwrap(), &group_act_tangent(&eta, &o).unwrap()).unwrap();
        check("metric invariance", seed, (gm - gmo).abs() / (g * metric(&x, &eta, &eta).unwrap()).sqrt(), 1e-12);
        let lhs = project_horizontal(&xo, &group_act_tangent(&p, &o).unwrap()).unwrap();
        check("Π equivariance", seed, tangent_rel(&lhs, &group_act_tangent(&h, &o).unwrap()), 1e-9);
        let lhs = project_tangent(&xo, &group_act_tangent(&y, &o).unwrap()).unwrap();
        check("Ψ equivariance", seed, tangent_rel(&lhs, &group_act_tangent(&p, &o).unwrap()), 1e-9);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 30.0;
    let detail = if failures.is_empty() {
        format!("all properties within tolerance over 50 seeds, {secs:.2}s (< 30s)")
    } else {
        format!("{} violations: {}; {secs:.2}s", failures.len(), failures.join("; "))
    };
    outcome(pass, detail)
}

fn random_problem(seed: u64, dims: [usize; 3], ranks: [usize; 3], m: usize) -> (CompletionProblem<f64>, TuckerPoint<f64>) {
    let truth = point(dims, ranks, seed + 10_000);
    let train = sparse_eval_tucker(&truth, rand_sparse(dims, m, seed).pattern()).unwrap();
    (CompletionProblem::new(ranks, train, None, None).unwrap(), point(dims, ranks, seed))
}

fn gradient() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for inst in 0..10 {
        let (dims, ranks) = rand_shape(inst + 500, 8, 3);
        let m = dims.iter().product::<usize>() / 3;
        let (p, x) = random_problem(inst, dims, ranks, m);
        let g = p.riemannian_grad(&x).unwrap();
        for k in 0..20 {
            let xi = rand_tangent(&x, 1000 * inst + k).unwrap();
            let xi = xi.scale(1.0 / metric(&x, &xi, &xi).unwrap().sqrt());
            let an = metric(&x, &g, &xi).unwrap();
            let best = [1e-4, 1e-5, 1e-6]
                .iter()
                .map(|&h| {
                    let fd = (p.cost(&retract(&x, &xi.scale(h)).unwrap()).unwrap()
                        - p.cost(&retract(&x, &xi.scale(-h)).unwrap()).unwrap())
                        / (2.0 * h);
                    (fd - an).abs() / an.abs()
                })
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst <= 1e-5 && secs < 30.0, format!("max relative error {worst:.2e} (≤ 1e-5) over 200 directions, {secs:.2}s (< 30s)"))
}

fn stepsize() -> Outcome {
    let mut worst_grid = 0.0f64;
    let mut worst_scale = 0.0f64;
    for seed in 0..20 {
        let (dims, ranks) = rand_shape(seed + 900, 7, 3);
        let m = dims.iter().product::<usize>() / 2;
        let (p, x) = random_problem(seed, dims, ranks, m);
        let xi = rand_tangent(&x, seed + 77).unwrap();
        let xi = if metric(&x, &p.riemannian_grad(&x).unwrap(), &xi).unwrap() > 0.0 { xi.scale(-1.0) } else { xi };
        let s = p.stepsize_guess(&x, &xi).unwrap();
        let full = dense_tucker(&x);
        let mut b = tucker_completion::DenseTensor3::zeros(dims);
        for d in 0..3 {
            let mut f = x.factors().clone();
            f[d] = xi.factors[d].clone();
            b = b.axpy(1.0, &dense_tucker(&TuckerPoint::from_parts(f, x.core().clone()).unwrap()));
        }
        b = b.axpy(1.0, &dense_tucker(&TuckerPoint::from_parts(x.factors().clone(), xi.core.clone()).unwrap()));
        let q = |t: f64| {
            p.train()
                .iter()
                .map(|([i, j, k], y)| (full.get(i, j, k) + t * b.get(i, j, k) - y).powi(2))
                .sum::<f64>()
        };
        let (mut lo, mut hi) = (-4.0 * s.abs(), 4.0 * s.abs());
        let mut best = 0.0;
        for _ in 0..12 {
            let h = (hi - lo) / 200.0;
            best = (0..=200).map(|i| lo + h * i as f64).min_by(|a, c| q(*a).total_cmp(&q(*c))).unwrap();
            lo = best - 2.0 * h;
            hi = best + 2.0 * h;
        }
        worst_grid = worst_grid.max((best - s).abs() / s.abs());
        for c in [0.01, 3.0, 250.0] {
            let sc = p.stepsize_guess(&x, &xi.scale(c)).unwrap();
            worst_scale = worst_scale.max((sc - s / c).abs() / (s / c).abs());
        }
    }
    outcome(
        worst_grid <= 1e-6 && worst_scale <= 1e-10,
        format!("grid argmin error {worst_grid:.2e} (≤ 1e-6), scale consistency {worst_scale:.2e} (≤ 1e-10)"),
    )
}

fn coupled() -> Outcome {
    let mut worst_res = 0.0f64;
    let mut worst_diff = 0.0f64;
    for seed in 0..40 {
        let (_, ranks) = rand_shape(seed + 300, 9, 4);
        let ranks = if seed == 0 { [4, 4, 4] } else { ranks };
        let x = point([9, 9, 9], ranks, seed);
        let rhs = rand_skew(ranks, seed + 1);
        if rhs.norm() == 0.0 {
            continue;
        }
        let sol = coupled_lyap_solve(&x, &rhs, 1e-13, 200).unwrap();
        worst_res = worst_res.max(coupled_lhs_kron(x.core(), &sol).axpy(-1.0, &rhs).norm() / rhs.norm());
        let dense = CoreGrams::new(x.core(), false).unwrap().coupled_dense(&rhs).unwrap();
        worst_diff = worst_diff.max(triple_rel_err(&sol, &dense));
        worst_diff = worst_diff.max(triple_rel_err(&sol, &coupled_solve_kron(x.core(), &rhs)));
    }
    outcome(
        worst_res <= 1e-10 && worst_diff <= 1e-9,
        format!("relative residual {worst_res:.2e} (≤ 1e-10), distance to dense solve {worst_diff:.2e} (≤ 1e-9)"),
    )
}

fn desk_case(id: &str) -> (CaseReport, f64) {
    let start = Instant::now();
    let report = run_case(&case_spec(id, false).unwrap(), &DEFAULT_SEEDS, None).unwrap();
    (report, start.elapsed().as_secs_f64())
}

fn case_s2() -> Outcome {
    let (report, secs) = desk_case("S2");
    let run = &report.runs[0];
    let good = run
        .seeds
        .iter()
        .filter(|s| s.reached_tol && s.iterations_to_tol <= 250 && s.final_test_mse.is_some_and(|t| t <= 1e-8))
        .count();
    let tests: Vec<String> = run.seeds.iter().map(|s| format!("{:.1e}", s.final_test_mse.unwrap_or(f64::NAN))).collect();
    outcome(
        good >= 4 && secs < 60.0,
        format!("{good}/5 seeds reach train MSE 1e-10 with test MSE ≤ 1e-8 (test MSE {}), {secs:.1}s (< 60s)", tests.join(", ")),
    )
}

fn case_s1() -> Outcome {
    let (report, secs) = desk_case("S1");
    let pre = report.run("sd-preconditioned").unwrap().summary.median_iterations_to_tol;
    let euc = report.run("sd-euclidean").unwrap().summary.median_iterations_to_tol;
    outcome(
        pre < euc && 2.0 * pre <= euc && secs < 300.0,
        format!("median iterations to 1e-8: preconditioned {pre}, Euclidean {euc} (censored at 251), {secs:.1}s (< 300s)"),
    )
}

fn case_s6() -> Outcome {
    let start = Instant::now();
    let mut case = case_spec("S6", false).unwrap();
    case.runs.retain(|r| r.instance.noise_eps == Some(1e-4));
    let report = run_case(&case, &DEFAULT_SEEDS, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ratios: Vec<f64> = report.runs[0].seeds.iter().map(|s| s.noise_ratio.unwrap_or(f64::NAN)).collect();
    let good = ratios.iter().filter(|r| (0.5..=2.0).contains(*r)).count();
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.3}")).collect();
    outcome(
        good >= 4 && secs < 120.0,
        format!("test MSE / (ε²‖P_Ω X*‖²/|Γ|) = [{}], {good}/5 within factor 2, {secs:.1}s (< 120s)", shown.join(", ")),
    )
}

fn case_s5() -> Outcome {
    let (report, secs) = desk_case("S5");
    let mut pass = secs < 300.0;
    let mut parts = Vec::new();
    for run in &report.runs {
        let good = run.seeds.iter().filter(|s| s.reached_tol && s.iterations_to_tol <= 250).count();
        pass &= good >= 4;
        let best = run.seeds.iter().map(|s| s.final_train_mse).fold(f64::INFINITY, f64::min);
        parts.push(format!("{} {good}/5 (best final train MSE {best:.1e})", run.spec.label));
    }
    outcome(pass, format!("seeds reaching train MSE 1e-8: {}; {secs:.1}s (< 300s)", parts.join(", ")))
}

fn per_iteration_seconds(obs: f64) -> f64 {
    let spec = InstanceSpec::new([60; 3], [5; 3], obs, 11);
    let inst = gen_instance::<f64>(&spec).unwrap();
    let x0 = init_point([60; 3], [5; 3], 11).unwrap();
    let cfg = SolverConfig {
        max_iter: 50,
        train_mse_tol: 0.0,
        grad_norm_tol: 0.0,
        ..Default::default()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (_, trace) = pool.install(|| solve(&inst.problem, &x0, &cfg)).unwrap();
    let last = trace.last().unwrap();
    last.time_s / last.iter.max(1) as f64
}

fn cost_scaling() -> Outcome {
    // OS 40 and 80 on 60³ rank 5: |Ω| = 38000 and 76000.
    per_iteration_seconds(20.0);
    let small = per_iteration_seconds(40.0);
    let large = per_iteration_seconds(80.0);
    let ratio = large / small;
    outcome(
        ratio <= 2.5,
        format!("per-iteration time {:.2} ms → {:.2} ms when |Ω| doubles, ratio {ratio:.2} (≤ 2.5)", small * 1e3, large * 1e3),
    )
}

fn determinism() -> Outcome {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut case = case_spec("S2", false).unwrap();
    case.runs[0].solver.record_wall_time = false;
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let read = |dir: &std::path::Path| {
        DEFAULT_SEEDS
            .iter()
            .map(|s| std::fs::read(dir.join("S2").join(format!("ncg_seed{s}.csv"))).unwrap())
            .collect::<Vec<_>>()
    };
    pool.install(|| {
        run_case(&case, &DEFAULT_SEEDS, Some(dir_a.path())).unwrap();
        run_case(&case, &DEFAULT_SEEDS, Some(dir_b.path())).unwrap();
    });
    let identical = read(dir_a.path()) == read(dir_b.path());
    outcome(identical, format!("5 trace CSVs byte-identical across two serial runs: {identical}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("kernel oracle equivalence", kernels),
        ("geometry property suite", geometry),
        ("gradient vs finite differences", gradient),
        ("step-size guess", stepsize),
        ("coupled Lyapunov solve", coupled),
        ("desk S2: small instance completion", case_s2),
        ("desk S1: preconditioned vs Euclidean steepest descent", case_s1),
        ("desk S6: noise floor", case_s6),
        ("desk S5: ill-conditioned cores", case_s5),
        ("per-iteration cost linear in |Ω|", cost_scaling),
        ("determinism of serial traces", determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let o = run();
        writeln!(out, "criterion {n:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail).unwrap();
        out.flush().unwrap();
        if !o.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        writeln!(out, "failed criteria: {failed:?}").unwrap();
        std::process::exit(1);
    }
}
