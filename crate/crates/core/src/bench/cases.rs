//! Registry of benchmark cases and the batch runner.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::instance::{gen_instance, init_point, InstanceSpec, Split};
use crate::error::{Error, Result};
use crate::solver::{solve, GeometryKind, Method, RunStatus, SolverConfig};

pub const CASE_IDS: [&str; 8] = ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8"];

/// Seeds used when none are given: five runs per configuration.
pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// One configuration of a case, repeated over seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSpec {
    /// File-name safe label, unique within the case.
    pub label: String,
    /// Instance template; the seed is replaced per run.
    pub instance: InstanceSpec,
    pub solver: SolverConfig,
    /// Training MSE at which iterations-to-tolerance is counted.
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: String,
    pub title: String,
    pub full_scale: bool,
    pub runs: Vec<RunSpec>,
}

fn cube(n: usize) -> [usize; 3] {
    [n; 3]
}

fn run(label: impl Into<String>, dims: [usize; 3], ranks: [usize; 3], os: f64) -> RunSpec {
    RunSpec {
        label: label.into(),
        instance: InstanceSpec::new(dims, ranks, os, 0),
        solver: SolverConfig::default(),
        tolerance: 1e-10,
    }
}

fn sd(mut r: RunSpec, geometry: GeometryKind) -> RunSpec {
    r.solver.method = Method::Sd;
    r.solver.geometry = geometry;
    r
}

/// Looks up a case. Desk-scale variants keep every mode at most 60 long;
/// `full_scale` selects the original sizes (expensive, no acceptance claims).
pub fn case_spec(id: &str, full_scale: bool) -> Result<CaseSpec> {
    let id_upper = id.to_ascii_uppercase();
    let fs = full_scale;
    let (title, runs): (&str, Vec<RunSpec>) = match id_upper.as_str() {
        "S1" => {
            let (n, r) = if fs { (200, 10) } else { (40, 4) };
            let base = RunSpec { tolerance: 1e-8, ..run("", cube(n), cube(r), 10.0) };
            (
                "steepest descent: preconditioned vs Euclidean metric",
                vec![
                    RunSpec { label: "sd-preconditioned".into(), ..sd(base.clone(), GeometryKind::Preconditioned) },
                    RunSpec { label: "sd-euclidean".into(), ..sd(base, GeometryKind::Euclidean) },
                ],
            )
        }
        "S2" => {
            let (n, r) = if fs { (100, 10) } else { (30, 3) };
            let mut s = run("ncg", cube(n), cube(r), 10.0);
            s.instance.split = s2_split();
            ("small-scale instances", vec![s])
        }
        "S3" => {
            let n = if fs { 3000 } else { 60 };
            ("large-scale instances", vec![run("ncg", cube(n), cube(5), 10.0)])
        }
        "S4" => {
            let n = if fs { 10000 } else { 60 };
            ("low sampling", vec![run("ncg-os4", cube(n), cube(5), 4.0)])
        }
        "S5" => {
            let n = if fs { 10000 } else { 60 };
            let runs = [5.0, 50.0, 100.0]
                .into_iter()
                .map(|c| {
                    let mut s = run(format!("cn{c}"), cube(n), cube(5), 5.0);
                    s.instance.condition_number = Some(c);
                    s.tolerance = 1e-8;
                    s
                })
                .collect();
            ("ill-conditioning and low sampling", runs)
        }
        "S6" => {
            let levels: &[f64] = if fs { &[1e-4, 1e-6, 1e-8, 1e-10, 1e-12] } else { &[1e-4, 1e-6] };
            let runs = levels
                .iter()
                .map(|&eps| {
                    let mut s = if fs {
                        run(format!("eps{eps:e}"), cube(10000), cube(5), 10.0)
                    } else {
                        let mut s = run(format!("eps{eps:e}"), cube(30), cube(3), 10.0);
                        s.instance.split = s2_split();
                        s
                    };
                    s.instance.noise_eps = Some(eps);
                    // Run down to the noise floor; runs end when the line
                    // search stalls at working precision.
                    s.solver.train_mse_tol = 1e-24;
                    s
                })
                .collect();
            ("noisy observations", runs)
        }
        "S7" => {
            let (a, b) = if fs { ([20000, 7000, 7000], 10000) } else { ([60, 30, 30], 40) };
            let mut runs = vec![run("asym-dims", a, cube(5), 10.0)];
            for ranks in [[7, 6, 6], [10, 5, 5], [15, 4, 4]] {
                runs.push(run(format!("ranks{}-{}-{}", ranks[0], ranks[1], ranks[2]), cube(b), ranks, 10.0));
            }
            ("asymmetric instances", runs)
        }
        "S8" => {
            let n = if fs { 500 } else { 50 };
            let runs = [10.0, 20.0]
                .into_iter()
                .map(|os| run(format!("os{os}"), cube(n), cube(5), os))
                .collect();
            ("medium-scale instances", runs)
        }
        _ => return Err(Error::UnknownCase(id.to_string())),
    };
    Ok(CaseSpec {
        id: id_upper,
        title: title.into(),
        full_scale,
        runs,
    })
}

/// 10% observed, the remaining 90% of the sampled entries held out; at
/// OS 10 on the 30³ rank-3 instance this makes the test set the complement.
fn s2_split() -> Split {
    Split {
        train: 0.1,
        validation: 0.0,
        test: 0.9,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub status: RunStatus,
    pub iterations: usize,
    /// First iteration reaching the tolerance; `max_iter + 1` if never.
    pub iterations_to_tol: usize,
    pub reached_tol: bool,
    pub final_train_mse: f64,
    pub final_test_mse: Option<f64>,
    pub wall_time_s: f64,
    /// Final test MSE divided by `ε² ‖P_Ω(X*)‖_F² / |Γ|` (noisy runs).
    pub noise_ratio: Option<f64>,
    pub trace_file: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub median_iterations_to_tol: f64,
    pub reached_count: usize,
    pub median_final_test_mse: Option<f64>,
    pub wall_time_mean_s: f64,
    pub wall_time_std_s: f64,
    pub median_noise_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub spec: RunSpec,
    pub seeds: Vec<SeedReport>,
    pub summary: RunSummary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CaseReport {
    pub case: String,
    pub title: String,
    pub full_scale: bool,
    pub runs: Vec<RunReport>,
}

impl CaseReport {
    pub fn run(&self, label: &str) -> Option<&RunReport> {
        self.runs.iter().find(|r| r.spec.label == label)
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Executes one configuration for one seed. Failures are recorded in the
/// returned status rather than propagated.
pub fn run_seed(spec: &RunSpec, seed: u64, trace_dir: Option<&Path>) -> Result<SeedReport> {
    let inst_spec = InstanceSpec { seed, ..spec.instance.clone() };
    let censored = spec.solver.max_iter + 1;
    let failed = |e: Error| SeedReport {
        seed,
        status: RunStatus::Error(e.to_string()),
        iterations: 0,
        iterations_to_tol: censored,
        reached_tol: false,
        final_train_mse: f64::NAN,
        final_test_mse: None,
        wall_time_s: 0.0,
        noise_ratio: None,
        trace_file: None,
    };
    let inst = match gen_instance::<f64>(&inst_spec) {
        Ok(i) => i,
        Err(e) => return Ok(failed(e)),
    };
    let x0 = match init_point(inst_spec.dims, inst_spec.ranks, seed) {
        Ok(x) => x,
        Err(e) => return Ok(failed(e)),
    };
    let start = Instant::now();
    let (_, trace) = match solve(&inst.problem, &x0, &spec.solver) {
        Ok(v) => v,
        Err(e) => return Ok(failed(e)),
    };
    let wall = start.elapsed().as_secs_f64();

    let trace_file = match trace_dir {
        Some(dir) => {
            let path = dir.join(format!("{}_seed{seed}.csv", spec.label));
            fs::write(&path, trace.to_csv())?;
            Some(path)
        }
        None => None,
    };
    let last = trace.last().cloned();
    let final_test_mse = last.as_ref().and_then(|r| r.test_mse);
    let noise_ratio = match (inst_spec.noise_eps, final_test_mse) {
        (Some(eps), Some(t)) if eps > 0.0 => inst.noise_floor(eps).map(|f| t / f),
        _ => None,
    };
    let to_tol = trace.iterations_to(spec.tolerance);
    Ok(SeedReport {
        seed,
        status: trace.status.clone(),
        iterations: trace.iterations(),
        iterations_to_tol: to_tol.unwrap_or(censored),
        reached_tol: to_tol.is_some(),
        final_train_mse: last.map_or(f64::NAN, |r| r.train_mse),
        final_test_mse,
        wall_time_s: wall,
        noise_ratio,
        trace_file,
    })
}

pub fn summarize(seeds: &[SeedReport]) -> RunSummary {
    let collect = |f: &dyn Fn(&SeedReport) -> Option<f64>| seeds.iter().filter_map(f).collect::<Vec<_>>();
    let its = collect(&|s| Some(s.iterations_to_tol as f64));
    let tests = collect(&|s| s.final_test_mse);
    let ratios = collect(&|s| s.noise_ratio);
    let (wall_time_mean_s, wall_time_std_s) = mean_std(&collect(&|s| Some(s.wall_time_s)));
    RunSummary {
        median_iterations_to_tol: median(&its).unwrap_or(f64::NAN),
        reached_count: seeds.iter().filter(|s| s.reached_tol).count(),
        median_final_test_mse: median(&tests),
        wall_time_mean_s,
        wall_time_std_s,
        median_noise_ratio: median(&ratios),
    }
}

/// Runs every configuration of a case over `seeds`. With `out_dir`, traces
/// go to `out_dir/<case>/<label>_seed<k>.csv` and the report to
/// `out_dir/<case>/report.json`.
pub fn run_case(case: &CaseSpec, seeds: &[u64], out_dir: Option<&Path>) -> Result<CaseReport> {
    let dir = match out_dir {
        Some(d) => {
            let dir = d.join(&case.id);
            fs::create_dir_all(&dir)?;
            Some(dir)
        }
        None => None,
    };
    let mut runs = Vec::with_capacity(case.runs.len());
    for spec in &case.runs {
        let mut reports = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let rep = run_seed(spec, seed, dir.as_deref())?;
            log::info!(
                "{} {} seed {seed}: {:?} after {} iterations, train MSE {:e}",
                case.id,
                spec.label,
                rep.status,
                rep.iterations,
                rep.final_train_mse
            );
            reports.push(rep);
        }
        runs.push(RunReport {
            spec: spec.clone(),
            summary: summarize(&reports),
            seeds: reports,
        });
    }
    let report = CaseReport {
        case: case.id.clone(),
        title: case.title.clone(),
        full_scale: case.full_scale,
        runs,
    };
    if let Some(dir) = dir {
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}
