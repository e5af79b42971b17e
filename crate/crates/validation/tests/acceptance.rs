//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use zoro::estimators::estimate_gradient;
use zoro::problems::{make_portfolio_oracle, make_sparse_quadratic, AssetTable, NoiseModel, Oracle};
use zoro::regularizers::Regularizer;
use zoro::rng;
use zoro::sensing::rademacher_directions;
use zoro::solver::{default_delta, default_m, direction_seed, zoro_run, EstimatorKind, SolverConfig};
use zoro::sparse_recovery::{cosamp, restricted_least_squares, restricted_rank, CosampConfig};
use zoro_bench::config::{ExperimentSpec, Method};
use zoro_bench::experiment::run_experiment;
use zoro_bench::huber::huber_divergence_demo;
use zoro_bench::sweep::dimension_sweep;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn experiments_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../experiments")
}

fn load(name: &str) -> ExperimentSpec {
    ExperimentSpec::from_path(experiments_dir().join(name)).expect("experiment file")
}

fn random_sparse(d: usize, s: usize, r: &mut rng::Rng) -> DVector<f64> {
    let idx = rand::seq::index::sample(r, d, s);
    let mut g = DVector::zeros(d);
    for i in idx.iter() {
        g[i] = rand_distr::Distribution::sample(&rand_distr::StandardNormal, r);
    }
    g
}

/// Slope, intercept and R² of the least-squares line through `(xs, ys)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx, sxy * sxy / (sxx * syy))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c1_cosamp_recovery() -> Verdict {
    let (d, s) = (200, 10);
    let m = (4.0 * s as f64 * (d as f64 / s as f64).ln()).ceil() as usize;
    let ok = (0..200u64)
        .into_par_iter()
        .filter(|&trial| {
            let z = rademacher_directions(m, d, rng::derive_seed(101, trial)).unwrap().matrix() / (m as f64).sqrt();
            let g = random_sparse(d, s, &mut rng::stream(rng::derive_seed(102, trial)));
            let sol = cosamp(&z, &(&z * &g), &CosampConfig::new(s)).unwrap();
            (&sol.values - &g).norm() / g.norm() <= 1e-6
        })
        .count();
    verdict(ok >= 190, format!("m = {m}, {ok}/200 trials with relative error ≤ 1e-6"))
}

fn exhaustive_residual(z: &DMatrix<f64>, y: &DVector<f64>, s: usize) -> f64 {
    let d = z.ncols();
    let mut best = f64::INFINITY;
    let mut stack = vec![(Vec::<usize>::new(), 0usize)];
    while let Some((cur, start)) = stack.pop() {
        if cur.len() == s {
            let v = restricted_least_squares(z, y, &cur).unwrap();
            best = best.min((z * v - y).norm());
            continue;
        }
        for i in start..d {
            let mut next = cur.clone();
            next.push(i);
            stack.push((next, i + 1));
        }
    }
    best
}

fn c2_brute_force() -> Verdict {
    let ok = (0..100u64)
        .filter(|&trial| {
            let mut r = rng::stream(rng::derive_seed(201, trial));
            let d = 8 + (trial % 5) as usize;
            let s = 1 + (trial % 3) as usize;
            let m = 2 * s + 3 + (trial % 4) as usize;
            let z = rademacher_directions(m, d, rng::derive_seed(202, trial)).unwrap().matrix() / (m as f64).sqrt();
            let y = &z * random_sparse(d, s, &mut r) + rng::gaussian_vector(&mut r, m) * 0.01;
            cosamp(&z, &y, &CosampConfig::new(s)).unwrap().residual_norm <= 1.01 * exhaustive_residual(&z, &y, s)
        })
        .count();
    verdict(ok >= 90, format!("{ok}/100 trials within 1% of exhaustive search"))
}

fn c3_error_law() -> Verdict {
    let (d, s) = (200, 20);
    let p = make_sparse_quadratic(d, s, 301).unwrap();
    let m = default_m(s, d, 4.0);
    let dirs = rademacher_directions(m, d, 302).unwrap();
    let x = rng::random_unit_vector(&mut rng::stream(303), d);
    let g = p.true_gradient(&x).unwrap();

    let deltas: Vec<f64> = (0..5).map(|i| 10f64.powi(-5 + i)).collect();
    let errors: Vec<f64> = deltas
        .iter()
        .map(|&delta| (estimate_gradient(&mut Oracle::noiseless(&p), &x, s, delta, &dirs).unwrap().g_hat - &g).norm())
        .collect();
    let logs = |v: &[f64]| v.iter().map(|t| t.ln()).collect::<Vec<_>>();
    let (slope, _, _) = linear_fit(&logs(&deltas), &logs(&errors));

    let sigma = 1e-4;
    let best = default_delta(sigma, p.hessian_l1_bound(), 1.0).unwrap();
    let grid: Vec<f64> = (0..17).map(|i| best * 10f64.powf(-2.0 + 0.25 * i as f64)).collect();
    let mean_errors: Vec<f64> = grid
        .par_iter()
        .map(|&delta| {
            (0..20u64)
                .map(|rep| {
                    let mut oracle = Oracle::new(&p, &NoiseModel::uniform(sigma, rep)).unwrap();
                    (estimate_gradient(&mut oracle, &x, s, delta, &dirs).unwrap().g_hat - &g).norm()
                })
                .sum::<f64>()
                / 20.0
        })
        .collect();
    let argmin = (0..grid.len()).min_by(|&a, &b| mean_errors[a].total_cmp(&mean_errors[b])).unwrap();
    let ratio = grid[argmin] / best;
    verdict(
        (slope - 1.0).abs() <= 0.2 && (1.0 / 3.0..=3.0).contains(&ratio),
        format!("slope {slope:.3}; noisy minimum at δ = {:.3e}, {ratio:.2}× of 2√(σ/H) = {best:.3e}", grid[argmin]),
    )
}

fn mean_queries(report: &zoro_bench::experiment::ExperimentReport, method: Method) -> (f64, usize) {
    let runs: Vec<_> = report.runs_for(method).collect();
    let censored = runs.iter().filter(|r| r.queries_to_threshold.is_none()).count();
    let total: u64 = runs.iter().map(|r| r.censored_queries().0).sum();
    (total as f64 / runs.len() as f64, censored)
}

fn c4_query_efficiency(out: &Path) -> Verdict {
    let spec = load("sparse_quadratic.toml");
    let report = run_experiment(&spec, Some(out)).unwrap();
    let (zoro, cz) = mean_queries(&report, Method::ZoroFixed);
    let (fdsa, cf) = mean_queries(&report, Method::Fdsa);
    let (spsa, cs) = mean_queries(&report, Method::Spsa);
    verdict(
        cz + cf + cs == 0 && zoro <= fdsa / 3.0 && zoro <= spsa / 1.5,
        format!(
            "mean queries to 1e-3 over {} seeds: ZORO+prox {zoro}, FDSA {fdsa} ({:.2}×), SPSA {spsa} ({:.2}×); censored {}",
            spec.repetitions,
            fdsa / zoro,
            spsa / zoro,
            cz + cf + cs
        ),
    )
}

fn c5_linear_convergence() -> Verdict {
    let p = make_sparse_quadratic(200, 20, 501).unwrap();
    let x0 = rng::random_unit_vector(&mut rng::stream(502), 200);
    let cfg = SolverConfig::new(20).with_max_iterations(400).with_delta(1e-8).with_seed(503);
    let out = zoro_run(&p, &NoiseModel::none(), &Regularizer::Zero, &x0, &cfg).unwrap();
    let e0 = out.trace.records[0].objective_error.unwrap();
    let (ks, logs): (Vec<f64>, Vec<f64>) = out
        .trace
        .records
        .iter()
        .filter_map(|r| {
            let e = r.objective_error.unwrap();
            (e >= 1e-10 && e <= e0 / 10.0).then(|| (r.iter as f64, e.ln()))
        })
        .unzip();
    if ks.len() < 3 {
        return verdict(false, format!("only {} iterates in [1e-10, e0/10]", ks.len()));
    }
    let (slope, _, r2) = linear_fit(&ks, &logs);
    verdict(
        slope < 0.0 && r2 >= 0.95,
        format!("{} iterates in segment, slope {slope:.4} per iteration, R² {r2:.4}", ks.len()),
    )
}

fn c6_horizon_scaling() -> Verdict {
    let (d, s) = (200, 20);
    let sigmas = [1e-6, 1e-4, 1e-2];
    let plateaus: Vec<f64> = sigmas
        .par_iter()
        .map(|&sigma| {
            let per_rep: Vec<f64> = (0..5u64)
                .map(|rep| {
                    let p = make_sparse_quadratic(d, s, rng::derive_seed(601, rep)).unwrap();
                    let x0 = rng::random_unit_vector(&mut rng::stream(rng::derive_seed(602, rep)), d);
                    let cfg = SolverConfig::new(s).with_max_iterations(600).with_seed(rep);
                    let noise = NoiseModel::uniform(sigma, rng::derive_seed(603, rep));
                    let out = zoro_run(&p, &noise, &Regularizer::Zero, &x0, &cfg).unwrap();
                    let tail: Vec<f64> =
                        out.trace.records.iter().skip(401).map(|r| r.objective_error.unwrap()).collect();
                    median(tail)
                })
                .collect();
            median(per_rep)
        })
        .collect();
    let (r1, r2) = (plateaus[1] / plateaus[0], plateaus[2] / plateaus[1]);
    let band = 3.0..=33.0;
    verdict(
        plateaus[0] < plateaus[1] && plateaus[1] < plateaus[2] && band.contains(&r1) && band.contains(&r2),
        format!(
            "plateau medians {:.3e}, {:.3e}, {:.3e}; ratios {r1:.1}, {r2:.1}",
            plateaus[0], plateaus[1], plateaus[2]
        ),
    )
}

fn c7_opportunistic_exit() -> Verdict {
    let (d, s) = (100, 5);
    let p = make_sparse_quadratic(d, s, 701).unwrap();
    let x0 = DVector::from_element(d, 1.0);
    let support: Vec<usize> = (0..d).filter(|&i| p.true_gradient(&x0).unwrap()[i] != 0.0).collect();
    let m = default_m(s, d, 4.0);
    // The restricted stage is only informative when the first |S| directions
    // restricted to S are linearly independent.
    let seed = (0u64..)
        .find(|&seed| {
            let dirs = rademacher_directions(m, d, direction_seed(seed)).unwrap();
            restricted_rank(&dirs.slice(0..s).matrix().clone(), &support) == s
        })
        .unwrap();
    let cfg = SolverConfig::new(s)
        .with_max_iterations(30)
        .with_estimator(EstimatorKind::Opportunistic)
        .with_seed(seed);
    let out = zoro_run(&p, &NoiseModel::none(), &Regularizer::Zero, &x0, &cfg).unwrap();
    let costs: Vec<u64> = out.trace.records.windows(2).map(|w| w[1].queries - w[0].queries).collect();
    let later = &costs[1..];
    verdict(
        !later.is_empty() && later.iter().all(|&c| c == s as u64 + 1),
        format!(
            "solver seed {seed}; first round {} queries, later rounds {:?}",
            costs[0],
            later.iter().fold(BTreeMap::new(), |mut acc, c| {
                *acc.entry(*c).or_insert(0) += 1;
                acc
            })
        ),
    )
}

fn c8_dimension_sweep(out: &Path) -> Verdict {
    let spec = load("max_k_sweep.toml");
    let dims = [64, 128, 256];
    let report = dimension_sweep(&spec, &dims, spec.threshold, Some(out)).unwrap();
    let series = |m: Method| -> Vec<f64> { dims.iter().map(|&d| report.row(d, m).unwrap().mean_queries).collect() };
    let growth = |v: &[f64]| -> Vec<f64> { v.windows(2).map(|w| w[1] / w[0]).collect() };
    let (z, sp) = (series(Method::ZoroFixed), series(Method::Spsa));
    let (gz, gs) = (growth(&z), growth(&sp));
    let censored: usize = report.rows.iter().map(|r| r.censored).sum();
    verdict(
        censored == 0 && gz.iter().all(|g| *g <= 1.6) && gs.iter().all(|g| *g >= 1.8),
        format!("ZORO means {z:?} (growth {gz:.2?}); SPSA means {sp:?} (growth {gs:.2?}); censored {censored}"),
    )
}

fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let (mut css, mut theta) = (0.0, 0.0);
    for (i, ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// Minimum of `xᵀCx/2 + λ·min(mᵀx − r, 0)²` over the unit simplex by
/// accelerated projected gradient. On `Σx = 1` this is the penalized risk.
fn dense_reference(c: &DMatrix<f64>, means: &DVector<f64>, lambda: f64, r: f64) -> f64 {
    let d = means.len();
    let f = |x: &DVector<f64>| 0.5 * x.dot(&(c * x)) + lambda * (means.dot(x) - r).min(0.0).powi(2);
    let grad = |x: &DVector<f64>| c * x + means * (2.0 * lambda * (means.dot(x) - r).min(0.0));
    let l = c.clone().symmetric_eigen().eigenvalues.max() + 2.0 * lambda * means.norm_squared();
    let mut x = DVector::from_element(d, 1.0 / d as f64);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..20_000 {
        let next = project_simplex(&(&y - grad(&y) / l));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        x = next;
        t = t_next;
    }
    f(&x)
}

fn c9_portfolio() -> Verdict {
    let d = 225;
    let (lambda, r) = (10.0, 0.008);
    let assets = AssetTable::synthetic(d, 7).unwrap();
    let reference = dense_reference(&assets.covariance(), &assets.means, lambda, r);
    let p = make_portfolio_oracle(&assets, lambda, r).unwrap();
    let x0 = DVector::from_element(d, 1.0 / d as f64);
    let ratios: Vec<f64> = (0..5u64)
        .into_par_iter()
        .map(|seed| {
            let mut cfg = SolverConfig::new(20)
                .with_estimator(EstimatorKind::Opportunistic)
                .with_max_iterations(100_000)
                .with_budget(100_000)
                .with_delta(1e-7)
                .with_seed(seed);
            cfg.opportunistic.check_rows = 5;
            let out = zoro_run(&p, &NoiseModel::none(), &Regularizer::NonNeg, &x0, &cfg).unwrap();
            out.trace.final_objective / reference
        })
        .collect();
    let mid = median(ratios.clone());
    verdict(
        (mid - 1.0).abs() <= 0.5,
        format!("dense reference {reference:.4e}; final risk ratios over 5 seeds {ratios:.3?}, median {mid:.3}"),
    )
}

fn c10_huber(out: &Path) -> Verdict {
    let (m, sigma) = (0.1, 0.02);
    let noisy = huber_divergence_demo(m, sigma, 200, None, Some(&out.join("noisy"))).unwrap();
    let clean = huber_divergence_demo(m, 0.0, 200, None, Some(&out.join("clean"))).unwrap();
    let failed = noisy.trace.status == zoro::solver::RunStatus::Divergence || noisy.failed_to_descend();
    verdict(
        sigma > m * m && failed && clean.trace.final_objective <= 1e-8,
        format!(
            "σ = {sigma}: status {}, F {:.4} → {:.4}; σ = 0: final F {:.3e}",
            noisy.trace.status.as_str(),
            noisy.trace.initial_objective,
            noisy.trace.final_objective,
            clean.trace.final_objective
        ),
    )
}

fn csv_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn c11_determinism(first: &Path, second: &Path) -> Verdict {
    c4_query_efficiency(&second.join("c4"));
    c8_dimension_sweep(&second.join("c8"));
    c10_huber(&second.join("c10"));
    let (a, b) = (csv_files(first), csv_files(second));
    let differing: Vec<_> = a.iter().filter(|(k, v)| b.get(*k) != Some(v)).map(|(k, _)| k.clone()).collect();
    verdict(
        !a.is_empty() && a.len() == b.len() && differing.is_empty(),
        format!("{} CSV files compared, {} differ", a.len(), differing.len()),
    )
}

fn main() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let (a, b) = (first.path().to_path_buf(), second.path().to_path_buf());

    type Check<'a> = (u32, &'a str, Duration, Box<dyn Fn() -> Verdict + 'a>);
    let checks: Vec<Check> = vec![
        (1, "CoSaMP exact recovery", Duration::from_secs(10), Box::new(c1_cosamp_recovery)),
        (2, "brute-force equivalence", Duration::from_secs(5), Box::new(c2_brute_force)),
        (3, "estimator error law", Duration::from_secs(30), Box::new(c3_error_law)),
        (4, "query-efficiency ordering", Duration::from_secs(120), Box::new(|| c4_query_efficiency(&a.join("c4")))),
        (5, "linear convergence", Duration::from_secs(30), Box::new(c5_linear_convergence)),
        (6, "error-horizon scaling", Duration::from_secs(120), Box::new(c6_horizon_scaling)),
        (7, "opportunistic early exit", Duration::from_secs(10), Box::new(c7_opportunistic_exit)),
        (8, "dimension sweep", Duration::from_secs(300), Box::new(|| c8_dimension_sweep(&a.join("c8")))),
        (9, "portfolio", Duration::from_secs(180), Box::new(c9_portfolio)),
        (10, "Huber adversarial demo", Duration::from_secs(5), Box::new(|| c10_huber(&a.join("c10")))),
        (11, "determinism", Duration::from_secs(600), Box::new(|| c11_determinism(&a, &b))),
    ];

    let mut failed = Vec::new();
    for (id, name, limit, check) in &checks {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= *limit;
        let pass = v.pass && in_time;
        let time_note = if in_time { String::new() } else { format!(" (over the {}s limit)", limit.as_secs()) };
        println!(
            "[{}] {id:>2} {name}: {} [{:.1}s{time_note}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
        if !pass {
            failed.push(*id);
        }
    }
    println!("{}/{} criteria passed", checks.len() - failed.len(), checks.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
