//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mmdp::bandit::{counterexample_mmdp, mixts_run, regret_scan, MixtsConfig, PolicySource, RegretInstance};
use mmdp::dp::{forward_weights, solve_cadp, solve_mvp, solve_wsu, CadpConfig, CadpInit, SolveReport, StopReason};
use mmdp::eval::{
    brute_force_best, compare, episode_rng, exact_return, fixtures, random_instance, simulate_episode, solve_oracle,
    Algorithm, CompareConfig,
};
use mmdp::gradient::grad_check;
use mmdp::{load_domain, Mmdp, RandomizedPolicy};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Dimensions drawn from the seed: S <= 5, A <= 3, M <= 4, T <= 6.
fn small_instance(seed: u64) -> Mmdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = rng.gen_range(1..=5);
    let a = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=4);
    let t = rng.gen_range(1..=6);
    let sparsity = rng.gen_range(0.3..=1.0);
    random_instance(s, a, m, t, seed, sparsity)
}

fn non_decreasing(report: &SolveReport, slack: f64) -> bool {
    let mut previous = report.initial_return.unwrap_or(f64::NEG_INFINITY);
    for &r in &report.iterate_returns {
        if r < previous - slack {
            return false;
        }
        previous = r;
    }
    true
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut bad_monotone = Vec::new();
    let mut bad_stop = Vec::new();
    for seed in 0..200 {
        let mmdp = small_instance(seed);
        let report = solve_cadp(&mmdp, &CadpConfig::default()).expect("cadp runs");
        if !non_decreasing(&report, 1e-9) {
            bad_monotone.push(seed);
        }
        if report.stop_reason != StopReason::PolicyFixedPoint {
            bad_stop.push((seed, report.stop_reason));
        }
    }
    let elapsed = started.elapsed();
    verdict(
        bad_monotone.is_empty() && bad_stop.is_empty() && elapsed < Duration::from_secs(30),
        format!(
            "200 instances, non-monotone {:?}, not at fixed point {:?}, {:.3}s (limit 30s)",
            bad_monotone,
            bad_stop,
            secs(elapsed)
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut violations = Vec::new();
    let mut strict = 0;
    for seed in 0..200 {
        let mmdp = small_instance(seed);
        let wsu = solve_wsu(&mmdp).unwrap().return_value;
        let cadp = solve_cadp(&mmdp, &CadpConfig::with_init(CadpInit::Wsu))
            .unwrap()
            .return_value;
        if cadp < wsu - 1e-9 {
            violations.push(seed);
        }
        if cadp > wsu + 1e-9 {
            strict += 1;
        }
    }
    verdict(
        violations.is_empty(),
        format!(
            "cadp >= wsu on 200 instances, violations {:?}, strict improvement on {}/200 ({:.1}%)",
            violations,
            strict,
            strict as f64 / 2.0
        ),
    )
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let mut violations = Vec::new();
    let mut optimal = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let m = rng.gen_range(1..=3);
        let t = rng.gen_range(1..=3);
        let mmdp = random_instance(2, 2, m, t, 1000 + seed, 1.0);
        let (_, brute) = brute_force_best(&mmdp).unwrap();
        let cadp = solve_cadp(&mmdp, &CadpConfig::default()).unwrap().return_value;
        let wsu = solve_wsu(&mmdp).unwrap().return_value;
        if !(brute >= cadp - 1e-9 && cadp >= wsu - 1e-9) {
            violations.push(seed);
        }
        if (brute - cadp).abs() <= 1e-9 {
            optimal += 1;
        }
    }
    let e1 = fixtures::e1();
    let e1_cadp = solve_cadp(&e1, &CadpConfig::default()).unwrap().return_value;
    let (_, e1_brute) = brute_force_best(&e1).unwrap();
    let e1_ok = (e1_cadp - 1.4).abs() < 1e-12 && (e1_brute - 1.4).abs() < 1e-12;
    let elapsed = started.elapsed();
    verdict(
        violations.is_empty() && e1_ok && elapsed < Duration::from_secs(60),
        format!(
            "brute >= cadp >= wsu on 100 instances, violations {:?}, cadp optimal on {}/100, E1 cadp {} brute {}, {:.3}s (limit 60s)",
            violations,
            optimal,
            e1_cadp,
            e1_brute,
            secs(elapsed)
        ),
    )
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let (s, a, m, t) = (
            rng.gen_range(1..=5),
            rng.gen_range(2..=3),
            rng.gen_range(1..=4),
            rng.gen_range(1..=6),
        );
        let mmdp = random_instance(s, a, m, t, 2000 + seed, rng.gen_range(0.3..=1.0));
        let policy = RandomizedPolicy::random_interior(t, s, a, &mut rng);
        let report = grad_check(&mmdp, &policy, 1e-5).unwrap();
        worst = worst.max(report.max_rel_err);
    }
    let elapsed = started.elapsed();
    verdict(
        worst <= 1e-5 && elapsed < Duration::from_secs(60),
        format!(
            "max relative error {worst:.3e} over 50 pairs (limit 1e-5, h = 1e-5), {:.3}s (limit 60s)",
            secs(elapsed)
        ),
    )
}

fn criterion_5() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let (s, a, m, t) = (
            rng.gen_range(1..=5),
            rng.gen_range(2..=3),
            rng.gen_range(1..=4),
            rng.gen_range(1..=6),
        );
        let mmdp = random_instance(s, a, m, t, 3000 + seed, rng.gen_range(0.3..=1.0));
        let policy = RandomizedPolicy::random_interior(t, s, a, &mut rng);
        let rho = exact_return(&mmdp, &policy).unwrap();
        let layer = rng.gen_range(0..t);
        // zero-sum direction in every row of one layer
        let mut direction = vec![vec![0.0; a]; s];
        for row in direction.iter_mut() {
            for d in row.iter_mut() {
                *d = rng.gen_range(-1.0..1.0);
            }
            let mean = row.iter().sum::<f64>() / a as f64;
            row.iter_mut().for_each(|d| *d -= mean);
        }
        let h = 0.01;
        let shifted = |sign: f64| {
            let mut p = policy.clone();
            for (st, d) in direction.iter().enumerate() {
                for (x, dx) in p.row_mut(layer, st).iter_mut().zip(d) {
                    *x += sign * h * dx;
                }
            }
            exact_return(&mmdp, &p).unwrap()
        };
        let second = shifted(1.0) - 2.0 * rho + shifted(-1.0);
        worst_ratio = worst_ratio.max(second.abs() / rho.abs().max(1.0));
    }
    verdict(
        worst_ratio <= 1e-8,
        format!("max |second difference| / max(1, |rho|) = {worst_ratio:.3e} over 50 pairs (limit 1e-8)"),
    )
}

fn criterion_6() -> Outcome {
    let mut worst_sum: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed);
        let mmdp = small_instance(4000 + seed);
        let policy = RandomizedPolicy::random_interior(mmdp.horizon(), mmdp.n_states(), mmdp.n_actions(), &mut rng);
        let weights = forward_weights(&mmdp, &policy).unwrap();
        for t in 0..mmdp.horizon() {
            let mut total = 0.0;
            for m in 0..mmdp.n_models() {
                let per_model: f64 = (0..mmdp.n_states()).map(|s| weights.b(t, m, s)).sum();
                worst_sum = worst_sum.max((per_model - mmdp.weights()[m]).abs());
                total += per_model;
            }
            worst_sum = worst_sum.max((total - 1.0).abs());
        }
    }

    let episodes = 100_000u64;
    let mut worst_z: f64 = 0.0;
    let mut impossible_hits = 0;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let mmdp = random_instance(4, 2, 3, 5, 5000 + seed, 0.6);
        let policy = RandomizedPolicy::random_interior(5, 4, 2, &mut rng);
        let weights = forward_weights(&mmdp, &policy).unwrap();
        let (nm, ns) = (mmdp.n_models(), mmdp.n_states());
        let mut counts = vec![0u64; 5 * nm * ns];
        for i in 0..episodes {
            let episode = simulate_episode(&mmdp, &policy, None, &mut episode_rng(seed, i));
            for (t, &s) in episode.states.iter().enumerate() {
                counts[(t * nm + episode.model) * ns + s] += 1;
            }
        }
        for t in 0..5 {
            for m in 0..nm {
                for s in 0..ns {
                    let b = weights.b(t, m, s);
                    let freq = counts[(t * nm + m) * ns + s] as f64 / episodes as f64;
                    if b == 0.0 {
                        if freq > 0.0 {
                            impossible_hits += 1;
                        }
                        continue;
                    }
                    let sigma = (b * (1.0 - b) / episodes as f64).sqrt();
                    worst_z = worst_z.max((freq - b).abs() / sigma);
                }
            }
        }
    }
    verdict(
        worst_sum <= 1e-9 && worst_z <= 4.0 && impossible_hits == 0,
        format!(
            "max sum deviation {worst_sum:.2e} on 50 instances (limit 1e-9); empirical frequencies max |z| = {worst_z:.2} on 5 instances x 1e5 episodes (limit 4)"
        ),
    )
}

fn criterion_7() -> Outcome {
    let started = Instant::now();
    let horizons: Vec<usize> = (2..=20).map(|k| 2 * k).collect();
    let mut failures = Vec::new();
    let mut min_margin = f64::INFINITY;
    for lambda in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let report = regret_scan(
            &RegretInstance::Counterexample { lambda },
            &PolicySource::BestMarkov,
            &horizons,
        )
        .unwrap();
        for row in &report.rows {
            let bound = row.bound.unwrap();
            min_margin = min_margin.min(row.regret - bound);
            if row.regret < bound - 1e-9 {
                failures.push(format!("lambda {lambda} T {}", row.horizon));
            }
        }
    }

    let mut exploit_worst: f64 = 0.0;
    let mut exploit_episodes = 0;
    for lambda in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let mmdp = counterexample_mmdp(lambda, 20).unwrap();
        for true_model in 0..2 {
            let config = MixtsConfig {
                episodes: 100,
                seed: 7,
                true_model: Some(true_model),
                ..MixtsConfig::default()
            };
            let run = mixts_run(&mmdp, &config).unwrap();
            for (episode, posterior) in run.episodes.iter().zip(&run.posteriors) {
                if posterior.probs[true_model] >= 0.99 {
                    exploit_episodes += 1;
                    exploit_worst = exploit_worst.max(episode.regret.abs());
                }
            }
        }
    }
    let elapsed = started.elapsed();
    verdict(
        failures.is_empty() && exploit_worst <= 1e-9 && exploit_episodes > 0 && elapsed < Duration::from_secs(60),
        format!(
            "best Markov regret >= c*T for 5 lambdas x 19 horizons, min margin {min_margin:.2e}, failures {failures:?}; MixTS regret after concentration max {exploit_worst:.1e} over {exploit_episodes} episodes; {:.3}s (limit 60s)",
            secs(elapsed)
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(6000 + seed);
        let (s, a, t) = (rng.gen_range(1..=3), rng.gen_range(1..=3), rng.gen_range(1..=3));
        let mmdp = random_instance(s, a, 1, t, 6000 + seed, rng.gen_range(0.3..=1.0));
        let values = [
            solve_mvp(&mmdp).unwrap().return_value,
            solve_wsu(&mmdp).unwrap().return_value,
            solve_cadp(&mmdp, &CadpConfig::default()).unwrap().return_value,
            solve_oracle(&mmdp).unwrap(),
            brute_force_best(&mmdp).unwrap().1,
        ];
        for v in values {
            worst = worst.max((v - values[4]).abs());
        }
    }
    verdict(
        worst <= 1e-9,
        format!("max spread of mvp/wsu/cadp/oracle/brute {worst:.2e} on 50 single-model instances (limit 1e-9)"),
    )
}

fn domains_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../domains")
}

fn find_domain(names: &[&str]) -> Option<PathBuf> {
    names
        .iter()
        .map(|n| domains_root().join(n))
        .find(|p| p.join("training.csv").exists())
}

fn criterion_9() -> Outcome {
    let riverswim = find_domain(&["riverswim", "rs"]);
    let pops = find_domain(&["population_small", "population-small", "pops"]);
    let hiv = find_domain(&["hiv"]);
    if riverswim.is_none() && pops.is_none() && hiv.is_none() {
        return Outcome::Skip(format!("no domain bundles under {}", domains_root().display()));
    }
    let dp_rows = vec![Algorithm::Mvp, Algorithm::Wsu, Algorithm::Cadp, Algorithm::Oracle];
    let config = CompareConfig {
        algorithms: dp_rows,
        episodes: 100,
        ..CompareConfig::default()
    };
    let mut notes = Vec::new();
    let mut ok = true;
    let mut check = |dir: &Option<PathBuf>, name: &str, horizon: usize, scale: f64, expected: &[(Algorithm, f64)]| {
        let Some(dir) = dir else {
            notes.push(format!("{name}: absent"));
            return;
        };
        let table = match load_domain(dir, horizon)
            .map_err(|e| e.to_string())
            .and_then(|b| compare(&b, horizon, &config).map_err(|e| e.to_string()))
        {
            Ok(table) => table,
            Err(e) => {
                ok = false;
                notes.push(format!("{name}: {e}"));
                return;
            }
        };
        for &(algorithm, target) in expected {
            let value = table.row(algorithm).and_then(|r| r.mean_return).map(|v| v / scale);
            let hit = value.is_some_and(|v| (v - target).abs() <= 1.0);
            ok &= hit;
            notes.push(format!(
                "{name} {algorithm} {:.1} (target {target})",
                value.unwrap_or(f64::NAN)
            ));
        }
    };
    check(
        &riverswim,
        "RS",
        50,
        1.0,
        &[
            (Algorithm::Cadp, 204.0),
            (Algorithm::Wsu, 203.0),
            (Algorithm::Mvp, 201.0),
        ],
    );
    check(
        &pops,
        "POPS",
        50,
        1.0,
        &[
            (Algorithm::Cadp, -1067.0),
            (Algorithm::Wsu, -1915.0),
            (Algorithm::Mvp, -2147.0),
            (Algorithm::Oracle, -882.0),
        ],
    );
    check(&hiv, "HIV", 15, 1000.0, &[(Algorithm::Cadp, 42.0)]);
    verdict(ok, notes.join("; "))
}

fn criterion_10() -> Outcome {
    let (label, mmdp) = match find_domain(&["population_small", "population-small", "pops"]) {
        Some(dir) => match load_domain(&dir, 50) {
            Ok(bundle) => ("POPS training set, T=50", bundle.training.fold_discount()),
            Err(e) => return Outcome::Fail(format!("loading {}: {e}", dir.display())),
        },
        None => (
            "random surrogate S=20 A=3 M=10 T=20",
            random_instance(20, 3, 10, 20, 2024, 0.3),
        ),
    };
    let runs: Vec<(&str, SolveReport)> = [
        ("wsu", CadpInit::Wsu),
        ("mvp", CadpInit::Mvp),
        ("random", CadpInit::Random(7)),
    ]
    .into_iter()
    .map(|(name, init)| (name, solve_cadp(&mmdp, &CadpConfig::with_init(init)).unwrap()))
    .collect();
    let at_three: Vec<f64> = runs
        .iter()
        .map(|(_, r)| r.iterate_returns.get(2).or(r.iterate_returns.last()).copied().unwrap())
        .collect();
    let hi = at_three.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = at_three.iter().copied().fold(f64::INFINITY, f64::min);
    let close = hi - lo <= 0.01 * hi.abs().max(lo.abs());
    let wsu_iters = runs[0].1.iterations;
    let earliest = runs.iter().all(|(_, r)| wsu_iters <= r.iterations);
    let summary: Vec<String> = runs
        .iter()
        .zip(&at_three)
        .map(|((name, r), v)| format!("{name}: {v:.4} at iteration 3, {} iterations", r.iterations))
        .collect();
    verdict(close && earliest, format!("{label}; {}", summary.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("monotone improvement", criterion_1),
        ("WSU dominance", criterion_2),
        ("global optimum oracle", criterion_3),
        ("gradient correctness", criterion_4),
        ("coordinate linearity", criterion_5),
        ("weight recursion", criterion_6),
        ("linear regret counterexample", criterion_7),
        ("single-model collapse", criterion_8),
        ("benchmark table reproduction", criterion_9),
        ("convergence trace shape", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("criterion {:>2} {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
