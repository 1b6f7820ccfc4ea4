//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use nsgms::concentration::{mgf_empirical, mgf_term, QuadraticForm};
use nsgms::decorrelation::{decorrelation_report, simulate_var1, to_block_samples};
use nsgms::experiment::{
    log_grid, run_lemma_check, run_node_recovery, run_phase_transition, ExperimentConfig, SizeGrid,
};
use nsgms::regression::{project_complement, residual_statistic, DEFAULT_RANK_TOL};
use nsgms::rng::keyed_rng;
use nsgms::{estimate_neighborhood, EstimatorConfig, SampleBlocks};

const SEED: u64 = 20_240_521;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn recovery_config(grid: SizeGrid) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(8, 2, 4, grid);
    cfg.beta = 2.0;
    cfg.coupling = 0.5;
    cfg.trials = 200;
    cfg.eta = 0.1;
    cfg.master_seed = SEED;
    cfg
}

fn recovery_at_bound() -> Outcome {
    let cfg = recovery_config(SizeGrid::BoundFactors(vec![1.0]));
    let row = run_node_recovery(&cfg).expect("recovery run").rows.remove(0);
    let pass = row.rho_cond && row.error_rate <= 0.1 && row.ci_high <= 0.15;
    outcome(
        pass,
        format!(
            "N={} (bound {:.0}), rho_min={:.4}, rho_cond={}, rate={:.3}, ci_high={:.3}",
            row.n, row.bound_n, row.rho_min, row.rho_cond, row.error_rate, row.ci_high
        ),
    )
}

fn phase_transition() -> Outcome {
    let cfg = recovery_config(SizeGrid::BoundFactors(log_grid(0.1, 3.0, 6)));
    let pt = run_phase_transition(&cfg).expect("phase transition run");
    let rows = &pt.result.rows;
    let (first, last) = (&rows[0], &rows[rows.len() - 1]);
    let pass = last.error_rate <= first.error_rate - 0.3 && last.error_rate <= 0.1;
    let curve: Vec<String> = rows.iter().map(|r| format!("{}:{:.3}", r.n, r.error_rate)).collect();
    outcome(pass, format!("rates by N [{}]", curve.join(", ")))
}

fn tail_bound_domination() -> Outcome {
    let mut rng = keyed_rng(SEED, &[3]);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for k in 0..20u64 {
        let len = rng.random_range(1..=64);
        let form = QuadraticForm::random(len, SEED + k).unwrap();
        let scale = form.a_norm2_sq().sqrt() + form.b_norm2_sq().sqrt();
        let etas: Vec<f64> = log_grid(0.1, 10.0, 10).into_iter().map(|f| f * scale).collect();
        for row in run_lemma_check(&form, &etas, 100_000, SEED ^ k).unwrap() {
            worst = worst.max(row.empirical - row.bound - row.slack());
            failures += usize::from(!row.dominated());
        }
    }
    outcome(failures == 0, format!("200 (form, eta) pairs, {failures} violations, max excess {worst:.3e}"))
}

fn mgf_identity() -> Outcome {
    let triples = [(0.3, -0.7, 0.0), (0.0, 1.0, 1.0), (0.5, 0.0, 0.5)];
    let mut worst: f64 = 0.0;
    for (k, &(a, b, lam)) in triples.iter().enumerate() {
        let exact = mgf_term(a, b, lam).unwrap();
        let mc = mgf_empirical(a, b, lam, 1_000_000, SEED + k as u64).unwrap();
        worst = worst.max((mc - exact).abs() / exact);
    }
    outcome(worst <= 0.01, format!("max relative error {worst:.4e} over 3 triples"))
}

fn random_block(rng: &mut impl Rng, p: usize, l: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, l, |_, _| StandardNormal.sample(rng))
}

fn normal_equations_residual(block: &DMatrix<f64>, set: &[usize], x: &[f64]) -> Vec<f64> {
    let x = nalgebra::DVector::from_column_slice(x);
    if set.is_empty() {
        return x.iter().copied().collect();
    }
    let a = DMatrix::from_fn(block.ncols(), set.len(), |n, k| block[(set[k], n)]);
    let gram = a.transpose() * &a;
    let coef = gram.cholesky().expect("full-rank design").solve(&(a.transpose() * &x));
    (x - a * coef).iter().copied().collect()
}

fn projection_oracle() -> Outcome {
    let mut rng = keyed_rng(SEED, &[5]);
    let (mut worst, mut monotone_fail) = (0.0f64, 0);
    for _ in 0..1000 {
        let p = rng.random_range(2..=10);
        let t_max = 4.min(p - 1);
        let l = rng.random_range(t_max + 1..=32);
        let blocks: Vec<DMatrix<f64>> = (0..2).map(|_| random_block(&mut rng, p, l)).collect();
        let samples = SampleBlocks::from_matrices(&blocks).unwrap();
        let i = rng.random_range(0..p);
        let mut others: Vec<usize> = (0..p).filter(|&j| j != i).collect();
        for k in (1..others.len()).rev() {
            others.swap(k, rng.random_range(0..=k));
        }
        let t2: Vec<usize> = others[..rng.random_range(0..=t_max)].to_vec();
        let t1: Vec<usize> = t2[..rng.random_range(0..=t2.len())].to_vec();

        let x: Vec<f64> = blocks[0].row(i).iter().copied().collect();
        let got = project_complement(&blocks[0], &t2, &x, DEFAULT_RANK_TOL).unwrap();
        let want = normal_equations_residual(&blocks[0], &t2, &x);
        let diff: f64 = got.iter().zip(&want).map(|(g, w)| (g - w).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);

        let z1 = residual_statistic(&samples, i, &t1, DEFAULT_RANK_TOL).unwrap();
        let z2 = residual_statistic(&samples, i, &t2, DEFAULT_RANK_TOL).unwrap();
        if z1 < z2 * (1.0 - 1e-12) {
            monotone_fail += 1;
        }
    }
    outcome(
        worst <= 1e-8 && monotone_fail == 0,
        format!("1000 instances, max relative residual gap {worst:.3e}, {monotone_fail} monotonicity violations"),
    )
}

fn exact_span_recovery() -> Outcome {
    let mut rng = keyed_rng(SEED, &[6]);
    let mut misses = 0;
    for _ in 0..100 {
        let p = rng.random_range(4..=10);
        let s = rng.random_range(1..=3.min(p - 2));
        let l = rng.random_range(s + 2..=32);
        let blocks_n = rng.random_range(1..=3);
        let i = rng.random_range(0..p);
        let mut others: Vec<usize> = (0..p).filter(|&j| j != i).collect();
        for k in (1..others.len()).rev() {
            others.swap(k, rng.random_range(0..=k));
        }
        let mut support: Vec<usize> = others[..rng.random_range(1..=s)].to_vec();
        support.sort_unstable();
        let coefs: Vec<f64> =
            support.iter().map(|_| rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let blocks: Vec<DMatrix<f64>> = (0..blocks_n)
            .map(|_| {
                let mut m = random_block(&mut rng, p, l);
                for n in 0..l {
                    m[(i, n)] = support.iter().zip(&coefs).map(|(&j, c)| c * m[(j, n)]).sum();
                }
                m
            })
            .collect();
        let samples = SampleBlocks::from_matrices(&blocks).unwrap();
        let cfg = EstimatorConfig::new(s, 1e-6).unwrap();
        let est = estimate_neighborhood(&samples, i, &cfg).unwrap();
        misses += usize::from(est.selected != support);
    }
    outcome(misses == 0, format!("100 noiseless instances, {misses} misses"))
}

fn decorrelation_sanity() -> Outcome {
    let transition = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, 0.0, 0.0, 0.5, 0.2, 0.1, 0.0, 0.3]);
    let radius = transition.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let transition = transition * (0.5 / radius);
    let (mut energy_sum, mut worst_energy) = (0.0, 0.0f64);
    for seed in 0..20u64 {
        let series = simulate_var1(&transition, 2048, 8, 200, SEED + seed).unwrap();
        let blocks = to_block_samples(&series).unwrap();
        let report = decorrelation_report(&blocks).unwrap();
        energy_sum += report.cross_block_energy;
        worst_energy = worst_energy.max((blocks.energy() - series.energy()).abs() / series.energy());
    }
    let mean = energy_sum / 20.0;
    outcome(
        mean <= 0.05 && worst_energy <= 1e-9,
        format!("mean cross-block energy {mean:.4e}, max energy drift {worst_energy:.3e}"),
    )
}

fn run_cli(dir: &Path, threads: usize, args: &[&str]) -> std::process::ExitStatus {
    Command::new(env!("CARGO_BIN_EXE_nsgms"))
        .current_dir(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .args(args)
        .status()
        .expect("spawn nsgms")
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(
        dir.join("exp.cfg"),
        "p = 6\ns_true = 1\ns_est = 1\nB = 2\nL_grid = 20, 80\nbeta = 2\ntrials = 16\nmaster_seed = 7\n",
    )
    .unwrap();
    let steps: [(&str, &[&str], &[&str]); 7] = [
        ("model", &["model", "--p", "6", "--s-max", "2", "-B", "3", "-L", "300", "--seed", "11", "--graph-out", "g{t}.txt", "-o", "m{t}.txt"], &["m{t}.txt", "g{t}.txt"]),
        ("sample", &["sample", "--model", "m{t}.txt", "--seed", "5", "-o", "x{t}.txt"], &["x{t}.txt"]),
        ("sample --binary", &["sample", "--model", "m{t}.txt", "--seed", "5", "--binary", "-o", "x{t}.bin"], &["x{t}.bin", "x{t}.bin.hdr"]),
        ("estimate", &["estimate", "--samples", "x{t}.txt", "--s", "2", "--rho-min", "0.05", "--verbose", "-o", "e{t}.txt"], &["e{t}.txt"]),
        ("decorrelate", &["decorrelate", "--samples", "x{t}.bin", "--width", "3", "-o", "d{t}.txt"], &["d{t}.txt"]),
        ("lemma", &["lemma", "--random-len", "12", "--form-seed", "3", "--eta-grid", "0.5,20,8", "--trials", "20000", "--seed", "9", "-o", "l{t}.csv"], &["l{t}.csv"]),
        ("experiment", &["experiment", "exp.cfg", "-o", "r{t}.csv"], &["r{t}.csv"]),
    ];
    let mut bad = Vec::new();
    for (name, args, outputs) in steps {
        for t in [1usize, 8] {
            let args: Vec<String> = args.iter().map(|a| a.replace("{t}", &t.to_string())).collect();
            let refs: Vec<&str> = args.iter().map(String::as_str).collect();
            if !run_cli(dir, t, &refs).success() {
                bad.push(format!("{name} failed at {t} threads"));
            }
        }
        for out in outputs {
            let a = std::fs::read(dir.join(out.replace("{t}", "1")));
            let b = std::fs::read(dir.join(out.replace("{t}", "8")));
            match (a, b) {
                (Ok(a), Ok(b)) if a == b && !a.is_empty() => {}
                _ => bad.push(format!("{name}: {out} differs")),
            }
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "7 invocations byte-identical at 1 and 8 threads".into() } else { bad.join("; ") })
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 recovery at the sufficient sample size", recovery_at_bound),
        ("2 phase transition over the sample size", phase_transition),
        ("3 tail bound dominates Monte Carlo tails", tail_bound_domination),
        ("4 closed-form MGF matches Monte Carlo", mgf_identity),
        ("5 projection matches least squares", projection_oracle),
        ("6 exact-span recovery", exact_span_recovery),
        ("7 frequency blocks decorrelate", decorrelation_sanity),
        ("8 CLI output independent of thread count", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
