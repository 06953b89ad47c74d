//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use obslab::bounds::{
    certify_linear, exp_integral, optimize_q, oscillator_certificate, oscillator_l,
    oscillator_matrices, theorem1_gain, theorem2_constants, tmax_linear, IosCertificate,
    LinearCertification,
};
use obslab::input::InputSignal;
use obslab::integrate::rk4_step;
use obslab::linalg::small_symmetric_eig;
use obslab::noise::NoiseModel;
use obslab::schedule::make_schedule;
use obslab::sim::{simulate, SimConfig};
use obslab::verify::{
    oscillator_with_q, soundness_campaign, soundness_csv, CampaignOptions, ScheduleFamily,
    SoundnessRow,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tmax_q(q: f64) -> f64 {
    tmax_linear(&oscillator_certificate(q).unwrap()).unwrap()
}

fn masp_golden_values() -> Outcome {
    let (t0, t08, t2) = (tmax_q(0.0), tmax_q(0.8), tmax_q(2.0));
    check(
        (t0 - 0.3162278).abs() <= 1e-6
            && (t08 - 0.37589).abs() <= 1e-4
            && (t2 - 0.24504).abs() <= 1e-4,
        format!("T_max(0) = {t0:.7}, T_max(0.8) = {t08:.5}, T_max(2) = {t2:.5}"),
    )
}

fn improvement_ratios() -> Outcome {
    let (t0, t08, t2) = (tmax_q(0.0), tmax_q(0.8), tmax_q(2.0));
    let vs_zoh = t08 / t2 - 1.0;
    let vs_inter = t08 / t0 - 1.0;
    check(
        (vs_zoh - 0.534).abs() <= 0.002 && (vs_inter - 0.188).abs() <= 0.002,
        format!(
            "vs q=2: {:.1}%, vs q=0: {:.1}%",
            100.0 * vs_zoh,
            100.0 * vs_inter
        ),
    )
}

fn obslab(args: &[&str], threads: Option<&str>) -> std::process::Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_obslab"));
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("OBSLAB_THREADS", n),
        None => cmd.env_remove("OBSLAB_THREADS"),
    };
    cmd.output().expect("obslab runs")
}

fn read_curve(path: &Path) -> Vec<(f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|line| {
            let (q, t) = line.split_once(',').unwrap();
            (q.parse().unwrap(), t.parse().unwrap())
        })
        .collect()
}

fn figure_reproduction() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let start = Instant::now();
    let run = obslab(
        &[
            "sweep-q",
            "--bracket",
            "-1,3",
            "--points",
            "401",
            "--output-dir",
            out,
        ],
        None,
    );
    let elapsed = start.elapsed().as_secs_f64();
    if !run.status.success() {
        return Err(format!(
            "sweep-q failed: {}",
            String::from_utf8_lossy(&run.stderr)
        ));
    }
    let curve = read_curve(&dir.path().join("tmax_curve.csv"));
    let (imax, &(q_best, t_best)) = curve
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap();
    let rising = curve[..=imax].windows(2).all(|w| w[1].1 >= w[0].1);
    let falling = curve[imax..].windows(2).all(|w| w[1].1 <= w[0].1);
    let tol = 1e-6;
    let opt = optimize_q(oscillator_certificate, -1.0, 3.0, tol).unwrap();
    let spacing = 4.0 / 400.0;
    check(
        curve.len() == 401
            && rising
            && falling
            && (0.3757..=0.3761).contains(&t_best)
            && (0.75..=0.85).contains(&q_best)
            && (opt.q_star - q_best).abs() <= spacing + tol
            && opt.t_star >= t_best - tol
            && elapsed < 1.0,
        format!(
            "grid max T = {t_best:.6} at q = {q_best:.3}, optimize_q T* = {:.6} at q* = {:.4}, unimodal = {}, {elapsed:.3} s",
            opt.t_star,
            opt.q_star,
            rising && falling
        ),
    )
}

fn certificate_derivation() -> Outcome {
    let (a, c, r, p) = oscillator_matrices();
    let mut worst_omega = 0.0_f64;
    let mut worst_l = 0.0_f64;
    for i in 0..50 {
        let q = -1.0 + 4.0 * i as f64 / 49.0;
        match certify_linear(&a, &c, &r, &p, q).unwrap() {
            LinearCertification::Certified { omega, l } => {
                worst_omega = worst_omega.max((omega - 1.0).abs());
                let expected = (2.0 * (1.0 + (1.0 - q) * (1.0 - q))).sqrt();
                worst_l = worst_l.max(((l - expected) / expected).abs());
            }
            LinearCertification::Infeasible { omega } => {
                return Err(format!("infeasible at q = {q}, omega = {omega}"));
            }
        }
    }
    check(
        worst_omega <= 1e-9 && worst_l <= 1e-9,
        format!("max |omega - 1| = {worst_omega:.1e}, max rel. L error = {worst_l:.1e}"),
    )
}

const CAMPAIGN_Q: [f64; 3] = [0.0, 0.8, 2.0];
const CAMPAIGN_SEED: u64 = 2024;

fn certified_campaign() -> Vec<SoundnessRow> {
    let mut rows = Vec::new();
    for q in CAMPAIGN_Q {
        let cert = oscillator_certificate(q).unwrap();
        let t = 0.99 * tmax_linear(&cert).unwrap();
        let (model, spec) = oscillator_with_q(q);
        for schedule in [
            ScheduleFamily::Uniform,
            ScheduleFamily::SeededRandom {
                min_gap_fraction: 0.5,
            },
        ] {
            let opts = CampaignOptions {
                schedule,
                ..CampaignOptions::default()
            };
            rows.extend(
                soundness_campaign(&model, &spec, &cert, &[t], 20, CAMPAIGN_SEED, &opts).unwrap(),
            );
        }
    }
    rows
}

fn certified_soundness() -> Outcome {
    let start = Instant::now();
    let rows = certified_campaign();
    let elapsed = start.elapsed().as_secs_f64();
    let runs: usize = rows.iter().map(|r| r.trials).sum();
    let converged: usize = rows.iter().map(|r| r.converged).sum();
    let bound: usize = rows.iter().map(|r| r.bound_holds).sum();
    let positive: usize = rows.iter().map(|r| r.positive_rate).sum();
    let worst = rows.iter().map(|r| r.max_bound_ratio).fold(0.0, f64::max);
    check(
        rows.iter().all(|r| r.passed) && worst <= 1.0 + 1e-6 && elapsed < 30.0,
        format!(
            "{runs} runs: {converged} converged, {bound} within bound, {positive} positive rate, max ratio {worst:.2e}, {elapsed:.1} s"
        ),
    )
}

fn unobservability() -> Outcome {
    let (model, spec) = oscillator_with_q(0.8);
    let sched = make_schedule("uniform", PI, 50.0, 1.0, 0).unwrap();
    let cfg = SimConfig::new(
        0.01,
        50.0,
        DVector::from_vec(vec![0.0, 1.0]),
        DVector::from_vec(vec![0.0, 0.0]),
    );
    let traj = simulate(
        &model,
        &spec,
        &sched,
        &NoiseModel::Zero,
        &InputSignal::Zero,
        &cfg,
    )
    .unwrap();
    let max_y = traj
        .samples
        .iter()
        .map(|s| s.y[0].abs())
        .fold(0.0, f64::max);
    let min_err = traj.err_norm.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        max_y < 1e-8 && min_err >= 0.5 && traj.final_time() == 50.0,
        format!(
            "{} samples, max |y(t_k)| = {max_y:.1e}, min err_norm = {min_err:.4}",
            traj.samples.len()
        ),
    )
}

fn noise_ios() -> Outcome {
    let (q, t) = (0.8, 0.3);
    let cert = oscillator_certificate(q).unwrap();
    let consts = theorem2_constants(&cert, t).unwrap();
    let (model, spec) = oscillator_with_q(q);
    let sched = make_schedule("uniform", t, 40.0, 1.0, 0).unwrap();
    let mut worst = 0.0_f64;
    for delta in [0.01, 0.05] {
        for seed in 0..20 {
            let cfg = SimConfig::new(
                0.01,
                40.0,
                DVector::from_vec(vec![1.0, 0.0]),
                DVector::from_vec(vec![0.0, 0.0]),
            );
            let noise = NoiseModel::SeededUniform { delta, seed };
            let traj = simulate(&model, &spec, &sched, &noise, &InputSignal::Zero, &cfg).unwrap();
            let limsup = traj
                .mesh
                .iter()
                .zip(&traj.err_norm)
                .filter(|(s, _)| **s >= 30.0)
                .map(|(_, e)| *e)
                .fold(0.0, f64::max);
            worst = worst.max(limsup / (consts.noise_gain * delta));
        }
    }
    let mut dominated = true;
    let mut checked = 0;
    for i in 1..=40 {
        let gamma = 0.01 * i as f64;
        for tt in [0.05, 0.1, 0.2, 0.3] {
            let ios = IosCertificate::new(1.0, gamma, oscillator_l(q), q).unwrap();
            if let Ok(r) = theorem1_gain(&ios, tt) {
                checked += 1;
                dominated &= r.noise_gain >= gamma;
            }
        }
    }
    check(
        worst <= 1.0 + 1e-6 && dominated && checked > 0,
        format!(
            "max limsup / (gamma_out delta) = {worst:.2e} over 40 runs; theorem-1 gain >= gamma in {checked} cases"
        ),
    )
}

fn simpson(a: f64, t: f64, intervals: usize) -> f64 {
    let h = t / intervals as f64;
    let f = |s: f64| (a * s).exp();
    let mut sum = f(0.0) + f(t);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(i as f64 * h);
    }
    sum * h / 3.0
}

fn numerics() -> Outcome {
    let rhs = |t: f64, _: &DVector<f64>| Ok(DVector::from_vec(vec![t.cos()]));
    let error = |h: f64| {
        let steps = (2.0 / h).round() as usize;
        let mut s = DVector::zeros(1);
        for i in 0..steps {
            s = rk4_step(rhs, i as f64 * h, &s, h).unwrap();
        }
        (s[0] - 2f64.sin()).abs()
    };
    let factors: Vec<f64> = [0.2, 0.1, 0.05]
        .windows(2)
        .map(|w| error(w[0]) / error(w[1]))
        .collect();
    let rk4_ok = factors.iter().all(|f| *f >= 12.0);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_int = 0.0_f64;
    for _ in 0..100 {
        let a = rng.gen_range(-2.0..=2.0);
        let t = rng.gen_range(0.0..=1.0);
        let exact = simpson(a, t, 2000);
        let rel = if exact == 0.0 {
            exp_integral(a, t).abs()
        } else {
            ((exp_integral(a, t) - exact) / exact).abs()
        };
        worst_int = worst_int.max(rel);
    }

    let mut worst_eig = 0.0_f64;
    for _ in 0..200 {
        let (a, b, d): (f64, f64, f64) = (
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
        );
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b, d]);
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let got = small_symmetric_eig(&m).unwrap();
        let scale = mean.abs().max(radius).max(1.0);
        worst_eig = worst_eig
            .max((got[0] - (mean - radius)).abs() / scale)
            .max((got[1] - (mean + radius)).abs() / scale);
    }
    for n in 1..=6 {
        let mut diag: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let got =
            small_symmetric_eig(&DMatrix::from_diagonal(&DVector::from_vec(diag.clone()))).unwrap();
        diag.sort_by(f64::total_cmp);
        for (g, e) in got.iter().zip(&diag) {
            worst_eig = worst_eig.max((g - e).abs() / e.abs().max(1.0));
        }
    }
    check(
        rk4_ok && worst_int <= 1e-12 && worst_eig <= 1e-12,
        format!(
            "RK4 halving factors {:.1}/{:.1}, exp_integral rel. err {worst_int:.1e}, eigenvalue err {worst_eig:.1e}",
            factors[0], factors[1]
        ),
    )
}

fn determinism() -> Outcome {
    let first = soundness_csv(&certified_campaign()).render();
    let second = soundness_csv(&certified_campaign()).render();

    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "verify".to_string(),
            "--trials".into(),
            "5".into(),
            "--seed".into(),
            CAMPAIGN_SEED.to_string(),
            "--skip-empirical".into(),
            "--output-dir".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    let run_a = obslab(
        &args(a.path())
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
        None,
    );
    let run_b = obslab(
        &args(b.path())
            .iter()
            .map(String::as_str)
            .collect::<Vec<_>>(),
        Some("4"),
    );
    let read = |dir: &Path, name: &str| std::fs::read(dir.join(name)).unwrap_or_default();
    let cli_same = run_a.status.success()
        && run_b.status.success()
        && ["soundness.csv", "stress.csv", "campaign.json"]
            .iter()
            .all(|name| {
                let x = read(a.path(), name);
                !x.is_empty() && x == read(b.path(), name)
            });
    check(
        first == second && cli_same,
        format!(
            "library CSV identical: {}, CLI outputs identical across 1 and 4 threads: {cli_same}",
            first == second
        ),
    )
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("MASP golden values", masp_golden_values),
        ("improvement ratios", improvement_ratios),
        ("T_max(q) curve reproduction", figure_reproduction),
        ("certificate derivation", certificate_derivation),
        ("certified soundness", certified_soundness),
        ("unobservable sampling", unobservability),
        ("noise IOS gain", noise_ios),
        ("numerics", numerics),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
