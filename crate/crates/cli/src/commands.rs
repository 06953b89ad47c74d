use serde::Deserialize;
use serde_json::{json, Value};

use obslab::bounds::{
    curve_csv, linspace, optimize_q, theorem2_constants, tmax_curve, tmax_linear, tmax_scalar,
    LinearCertificate,
};
use obslab::sim::simulate as run_simulation;
use obslab::verify::{
    compare_presets, empirical_masp, fit_decay, masp_stress, soundness_campaign, soundness_csv,
    stress_csv, CampaignOptions, ScheduleFamily, SoundnessRow, StressRow,
};
use obslab::Error;

use crate::config::{matrix, CertificateFamily, ExperimentConfig, Overrides};
use crate::{
    json_f64, json_opt, pretty, read_text_or_inline, CliError, CompareArgs, Report, SimulateArgs,
    SweepArgs, TmaxArgs, VerifyArgs, EXIT_FAILED, EXIT_OK,
};

/// Resolution of the empirical MASP bisection.
pub const EMPIRICAL_RESOLUTION: f64 = 0.01;

fn certificate_json(q: f64, cert: &LinearCertificate, t_max: f64) -> Value {
    json!({
        "q": q,
        "omega": cert.omega(),
        "L": cert.l(),
        "rPr": cert.rpr(),
        "t_max": json_f64(t_max),
        "recommended_T": json_f64(0.99 * t_max),
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<Report, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.apply(&Overrides {
        step: args.step,
        horizon: args.horizon,
        diameter: args.diameter,
        q: args.q,
        output_dir: args.output_dir.clone(),
    });
    let exp = cfg.resolve()?;
    let mut report = Report::new(&exp.output_dir);

    let certified = exp
        .certificate()
        .ok()
        .and_then(|(q, cert)| tmax_linear(&cert).ok().map(|t| (q, t)));
    let mut summary = json!({
        "T": exp.diameter,
        "step": exp.sim.step,
        "horizon": exp.sim.horizon,
        "predictor": exp.spec.predictor.name(),
        "q": json_opt(certified.map(|c| c.0)),
        "t_max": json_opt(certified.map(|c| c.1)),
    });

    match run_simulation(
        &exp.model,
        &exp.spec,
        &exp.schedule,
        &exp.noise,
        &exp.input,
        &exp.sim,
    ) {
        Ok(traj) => {
            let window = (0.25 * exp.sim.horizon, exp.sim.horizon);
            let fit = fit_decay(&traj, window).ok();
            let extra = json!({
                "diverged": false,
                "diverged_at": Value::Null,
                "mesh_points": traj.len(),
                "samples": traj.samples.len(),
                "initial_error": traj.initial_error(),
                "final_error": traj.final_error(),
                "decay_rate": json_opt(fit.map(|f| f.rate)),
                "fit_r_squared": json_opt(fit.map(|f| f.r_squared)),
                "fit_window": [window.0, window.1],
            });
            merge(&mut summary, extra);
            report.file("trajectory.csv", traj.trajectory_csv().render());
            report.file("samples.csv", traj.samples_csv().render());
            report.exit = EXIT_OK;
        }
        Err(Error::Diverged { time }) => {
            merge(
                &mut summary,
                json!({ "diverged": true, "diverged_at": time }),
            );
            eprintln!("simulation diverged at t = {time}");
            report.exit = EXIT_FAILED;
        }
        Err(e) => return Err(e.into()),
    }
    report.file("summary.json", pretty(&summary));
    Ok(report)
}

fn merge(target: &mut Value, extra: Value) {
    if let (Value::Object(t), Value::Object(e)) = (target, extra) {
        t.extend(e);
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearData {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
}

pub fn tmax(args: &TmaxArgs) -> Result<Report, CliError> {
    let mut report = Report::new(".");
    let out = if let Some(linear) = &args.linear {
        let text = read_text_or_inline(linear)?;
        let data: LinearData =
            serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("--linear: {e}")))?;
        let family = CertificateFamily::Linear {
            a: matrix("A", &data.a)?,
            c: matrix("C", &data.c)?,
            r: matrix("R", &data.r)?,
            p: matrix("P", &data.p)?,
        };
        let cert = family.at(args.q)?;
        let t_max = tmax_linear(&cert)?;
        certificate_json(args.q, &cert, t_max)
    } else {
        let (Some(omega), Some(l), Some(rpr)) = (args.omega, args.l, args.rpr) else {
            return Err(CliError::invalid(
                "tmax needs either --omega, --L and --rPr, or --linear",
            ));
        };
        let t_max = tmax_scalar(omega, l, rpr, args.q)?;
        json!({
            "q": args.q,
            "omega": omega,
            "L": l,
            "rPr": rpr,
            "t_max": json_f64(t_max),
            "recommended_T": json_f64(0.99 * t_max),
        })
    };
    report.stdout = Some(pretty(&out));
    Ok(report)
}

fn load_optional(path: Option<&std::path::Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

pub fn sweep_q(args: &SweepArgs) -> Result<Report, CliError> {
    let mut cfg = load_optional(args.config.as_deref())?;
    cfg.apply(&Overrides {
        output_dir: args.output_dir.clone(),
        ..Overrides::default()
    });
    let exp = cfg.resolve()?;
    let &[lo, hi] = args.bracket.as_slice() else {
        return Err(CliError::invalid(
            "--bracket takes exactly two values `lo,hi`",
        ));
    };
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(CliError::invalid(format!(
            "--bracket must be finite with lo <= hi, got [{lo}, {hi}]"
        )));
    }
    if args.points == 0 {
        return Err(CliError::invalid("--points must be positive"));
    }
    let family = exp.certificate_family()?;
    family.at(lo)?;

    let grid = linspace(lo, hi, args.points);
    let curve = tmax_curve(|q| family.at(q), &grid)?;
    let best = curve
        .iter()
        .copied()
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .expect("grid has at least one point");
    let mut out = json!({
        "points": curve.len(),
        "grid_max": { "q": best.0, "t_max": json_f64(best.1) },
    });
    if args.optimize {
        let opt = optimize_q(|q| family.at(q), lo, hi, args.tol)?;
        merge(
            &mut out,
            json!({
                "optimum": {
                    "q_star": opt.q_star,
                    "t_star": json_f64(opt.t_star),
                    "unbounded": opt.unbounded,
                }
            }),
        );
    }
    let mut report = Report::new(&exp.output_dir);
    report.file("tmax_curve.csv", curve_csv(&curve).render());
    report.stdout = Some(pretty(&out));
    Ok(report)
}

fn soundness_json(rows: &[SoundnessRow]) -> Value {
    rows.iter()
        .map(|r| {
            json!({
                "T": r.t,
                "schedule": r.schedule,
                "sigma": r.sigma,
                "overshoot": json_f64(r.overshoot),
                "noise_gain": json_f64(r.noise_gain),
                "trials": r.trials,
                "converged": r.converged,
                "bound_holds": r.bound_holds,
                "positive_rate": r.positive_rate,
                "max_bound_ratio": json_f64(r.max_bound_ratio),
                "min_rate": json_opt(r.min_rate),
                "passed": r.passed,
            })
        })
        .collect()
}

fn stress_json(rows: &[StressRow]) -> Value {
    rows.iter()
        .map(|r| {
            json!({
                "T": r.t,
                "converged_fraction": r.converged_fraction,
                "mean_rate": json_opt(r.mean_rate),
            })
        })
        .collect()
}

pub fn verify(args: &VerifyArgs) -> Result<Report, CliError> {
    let mut cfg = load_optional(args.config.as_deref())?;
    cfg.apply(&Overrides {
        output_dir: args.output_dir.clone(),
        ..Overrides::default()
    });
    let exp = cfg.resolve()?;
    if args.trials == 0 {
        return Err(CliError::invalid("--trials must be positive"));
    }
    let (q, cert) = exp.certificate()?;
    let t_max = tmax_linear(&cert)?;
    let t_list = if args.t_list.is_empty() {
        if !t_max.is_finite() {
            return Err(CliError::invalid(
                "T_max is unbounded for this predictor; pass --T-list explicitly",
            ));
        }
        vec![0.99 * t_max]
    } else {
        args.t_list.clone()
    };
    for &t in &t_list {
        if !(t.is_finite() && t > 0.0) {
            return Err(CliError::invalid(format!(
                "--T-list entries must be > 0, got {t}"
            )));
        }
        theorem2_constants(&cert, t)?;
    }

    let base = CampaignOptions {
        horizon: exp.sim.horizon,
        max_step: exp.sim.step,
        ..CampaignOptions::default()
    };
    let fraction = exp_schedule_fraction(&cfg).unwrap_or(0.5);
    let mut rows = Vec::new();
    for family in [
        ScheduleFamily::Uniform,
        ScheduleFamily::SeededRandom {
            min_gap_fraction: fraction,
        },
    ] {
        let opts = CampaignOptions {
            schedule: family,
            ..base.clone()
        };
        rows.extend(soundness_campaign(
            &exp.model,
            &exp.spec,
            &cert,
            &t_list,
            args.trials,
            args.seed,
            &opts,
        )?);
    }
    let passed = rows.iter().all(|r| r.passed);

    let stress = masp_stress(
        &exp.model,
        &exp.spec,
        &t_list,
        args.trials,
        args.seed,
        &base,
    )?;
    let lo = 0.99 * t_max;
    let empirical = if args.skip_empirical || !(lo < args.search_upper) {
        None
    } else {
        match empirical_masp(
            &exp.model,
            &exp.spec,
            lo,
            args.search_upper,
            EMPIRICAL_RESOLUTION,
            args.trials,
            args.seed,
            &base,
        ) {
            Ok(t) => Some(t),
            Err(Error::Config(msg)) => {
                eprintln!("empirical MASP search skipped: {msg}");
                None
            }
            Err(e) => return Err(e.into()),
        }
    };

    let mut certified = certificate_json(q, &cert, t_max);
    merge(
        &mut certified,
        json!({
            "trials": args.trials,
            "seed": args.seed,
            "horizon": base.horizon,
            "tolerance": base.tolerance,
            "passed": passed,
            "runs": soundness_json(&rows),
        }),
    );
    let campaign = json!({
        "certified": certified,
        "empirical": {
            "stress": stress_json(&stress),
            "masp": json_opt(empirical),
            "search_lower": json_f64(lo),
            "search_upper": args.search_upper,
            "resolution": EMPIRICAL_RESOLUTION,
        },
    });

    let mut report = Report::new(&exp.output_dir);
    report.file("campaign.json", pretty(&campaign));
    report.file("soundness.csv", soundness_csv(&rows).render());
    report.file("stress.csv", stress_csv(&stress).render());
    report.stdout = Some(format!(
        "certified soundness: {} ({} runs)\n",
        if passed { "pass" } else { "FAIL" },
        rows.iter().map(|r| r.trials).sum::<usize>()
    ));
    report.exit = if passed { EXIT_OK } else { EXIT_FAILED };
    Ok(report)
}

fn exp_schedule_fraction(cfg: &ExperimentConfig) -> Option<f64> {
    (cfg.schedule.kind() == Some("seeded-random"))
        .then(|| cfg.schedule.min_gap_fraction())
        .flatten()
}

pub fn compare(args: &CompareArgs) -> Result<Report, CliError> {
    if args.trials == 0 {
        return Err(CliError::invalid("--trials must be positive"));
    }
    if args.q_list.is_empty() || args.t_list.is_empty() {
        return Err(CliError::invalid("--q-list and --T-list must be non-empty"));
    }
    if let Some(t) = args.t_list.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(CliError::invalid(format!(
            "--T-list entries must be > 0, got {t}"
        )));
    }
    let cmp = compare_presets(
        &args.q_list,
        &args.t_list,
        args.trials,
        args.seed,
        &CampaignOptions::default(),
    )?;
    let dir = args.output_dir.clone().unwrap_or_else(|| ".".into());
    let mut report = Report::new(dir);
    report.file("compare.csv", cmp.rows_csv().render());
    report.file("compare_certified.csv", cmp.certified_csv().render());
    let certified: Vec<Value> = cmp
        .certified
        .iter()
        .map(|&(q, t)| json!({ "q": q, "t_max": json_f64(t) }))
        .collect();
    report.stdout = Some(pretty(&json!({ "certified": certified })));
    Ok(report)
}
