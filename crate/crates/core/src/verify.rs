//! Empirical checks of the certified estimates against simulated runs.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{oscillator_certificate, theorem2_constants, tmax_linear, Theorem2Constants};
use crate::csv::{fmt_f64, CsvTable};
use crate::error::{Error, Result};
use crate::input::InputSignal;
use crate::model::{builtin_oscillator, PlantModel};
use crate::noise::NoiseModel;
use crate::observer::ObserverSpec;
use crate::predictor::ConstantMinusQ;
use crate::schedule::{ScheduleGenerator, SeededRandom, Uniform};
use crate::sim::{simulate, SimConfig, Trajectory};

/// Errors below this are treated as numerical noise by [`fit_decay`].
pub const ERROR_FLOOR: f64 = 1e-12;
/// Slack on the bound-check ratio for integrator error.
pub const BOUND_SLACK: f64 = 1e-6;
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted rate `r` in `|e(t)| ~ prefactor * exp(-r t)`; `+inf` when the
    /// error was already below the floor over the whole window.
    pub rate: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
}

impl DecayFit {
    pub fn already_converged(&self) -> bool {
        self.rate == f64::INFINITY
    }
}

/// Least-squares fit of `ln |e(t)|` against `t` over `window`.
pub fn fit_decay(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if traj.is_empty() {
        return Err(Error::InsufficientData("empty trajectory".into()));
    }
    let (first, last) = (traj.mesh[0], traj.final_time());
    if !(t0 < t1 && t0 >= first && t1 <= last) {
        return Err(Error::config(format!(
            "fit window ({t0}, {t1}) must be increasing and lie within [{first}, {last}]"
        )));
    }
    let in_window: Vec<usize> = (0..traj.len())
        .filter(|&i| traj.mesh[i] >= t0 && traj.mesh[i] <= t1)
        .collect();
    if in_window.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} mesh points in the fit window, need {MIN_FIT_POINTS}",
            in_window.len()
        )));
    }
    let usable: Vec<(f64, f64)> = in_window
        .iter()
        .filter(|&&i| traj.err_norm[i] > ERROR_FLOOR)
        .map(|&i| (traj.mesh[i], traj.err_norm[i].ln()))
        .collect();
    if usable.is_empty() {
        return Ok(DecayFit {
            rate: f64::INFINITY,
            prefactor: 0.0,
            r_squared: 1.0,
            window,
        });
    }
    if usable.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points above the error floor, need {MIN_FIT_POINTS}",
            usable.len()
        )));
    }

    let count = usable.len() as f64;
    let mean_t = usable.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = usable.iter().map(|p| p.1).sum::<f64>() / count;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &usable {
        let (dt, dy) = (t - mean_t, y - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let residual: f64 = usable
        .iter()
        .map(|&(t, y)| {
            let r = y - (intercept + slope * t);
            r * r
        })
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - residual / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(DecayFit {
        rate: -slope,
        prefactor: intercept.exp(),
        r_squared,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheckReport {
    pub holds: bool,
    pub max_violation_ratio: f64,
    pub first_violation_time: Option<f64>,
}

/// Compares `|z(t) - x(t)|` with `Omega exp(-sigma t)|z0 - x0| + gamma sup_{s<=t} |xi(s)|`
/// at every mesh point.
///
/// With `noise_sup = None` the running supremum of the realized samples is
/// used; `Some(bound)` substitutes a fixed a-priori bound.
pub fn check_error_bound(
    traj: &Trajectory,
    consts: &Theorem2Constants,
    noise_sup: Option<f64>,
) -> BoundCheckReport {
    let e0 = traj.initial_error();
    let mut running_sup = 0.0_f64;
    let mut next_sample = 0;
    let mut max_ratio = 0.0_f64;
    let mut first_violation = None;

    for i in 0..traj.len() {
        while next_sample < traj.samples.len() && traj.sample_index[next_sample] <= i {
            running_sup = running_sup.max(traj.samples[next_sample].xi.norm());
            next_sample += 1;
        }
        let t = traj.mesh[i];
        let rhs = consts.bound(t, e0, noise_sup.unwrap_or(running_sup));
        let lhs = traj.err_norm[i];
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        if ratio > 1.0 + BOUND_SLACK && first_violation.is_none() {
            first_violation = Some(t);
        }
    }
    BoundCheckReport {
        holds: max_ratio <= 1.0 + BOUND_SLACK,
        max_violation_ratio: max_ratio,
        first_violation_time: first_violation,
    }
}

/// Sampling-schedule family used by a campaign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleFamily {
    Uniform,
    /// Per-trial seeded random gaps in `[min_gap_fraction T, T]`.
    SeededRandom {
        min_gap_fraction: f64,
    },
}

/// Shared settings of multi-trial campaigns.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOptions {
    pub horizon: f64,
    /// Upper limit on the integrator step; lowered to half the smallest gap when needed.
    pub max_step: f64,
    /// Radius of the ball initial conditions are drawn from.
    pub radius: f64,
    /// Run counts as converged when `err(horizon) < tolerance * err(0)`.
    pub tolerance: f64,
    pub schedule: ScheduleFamily,
    /// Initial conditions `(x0, z0)` used for the first trials before random ones.
    pub pinned: Vec<(DVector<f64>, DVector<f64>)>,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            horizon: 40.0,
            max_step: 0.01,
            radius: 5.0,
            tolerance: 1e-6,
            schedule: ScheduleFamily::Uniform,
            pinned: Vec::new(),
        }
    }
}

impl CampaignOptions {
    fn validate(&self, n: usize) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("campaign horizon must be positive"));
        }
        if !(self.max_step.is_finite() && self.max_step > 0.0) {
            return Err(Error::config("campaign step must be positive"));
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(Error::config("initial-condition radius must be >= 0"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::config("convergence tolerance must lie in (0, 1)"));
        }
        if let ScheduleFamily::SeededRandom { min_gap_fraction } = self.schedule {
            SeededRandom::new(min_gap_fraction, 0)?;
        }
        for (x0, z0) in &self.pinned {
            if x0.len() != n || z0.len() != n {
                return Err(Error::dim(
                    "pinned initial condition",
                    n,
                    x0.len().max(z0.len()),
                ));
            }
        }
        Ok(())
    }

    /// Fit window for trial decay rates: the last three quarters of the horizon.
    fn fit_window(&self) -> (f64, f64) {
        (0.25 * self.horizon, self.horizon)
    }
}

/// Uniform sample from the closed ball of radius `radius` in `R^n`.
fn sample_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..=1.0));
        let norm = v.norm();
        if norm <= 1.0 {
            return v * radius;
        }
    }
}

struct TrialPlan {
    x0: DVector<f64>,
    z0: DVector<f64>,
    schedule_seed: u64,
}

fn plan_trials(n: usize, trials: usize, seed: u64, opts: &CampaignOptions) -> Vec<TrialPlan> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|i| {
            let (x0, z0) = match opts.pinned.get(i) {
                Some((x0, z0)) => (x0.clone(), z0.clone()),
                None => {
                    let x0 = sample_ball(&mut rng, n, opts.radius);
                    let z0 = sample_ball(&mut rng, n, opts.radius);
                    (x0, z0)
                }
            };
            TrialPlan {
                x0,
                z0,
                schedule_seed: rng.next_u64(),
            }
        })
        .collect()
}

/// Result of one noiseless trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub initial_error: f64,
    pub final_error: Option<f64>,
    pub converged: bool,
    pub diverged_at: Option<f64>,
    pub rate: Option<f64>,
    pub bound: Option<BoundCheckReport>,
}

fn run_trial(
    model: &PlantModel,
    spec: &ObserverSpec,
    diameter: f64,
    plan: &TrialPlan,
    trial: usize,
    opts: &CampaignOptions,
    consts: Option<&Theorem2Constants>,
) -> Result<TrialOutcome> {
    let generator: Box<dyn ScheduleGenerator> = match opts.schedule {
        ScheduleFamily::Uniform => Box::new(Uniform),
        ScheduleFamily::SeededRandom { min_gap_fraction } => {
            Box::new(SeededRandom::new(min_gap_fraction, plan.schedule_seed)?)
        }
    };
    let sched = generator.generate(diameter, opts.horizon)?;
    let min_gap = sched.min_gap_before(opts.horizon).unwrap_or(diameter);
    let step = opts.max_step.min(0.5 * min_gap);
    let cfg = SimConfig::new(step, opts.horizon, plan.x0.clone(), plan.z0.clone());
    let initial_error = (&plan.z0 - &plan.x0).norm();

    match simulate(
        model,
        spec,
        &sched,
        &NoiseModel::Zero,
        &InputSignal::Zero,
        &cfg,
    ) {
        Ok(traj) => {
            let final_error = traj.final_error();
            let converged = if initial_error == 0.0 {
                final_error == 0.0
            } else {
                final_error < opts.tolerance * initial_error
            };
            let rate = fit_decay(&traj, opts.fit_window()).ok().map(|f| f.rate);
            let bound = consts.map(|c| check_error_bound(&traj, c, None));
            Ok(TrialOutcome {
                trial,
                initial_error,
                final_error: Some(final_error),
                converged,
                diverged_at: None,
                rate,
                bound,
            })
        }
        Err(Error::Diverged { time }) => Ok(TrialOutcome {
            trial,
            initial_error,
            final_error: None,
            converged: false,
            diverged_at: Some(time),
            rate: None,
            bound: None,
        }),
        Err(e) => Err(e),
    }
}

fn run_trials(
    model: &PlantModel,
    spec: &ObserverSpec,
    diameter: f64,
    trials: usize,
    seed: u64,
    opts: &CampaignOptions,
    consts: Option<&Theorem2Constants>,
) -> Result<Vec<TrialOutcome>> {
    let plans = plan_trials(model.n, trials, seed, opts);
    plans
        .par_iter()
        .enumerate()
        .map(|(i, plan)| run_trial(model, spec, diameter, plan, i, opts, consts))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StressRow {
    pub t: f64,
    pub converged_fraction: f64,
    /// Mean fitted decay rate over the trials where a finite rate was fitted.
    pub mean_rate: Option<f64>,
}

fn summarize(t: f64, outcomes: &[TrialOutcome]) -> StressRow {
    let converged = outcomes.iter().filter(|o| o.converged).count();
    let rates: Vec<f64> = outcomes
        .iter()
        .filter_map(|o| o.rate)
        .filter(|r| r.is_finite())
        .collect();
    StressRow {
        t,
        converged_fraction: if outcomes.is_empty() {
            0.0
        } else {
            converged as f64 / outcomes.len() as f64
        },
        mean_rate: if rates.is_empty() {
            None
        } else {
            Some(rates.iter().sum::<f64>() / rates.len() as f64)
        },
    }
}

/// Noiseless runs from seeded random initial conditions for every diameter in `t_list`.
///
/// The same initial conditions are reused for every diameter. Diverged runs
/// count as non-converged.
pub fn masp_stress(
    model: &PlantModel,
    spec: &ObserverSpec,
    t_list: &[f64],
    trials: usize,
    seed: u64,
    opts: &CampaignOptions,
) -> Result<Vec<StressRow>> {
    opts.validate(model.n)?;
    t_list
        .iter()
        .map(|&t| {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::config(format!(
                    "sampling diameter must be > 0, got {t}"
                )));
            }
            let outcomes = run_trials(model, spec, t, trials, seed, opts, None)?;
            Ok(summarize(t, &outcomes))
        })
        .collect()
}

/// `T,converged_fraction,mean_rate`.
pub fn stress_csv(rows: &[StressRow]) -> CsvTable {
    let mut table = CsvTable::new(["T", "converged_fraction", "mean_rate"]);
    for r in rows {
        table.push(vec![
            fmt_f64(r.t),
            fmt_f64(r.converged_fraction),
            r.mean_rate.map_or_else(|| "nan".to_string(), fmt_f64),
        ]);
    }
    table
}

/// Oscillator example with `K = -qI`.
pub fn oscillator_with_q(q: f64) -> (PlantModel, ObserverSpec) {
    let (model, spec) = builtin_oscillator();
    (model, spec.with_predictor(Arc::new(ConstantMinusQ::new(q))))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub q: f64,
    pub t: f64,
    pub converged_fraction: f64,
    pub mean_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresetComparison {
    /// `(q, certified T_max(q))`.
    pub certified: Vec<(f64, f64)>,
    pub rows: Vec<ComparisonRow>,
}

impl PresetComparison {
    /// `q,T,converged_fraction,mean_rate`.
    pub fn rows_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(["q", "T", "converged_fraction", "mean_rate"]);
        for r in &self.rows {
            table.push(vec![
                fmt_f64(r.q),
                fmt_f64(r.t),
                fmt_f64(r.converged_fraction),
                r.mean_rate.map_or_else(|| "nan".to_string(), fmt_f64),
            ]);
        }
        table
    }

    /// `q,T_max,recommended_T`.
    pub fn certified_csv(&self) -> CsvTable {
        let mut table = CsvTable::new(["q", "T_max", "recommended_T"]);
        for &(q, t) in &self.certified {
            table.push(vec![fmt_f64(q), fmt_f64(t), fmt_f64(0.99 * t)]);
        }
        table
    }

    pub fn certified_tmax(&self, q: f64) -> Option<f64> {
        self.certified.iter().find(|(qq, _)| *qq == q).map(|p| p.1)
    }
}

/// Runs [`masp_stress`] on the oscillator example for every `q` and records
/// the certified `T_max(q)` alongside.
pub fn compare_presets(
    q_list: &[f64],
    t_list: &[f64],
    trials: usize,
    seed: u64,
    opts: &CampaignOptions,
) -> Result<PresetComparison> {
    if q_list.is_empty() || t_list.is_empty() {
        return Err(Error::config("q and T lists must be non-empty"));
    }
    let mut certified = Vec::with_capacity(q_list.len());
    let mut rows = Vec::with_capacity(q_list.len() * t_list.len());
    for &q in q_list {
        certified.push((q, tmax_linear(&oscillator_certificate(q)?)?));
        let (model, spec) = oscillator_with_q(q);
        for r in masp_stress(&model, &spec, t_list, trials, seed, opts)? {
            rows.push(ComparisonRow {
                q,
                t: r.t,
                converged_fraction: r.converged_fraction,
                mean_rate: r.mean_rate,
            });
        }
    }
    Ok(PresetComparison { certified, rows })
}

/// Per-diameter outcome of a certified-soundness campaign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoundnessRow {
    pub q: f64,
    pub t: f64,
    pub t_max: f64,
    pub schedule: ScheduleFamily,
    pub sigma: f64,
    pub overshoot: f64,
    pub noise_gain: f64,
    pub trials: usize,
    pub converged: usize,
    pub bound_holds: usize,
    pub positive_rate: usize,
    pub max_bound_ratio: f64,
    pub min_rate: Option<f64>,
    pub passed: bool,
}

/// Noiseless runs at each certified diameter: every run must converge, satisfy
/// the error estimate and show a positive fitted decay rate.
///
/// Diameters at or above the certified `T_max` are refused before any run.
pub fn soundness_campaign(
    model: &PlantModel,
    spec: &ObserverSpec,
    cert: &crate::bounds::LinearCertificate,
    t_list: &[f64],
    trials: usize,
    seed: u64,
    opts: &CampaignOptions,
) -> Result<Vec<SoundnessRow>> {
    opts.validate(model.n)?;
    if trials == 0 {
        return Err(Error::config("trials must be positive"));
    }
    let constants: Vec<Theorem2Constants> = t_list
        .iter()
        .map(|&t| theorem2_constants(cert, t))
        .collect::<Result<_>>()?;
    let t_max = tmax_linear(cert)?;

    t_list
        .iter()
        .zip(&constants)
        .map(|(&t, consts)| {
            let outcomes = run_trials(model, spec, t, trials, seed, opts, Some(consts))?;
            let converged = outcomes.iter().filter(|o| o.converged).count();
            let bound_holds = outcomes
                .iter()
                .filter(|o| o.bound.is_some_and(|b| b.holds))
                .count();
            let positive_rate = outcomes
                .iter()
                .filter(|o| o.rate.is_some_and(|r| r > 0.0))
                .count();
            let max_bound_ratio = outcomes
                .iter()
                .map(|o| o.bound.map_or(f64::INFINITY, |b| b.max_violation_ratio))
                .fold(0.0, f64::max);
            let min_rate = outcomes.iter().filter_map(|o| o.rate).reduce(f64::min);
            Ok(SoundnessRow {
                q: cert.q(),
                t,
                t_max,
                schedule: opts.schedule,
                sigma: consts.sigma,
                overshoot: consts.overshoot,
                noise_gain: consts.noise_gain,
                trials,
                converged,
                bound_holds,
                positive_rate,
                max_bound_ratio,
                min_rate,
                passed: converged == trials && bound_holds == trials && positive_rate == trials,
            })
        })
        .collect()
}

/// `q,T,T_max,converged,bound_holds,positive_rate,trials,max_bound_ratio`.
pub fn soundness_csv(rows: &[SoundnessRow]) -> CsvTable {
    let mut table = CsvTable::new([
        "q",
        "T",
        "T_max",
        "schedule",
        "trials",
        "converged",
        "bound_holds",
        "positive_rate",
        "max_bound_ratio",
    ]);
    for r in rows {
        let schedule = match r.schedule {
            ScheduleFamily::Uniform => "uniform",
            ScheduleFamily::SeededRandom { .. } => "seeded-random",
        };
        table.push(vec![
            fmt_f64(r.q),
            fmt_f64(r.t),
            fmt_f64(r.t_max),
            schedule.to_string(),
            r.trials.to_string(),
            r.converged.to_string(),
            r.bound_holds.to_string(),
            r.positive_rate.to_string(),
            fmt_f64(r.max_bound_ratio),
        ]);
    }
    table
}

/// Largest uniform diameter (bisected to `resolution`) at which every trial converges.
///
/// `lo` must be a diameter where all trials converge and `hi` one where some
/// trial fails; both are checked. Defaults used by callers: `lo` slightly
/// below the certified bound, `hi = pi`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_masp(
    model: &PlantModel,
    spec: &ObserverSpec,
    lo: f64,
    hi: f64,
    resolution: f64,
    trials: usize,
    seed: u64,
    opts: &CampaignOptions,
) -> Result<f64> {
    opts.validate(model.n)?;
    if !(0.0 < lo && lo < hi && resolution > 0.0) {
        return Err(Error::config(format!(
            "empirical MASP needs 0 < lo < hi and resolution > 0 (lo = {lo}, hi = {hi})"
        )));
    }
    let all_converge = |t: f64| -> Result<bool> {
        let outcomes = run_trials(model, spec, t, trials, seed, opts, None)?;
        Ok(outcomes.iter().all(|o| o.converged))
    };
    if !all_converge(lo)? {
        return Err(Error::config(format!(
            "lower bracket {lo} does not converge for every trial"
        )));
    }
    if all_converge(hi)? {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > resolution {
        let mid = 0.5 * (a + b);
        if all_converge(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(a)
}

/// Upper end of the empirical search: uniform sampling at `pi` loses observability.
pub const OBSERVABILITY_LIMIT: f64 = PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::make_schedule;

    fn synthetic(value: impl Fn(f64) -> f64) -> Trajectory {
        let mesh: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
        let err_norm: Vec<f64> = mesh.iter().map(|&t| value(t)).collect();
        let len = mesh.len();
        Trajectory {
            x: vec![DVector::zeros(1); len],
            z: vec![DVector::zeros(1); len],
            w: vec![DVector::zeros(1); len],
            samples: Vec::new(),
            sample_index: Vec::new(),
            mesh,
            err_norm,
        }
    }

    #[test]
    fn fit_exact_exponential() {
        let traj = synthetic(|t| (-2.0 * t).exp());
        let fit = fit_decay(&traj, (0.0, 10.0)).unwrap();
        assert!((fit.rate - 2.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.prefactor - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fit_constant() {
        let traj = synthetic(|_| 1.0);
        let fit = fit_decay(&traj, (1.0, 9.0)).unwrap();
        assert!(fit.rate.abs() < 1e-9);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn fit_already_converged() {
        let traj = synthetic(|_| 1e-14);
        let fit = fit_decay(&traj, (0.0, 10.0)).unwrap();
        assert!(fit.already_converged());
    }

    #[test]
    fn fit_window_errors() {
        let traj = synthetic(|_| 1.0);
        assert!(matches!(
            fit_decay(&traj, (5.0, 1.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fit_decay(&traj, (0.0, 11.0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            fit_decay(&traj, (1.0, 1.2)),
            Err(Error::InsufficientData(_))
        ));
    }

    fn oscillator_run(q: f64, t: f64, x0: [f64; 2], z0: [f64; 2], noise: NoiseModel) -> Trajectory {
        let (model, spec) = oscillator_with_q(q);
        let sched = make_schedule("uniform", t, 20.0, 1.0, 0).unwrap();
        let cfg = SimConfig::new(
            0.01,
            20.0,
            DVector::from_column_slice(&x0),
            DVector::from_column_slice(&z0),
        );
        simulate(&model, &spec, &sched, &noise, &InputSignal::Zero, &cfg).unwrap()
    }

    #[test]
    fn oscillator_decay_rate_positive() {
        let traj = oscillator_run(0.8, 0.3, [1.0, 0.0], [0.0, 0.0], NoiseModel::Zero);
        let fit = fit_decay(&traj, (2.0, 18.0)).unwrap();
        assert!(fit.rate > 0.0, "{fit:?}");
    }

    #[test]
    fn bound_trivial_when_exact() {
        let traj = oscillator_run(0.8, 0.3, [1.0, 0.0], [1.0, 0.0], NoiseModel::Zero);
        let consts = theorem2_constants(&oscillator_certificate(0.8).unwrap(), 0.3).unwrap();
        let report = check_error_bound(&traj, &consts, None);
        assert!(report.holds);
        assert_eq!(report.max_violation_ratio, 0.0);
    }

    #[test]
    fn bound_holds_on_oscillator() {
        let consts = theorem2_constants(&oscillator_certificate(0.8).unwrap(), 0.3).unwrap();
        let traj = oscillator_run(0.8, 0.3, [1.0, 0.0], [0.0, 0.0], NoiseModel::Zero);
        assert!(check_error_bound(&traj, &consts, None).holds);
        let noisy = oscillator_run(
            0.8,
            0.3,
            [1.0, 0.0],
            [0.0, 0.0],
            NoiseModel::SeededUniform {
                delta: 0.05,
                seed: 1,
            },
        );
        assert!(check_error_bound(&noisy, &consts, None).holds);
        assert!(check_error_bound(&noisy, &consts, Some(0.05)).holds);
    }

    #[test]
    fn bound_violation_detected() {
        let traj = oscillator_run(0.8, 0.3, [1.0, 0.0], [0.0, 0.0], NoiseModel::Zero);
        let fake = Theorem2Constants {
            sigma: 5.0,
            overshoot: 1.0,
            noise_gain: 0.0,
            small_gain: 1.0,
            c1: 1.0,
            c2: 1.0,
        };
        let report = check_error_bound(&traj, &fake, None);
        assert!(!report.holds);
        assert!(report.first_violation_time.is_some());
    }

    #[test]
    fn stress_empty_list() {
        let (model, spec) = oscillator_with_q(0.8);
        let rows = masp_stress(&model, &spec, &[], 5, 1, &CampaignOptions::default()).unwrap();
        assert!(rows.is_empty());
    }

    #[test]
    fn stress_fails_at_pi_with_pinned_unobservable_start() {
        let (model, spec) = oscillator_with_q(0.8);
        let opts = CampaignOptions {
            pinned: vec![(
                DVector::from_vec(vec![0.0, 1.0]),
                DVector::from_vec(vec![0.0, 0.0]),
            )],
            ..CampaignOptions::default()
        };
        let rows = masp_stress(&model, &spec, &[PI], 20, 3, &opts).unwrap();
        assert!(rows[0].converged_fraction < 1.0);
    }

    #[test]
    fn trial_plans_are_seeded() {
        let opts = CampaignOptions::default();
        let a = plan_trials(2, 5, 9, &opts);
        let b = plan_trials(2, 5, 9, &opts);
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.x0, q.x0);
            assert_eq!(p.schedule_seed, q.schedule_seed);
            assert!(p.x0.norm() <= 5.0 && p.z0.norm() <= 5.0);
        }
    }

    #[test]
    fn soundness_refuses_beyond_masp() {
        let cert = oscillator_certificate(0.8).unwrap();
        let t_max = tmax_linear(&cert).unwrap();
        let (model, spec) = oscillator_with_q(0.8);
        let err = soundness_campaign(
            &model,
            &spec,
            &cert,
            &[0.3, 1.1 * t_max],
            2,
            0,
            &CampaignOptions::default(),
        );
        assert!(matches!(err, Err(Error::MaspExceeded { .. })));
    }
}
