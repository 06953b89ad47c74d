//! Hybrid simulation of plant, observer and inter-sample predictor.
//!
//! Between sampling times the coupled system
//!
//! ```text
//! x' = f(x, u)
//! z' = f(z, u) + g(z, w, u) (w - h(z))
//! w' = grad_h(z) f(z, u) - K(z, w, u) (w - h(z))
//! ```
//!
//! is integrated with fixed-step RK4. Each interval `[t_k, t_{k+1})` is split
//! into `ceil(gap / step)` equal substeps so every sampling time is a mesh
//! point. At each `t_k`, including `t_0 = 0`, the predictor is reset to the
//! measurement `w(t_k) = h(x(t_k)) + xi(t_k)`. The stored `w` at `t_k` is the
//! post-reset value.

use nalgebra::DVector;

use crate::csv::{fmt_f64, CsvTable};
use crate::error::{Error, Result};
use crate::input::InputSignal;
use crate::integrate::rk4_step;
use crate::model::PlantModel;
use crate::noise::NoiseModel;
use crate::observer::{observer_rhs, predictor_rhs, ObserverSpec};
use crate::schedule::SamplingSchedule;

/// Any state component beyond this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    pub x0: DVector<f64>,
    pub z0: DVector<f64>,
}

impl SimConfig {
    pub fn new(step: f64, horizon: f64, x0: DVector<f64>, z0: DVector<f64>) -> Self {
        Self {
            step,
            horizon,
            x0,
            z0,
        }
    }

    /// Checks the config against a model and schedule without running anything.
    pub fn validate(&self, model: &PlantModel, sched: &SamplingSchedule) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::config(format!(
                "sim.step must be positive, got {}",
                self.step
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config(format!(
                "sim.horizon must be positive, got {}",
                self.horizon
            )));
        }
        model.check_state("sim.x0", &self.x0)?;
        model.check_state("sim.z0", &self.z0)?;
        if self.x0.iter().chain(self.z0.iter()).any(|v| !v.is_finite()) {
            return Err(Error::config("sim.x0 and sim.z0 must be finite"));
        }
        if !sched.covers(self.horizon) {
            return Err(Error::config(format!(
                "schedule ends at {} before the horizon {}",
                sched.last(),
                self.horizon
            )));
        }
        if let Some(min_gap) = sched.min_gap_before(self.horizon) {
            if self.step > 0.5 * min_gap {
                return Err(Error::config(format!(
                    "sim.step = {} exceeds half the smallest sampling gap ({min_gap})",
                    self.step
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub k: usize,
    pub t: f64,
    pub y: DVector<f64>,
    pub xi: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mesh: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub samples: Vec<Sample>,
    pub err_norm: Vec<f64>,
    /// Mesh index of each entry of `samples`.
    pub sample_index: Vec<usize>,
}

impl Trajectory {
    fn with_capacity(cap: usize) -> Self {
        Self {
            mesh: Vec::with_capacity(cap),
            x: Vec::with_capacity(cap),
            z: Vec::with_capacity(cap),
            w: Vec::with_capacity(cap),
            samples: Vec::new(),
            err_norm: Vec::with_capacity(cap),
            sample_index: Vec::new(),
        }
    }

    fn record(&mut self, t: f64, x: DVector<f64>, z: DVector<f64>, w: DVector<f64>) {
        self.err_norm.push((&z - &x).norm());
        self.mesh.push(t);
        self.x.push(x);
        self.z.push(z);
        self.w.push(w);
    }

    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    pub fn initial_error(&self) -> f64 {
        self.err_norm[0]
    }

    pub fn final_error(&self) -> f64 {
        *self.err_norm.last().expect("non-empty trajectory")
    }

    pub fn final_time(&self) -> f64 {
        *self.mesh.last().expect("non-empty trajectory")
    }

    /// `t,x1..xn,z1..zn,w1..wp,err_norm`, one row per mesh point.
    pub fn trajectory_csv(&self) -> CsvTable {
        let n = self.x.first().map_or(0, |v| v.len());
        let p = self.w.first().map_or(0, |v| v.len());
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend((1..=n).map(|i| format!("z{i}")));
        header.extend((1..=p).map(|i| format!("w{i}")));
        header.push("err_norm".to_string());
        let mut table = CsvTable::new(header);
        for i in 0..self.len() {
            let mut row = Vec::with_capacity(2 + 2 * n + p);
            row.push(fmt_f64(self.mesh[i]));
            row.extend(self.x[i].iter().map(|v| fmt_f64(*v)));
            row.extend(self.z[i].iter().map(|v| fmt_f64(*v)));
            row.extend(self.w[i].iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(self.err_norm[i]));
            table.push(row);
        }
        table
    }

    /// `k,t_k,y1..yp,xi1..xip`, one row per sampling instant.
    pub fn samples_csv(&self) -> CsvTable {
        let p = self.samples.first().map_or(0, |s| s.y.len());
        let mut header = vec!["k".to_string(), "t_k".to_string()];
        header.extend((1..=p).map(|i| format!("y{i}")));
        header.extend((1..=p).map(|i| format!("xi{i}")));
        let mut table = CsvTable::new(header);
        for s in &self.samples {
            let mut row = vec![s.k.to_string(), fmt_f64(s.t)];
            row.extend(s.y.iter().map(|v| fmt_f64(*v)));
            row.extend(s.xi.iter().map(|v| fmt_f64(*v)));
            table.push(row);
        }
        table
    }
}

/// Packs `(x, z, w)` into one state vector for the integrator.
struct Layout {
    n: usize,
    p: usize,
}

impl Layout {
    fn pack(&self, x: &DVector<f64>, z: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut s = DVector::zeros(2 * self.n + self.p);
        s.rows_mut(0, self.n).copy_from(x);
        s.rows_mut(self.n, self.n).copy_from(z);
        s.rows_mut(2 * self.n, self.p).copy_from(w);
        s
    }

    fn x(&self, s: &DVector<f64>) -> DVector<f64> {
        s.rows(0, self.n).into_owned()
    }

    fn z(&self, s: &DVector<f64>) -> DVector<f64> {
        s.rows(self.n, self.n).into_owned()
    }

    fn w(&self, s: &DVector<f64>) -> DVector<f64> {
        s.rows(2 * self.n, self.p).into_owned()
    }
}

fn check_bounded(s: &DVector<f64>, t: f64) -> Result<()> {
    if s.iter()
        .all(|v| v.is_finite() && v.abs() <= DIVERGENCE_LIMIT)
    {
        Ok(())
    } else {
        Err(Error::Diverged { time: t })
    }
}

/// Runs the sampled-data observer against the plant up to `cfg.horizon`.
pub fn simulate(
    model: &PlantModel,
    spec: &ObserverSpec,
    sched: &SamplingSchedule,
    noise: &NoiseModel,
    input: &InputSignal,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate(model, sched)?;
    input.validate(model.m)?;

    let horizon = cfg.horizon;
    let times: Vec<f64> = sched
        .times()
        .iter()
        .copied()
        .take_while(|t| *t <= horizon)
        .collect();
    let xi = noise.realize(times.len(), model.p)?;
    let layout = Layout {
        n: model.n,
        p: model.p,
    };

    let rhs = |t: f64, s: &DVector<f64>| -> Result<DVector<f64>> {
        let u = input.eval(t, model.m);
        let x = layout.x(s);
        let z = layout.z(s);
        let w = layout.w(s);
        let dx = (model.f)(&x, &u);
        let dz = observer_rhs(model, spec, &z, &w, &u)?;
        let dw = predictor_rhs(model, spec, &z, &w, &u)?;
        Ok(layout.pack(&dx, &dz, &dw))
    };

    let estimate = (horizon / cfg.step).ceil() as usize + times.len() + 1;
    let mut traj = Trajectory::with_capacity(estimate.min(50_000_000));

    let sample = |traj: &mut Trajectory, k: usize, t: f64, x: &DVector<f64>| {
        let y = (model.h)(x) + &xi[k];
        traj.samples.push(Sample {
            k,
            t,
            y: y.clone(),
            xi: xi[k].clone(),
        });
        traj.sample_index.push(traj.mesh.len());
        y
    };

    let w0 = sample(&mut traj, 0, 0.0, &cfg.x0);
    let mut state = layout.pack(&cfg.x0, &cfg.z0, &w0);
    check_bounded(&state, 0.0)?;
    traj.record(0.0, cfg.x0.clone(), cfg.z0.clone(), w0);

    for k in 0..times.len() {
        let start = times[k];
        if start >= horizon {
            break;
        }
        let (end, reset_at_end) = match times.get(k + 1) {
            Some(&next) => (next, true),
            None => (horizon, false),
        };
        let span = end - start;
        let substeps = ((span / cfg.step).ceil() as usize).max(1);
        let h = span / substeps as f64;

        for i in 0..substeps {
            let t = start + i as f64 * h;
            let last = i + 1 == substeps;
            let t_next = if last {
                end
            } else {
                start + (i + 1) as f64 * h
            };
            state = rk4_step(rhs, t, &state, t_next - t)?;
            check_bounded(&state, t_next)?;

            let x = layout.x(&state);
            let z = layout.z(&state);
            if last && reset_at_end {
                let w = sample(&mut traj, k + 1, t_next, &x);
                state.rows_mut(2 * model.n, model.p).copy_from(&w);
                check_bounded(&state, t_next)?;
                traj.record(t_next, x, z, w);
            } else {
                traj.record(t_next, x, z, layout.w(&state));
            }
        }
    }

    Ok(traj)
}
