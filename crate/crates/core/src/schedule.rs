//! Sampling schedules `0 = t_0 < t_1 < ...` with gaps bounded by a diameter `T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::registry::{expect_keys, get_f64_or, get_u64_or, Params, Registry};

/// Relative slack allowed when comparing gaps against the diameter.
const GAP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSchedule {
    times: Vec<f64>,
    diameter: f64,
}

impl SamplingSchedule {
    /// Validates `times[0] = 0`, strictly increasing times and every gap `<= diameter`.
    pub fn new(times: Vec<f64>, diameter: f64) -> Result<Self> {
        if !(diameter.is_finite() && diameter > 0.0) {
            return Err(Error::config(format!(
                "schedule diameter must be a positive finite number, got {diameter}"
            )));
        }
        match times.first() {
            Some(&0.0) => {}
            Some(&t0) => {
                return Err(Error::config(format!(
                    "schedule must start at t_0 = 0, got {t0}"
                )))
            }
            None => return Err(Error::config("schedule has no sampling times")),
        }
        for (k, pair) in times.windows(2).enumerate() {
            let gap = pair[1] - pair[0];
            if !gap.is_finite() || gap <= 0.0 {
                return Err(Error::config(format!(
                    "sampling times must be strictly increasing (t_{} = {}, t_{} = {})",
                    k,
                    pair[0],
                    k + 1,
                    pair[1]
                )));
            }
            if gap > diameter * (1.0 + GAP_SLACK) {
                return Err(Error::config(format!(
                    "gap t_{} - t_{} = {gap} exceeds the diameter {diameter}",
                    k + 1,
                    k
                )));
            }
        }
        Ok(Self { times, diameter })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn last(&self) -> f64 {
        *self.times.last().expect("non-empty schedule")
    }

    pub fn covers(&self, horizon: f64) -> bool {
        self.last() >= horizon
    }

    /// Largest realized gap `sup (t_{k+1} - t_k)`.
    pub fn max_gap(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Smallest gap between consecutive sampling times that start before `horizon`.
    pub fn min_gap_before(&self, horizon: f64) -> Option<f64> {
        self.times
            .windows(2)
            .filter(|w| w[0] < horizon)
            .map(|w| w[1] - w[0])
            .reduce(f64::min)
    }
}

/// Strategy that lays out sampling times for a given diameter and horizon.
pub trait ScheduleGenerator: Send + Sync {
    fn name(&self) -> &str;
    fn generate(&self, diameter: f64, horizon: f64) -> Result<SamplingSchedule>;
}

fn check_request(diameter: f64, horizon: f64) -> Result<()> {
    if !(diameter.is_finite() && diameter > 0.0) {
        return Err(Error::config(format!(
            "schedule diameter T must be positive and finite, got {diameter}"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::config(format!(
            "schedule horizon must be positive and finite, got {horizon}"
        )));
    }
    Ok(())
}

/// `t_k = k T` until the horizon is reached.
///
/// Times within `1e-9 T` of the horizon are snapped onto it so that e.g.
/// `T = 0.3`, horizon `0.9` ends exactly at `0.9`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl ScheduleGenerator for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }

    fn generate(&self, diameter: f64, horizon: f64) -> Result<SamplingSchedule> {
        check_request(diameter, horizon)?;
        let mut times = vec![0.0];
        let mut k: u64 = 1;
        loop {
            let mut t = k as f64 * diameter;
            if (t - horizon).abs() <= 1e-9 * diameter {
                t = horizon;
            }
            times.push(t);
            if t >= horizon {
                break;
            }
            k += 1;
        }
        SamplingSchedule::new(times, diameter)
    }
}

/// Gaps drawn independently and uniformly from `[min_gap_fraction T, T]`.
#[derive(Debug, Clone, Copy)]
pub struct SeededRandom {
    min_gap_fraction: f64,
    seed: u64,
}

impl SeededRandom {
    pub fn new(min_gap_fraction: f64, seed: u64) -> Result<Self> {
        if !(min_gap_fraction > 0.0 && min_gap_fraction <= 1.0) {
            return Err(Error::config(format!(
                "min_gap_fraction must lie in (0, 1], got {min_gap_fraction}"
            )));
        }
        Ok(Self {
            min_gap_fraction,
            seed,
        })
    }
}

impl ScheduleGenerator for SeededRandom {
    fn name(&self) -> &str {
        "seeded-random"
    }

    fn generate(&self, diameter: f64, horizon: f64) -> Result<SamplingSchedule> {
        check_request(diameter, horizon)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let lo = self.min_gap_fraction * diameter;
        let mut times = vec![0.0];
        let mut t = 0.0;
        while t < horizon {
            let gap = if lo >= diameter {
                diameter
            } else {
                rng.gen_range(lo..=diameter)
            };
            t += gap;
            times.push(t);
        }
        SamplingSchedule::new(times, diameter)
    }
}

/// Builtin schedule registry: `uniform`, `seeded-random {min_gap_fraction, seed}`.
///
/// The diameter is not a registry parameter; it is passed to
/// [`ScheduleGenerator::generate`].
pub fn registry() -> Registry<dyn ScheduleGenerator> {
    let mut reg: Registry<dyn ScheduleGenerator> = Registry::new("schedule");
    reg.register("uniform", |p: &Params| {
        expect_keys(p, &[], "schedule uniform")?;
        Ok(Box::new(Uniform) as Box<dyn ScheduleGenerator>)
    })
    .register("seeded-random", |p: &Params| {
        expect_keys(p, &["min_gap_fraction", "seed"], "schedule seeded-random")?;
        let fraction = get_f64_or(p, "min_gap_fraction", 0.5, "schedule")?;
        let seed = get_u64_or(p, "seed", 0, "schedule")?;
        Ok(Box::new(SeededRandom::new(fraction, seed)?) as Box<dyn ScheduleGenerator>)
    });
    reg
}

/// Builds a schedule of the named kind (`uniform` or `seeded-random`).
pub fn make_schedule(
    kind: &str,
    diameter: f64,
    horizon: f64,
    min_gap_fraction: f64,
    seed: u64,
) -> Result<SamplingSchedule> {
    let generator: Box<dyn ScheduleGenerator> = match kind {
        "uniform" => Box::new(Uniform),
        "seeded-random" => Box::new(SeededRandom::new(min_gap_fraction, seed)?),
        other => {
            return Err(Error::config(format!(
                "unknown schedule kind `{other}` (known: uniform, seeded-random)"
            )))
        }
    };
    generator.generate(diameter, horizon)
}
