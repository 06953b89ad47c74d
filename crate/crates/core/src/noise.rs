//! Measurement noise `xi(t_k)`, defined only at sampling instants.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", from = "NoiseRepr")]
pub enum NoiseModel {
    #[default]
    Zero,
    /// Each component of `xi(t_k)` independently uniform on `[-delta, delta]`.
    SeededUniform { delta: f64, seed: u64 },
    /// One p-vector per sampling index.
    Tabulated { values: Vec<Vec<f64>> },
}

// Unit variants of internally tagged enums silently accept extra keys.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum NoiseRepr {
    Zero {},
    SeededUniform { delta: f64, seed: u64 },
    Tabulated { values: Vec<Vec<f64>> },
}

impl From<NoiseRepr> for NoiseModel {
    fn from(r: NoiseRepr) -> Self {
        match r {
            NoiseRepr::Zero {} => NoiseModel::Zero,
            NoiseRepr::SeededUniform { delta, seed } => NoiseModel::SeededUniform { delta, seed },
            NoiseRepr::Tabulated { values } => NoiseModel::Tabulated { values },
        }
    }
}

impl NoiseModel {
    pub fn validate(&self, p: usize) -> Result<()> {
        match self {
            NoiseModel::Zero => Ok(()),
            NoiseModel::SeededUniform { delta, .. } => {
                if delta.is_finite() && *delta >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!(
                        "noise.delta must be finite and >= 0, got {delta}"
                    )))
                }
            }
            NoiseModel::Tabulated { values } => {
                for (k, row) in values.iter().enumerate() {
                    if row.len() != p {
                        return Err(Error::dim(
                            "noise.values row",
                            p,
                            format!("{} (index {k})", row.len()),
                        ));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::config(format!("noise.values[{k}] is not finite")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Componentwise amplitude bound, if known a priori.
    pub fn amplitude(&self) -> Option<f64> {
        match self {
            NoiseModel::Zero => Some(0.0),
            NoiseModel::SeededUniform { delta, .. } => Some(*delta),
            NoiseModel::Tabulated { values } => Some(
                values
                    .iter()
                    .flatten()
                    .fold(0.0_f64, |acc, v| acc.max(v.abs())),
            ),
        }
    }

    /// Noise vectors for sampling indices `0..count`, each of length `p`.
    pub fn realize(&self, count: usize, p: usize) -> Result<Vec<DVector<f64>>> {
        self.validate(p)?;
        match self {
            NoiseModel::Zero => Ok(vec![DVector::zeros(p); count]),
            NoiseModel::SeededUniform { delta, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let delta = *delta;
                Ok((0..count)
                    .map(|_| {
                        DVector::from_fn(p, |_, _| {
                            if delta == 0.0 {
                                0.0
                            } else {
                                rng.gen_range(-delta..=delta)
                            }
                        })
                    })
                    .collect())
            }
            NoiseModel::Tabulated { values } => {
                if values.len() < count {
                    return Err(Error::config(format!(
                        "tabulated noise has {} entries but the schedule needs {count}",
                        values.len()
                    )));
                }
                Ok(values[..count]
                    .iter()
                    .map(|row| DVector::from_column_slice(row))
                    .collect())
            }
        }
    }
}
