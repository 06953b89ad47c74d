use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Measured input `u(t)`, defined for all `t >= 0`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", from = "InputRepr")]
pub enum InputSignal {
    #[default]
    Zero,
    Constant {
        value: Vec<f64>,
    },
    /// `amplitude * sin(frequency t + phase)`, componentwise.
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: f64,
        phase: f64,
    },
    /// `values[i]` on `[breakpoints[i], breakpoints[i+1])`; the last value
    /// holds beyond the final breakpoint and the first one before `breakpoints[0]`.
    TabulatedPiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum InputRepr {
    Zero {},
    Constant {
        value: Vec<f64>,
    },
    Sinusoid {
        amplitude: Vec<f64>,
        frequency: f64,
        phase: f64,
    },
    TabulatedPiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl From<InputRepr> for InputSignal {
    fn from(r: InputRepr) -> Self {
        match r {
            InputRepr::Zero {} => InputSignal::Zero,
            InputRepr::Constant { value } => InputSignal::Constant { value },
            InputRepr::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => InputSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            },
            InputRepr::TabulatedPiecewiseConstant {
                breakpoints,
                values,
            } => InputSignal::TabulatedPiecewiseConstant {
                breakpoints,
                values,
            },
        }
    }
}

impl InputSignal {
    pub fn validate(&self, m: usize) -> Result<()> {
        let check_len = |what: &'static str, v: &[f64]| -> Result<()> {
            if v.len() != m {
                return Err(Error::dim(what, m, v.len()));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!("{what} must be finite")));
            }
            Ok(())
        };
        match self {
            InputSignal::Zero => Ok(()),
            InputSignal::Constant { value } => check_len("input.value", value),
            InputSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                check_len("input.amplitude", amplitude)?;
                if !(frequency.is_finite() && phase.is_finite()) {
                    return Err(Error::config("input frequency and phase must be finite"));
                }
                Ok(())
            }
            InputSignal::TabulatedPiecewiseConstant {
                breakpoints,
                values,
            } => {
                if breakpoints.is_empty() || breakpoints.len() != values.len() {
                    return Err(Error::config(format!(
                        "tabulated input needs one value per breakpoint ({} breakpoints, {} values)",
                        breakpoints.len(),
                        values.len()
                    )));
                }
                if breakpoints.windows(2).any(|w| w[1] <= w[0])
                    || breakpoints.iter().any(|b| !b.is_finite())
                {
                    return Err(Error::config(
                        "input breakpoints must be finite and strictly increasing",
                    ));
                }
                values
                    .iter()
                    .try_for_each(|v| check_len("input.values row", v))
            }
        }
    }

    /// `u(t)` as an m-vector. Assumes [`InputSignal::validate`] passed for `m`.
    pub fn eval(&self, t: f64, m: usize) -> DVector<f64> {
        match self {
            InputSignal::Zero => DVector::zeros(m),
            InputSignal::Constant { value } => DVector::from_column_slice(value),
            InputSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => {
                let s = (frequency * t + phase).sin();
                DVector::from_iterator(m, amplitude.iter().map(|a| a * s))
            }
            InputSignal::TabulatedPiecewiseConstant {
                breakpoints,
                values,
            } => {
                let idx = breakpoints.partition_point(|b| *b <= t).saturating_sub(1);
                DVector::from_column_slice(&values[idx])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_holds_last_value() {
        let u = InputSignal::TabulatedPiecewiseConstant {
            breakpoints: vec![0.0, 1.0, 2.0],
            values: vec![vec![1.0], vec![2.0], vec![3.0]],
        };
        u.validate(1).unwrap();
        assert_eq!(u.eval(0.0, 1)[0], 1.0);
        assert_eq!(u.eval(0.999, 1)[0], 1.0);
        assert_eq!(u.eval(1.0, 1)[0], 2.0);
        assert_eq!(u.eval(2.5, 1)[0], 3.0);
        assert_eq!(u.eval(1e9, 1)[0], 3.0);
    }

    #[test]
    fn sinusoid_and_constant() {
        let u = InputSignal::Sinusoid {
            amplitude: vec![2.0],
            frequency: 1.0,
            phase: 0.0,
        };
        assert!((u.eval(std::f64::consts::FRAC_PI_2, 1)[0] - 2.0).abs() < 1e-15);
        let c = InputSignal::Constant { value: vec![0.5] };
        assert_eq!(c.eval(10.0, 1)[0], 0.5);
        assert_eq!(InputSignal::Zero.eval(1.0, 0).len(), 0);
    }

    #[test]
    fn validation() {
        assert!(InputSignal::Constant { value: vec![1.0] }
            .validate(2)
            .is_err());
        assert!(InputSignal::TabulatedPiecewiseConstant {
            breakpoints: vec![1.0, 0.0],
            values: vec![vec![0.0], vec![1.0]],
        }
        .validate(1)
        .is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<InputSignal>(r#"{"kind": "zero", "value": [1]}"#).is_err());
        assert!(serde_json::from_str::<InputSignal>(
            r#"{"kind": "constant", "value": [1], "phase": 0}"#
        )
        .is_err());
        let parsed: InputSignal =
            serde_json::from_str(r#"{"kind": "constant", "value": [1.5]}"#).unwrap();
        assert_eq!(parsed, InputSignal::Constant { value: vec![1.5] });
    }
}
