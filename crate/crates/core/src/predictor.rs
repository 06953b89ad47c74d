//! Predictor gains `K(z, w, u)` for the inter-sample output predictor
//!
//! ```text
//! w' = grad_h(z) f(z, u) - K(z, w, u) (w - h(z))
//! ```
//!
//! Each variant implements [`PredictorGain`]; the config-facing names live in
//! [`registry`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::registry::{expect_keys, get_f64, Params, Registry};

/// Everything a gain may depend on at one evaluation point.
pub struct GainInputs<'a> {
    pub z: &'a DVector<f64>,
    pub w: &'a DVector<f64>,
    pub u: &'a DVector<f64>,
    /// `grad_h(z)`, p x n.
    pub grad_h: &'a DMatrix<f64>,
    /// `g(z, w, u)`, n x p.
    pub innovation_gain: &'a DMatrix<f64>,
}

impl GainInputs<'_> {
    fn p(&self) -> usize {
        self.w.len()
    }
}

pub trait PredictorGain: Send + Sync {
    fn name(&self) -> &str;

    /// The p x p matrix `K(z, w, u)`.
    fn gain(&self, inputs: &GainInputs<'_>) -> DMatrix<f64>;

    /// `Some(q)` when the gain is the constant `-q I`.
    fn constant_q(&self) -> Option<f64> {
        None
    }
}

impl fmt::Debug for dyn PredictorGain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PredictorGain({})", self.name())
    }
}

/// Zero-order hold: `K = -grad_h(z) g(z, w, u)`, so `w - h(z)` stays constant
/// between samples.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zoh;

impl PredictorGain for Zoh {
    fn name(&self) -> &str {
        "zoh"
    }

    fn gain(&self, inputs: &GainInputs<'_>) -> DMatrix<f64> {
        -(inputs.grad_h * inputs.innovation_gain)
    }
}

/// ZOH with exponentially decaying innovation: `K = -grad_h(z) g + eta I`.
#[derive(Debug, Clone, Copy)]
pub struct ZohExpGain {
    eta: f64,
}

impl ZohExpGain {
    pub fn new(eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::config(format!(
                "zoh-exp-gain requires a finite eta >= 0, got {eta}"
            )));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl PredictorGain for ZohExpGain {
    fn name(&self) -> &str {
        "zoh-exp-gain"
    }

    fn gain(&self, inputs: &GainInputs<'_>) -> DMatrix<f64> {
        let p = inputs.p();
        -(inputs.grad_h * inputs.innovation_gain) + DMatrix::identity(p, p) * self.eta
    }
}

/// Pure inter-sample prediction, `K = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct InterSamplePredictor;

impl PredictorGain for InterSamplePredictor {
    fn name(&self) -> &str {
        "inter-sample"
    }

    fn gain(&self, inputs: &GainInputs<'_>) -> DMatrix<f64> {
        let p = inputs.p();
        DMatrix::zeros(p, p)
    }

    fn constant_q(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Constant gain `K = -q I`; the predictor then obeys
/// `w' = grad_h(z) f(z, u) + q (w - h(z))`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantMinusQ {
    q: f64,
}

impl ConstantMinusQ {
    pub fn new(q: f64) -> Self {
        Self { q }
    }

    pub fn q(&self) -> f64 {
        self.q
    }
}

impl PredictorGain for ConstantMinusQ {
    fn name(&self) -> &str {
        "constant-minus-q"
    }

    fn gain(&self, inputs: &GainInputs<'_>) -> DMatrix<f64> {
        let p = inputs.p();
        DMatrix::identity(p, p) * (-self.q)
    }

    fn constant_q(&self) -> Option<f64> {
        Some(self.q)
    }
}

pub type GainFn = Arc<dyn Fn(&GainInputs<'_>) -> DMatrix<f64> + Send + Sync>;

/// User-supplied `K(z, w, u)`. Must be locally Lipschitz and return p x p.
#[derive(Clone)]
pub struct Custom {
    name: String,
    gain: GainFn,
}

impl Custom {
    pub fn new(name: impl Into<String>, gain: GainFn) -> Self {
        Self {
            name: name.into(),
            gain,
        }
    }
}

impl PredictorGain for Custom {
    fn name(&self) -> &str {
        &self.name
    }

    fn gain(&self, inputs: &GainInputs<'_>) -> DMatrix<f64> {
        (self.gain)(inputs)
    }
}

/// Builtin predictor registry: `zoh`, `zoh-exp-gain {eta}`, `inter-sample`,
/// `constant-minus-q {q}`.
pub fn registry() -> Registry<dyn PredictorGain> {
    let mut reg: Registry<dyn PredictorGain> = Registry::new("predictor");
    reg.register("zoh", |p: &Params| {
        expect_keys(p, &[], "predictor zoh")?;
        Ok(Box::new(Zoh) as Box<dyn PredictorGain>)
    })
    .register("zoh-exp-gain", |p: &Params| {
        expect_keys(p, &["eta"], "predictor zoh-exp-gain")?;
        let eta = get_f64(p, "eta", "predictor")?;
        Ok(Box::new(ZohExpGain::new(eta)?) as Box<dyn PredictorGain>)
    })
    .register("inter-sample", |p: &Params| {
        expect_keys(p, &[], "predictor inter-sample")?;
        Ok(Box::new(InterSamplePredictor) as Box<dyn PredictorGain>)
    })
    .register("constant-minus-q", |p: &Params| {
        expect_keys(p, &["q"], "predictor constant-minus-q")?;
        let q = get_f64(p, "q", "predictor")?;
        Ok(Box::new(ConstantMinusQ::new(q)) as Box<dyn PredictorGain>)
    });
    reg
}
