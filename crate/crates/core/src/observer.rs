//! Observer and predictor right-hand sides.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::PlantModel;
use crate::predictor::{GainInputs, PredictorGain};

pub type InnovationGain =
    Arc<dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Innovation gain `g(z, w, u)` (n x p) together with the predictor gain `K`.
#[derive(Clone)]
pub struct ObserverSpec {
    pub g: InnovationGain,
    pub predictor: Arc<dyn PredictorGain>,
    constant_gain: Option<DMatrix<f64>>,
}

impl fmt::Debug for ObserverSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObserverSpec")
            .field("predictor", &self.predictor.name())
            .field("constant_gain", &self.constant_gain)
            .finish_non_exhaustive()
    }
}

impl ObserverSpec {
    pub fn new(g: InnovationGain, predictor: Arc<dyn PredictorGain>) -> Self {
        Self {
            g,
            predictor,
            constant_gain: None,
        }
    }

    /// `g(z, w, u) = R` for all arguments.
    pub fn constant_gain(r: DMatrix<f64>, predictor: Arc<dyn PredictorGain>) -> Self {
        let captured = r.clone();
        Self {
            g: Arc::new(move |_, _, _| captured.clone()),
            predictor,
            constant_gain: Some(r),
        }
    }

    pub fn with_predictor(mut self, predictor: Arc<dyn PredictorGain>) -> Self {
        self.predictor = predictor;
        self
    }

    /// The matrix `R` when the innovation gain is constant.
    pub fn gain_matrix(&self) -> Option<&DMatrix<f64>> {
        self.constant_gain.as_ref()
    }
}

fn check_args(
    model: &PlantModel,
    z: &DVector<f64>,
    w: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<()> {
    model.check_state("z", z)?;
    model.check_output("w", w)?;
    model.check_input("u", u)
}

fn innovation_gain(
    model: &PlantModel,
    spec: &ObserverSpec,
    z: &DVector<f64>,
    w: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let g = (spec.g)(z, w, u);
    if g.shape() != (model.n, model.p) {
        return Err(Error::dim(
            "g(z, w, u)",
            format!("{}x{}", model.n, model.p),
            format!("{}x{}", g.nrows(), g.ncols()),
        ));
    }
    Ok(g)
}

/// `z' = f(z, u) + g(z, w, u) (w - h(z))`.
pub fn observer_rhs(
    model: &PlantModel,
    spec: &ObserverSpec,
    z: &DVector<f64>,
    w: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_args(model, z, w, u)?;
    let g = innovation_gain(model, spec, z, w, u)?;
    let innovation = w - (model.h)(z);
    Ok((model.f)(z, u) + g * innovation)
}

/// `w' = grad_h(z) f(z, u) - K(z, w, u) (w - h(z))`.
pub fn predictor_rhs(
    model: &PlantModel,
    spec: &ObserverSpec,
    z: &DVector<f64>,
    w: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_args(model, z, w, u)?;
    let g = innovation_gain(model, spec, z, w, u)?;
    let grad_h = (model.grad_h)(z);
    let k = spec.predictor.gain(&GainInputs {
        z,
        w,
        u,
        grad_h: &grad_h,
        innovation_gain: &g,
    });
    if k.shape() != (model.p, model.p) {
        return Err(Error::dim(
            "K(z, w, u)",
            format!("{}x{}", model.p, model.p),
            format!("{}x{}", k.nrows(), k.ncols()),
        ));
    }
    let innovation = w - (model.h)(z);
    Ok(&grad_h * (model.f)(z, u) - k * innovation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_oscillator;
    use crate::predictor::{ConstantMinusQ, Custom, InterSamplePredictor, Zoh, ZohExpGain};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn oscillator_observer_formula() {
        let (model, spec) = builtin_oscillator();
        let (z1, z2, w, u) = (0.7, -1.3, 0.4, 2.5);
        let rhs = observer_rhs(&model, &spec, &v(&[z1, z2]), &v(&[w]), &v(&[u])).unwrap();
        assert_relative_eq!(rhs[0], -2.0 * z1 + z2 + 2.0 * w, epsilon = 1e-14);
        assert_relative_eq!(rhs[1], -2.0 * z1 + u + w, epsilon = 1e-14);
    }

    #[test]
    fn oscillator_observer_hand_value() {
        let (model, spec) = builtin_oscillator();
        let rhs = observer_rhs(&model, &spec, &v(&[1.0, 0.0]), &v(&[0.0]), &v(&[0.0])).unwrap();
        assert_eq!(rhs, v(&[-2.0, -2.0]));
    }

    #[test]
    fn constant_minus_q_predictor_formula() {
        let (model, spec) = builtin_oscillator();
        for q in [-1.0, 0.0, 0.8, 2.0] {
            let spec = spec
                .clone()
                .with_predictor(Arc::new(ConstantMinusQ::new(q)));
            let (z1, z2, w) = (0.3, 1.1, -0.6);
            let rhs = predictor_rhs(&model, &spec, &v(&[z1, z2]), &v(&[w]), &v(&[0.2])).unwrap();
            assert_relative_eq!(rhs[0], z2 + q * (w - z1), epsilon = 1e-14);
        }
    }

    #[test]
    fn zoh_equals_constant_minus_two_on_oscillator() {
        let (model, spec) = builtin_oscillator();
        let zoh = spec.clone().with_predictor(Arc::new(Zoh));
        let q2 = spec.with_predictor(Arc::new(ConstantMinusQ::new(2.0)));
        let (z, w, u) = (v(&[0.9, -0.4]), v(&[1.7]), v(&[0.3]));
        let a = predictor_rhs(&model, &zoh, &z, &w, &u).unwrap();
        let b = predictor_rhs(&model, &q2, &z, &w, &u).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a[0], -0.4 + 2.0 * (1.7 - 0.9), epsilon = 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (model, spec) = builtin_oscillator();
        let err = observer_rhs(&model, &spec, &v(&[1.0]), &v(&[0.0]), &v(&[0.0]));
        assert!(matches!(err, Err(Error::Dimension { .. })));
        let err = predictor_rhs(&model, &spec, &v(&[1.0, 0.0]), &v(&[0.0, 1.0]), &v(&[0.0]));
        assert!(matches!(err, Err(Error::Dimension { .. })));
        let err = predictor_rhs(&model, &spec, &v(&[1.0, 0.0]), &v(&[0.0]), &v(&[]));
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn custom_gain_with_wrong_shape_is_rejected() {
        let (model, spec) = builtin_oscillator();
        let bad = Custom::new("bad", Arc::new(|_: &GainInputs<'_>| DMatrix::zeros(2, 2)));
        let spec = spec.with_predictor(Arc::new(bad));
        let err = predictor_rhs(&model, &spec, &v(&[1.0, 0.0]), &v(&[0.0]), &v(&[0.0]));
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    fn presets(eta: f64, q: f64) -> Vec<(Arc<dyn PredictorGain>, Arc<dyn PredictorGain>)> {
        let zoh_custom = Custom::new(
            "zoh-custom",
            Arc::new(|gi: &GainInputs<'_>| -(gi.grad_h * gi.innovation_gain)),
        );
        let exp_custom = Custom::new(
            "exp-custom",
            Arc::new(move |gi: &GainInputs<'_>| {
                -(gi.grad_h * gi.innovation_gain) + DMatrix::identity(1, 1) * eta
            }),
        );
        let zero_custom = Custom::new(
            "zero-custom",
            Arc::new(|_: &GainInputs<'_>| DMatrix::zeros(1, 1)),
        );
        let q_custom = Custom::new(
            "q-custom",
            Arc::new(move |_: &GainInputs<'_>| DMatrix::identity(1, 1) * (-q)),
        );
        vec![
            (Arc::new(Zoh), Arc::new(zoh_custom)),
            (
                Arc::new(ZohExpGain::new(eta).unwrap()),
                Arc::new(exp_custom),
            ),
            (Arc::new(InterSamplePredictor), Arc::new(zero_custom)),
            (Arc::new(ConstantMinusQ::new(q)), Arc::new(q_custom)),
        ]
    }

    proptest! {
        #[test]
        fn presets_equal_their_custom_form(
            z1 in -10.0..10.0f64, z2 in -10.0..10.0f64, w in -10.0..10.0f64,
            u in -10.0..10.0f64, eta in 0.0..5.0f64, q in -5.0..5.0f64,
        ) {
            let (model, spec) = builtin_oscillator();
            let (z, w, u) = (v(&[z1, z2]), v(&[w]), v(&[u]));
            for (preset, custom) in presets(eta, q) {
                let a = predictor_rhs(&model, &spec.clone().with_predictor(preset), &z, &w, &u).unwrap();
                let b = predictor_rhs(&model, &spec.clone().with_predictor(custom), &z, &w, &u).unwrap();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn zero_innovation_removes_corrections(
            z1 in -10.0..10.0f64, z2 in -10.0..10.0f64, u in -10.0..10.0f64,
            eta in 0.0..5.0f64, q in -5.0..5.0f64,
        ) {
            let (model, spec) = builtin_oscillator();
            let z = v(&[z1, z2]);
            let u = v(&[u]);
            let w = (model.h)(&z);
            let free = (model.f)(&z, &u);
            prop_assert_eq!(observer_rhs(&model, &spec, &z, &w, &u).unwrap(), free.clone());
            for (preset, _) in presets(eta, q) {
                let spec = spec.clone().with_predictor(preset);
                let rhs = predictor_rhs(&model, &spec, &z, &w, &u).unwrap();
                prop_assert_eq!(rhs, (model.grad_h)(&z) * &free);
            }
        }
    }
}
