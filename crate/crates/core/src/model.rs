//! Plant models `x' = f(x, u)`, `y = h(x)` and the two builtin instances.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::observer::ObserverSpec;
use crate::predictor::{ConstantMinusQ, InterSamplePredictor};

pub type VectorField = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type OutputMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type OutputJacobian = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Matrices of a linear plant `x' = Ax + Bu`, `y = Cx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

/// A plant with state dimension `n`, input dimension `m` and output dimension `p`.
///
/// `f` must be locally Lipschitz in the state for every fixed input and
/// `grad_h` must be the Jacobian of `h`. Neither is checked for user models.
#[derive(Clone)]
pub struct PlantModel {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub f: VectorField,
    pub h: OutputMap,
    pub grad_h: OutputJacobian,
    linear: Option<LinearPlant>,
}

impl fmt::Debug for PlantModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlantModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("p", &self.p)
            .field("linear", &self.linear)
            .finish_non_exhaustive()
    }
}

impl PlantModel {
    pub fn new(
        n: usize,
        m: usize,
        p: usize,
        f: VectorField,
        h: OutputMap,
        grad_h: OutputJacobian,
    ) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::config(format!(
                "state and output dimensions must be positive (n = {n}, p = {p})"
            )));
        }
        Ok(Self {
            n,
            m,
            p,
            f,
            h,
            grad_h,
            linear: None,
        })
    }

    /// Matrices of the plant when it was built from `(A, B, C)`.
    pub fn linear(&self) -> Option<&LinearPlant> {
        self.linear.as_ref()
    }

    pub(crate) fn check_state(&self, what: &'static str, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::dim(what, self.n, v.len()));
        }
        Ok(())
    }

    pub(crate) fn check_output(&self, what: &'static str, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.p {
            return Err(Error::dim(what, self.p, v.len()));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, what: &'static str, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.m {
            return Err(Error::dim(what, self.m, v.len()));
        }
        Ok(())
    }
}

/// Harmonic oscillator `x1' = x2`, `x2' = -x1 + u`, `y = x1`, with observer
/// gain `g = R = [2; 1]` and predictor gain `K = -0.8 I`.
pub fn builtin_oscillator() -> (PlantModel, ObserverSpec) {
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let r = DMatrix::from_row_slice(2, 1, &[2.0, 1.0]);

    let f: VectorField =
        Arc::new(|x: &DVector<f64>, u: &DVector<f64>| DVector::from_vec(vec![x[1], -x[0] + u[0]]));
    let h: OutputMap = Arc::new(|x: &DVector<f64>| DVector::from_element(1, x[0]));
    let grad_h: OutputJacobian =
        Arc::new(|_: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));

    let mut model = PlantModel::new(2, 1, 1, f, h, grad_h).expect("oscillator dimensions");
    model.linear = Some(LinearPlant { a, b, c });
    let spec = ObserverSpec::constant_gain(r, Arc::new(ConstantMinusQ::new(0.8)));
    (model, spec)
}

/// Linear plant `x' = Ax + Bu`, `y = Cx` with constant observer gain `g = R`.
///
/// The predictor defaults to pure inter-sample prediction (`K = 0`); swap it
/// with [`ObserverSpec::with_predictor`].
pub fn builtin_linear(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    r: DMatrix<f64>,
) -> Result<(PlantModel, ObserverSpec)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::dim(
            "A",
            format!("{n}x{n}"),
            format!("{}x{}", n, a.ncols()),
        ));
    }
    if b.nrows() != n {
        return Err(Error::dim("B rows", n, b.nrows()));
    }
    let m = b.ncols();
    let p = c.nrows();
    if c.ncols() != n {
        return Err(Error::dim("C columns", n, c.ncols()));
    }
    if r.shape() != (n, p) {
        return Err(Error::dim(
            "R",
            format!("{n}x{p}"),
            format!("{}x{}", r.nrows(), r.ncols()),
        ));
    }
    if [&a, &b, &c, &r]
        .iter()
        .any(|mat| mat.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::config("linear model matrices must be finite"));
    }

    let (fa, fb) = (a.clone(), b.clone());
    let f: VectorField = Arc::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        let mut dx = &fa * x;
        if fb.ncols() > 0 {
            dx += &fb * u;
        }
        dx
    });
    let hc = c.clone();
    let h: OutputMap = Arc::new(move |x: &DVector<f64>| &hc * x);
    let jc = c.clone();
    let grad_h: OutputJacobian = Arc::new(move |_: &DVector<f64>| jc.clone());

    let mut model = PlantModel::new(n, m, p, f, h, grad_h)?;
    model.linear = Some(LinearPlant { a, b, c });
    let spec = ObserverSpec::constant_gain(r, Arc::new(InterSamplePredictor));
    Ok((model, spec))
}
