use crate::factorized::{FactorGraphFunction, JointFn, SopFunction};
use std::fmt;
use std::sync::Arc;

/// The integrand `phi`, in one of three representations.
///
/// Every representation can be evaluated pointwise; the structured ones also
/// unlock the fast product-form strategies.
#[derive(Clone)]
pub enum TestFunction {
    BlackBox(JointFn),
    Sop(SopFunction),
    FactorGraph(FactorGraphFunction),
}

impl TestFunction {
    pub fn black_box(f: impl Fn(&[&[f64]]) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction::BlackBox(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::black_box(move |_| c)
    }

    #[inline]
    pub fn eval(&self, x: &[&[f64]]) -> f64 {
        match self {
            TestFunction::BlackBox(f) => f(x),
            TestFunction::Sop(f) => f.eval(x),
            TestFunction::FactorGraph(f) => f.eval(x),
        }
    }

    /// The same function, stripped of its structure.
    pub fn to_black_box(&self) -> TestFunction {
        let me = self.clone();
        Self::black_box(move |x| me.eval(x))
    }

    pub fn representation(&self) -> &'static str {
        match self {
            TestFunction::BlackBox(_) => "black-box",
            TestFunction::Sop(_) => "sum-of-products",
            TestFunction::FactorGraph(_) => "factor-graph",
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::BlackBox(_) => write!(f, "BlackBox(..)"),
            TestFunction::Sop(s) => f.debug_tuple("Sop").field(s).finish(),
            TestFunction::FactorGraph(g) => f.debug_tuple("FactorGraph").field(g).finish(),
        }
    }
}

impl From<SopFunction> for TestFunction {
    fn from(f: SopFunction) -> Self {
        TestFunction::Sop(f)
    }
}

impl From<FactorGraphFunction> for TestFunction {
    fn from(f: FactorGraphFunction) -> Self {
        TestFunction::FactorGraph(f)
    }
}
