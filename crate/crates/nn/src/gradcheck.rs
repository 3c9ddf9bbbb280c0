//! Central finite-difference verification of analytic gradients.

use crate::graph::{Graph, Mode, Var};
use crate::params::ParamStore;
use crate::Result;

/// Gradients smaller than this are compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: (String, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `d loss / d θ` from a backward pass against
/// `(L(θ + ε) - L(θ - ε)) / 2ε` for every scalar of every parameter.
///
/// `build` must construct the same scalar loss each time it is called; it
/// runs in [`Mode::Eval`] so dropout never fires.
pub fn check_gradients<B>(params: &mut ParamStore<f64>, eps: f64, build: B) -> Result<GradCheckReport>
where
    B: for<'g> Fn(&mut Graph<'g, f64>) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new(params, Mode::Eval);
        let loss = build(&mut g)?;
        g.backward(loss).into_params()
    };
    let eval = |params: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(params, Mode::Eval);
        let loss = build(&mut g)?;
        Ok(g.value(loss).data()[0])
    };

    let mut report = GradCheckReport { max_rel_error: 0.0, worst: (String::new(), 0), analytic: 0.0, numeric: 0.0, checked: 0 };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let n = params.get(id).len();
        for i in 0..n {
            let orig = params.get(id).data()[i];
            params.get_mut(id).data_mut()[i] = orig + eps;
            let plus = eval(params)?;
            params.get_mut(id).data_mut()[i] = orig - eps;
            let minus = eval(params)?;
            params.get_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[id.index()].as_ref().map_or(0.0, |t| t.data()[i]);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.checked == 1 {
                report.max_rel_error = err;
                report.worst = (params.name(id).to_string(), i);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
