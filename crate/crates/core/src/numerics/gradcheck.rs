use super::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;

/// Denominator floor of the relative error, as a fraction of `max(1, |f(x)|)`.
/// Components far below the function's own scale are compared absolutely,
/// since central differences resolve them only to about `eps * |f| / h`.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Relative error with the denominator floored at `RELATIVE_FLOOR * max(1, |scale|)`,
/// where `scale` is the checked function's value.
pub fn relative_error(analytic: f64, numeric: f64, scale: f64) -> f64 {
    let floor = RELATIVE_FLOOR * scale.abs().max(1.0);
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the gradients currently held in `store` with central differences of `f`.
///
/// `params` restricts the check to some parameters; `None` checks all of them.
pub fn finite_difference_check(
    store: &mut ParamStore,
    h: f64,
    f: impl Fn(&ParamStore) -> f64,
    params: Option<&[ParamId]>,
) -> GradCheckReport {
    let ids: Vec<ParamId> = match params {
        Some(p) => p.to_vec(),
        None => store.ids().collect(),
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    let scale = f(store);
    for id in ids {
        for j in 0..store.value(id).len() {
            let x0 = store.value(id).data()[j];
            store.value_mut(id).data_mut()[j] = x0 + h;
            let up = f(store);
            store.value_mut(id).data_mut()[j] = x0 - h;
            let down = f(store);
            store.value_mut(id).data_mut()[j] = x0;
            let numeric = (up - down) / (2.0 * h);
            let analytic = store.grad(id).data()[j];
            let err = relative_error(analytic, numeric, scale);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst_param.is_empty() {
                report.max_rel_error = err;
                report.worst_param = store.name(id).to_string();
                report.worst_index = j;
                report.analytic = analytic;
                report.numeric = numeric;
            }
        }
    }
    report
}

/// Runs `build` once with backward to fill the store's gradients, then checks
/// them against central differences of the recorded scalar.
pub fn check_tape_gradients(
    store: &mut ParamStore,
    h: f64,
    build: impl Fn(&mut Tape, &ParamStore) -> Result<Var>,
    params: Option<&[ParamId]>,
) -> Result<GradCheckReport> {
    store.zero_grad();
    let mut tape = Tape::new();
    let loss = build(&mut tape, store)?;
    let buffer = tape.backward(loss, store)?;
    store.accumulate(&buffer, 1.0);
    let eval = |s: &ParamStore| {
        let mut t = Tape::new();
        let v = build(&mut t, s).expect("forward succeeded once");
        t.value(v).item()
    };
    Ok(finite_difference_check(store, h, eval, params))
}
