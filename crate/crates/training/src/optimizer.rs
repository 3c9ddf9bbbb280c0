use ultraspeech_nn::{ParamStore, Scalar, Tensor};

use crate::{Result, TrainingError};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState<F: Scalar> {
    step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(params: &ParamStore<F>) -> Self {
        let zeros = || params.iter().map(|(_, _, t)| vec![F::zero(); t.len()]).collect::<Vec<_>>();
        Self { step: 0, m: zeros(), v: zeros() }
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One AdamW update.
///
/// `grads[i]` belongs to parameter `i`; `None` is a zero gradient. Weight
/// decay shrinks every parameter by `lr · weight_decay` of itself before
/// the bias-corrected adaptive step is applied. On a non-finite gradient
/// nothing is modified and a numeric error is returned.
pub fn optimizer_step<F: Scalar>(params: &mut ParamStore<F>, grads: &[Option<Tensor<F>>], state: &mut AdamState<F>, lr: f64, weight_decay: f64) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(TrainingError::Config(format!("{} gradients and {} moment slots for {} parameters", grads.len(), state.m.len(), params.len())));
    }
    let ids: Vec<_> = params.ids().collect();
    for (&id, g) in ids.iter().zip(grads) {
        if let Some(g) = g {
            if g.len() != params.get(id).len() || g.len() != state.m[id.index()].len() {
                return Err(TrainingError::Config(format!("gradient of `{}` has {} values, expected {}", params.name(id), g.len(), params.get(id).len())));
            }
            if !g.all_finite() {
                let msg = format!("non-finite gradient for `{}`; step skipped", params.name(id));
                log::warn!("{msg}");
                return Err(TrainingError::Numeric(msg));
            }
        }
    }

    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (F::of(ADAM_BETA1), F::of(ADAM_BETA2));
    let (one, eps) = (F::one(), F::of(ADAM_EPS));
    let step_size = F::of(lr / (1.0 - ADAM_BETA1.powi(t)));
    let v_correction = F::of(1.0 / (1.0 - ADAM_BETA2.powi(t)));
    let shrink = F::of(1.0 - lr * weight_decay);
    for (&id, g) in ids.iter().zip(grads) {
        let i = id.index();
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        let p = params.get_mut(id).data_mut();
        match g {
            Some(g) => {
                for (((p, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.data()) {
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    *p = *p * shrink - step_size * *m / ((*v * v_correction).sqrt() + eps);
                }
            }
            None => {
                for ((p, m), v) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = b1 * *m;
                    *v = b2 * *v;
                    *p = *p * shrink - step_size * *m / ((*v * v_correction).sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[f64]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("p", Tensor::from_vec(&[values.len()], values.to_vec()).unwrap()).unwrap();
        s
    }

    fn value(s: &ParamStore<f64>) -> Vec<f64> {
        s.get(s.id("p").unwrap()).data().to_vec()
    }

    #[test]
    fn zero_gradient_without_decay_is_identity() {
        let mut s = store(&[0.5, -2.0]);
        let mut st = AdamState::new(&s);
        let g = vec![Some(Tensor::zeros(&[2]))];
        for _ in 0..3 {
            optimizer_step(&mut s, &g, &mut st, 1e-3, 0.0).unwrap();
        }
        assert_eq!(value(&s), vec![0.5, -2.0]);
    }

    #[test]
    fn first_step_matches_hand_evaluated_moments() {
        // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1, step = lr · 1 / (1 + 1e-8).
        let mut s = store(&[1.0]);
        let mut st = AdamState::new(&s);
        optimizer_step(&mut s, &[Some(Tensor::from_vec(&[1], vec![1.0]).unwrap())], &mut st, 0.1, 0.0).unwrap();
        let expected = 1.0 - 0.1 / (1.0 + 1e-8);
        assert!((value(&s)[0] - expected).abs() < 1e-12);
        assert!((value(&s)[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn decay_alone_shrinks_by_exact_factor() {
        let mut s = store(&[3.0, -1.5, 0.25]);
        let mut st = AdamState::new(&s);
        optimizer_step(&mut s, &[None], &mut st, 0.1, 0.01).unwrap();
        for (after, before) in value(&s).iter().zip([3.0, -1.5, 0.25]) {
            assert!((after - before * (1.0 - 0.1 * 0.01)).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_gradient_leaves_everything_untouched() {
        let mut s = store(&[1.0, 2.0]);
        let mut st = AdamState::new(&s);
        let bad = vec![Some(Tensor::from_vec(&[2], vec![0.1, f64::NAN]).unwrap())];
        assert!(matches!(optimizer_step(&mut s, &bad, &mut st, 0.1, 0.01), Err(TrainingError::Numeric(_))));
        assert_eq!(value(&s), vec![1.0, 2.0]);
        assert_eq!(st.step(), 0);
    }

    #[test]
    fn mismatched_gradients_are_rejected() {
        let mut s = store(&[1.0, 2.0]);
        let mut st = AdamState::new(&s);
        assert!(optimizer_step(&mut s, &[Some(Tensor::zeros(&[3]))], &mut st, 0.1, 0.0).is_err());
        assert!(optimizer_step(&mut s, &[], &mut st, 0.1, 0.0).is_err());
    }
}
