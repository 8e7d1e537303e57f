use super::{Gradients, NetworkParams};
use crate::error::{Error, Result};

pub const LR_DECAY_EXPONENT: f64 = 0.9;

/// Classical (heavy-ball) momentum SGD with coupled L2 weight decay and
/// polynomial learning-rate decay.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub velocity: NetworkParams,
    pub lr0: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Epoch count the polynomial schedule decays over; `None` keeps the
    /// rate constant.
    pub max_epochs: Option<usize>,
}

impl OptimState {
    pub fn new(params: &NetworkParams, lr0: f64, weight_decay: f64, momentum: f64, max_epochs: Option<usize>) -> Self {
        Self {
            velocity: params.zeros_like(),
            lr0,
            weight_decay,
            momentum,
            max_epochs,
        }
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        match self.max_epochs {
            Some(max) => poly_lr(self.lr0, epoch, max),
            None => self.lr0,
        }
    }
}

/// `lr0 * (1 - epoch / max_epochs)^0.9`, clamped at zero past the end.
pub fn poly_lr(lr0: f64, epoch: usize, max_epochs: usize) -> f64 {
    let frac = (1.0 - epoch as f64 / max_epochs as f64).max(0.0);
    lr0 * frac.powf(LR_DECAY_EXPONENT)
}

/// `v <- mu * v + (g + wd * w); w <- w - lr(epoch) * v`, with `epoch`
/// counted from zero.
pub fn sgd_step(params: &mut NetworkParams, grads: &Gradients, state: &mut OptimState, epoch: usize) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.velocity) {
        return Err(Error::shape("gradient or momentum buffers do not match parameters"));
    }
    if !grads.all_finite() {
        return Err(Error::invalid("non-finite gradient"));
    }
    let lr = state.lr(epoch);
    let (mu, wd) = (state.momentum, state.weight_decay);
    for ((w, g), v) in params.values_mut().zip(grads.values()).zip(state.velocity.values_mut()) {
        *v = mu * *v + (g + wd * *w);
        *w -= lr * *v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkSpec;

    fn single(value: f64) -> NetworkParams {
        let spec = NetworkSpec::new(1, 2, vec![1]).unwrap();
        let mut p = NetworkParams::zeros(&spec);
        p.values_mut().for_each(|v| *v = value);
        p
    }

    #[test]
    fn one_step_arithmetic() {
        let mut w = single(1.0);
        let g = single(0.5);
        let mut st = OptimState::new(&w, 0.1, 0.0, 0.0, None);
        sgd_step(&mut w, &g, &mut st, 0).unwrap();
        assert!(w.values().all(|&v| (v - 0.95).abs() < 1e-15));
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut w = single(0.3);
        let before = w.clone();
        let mut st = OptimState::new(&w, 0.1, 0.0, 0.9, Some(10));
        let zero = w.zeros_like();
        for e in 0..5 {
            sgd_step(&mut w, &zero, &mut st, e).unwrap();
        }
        assert_eq!(w, before);
    }

    #[test]
    fn momentum_and_decay() {
        let mut w = single(1.0);
        let g = single(1.0);
        let mut st = OptimState::new(&w, 0.1, 0.5, 0.9, None);
        sgd_step(&mut w, &g, &mut st, 0).unwrap();
        // v = 1 + 0.5 = 1.5, w = 1 - 0.15
        assert!(w.values().all(|&v| (v - 0.85).abs() < 1e-15));
        sgd_step(&mut w, &g, &mut st, 1).unwrap();
        // v = 0.9 * 1.5 + 1 + 0.425 = 2.775, w = 0.85 - 0.2775
        assert!(w.values().all(|&v| (v - 0.5725).abs() < 1e-12));
    }

    #[test]
    fn poly_schedule() {
        assert_eq!(poly_lr(0.01, 0, 100), 0.01);
        assert!((poly_lr(0.01, 50, 100) - 0.01 * 0.5f64.powf(0.9)).abs() < 1e-15);
        assert_eq!(poly_lr(0.01, 100, 100), 0.0);
        assert_eq!(poly_lr(0.01, 150, 100), 0.0);
    }

    #[test]
    fn rejects_non_finite_and_mismatched() {
        let mut w = single(1.0);
        let mut st = OptimState::new(&w, 0.1, 0.0, 0.0, None);
        assert!(sgd_step(&mut w, &single(f64::NAN), &mut st, 0).is_err());
        let other = NetworkParams::zeros(&NetworkSpec::default());
        assert!(sgd_step(&mut w, &other, &mut st, 0).is_err());
    }
}
