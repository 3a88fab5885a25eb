//! Adam optimizer over named parameter matrices.
//!
//! Parameters live in a `BTreeMap<String, Matrix>` (the exchange format of
//! the gradient recorder and the checkpoints), so update order is the
//! deterministic lexicographic key order.

use std::collections::BTreeMap;

use crate::Matrix;

/// Adam with bias correction; β = (0.9, 0.999), ε = 1e-8.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: BTreeMap<String, Matrix>,
    v: BTreeMap<String, Matrix>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        assert!(lr > 0.0 && lr.is_finite(), "learning rate must be positive");
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// Applies one update step in place. Every parameter must have a
    /// gradient of the same shape (the recorder returns zeros for
    /// unreachable parameters, so this holds by construction).
    pub fn step(&mut self, params: &mut BTreeMap<String, Matrix>, grads: &BTreeMap<String, Matrix>) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (name, p) in params.iter_mut() {
            let g = grads
                .get(name)
                .unwrap_or_else(|| panic!("no gradient for parameter `{name}`"));
            assert_eq!(g.dim(), p.dim(), "gradient shape mismatch for `{name}`");
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Matrix::zeros(p.dim()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Matrix::zeros(p.dim()));
            for ((pe, ge), (me, ve)) in p
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *me = self.beta1 * *me + (1.0 - self.beta1) * ge;
                *ve = self.beta2 * *ve + (1.0 - self.beta2) * ge * ge;
                let m_hat = *me / bc1;
                let v_hat = *ve / bc2;
                *pe -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn singleton(value: f64) -> BTreeMap<String, Matrix> {
        let mut map = BTreeMap::new();
        map.insert("w".to_string(), Matrix::from_elem((1, 1), value));
        map
    }

    #[test]
    fn first_step_magnitude_is_roughly_lr() {
        // With bias correction, the first step is lr·g/(|g|+ε') ≈ lr·sign(g).
        let mut params = singleton(5.0);
        let grads = singleton(0.3);
        let mut adam = Adam::new(0.01);
        adam.step(&mut params, &grads);
        assert!((params["w"][[0, 0]] - (5.0 - 0.01)).abs() < 1e-6);
    }

    #[test]
    fn quadratic_converges() {
        // minimize (w − 3)², gradient 2(w − 3)
        let mut params = singleton(-4.0);
        let mut adam = Adam::new(0.1);
        for _ in 0..2000 {
            let w = params["w"][[0, 0]];
            let grads = singleton(2.0 * (w - 3.0));
            adam.step(&mut params, &grads);
        }
        assert!((params["w"][[0, 0]] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn deterministic_across_runs() {
        let run = || {
            let mut params = singleton(1.0);
            let mut adam = Adam::new(0.05);
            for i in 0..50 {
                let grads = singleton((i as f64).sin());
                adam.step(&mut params, &grads);
            }
            params["w"][[0, 0]]
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn parameters_update_independently() {
        let mut params = BTreeMap::new();
        params.insert("a".to_string(), Matrix::from_elem((1, 1), 1.0));
        params.insert("b".to_string(), Matrix::from_elem((2, 2), 1.0));
        let mut grads = BTreeMap::new();
        grads.insert("a".to_string(), Matrix::from_elem((1, 1), 1.0));
        grads.insert("b".to_string(), Matrix::zeros((2, 2)));
        let mut adam = Adam::new(0.5);
        adam.step(&mut params, &grads);
        assert!(params["a"][[0, 0]] < 1.0);
        assert_eq!(params["b"], Matrix::from_elem((2, 2), 1.0)); // zero grad, no motion
    }

    #[test]
    #[should_panic(expected = "no gradient")]
    fn missing_gradient_panics() {
        let mut params = singleton(1.0);
        let grads = BTreeMap::new();
        Adam::new(0.1).step(&mut params, &grads);
    }
}
