use crate::{Error, Result};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop once successive losses differ by less than this; zero disables the check.
    pub tolerance: f64,
    /// Step of the central differences.
    pub fd_step: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_iterations: 1000,
            tolerance: 0.0,
            fd_step: 1e-4,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |b: f64| b > 0.0 && b < 1.0;
        if !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::invalid("Adam betas must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.epsilon > 0.0) || !(self.fd_step > 0.0) || !(self.tolerance >= 0.0) {
            return Err(Error::invalid("epsilon and fd_step must be positive, tolerance non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub params: Vec<f64>,
    pub loss: f64,
    /// Loss at the start point followed by the loss after every update.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} evaluated to {value}")))
    }
}

/// Central-difference gradient of `f` at `x`; coordinates run in parallel.
pub fn finite_difference_gradient<F>(f: &F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("difference step must be positive"));
    }
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut probe = x.to_vec();
            probe[i] = x[i] + h;
            let plus = finite(f(&probe)?, "loss")?;
            probe[i] = x[i] - h;
            let minus = finite(f(&probe)?, "loss")?;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// Adam on `f` with central-difference gradients.
pub fn adam_minimize<F>(f: &F, x0: &[f64], config: &AdamConfig) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    adam_minimize_projected(f, x0, config, |_| {})
}

/// Adam where `project` maps every updated point back onto the feasible set.
pub fn adam_minimize_projected<F, P>(f: &F, x0: &[f64], config: &AdamConfig, project: P) -> Result<OptimizationResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
    P: Fn(&mut [f64]),
{
    config.validate()?;
    if x0.is_empty() {
        return Err(Error::invalid("no parameters to optimize"));
    }
    let initial = finite(f(x0)?, "initial loss")?;
    let limit = 1e6 * initial.abs().max(f64::EPSILON);

    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut history = vec![initial];
    let (mut best, mut best_loss) = (x.clone(), initial);
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iterations {
        let g = finite_difference_gradient(f, &x, config.fd_step)?;
        let c1 = 1.0 - config.beta1.powi(k as i32);
        let c2 = 1.0 - config.beta2.powi(k as i32);
        for i in 0..n {
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
            x[i] -= config.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + config.epsilon);
        }
        project(&mut x);
        let loss = f(&x)?;
        iterations = k;
        if !loss.is_finite() || loss > limit {
            return Err(Error::Divergence(format!(
                "loss {loss:e} at iteration {k} exceeds 1e6 times the initial loss {initial:e}"
            )));
        }
        let previous = history[history.len() - 1];
        history.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&x);
        }
        if config.tolerance > 0.0 && (previous - loss).abs() < config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(OptimizationResult { params: best, loss: best_loss, history, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gradient_of_square_and_product() {
        let g = finite_difference_gradient(&|x: &[f64]| Ok(x[0] * x[0]), &[3.0], 1e-4).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
        let g = finite_difference_gradient(&|x: &[f64]| Ok(x[0] * x[1]), &[2.0, 5.0], 1e-4).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-6 && (g[1] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let f = |x: &[f64]| Ok(if x[0] > 0.0 { f64::NAN } else { 0.0 });
        assert!(matches!(finite_difference_gradient(&f, &[0.0], 1e-3), Err(Error::NonFinite(_))));
    }

    #[test]
    fn one_dimensional_quadratic() {
        let f = |x: &[f64]| Ok((x[0] - 3.0).powi(2));
        let cfg = AdamConfig { max_iterations: 5000, ..AdamConfig::default() };
        let r = adam_minimize(&f, &[0.0], &cfg).unwrap();
        assert!((r.params[0] - 3.0).abs() < 1e-6, "x = {}", r.params[0]);
        assert!(r.iterations <= 5000);
    }

    #[test]
    fn rosenbrock_valley() {
        let f = |x: &[f64]| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let cfg = AdamConfig { max_iterations: 5000, ..AdamConfig::default() };
        let r = adam_minimize(&f, &[-1.0, 1.0], &cfg).unwrap();
        assert!(r.loss < 1e-4, "loss {}", r.loss);
        assert!((r.params[0] - 1.0).abs() < 1e-2 && (r.params[1] - 1.0).abs() < 2e-2);
    }

    #[test]
    fn divergence_aborts() {
        // Adam moves about one learning rate per step, so a huge rate overshoots.
        let f = |x: &[f64]| Ok(x[0] * x[0]);
        let cfg = AdamConfig { learning_rate: 1e3, ..AdamConfig::default() };
        let r = adam_minimize(&f, &[1e-3], &cfg);
        assert!(matches!(r, Err(Error::Divergence(_))), "{r:?}");
    }

    #[test]
    fn tolerance_stops_early() {
        let f = |x: &[f64]| Ok(x[0] * x[0]);
        let cfg = AdamConfig { tolerance: 1e-3, max_iterations: 10_000, ..AdamConfig::default() };
        let r = adam_minimize(&f, &[1.0], &cfg).unwrap();
        assert!(r.converged && r.iterations < 10_000);
    }

    #[test]
    fn projection_is_applied() {
        let f = |x: &[f64]| Ok((x[0] + 1.0).powi(2));
        let r = adam_minimize_projected(&f, &[1.0], &AdamConfig::default(), |x| x[0] = x[0].max(0.0)).unwrap();
        assert!(r.params[0] >= 0.0 && r.params[0] < 1e-2);
    }

    #[test]
    fn invalid_config_rejected() {
        let f = |x: &[f64]| Ok(x[0]);
        for cfg in [
            AdamConfig { beta1: 1.0, ..AdamConfig::default() },
            AdamConfig { beta2: 0.0, ..AdamConfig::default() },
            AdamConfig { learning_rate: 0.0, ..AdamConfig::default() },
        ] {
            assert!(adam_minimize(&f, &[0.0], &cfg).is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn best_loss_is_history_minimum(a in -5.0f64..5.0, b in -5.0f64..5.0, iters in 1usize..200) {
            let f = |x: &[f64]| Ok((x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2) + (x[0] * x[1]).sin());
            let cfg = AdamConfig { max_iterations: iters, learning_rate: 0.05, ..AdamConfig::default() };
            let r = adam_minimize(&f, &[a, b], &cfg).unwrap();
            let min = r.history.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(r.loss, min);
            prop_assert!(r.loss <= r.history[0]);
            prop_assert_eq!(r.history.len(), r.iterations + 1);
            let again = adam_minimize(&f, &[a, b], &cfg).unwrap();
            prop_assert_eq!(again, r);
        }

        #[test]
        fn gradient_matches_closed_form(x in -2.0f64..2.0, y in -2.0f64..2.0) {
            let f = |p: &[f64]| Ok(p[0].sin() * p[1].exp() + p[0].powi(3));
            let g = finite_difference_gradient(&f, &[x, y], 1e-4).unwrap();
            let exact = [x.cos() * y.exp() + 3.0 * x * x, x.sin() * y.exp()];
            for i in 0..2 {
                prop_assert!((g[i] - exact[i]).abs() <= 1e-6 * exact[i].abs().max(1.0));
            }
        }
    }
}
