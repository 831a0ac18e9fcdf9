use serde::{Deserialize, Serialize};

use crate::energy::EnergyTerms;
use crate::error::{Error, Result};

/// Step-size and convergence controls of the conditioned descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentConfig {
    pub initial_step: f64,
    pub grow: f64,
    pub shrink: f64,
    /// Decay of the running mean-square gradient behind the conditioner.
    pub decay: f64,
    pub cond_min: f64,
    pub cond_max: f64,
    /// Stop when the energy fell by less than `rel_tol` (relative) over the
    /// last `window` accepted steps.
    pub rel_tol: f64,
    pub window: usize,
    /// Stop when every scaled active gradient component is below this.
    pub grad_tol: f64,
    pub min_step: f64,
    /// Disables the per-parameter conditioner (plain adaptive descent).
    pub unconditioned: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.01,
            grow: 1.2,
            shrink: 0.5,
            decay: 0.999,
            cond_min: 1e-3,
            cond_max: 1e3,
            rel_tol: 1e-6,
            window: 10,
            grad_tol: 1e-12,
            min_step: 1e-12,
            unconditioned: false,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.grow >= 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && (0.0..1.0).contains(&self.decay)
            && self.cond_min > 0.0
            && self.cond_max >= self.cond_min
            && self.rel_tol >= 0.0
            && self.window >= 1
            && self.grad_tol >= 0.0
            && self.min_step >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("descent settings out of range: {self:?}")))
        }
    }
}

/// Objective value and gradient at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub grad: Vec<f64>,
    pub terms: EnergyTerms,
}

impl Evaluation {
    pub fn plain(value: f64, grad: Vec<f64>) -> Self {
        Self {
            value,
            grad,
            terms: EnergyTerms {
                data: value,
                ..EnergyTerms::default()
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    /// Energy did not decrease; the step was rolled back.
    Rejected,
    /// No active parameter has a gradient; nothing moved.
    Stationary,
}

/// One row of the per-iteration trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub phase: String,
    pub iteration: usize,
    pub accepted: bool,
    pub step: f64,
    pub energy: f64,
    pub terms: EnergyTerms,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "phase,iteration,accepted,step,energy,data,smooth,pose,shape";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.phase,
            self.iteration,
            u8::from(self.accepted),
            self.step,
            self.energy,
            self.terms.data,
            self.terms.smooth,
            self.terms.pose,
            self.terms.shape
        )
    }
}

/// Conditioned gradient descent state. Each parameter moves by
/// `-λ · scale_k · cond_k · g_k`, where `cond_k` is the clamped inverse RMS
/// of its recent gradients. Accepted steps grow `λ`, rejected ones are
/// rolled back and shrink it.
#[derive(Clone, Debug)]
pub struct Descent {
    pub x: Vec<f64>,
    pub current: Evaluation,
    pub step: f64,
    pub mean_sq: Vec<f64>,
    pub iterations: usize,
    /// Energies after every accepted step, starting with the initial one.
    pub history: Vec<f64>,
}

impl Descent {
    pub fn new(x: Vec<f64>, current: Evaluation, config: &DescentConfig) -> Self {
        let mean_sq = current.grad.iter().map(|g| g * g).collect();
        let history = vec![current.value];
        Self {
            x,
            current,
            step: config.initial_step,
            mean_sq,
            iterations: 0,
            history,
        }
    }

    fn conditioner(&self, k: usize, config: &DescentConfig) -> f64 {
        if config.unconditioned {
            return 1.0;
        }
        let rms = self.mean_sq[k].sqrt();
        if rms > 0.0 {
            (1.0 / rms).clamp(config.cond_min, config.cond_max)
        } else {
            config.cond_max
        }
    }

    /// Attempts one step.
    pub fn step<F>(&mut self, f: &mut F, scales: &[f64], active: &[bool], config: &DescentConfig) -> Result<StepOutcome>
    where
        F: FnMut(&[f64]) -> Result<Evaluation>,
    {
        if let Some(k) = self.current.grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!("gradient of parameter {k} is not finite")));
        }
        self.iterations += 1;
        let mut trial = self.x.clone();
        let mut moved = false;
        for k in 0..trial.len() {
            if !active[k] || self.current.grad[k] == 0.0 {
                continue;
            }
            let d = -self.step * scales[k] * self.conditioner(k, config) * self.current.grad[k];
            trial[k] += d;
            moved |= d != 0.0;
        }
        if !moved {
            return Ok(StepOutcome::Stationary);
        }
        let eval = f(&trial)?;
        if eval.value.is_finite() && eval.value < self.current.value {
            let b = config.decay;
            for (m, g) in self.mean_sq.iter_mut().zip(&eval.grad) {
                *m = b * *m + (1.0 - b) * g * g;
            }
            self.x = trial;
            self.current = eval;
            self.history.push(self.current.value);
            self.step *= config.grow;
            Ok(StepOutcome::Accepted)
        } else {
            self.step *= config.shrink;
            Ok(StepOutcome::Rejected)
        }
    }

    /// Relative-decrease test over the last `window` accepted steps.
    pub fn converged(&self, config: &DescentConfig) -> bool {
        let n = self.history.len();
        if n > config.window {
            let old = self.history[n - 1 - config.window];
            let new = self.history[n - 1];
            if old - new <= config.rel_tol * new.abs().max(f64::MIN_POSITIVE) {
                return true;
            }
        }
        self.step < config.min_step
    }

    /// Largest active gradient component in scaled units.
    pub fn scaled_grad_norm(&self, scales: &[f64], active: &[bool]) -> f64 {
        self.current
            .grad
            .iter()
            .zip(scales)
            .zip(active)
            .filter(|(_, a)| **a)
            .fold(0.0, |m, ((g, s), _)| m.max((g * s).abs()))
    }
}

/// A single step of [`Descent`] on `state`.
pub fn conditioned_gradient_step<F>(
    state: &mut Descent,
    f: &mut F,
    scales: &[f64],
    active: &[bool],
    config: &DescentConfig,
) -> Result<StepOutcome>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    state.step(f, scales, active, config)
}

/// Runs the descent until convergence or `max_iters` attempted steps,
/// appending one trace row per attempt.
pub fn minimize<F>(
    mut f: F,
    x0: Vec<f64>,
    scales: &[f64],
    active: &[bool],
    config: &DescentConfig,
    max_iters: usize,
    phase: &str,
    trace: &mut Vec<TraceRow>,
) -> Result<Descent>
where
    F: FnMut(&[f64]) -> Result<Evaluation>,
{
    config.validate()?;
    if scales.len() != x0.len() || active.len() != x0.len() {
        return Err(Error::invalid("scales and mask must match the parameter count"));
    }
    let first = f(&x0)?;
    if first.grad.len() != x0.len() {
        return Err(Error::invalid("objective gradient has the wrong length"));
    }
    if !first.value.is_finite() {
        return Err(Error::Numerical(format!("initial energy is {}", first.value)));
    }
    let mut state = Descent::new(x0, first, config);
    trace.push(TraceRow {
        phase: phase.to_string(),
        iteration: 0,
        accepted: true,
        step: state.step,
        energy: state.current.value,
        terms: state.current.terms,
    });
    while state.iterations < max_iters {
        if state.scaled_grad_norm(scales, active) <= config.grad_tol {
            break;
        }
        let outcome = state.step(&mut f, scales, active, config)?;
        if outcome == StepOutcome::Stationary {
            break;
        }
        trace.push(TraceRow {
            phase: phase.to_string(),
            iteration: state.iterations,
            accepted: outcome == StepOutcome::Accepted,
            step: state.step,
            energy: state.current.value,
            terms: state.current.terms,
        });
        if state.converged(config) {
            break;
        }
    }
    log::info!(
        "{phase}: {} iterations, energy {:.6e} -> {:.6e}",
        state.iterations,
        state.history[0],
        state.current.value
    );
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(w: &[f64]) -> impl FnMut(&[f64]) -> Result<Evaluation> + '_ {
        move |x: &[f64]| {
            let v = x.iter().zip(w).map(|(x, w)| w * x * x).sum();
            Ok(Evaluation::plain(v, x.iter().zip(w).map(|(x, w)| 2.0 * w * x).collect()))
        }
    }

    fn run(w: &[f64], x0: Vec<f64>, config: &DescentConfig, max: usize, target: f64) -> (usize, Vec<f64>) {
        let n = x0.len();
        let mut f = quad(w);
        let first = f(&x0).unwrap();
        let mut s = Descent::new(x0, first, config);
        while s.iterations < max && s.x.iter().any(|v| v.abs() >= target) {
            s.step(&mut f, &vec![1.0; n], &vec![true; n], config).unwrap();
        }
        (s.iterations, s.x)
    }

    #[test]
    fn one_dimensional_quadratic_converges() {
        let (iters, x) = run(&[1.0], vec![1.0], &DescentConfig::default(), 200, 1e-6);
        assert!(x[0].abs() < 1e-6, "{x:?} after {iters}");
    }

    #[test]
    fn zero_gradient_leaves_state_unchanged() {
        let config = DescentConfig::default();
        let mut f = quad(&[1.0, 1.0]);
        let first = f(&[0.0, 0.0]).unwrap();
        let mut s = Descent::new(vec![0.0, 0.0], first, &config);
        let out = s.step(&mut f, &[1.0, 1.0], &[true, true], &config).unwrap();
        assert_eq!(out, StepOutcome::Stationary);
        assert_eq!(s.x, vec![0.0, 0.0]);
        assert_eq!(s.step, config.initial_step);
    }

    #[test]
    fn conditioning_pays_off_on_anisotropic_quadratic() {
        let w = [1.0, 1e4];
        let (cond, _) = run(&w, vec![1.0, 1.0], &DescentConfig::default(), 50_000, 1e-6);
        let plain_cfg = DescentConfig {
            unconditioned: true,
            ..DescentConfig::default()
        };
        let (plain, _) = run(&w, vec![1.0, 1.0], &plain_cfg, 50_000, 1e-6);
        assert!(10 * cond <= plain, "conditioned {cond}, plain {plain}");
    }

    #[test]
    fn accepted_energies_never_increase() {
        let config = DescentConfig::default();
        let w = [1.0, 30.0, 0.2];
        let mut trace = Vec::new();
        let s = minimize(quad(&w), vec![1.0, -2.0, 0.5], &[1.0; 3], &[true; 3], &config, 300, "t", &mut trace).unwrap();
        assert!(s.history.windows(2).all(|p| p[1] < p[0]));
        assert_eq!(trace.len(), s.iterations + 1);
    }

    #[test]
    fn non_finite_gradient_names_the_parameter() {
        let config = DescentConfig::default();
        let mut f = |_: &[f64]| Ok(Evaluation::plain(1.0, vec![0.0, f64::NAN]));
        let first = f(&[0.0, 0.0]).unwrap();
        let mut s = Descent::new(vec![0.0, 0.0], first, &config);
        let err = s.step(&mut f, &[1.0, 1.0], &[true, true], &config).unwrap_err();
        assert!(err.to_string().contains("parameter 1"));
    }

    #[test]
    fn masked_parameters_do_not_move() {
        let config = DescentConfig::default();
        let mut trace = Vec::new();
        let s = minimize(
            quad(&[1.0, 1.0]),
            vec![1.0, 1.0],
            &[1.0; 2],
            &[true, false],
            &config,
            100,
            "t",
            &mut trace,
        )
        .unwrap();
        assert_eq!(s.x[1], 1.0);
        assert!(s.x[0].abs() < 0.01);
    }
}
