//! Joint training of extractor weights and kernel hyperparameters by
//! adaptive-moment gradient descent on the negative log marginal
//! likelihood, with best-iterate tracking so the returned state never has a
//! worse NLL than the input.

use crate::error::{NovError, Result};
use crate::gp::{nll, nll_with_grad, SurrogateState};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct TrainSchedule {
    pub iterations: usize,
    pub step_size: f64,
    /// Reserved for stochastic schedules; current descent is deterministic.
    pub seed: u64,
    /// Train only the three log-hyperparameters, keeping w fixed.
    pub freeze_extractor: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self { iterations: 200, step_size: 0.01, seed: 0, freeze_extractor: false }
    }
}

fn pack(state: &SurrogateState) -> Vec<f64> {
    let mut p = state.extractor.weights.clone();
    p.push(state.kernel.log_outputscale);
    p.push(state.kernel.log_lengthscale);
    p.push(state.kernel.log_noise);
    p
}

fn unpack(state: &mut SurrogateState, params: &[f64]) {
    let nw = state.extractor.weights.len();
    state.extractor.weights.copy_from_slice(&params[..nw]);
    state.kernel.log_outputscale = params[nw];
    state.kernel.log_lengthscale = params[nw + 1];
    state.kernel.log_noise = params[nw + 2];
    state.cache = None;
}

/// Descend on the NLL for the scheduled iterations and return the best
/// iterate seen (including the input), with the factorization cache built.
pub fn train(state: SurrogateState, schedule: &TrainSchedule) -> Result<SurrogateState> {
    if state.len() < 2 {
        return Err(NovError::Contract(format!(
            "training needs at least 2 points, have {}",
            state.len()
        )));
    }
    if schedule.iterations == 0 {
        return Ok(state);
    }

    let mut current = state;
    let mut params = pack(&current);
    let nw = current.extractor.weights.len();
    let dim = params.len();
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];

    let mut best_params = params.clone();
    let mut best_nll = f64::INFINITY;

    for it in 1..=schedule.iterations {
        let (f, grad) = nll_with_grad(&current)?;
        if f < best_nll {
            best_nll = f;
            best_params.copy_from_slice(&params);
        }
        let mut g = if schedule.freeze_extractor { vec![0.0; nw] } else { grad.weights };
        g.push(grad.log_outputscale);
        g.push(grad.log_lengthscale);
        g.push(grad.log_noise);

        let bc1 = 1.0 - BETA1.powi(it as i32);
        let bc2 = 1.0 - BETA2.powi(it as i32);
        for i in 0..dim {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            params[i] -= schedule.step_size * mhat / (vhat.sqrt() + ADAM_EPS);
        }
        unpack(&mut current, &params);
    }

    // The final post-update iterate is a candidate too.
    let f_last = nll(&current)?;
    if f_last < best_nll {
        best_params.copy_from_slice(&params);
    }

    unpack(&mut current, &best_params);
    current.prepare()
}
