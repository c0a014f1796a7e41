//! Input-free runs of the loaded reservoir under a conceptor,
//! `x(n+1) = C tanh(W̃ x(n) + b)`, read out as world-state trajectories.

use crate::conceptor::Conceptor;
use crate::error::{ensure, Error, Result};
use crate::esn::StateSeries;
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone)]
pub struct ReplayRun {
    pub states: StateSeries,
    /// Readout per generated state, in normalized coordinates.
    pub outputs: Matrix,
    pub conceptor_source: String,
    pub x_init: Vec<f64>,
    /// Largest `|tanh(W̃ x + b)|` seen before the conceptor is applied;
    /// always below 1. The projected states themselves are bounded by
    /// `‖C‖∞`, which may slightly exceed 1 for saturated reservoirs.
    pub max_activation: f64,
}

/// Generates `steps` states from `x_init` without input.
pub fn autonomous_run(
    w_loaded: &Matrix,
    bias: &[f64],
    c: &Conceptor,
    x_init: &[f64],
    steps: usize,
) -> Result<StateSeries> {
    run(w_loaded, bias, c, x_init, steps).map(|(states, _)| states)
}

fn run(
    w_loaded: &Matrix,
    bias: &[f64],
    c: &Conceptor,
    x_init: &[f64],
    steps: usize,
) -> Result<(StateSeries, f64)> {
    let n = w_loaded.rows();
    ensure!(steps >= 1, Validation, "replay needs at least one step");
    ensure!(w_loaded.is_square(), Dimension, "loaded weights must be square");
    ensure!(
        bias.len() == n && x_init.len() == n && c.dim() == n,
        Dimension,
        "bias ({}), initial state ({}) and conceptor ({}) must match reservoir size {n}",
        bias.len(),
        x_init.len(),
        c.dim()
    );
    ensure!(
        x_init.iter().all(|v| v.is_finite()),
        Validation,
        "initial state is not finite"
    );

    // the thin eigenbasis is cheaper until the retained rank passes N/2
    let dense = (2 * c.rank() > n).then(|| c.matrix());
    let mut states = Matrix::zeros(steps, n);
    let mut x = x_init.to_vec();
    let mut pre = vec![0.0; n];
    let mut max_activation = 0.0f64;
    for step in 0..steps {
        linalg::matvec_into(w_loaded, &x, &mut pre);
        for (p, b) in pre.iter_mut().zip(bias) {
            *p = (*p + b).tanh();
            max_activation = max_activation.max(p.abs());
        }
        match &dense {
            Some(cm) => linalg::matvec_into(cm, &pre, &mut x),
            None => c.apply(&pre, &mut x),
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "autonomous run diverged at step {}",
                step + 1
            )));
        }
        states.row_mut(step).copy_from_slice(&x);
    }
    let series = StateSeries::new(states, (0..steps as i64).collect(), 0)?;
    Ok((series, max_activation))
}

/// Applies `W_out` to every state row; no clipping.
pub fn readout_trajectory(states: &StateSeries, w_out: &Matrix) -> Result<Matrix> {
    ensure!(
        w_out.cols() == states.dim(),
        Dimension,
        "readout expects {} state components, states have {}",
        w_out.cols(),
        states.dim()
    );
    states.states().matmul(&w_out.transpose())
}

/// Replays from `x_init` and reads out the trajectory.
pub fn replay_from(
    x_init: &[f64],
    c: &Conceptor,
    w_loaded: &Matrix,
    bias: &[f64],
    w_out: &Matrix,
    steps: usize,
) -> Result<ReplayRun> {
    let (states, max_activation) = run(w_loaded, bias, c, x_init, steps)?;
    let outputs = readout_trajectory(&states, w_out)?;
    Ok(ReplayRun {
        states,
        outputs,
        conceptor_source: c.source().to_string(),
        x_init: x_init.to_vec(),
        max_activation,
    })
}

/// Continues the game from the driven state at `at_cycle` for `horizon`
/// steps under `c`.
pub fn predict_continuation(
    series: &StateSeries,
    at_cycle: i64,
    c: &Conceptor,
    w_loaded: &Matrix,
    bias: &[f64],
    w_out: &Matrix,
    horizon: usize,
) -> Result<ReplayRun> {
    let row = series.index_of_cycle(at_cycle).ok_or_else(|| {
        Error::Validation(format!(
            "cycle {at_cycle} is not part of the state series ({}..={})",
            series.first_cycle(),
            series.cycles().last().copied().unwrap_or_default()
        ))
    })?;
    ensure!(horizon >= 1, Validation, "horizon must be at least 1");
    replay_from(series.row(row), c, w_loaded, bias, w_out, horizon)
}

/// Number of sign changes in a sequence, ignoring exact zeros.
pub fn sign_changes(values: impl IntoIterator<Item = f64>) -> usize {
    let mut last: Option<bool> = None;
    let mut changes = 0;
    for v in values {
        if v == 0.0 {
            continue;
        }
        let pos = v > 0.0;
        if last.is_some_and(|l| l != pos) {
            changes += 1;
        }
        last = Some(pos);
    }
    changes
}
