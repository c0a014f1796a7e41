//! Echo state network: a fixed random reservoir driven by world states.
//!
//! The driven update is `x(n+1) = tanh(W_res x(n) + W_in p(n+1) + b)`.
//! Row `n` of a [`StateSeries`] holds `x(n+1)`, the response to input row `n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::ingest::{GameTrace, POSITION_DIM};
use crate::linalg::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub n_inputs: usize,
    pub n_reservoir: usize,
    pub n_outputs: usize,
    pub spectral_radius_target: f64,
    pub input_scale: f64,
    pub bias_scale: f64,
    pub connectivity: f64,
    pub seed: u64,
}

impl Default for ReservoirConfig {
    fn default() -> Self {
        Self::with_size(POSITION_DIM, 600, POSITION_DIM)
    }
}

impl ReservoirConfig {
    /// Default scaling for the given dimensions; about ten recurrent
    /// connections per neuron.
    pub fn with_size(n_inputs: usize, n_reservoir: usize, n_outputs: usize) -> Self {
        Self {
            n_inputs,
            n_reservoir,
            n_outputs,
            spectral_radius_target: 0.95,
            input_scale: 1.0,
            bias_scale: 0.4,
            connectivity: (10.0 / n_reservoir.max(1) as f64).min(1.0),
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.n_inputs >= 1 && self.n_reservoir >= 1 && self.n_outputs >= 1,
            Validation,
            "reservoir dimensions must be at least 1"
        );
        ensure!(
            self.spectral_radius_target > 0.0 && self.spectral_radius_target <= 1.25,
            Validation,
            "spectral radius target {} outside (0, 1.25]",
            self.spectral_radius_target
        );
        ensure!(
            self.connectivity > 0.0 && self.connectivity <= 1.0,
            Validation,
            "connectivity {} outside (0, 1]",
            self.connectivity
        );
        ensure!(
            self.input_scale > 0.0 && self.input_scale.is_finite(),
            Validation,
            "input_scale must be positive"
        );
        ensure!(
            self.bias_scale > 0.0 && self.bias_scale.is_finite(),
            Validation,
            "bias_scale must be positive"
        );
        Ok(())
    }
}

/// Fixed random reservoir weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub config: ReservoirConfig,
    pub w_in: Matrix,
    pub w_res: Matrix,
    pub bias: Vec<f64>,
}

/// Reservoir states aligned to trace cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSeries {
    states: Matrix,
    cycles: Vec<i64>,
    washout: usize,
}

/// A driven run together with the pre-activation drive of every step.
#[derive(Debug, Clone)]
pub struct DrivenRun {
    pub series: StateSeries,
    /// Row `n` is `W_res x(n) + W_in p(n+1)`, the bias-free drive that
    /// produced series row `n`.
    pub drive_terms: Matrix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Readout {
    pub weights: Matrix,
    pub nrmse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoadedReservoir {
    /// `W̃`, reproducing the drive from the previous state alone.
    pub weights: Matrix,
    /// NRMSE of `W̃ x(n)` against the recorded drive.
    pub nrmse: f64,
}

/// Uniform random state in `(-1, 1)^n`.
pub fn random_state(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Pooled NRMSE: RMS error over all entries divided by the RMS deviation of
/// the target from its per-column mean. 1.0 matches the mean predictor.
pub fn nrmse(prediction: &Matrix, target: &Matrix) -> Result<f64> {
    ensure!(
        prediction.shape() == target.shape(),
        Dimension,
        "prediction {:?} vs target {:?}",
        prediction.shape(),
        target.shape()
    );
    ensure!(target.rows() >= 1, Validation, "nrmse of an empty target");
    let (l, m) = target.shape();
    let mut mean = vec![0.0; m];
    for row in target.row_iter() {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= l as f64);
    let mut err = 0.0;
    let mut var = 0.0;
    for (p, t) in prediction.row_iter().zip(target.row_iter()) {
        for j in 0..m {
            err += (p[j] - t[j]).powi(2);
            var += (t[j] - mean[j]).powi(2);
        }
    }
    Ok(match (err == 0.0, var == 0.0) {
        (true, _) => 0.0,
        (false, true) => f64::INFINITY,
        (false, false) => (err / var).sqrt(),
    })
}

/// Compressed rows of the recurrent matrix; most entries are zero.
struct SparseRows {
    starts: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn from_dense(m: &Matrix) -> Self {
        let mut starts = Vec::with_capacity(m.rows() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        starts.push(0);
        for row in m.row_iter() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    cols.push(j);
                    vals.push(*v);
                }
            }
            starts.push(cols.len());
        }
        Self { starts, cols, vals }
    }

    #[inline]
    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (a, b) = (self.starts[i], self.starts[i + 1]);
        self.cols[a..b]
            .iter()
            .zip(&self.vals[a..b])
            .map(|(&j, v)| v * x[j])
            .sum()
    }
}

impl Reservoir {
    /// Draws `W_in`, then `W_res`, then `b` from a ChaCha8 stream seeded by
    /// `config.seed`, and rescales `W_res` to the target spectral radius.
    pub fn init(config: ReservoirConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_reservoir;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let s = config.input_scale;
        let w_in = Matrix::from_fn(n, config.n_inputs, |_, _| rng.random_range(-s..s));
        let mut w_res = Matrix::from_fn(n, n, |_, _| {
            if rng.random::<f64>() < config.connectivity {
                rng.random_range(-1.0..1.0)
            } else {
                0.0
            }
        });
        let b = config.bias_scale;
        let bias = (0..n).map(|_| rng.random_range(-b..b)).collect();

        let raw = linalg::spectral_radius(&w_res)?;
        if raw <= f64::EPSILON {
            return Err(Error::Numerical(format!(
                "random recurrent matrix has spectral radius {raw:e}; choose another seed or a higher connectivity"
            )));
        }
        w_res.scale(config.spectral_radius_target / raw);
        Ok(Self {
            config,
            w_in,
            w_res,
            bias,
        })
    }

    /// Assembles a reservoir from explicit weights without rescaling.
    pub fn from_parts(
        config: ReservoirConfig,
        w_in: Matrix,
        w_res: Matrix,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let n = config.n_reservoir;
        ensure!(
            w_in.shape() == (n, config.n_inputs),
            Dimension,
            "W_in is {:?}, expected {n}x{}",
            w_in.shape(),
            config.n_inputs
        );
        ensure!(w_res.shape() == (n, n), Dimension, "W_res must be {n}x{n}");
        ensure!(bias.len() == n, Dimension, "bias has {} entries, expected {n}", bias.len());
        Ok(Self {
            config,
            w_in,
            w_res,
            bias,
        })
    }

    pub fn size(&self) -> usize {
        self.config.n_reservoir
    }

    /// Drives the reservoir with the rows of `inputs` starting from `x0`.
    pub fn drive(&self, inputs: &Matrix, x0: &[f64]) -> Result<StateSeries> {
        Ok(self.drive_full(inputs, None, x0)?.series)
    }

    pub fn drive_trace(&self, trace: &GameTrace, x0: &[f64]) -> Result<DrivenRun> {
        let cycles = trace.cycles();
        self.drive_full(&trace.to_matrix(), Some(&cycles), x0)
    }

    /// Drives the reservoir and also records the bias-free pre-activations.
    /// Cycles default to `0..L`.
    pub fn drive_full(
        &self,
        inputs: &Matrix,
        cycles: Option<&[i64]>,
        x0: &[f64],
    ) -> Result<DrivenRun> {
        let n = self.size();
        ensure!(inputs.rows() >= 1, Validation, "cannot drive with an empty input");
        ensure!(
            inputs.cols() == self.config.n_inputs,
            Dimension,
            "inputs have {} channels, reservoir expects {}",
            inputs.cols(),
            self.config.n_inputs
        );
        ensure!(x0.len() == n, Dimension, "x0 has {} entries, expected {n}", x0.len());
        ensure!(
            inputs.is_finite() && x0.iter().all(|v| v.is_finite()),
            Validation,
            "driving input is not finite"
        );
        let cycles = match cycles {
            Some(c) => {
                ensure!(
                    c.len() == inputs.rows(),
                    Dimension,
                    "{} cycles for {} input rows",
                    c.len(),
                    inputs.rows()
                );
                c.to_vec()
            }
            None => (0..inputs.rows() as i64).collect(),
        };

        let sparse = SparseRows::from_dense(&self.w_res);
        let steps = inputs.rows();
        let mut states = Matrix::zeros(steps, n);
        let mut terms = Matrix::zeros(steps, n);
        let mut x = x0.to_vec();
        for (t, p) in inputs.row_iter().enumerate() {
            let term = terms.row_mut(t);
            for (i, slot) in term.iter_mut().enumerate() {
                *slot = sparse.row_dot(i, &x) + linalg::dot(self.w_in.row(i), p);
            }
            let next = states.row_mut(t);
            for i in 0..n {
                next[i] = (term[i] + self.bias[i]).tanh();
            }
            x.copy_from_slice(next);
        }
        Ok(DrivenRun {
            series: StateSeries {
                states,
                cycles,
                washout: 0,
            },
            drive_terms: terms,
        })
    }
}

impl StateSeries {
    pub fn new(states: Matrix, cycles: Vec<i64>, washout: usize) -> Result<Self> {
        ensure!(
            states.rows() == cycles.len(),
            Dimension,
            "{} states for {} cycles",
            states.rows(),
            cycles.len()
        );
        Ok(Self {
            states,
            cycles,
            washout,
        })
    }

    pub fn states(&self) -> &Matrix {
        &self.states
    }

    pub fn into_states(self) -> Matrix {
        self.states
    }

    pub fn cycles(&self) -> &[i64] {
        &self.cycles
    }

    pub fn first_cycle(&self) -> i64 {
        self.cycles[0]
    }

    pub fn washout(&self) -> usize {
        self.washout
    }

    pub fn len(&self) -> usize {
        self.states.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.states.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.states.row(i)
    }

    /// Row holding the state at `cycle`, if present.
    pub fn index_of_cycle(&self, cycle: i64) -> Option<usize> {
        self.cycles.binary_search(&cycle).ok()
    }

    /// Largest absolute state component.
    pub fn max_abs(&self) -> f64 {
        self.states.max_abs()
    }

    /// Drops the first `washout` rows.
    pub fn trim_washout(&self, washout: usize) -> Result<StateSeries> {
        ensure!(
            washout < self.len(),
            Validation,
            "washout {washout} leaves no states out of {}",
            self.len()
        );
        Ok(StateSeries {
            states: self.states.slice_rows(washout, self.len()),
            cycles: self.cycles[washout..].to_vec(),
            washout: self.washout + washout,
        })
    }

    pub fn select(&self, rows: &[usize]) -> StateSeries {
        StateSeries {
            states: self.states.select_rows(rows),
            cycles: rows.iter().map(|&i| self.cycles[i]).collect(),
            washout: self.washout,
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> StateSeries {
        StateSeries {
            states: self.states.slice_rows(start, end),
            cycles: self.cycles[start..end].to_vec(),
            washout: self.washout,
        }
    }
}

impl DrivenRun {
    /// Trims the same leading rows from the series and the drive terms.
    pub fn trim_washout(&self, washout: usize) -> Result<DrivenRun> {
        let series = self.series.trim_washout(washout)?;
        Ok(DrivenRun {
            series,
            drive_terms: self.drive_terms.slice_rows(washout, self.drive_terms.rows()),
        })
    }
}

/// Ridge readout `W_out` mapping state rows to the row-aligned targets.
pub fn train_readout(series: &StateSeries, targets: &Matrix, lambda: f64) -> Result<Readout> {
    ensure!(
        targets.rows() == series.len(),
        Dimension,
        "{} targets for {} states",
        targets.rows(),
        series.len()
    );
    let weights = linalg::ridge_solve(series.states(), targets, lambda)?;
    let fit = series.states().matmul(&weights.transpose())?;
    let nrmse = nrmse(&fit, targets)?;
    Ok(Readout { weights, nrmse })
}

/// Loads the drive into the recurrent weights: regresses row `n` of
/// `drive_terms` on state row `n-1`, so that `tanh(W̃ x(n) + b)` reproduces
/// `x(n+1)` without input.
pub fn load_reservoir(
    series: &StateSeries,
    drive_terms: &Matrix,
    lambda_w: f64,
) -> Result<LoadedReservoir> {
    ensure!(
        drive_terms.shape() == (series.len(), series.dim()),
        Dimension,
        "drive terms {:?} do not match states {:?}",
        drive_terms.shape(),
        series.states().shape()
    );
    ensure!(
        series.len() >= 2,
        Validation,
        "loading needs at least two consecutive states"
    );
    let l = series.len();
    let prev = series.states().slice_rows(0, l - 1);
    let target = drive_terms.slice_rows(1, l);
    let weights = linalg::ridge_solve(&prev, &target, lambda_w)?;
    let fit = prev.matmul(&weights.transpose())?;
    let nrmse = nrmse(&fit, &target)?;
    Ok(LoadedReservoir { weights, nrmse })
}

/// NRMSE of the input-free one-step prediction `tanh(W̃ x(n) + b)` against
/// `x(n+1)` over consecutive rows of `series`.
pub fn one_step_state_nrmse(loaded: &Matrix, bias: &[f64], series: &StateSeries) -> Result<f64> {
    ensure!(series.len() >= 2, Validation, "need at least two states");
    ensure!(
        loaded.shape() == (series.dim(), series.dim()) && bias.len() == series.dim(),
        Dimension,
        "loaded weights do not match the state dimension"
    );
    let l = series.len();
    let prev = series.states().slice_rows(0, l - 1);
    let mut pred = prev.matmul(&loaded.transpose())?;
    for i in 0..pred.rows() {
        for (v, b) in pred.row_mut(i).iter_mut().zip(bias) {
            *v = (*v + b).tanh();
        }
    }
    nrmse(&pred, &series.states().slice_rows(1, l))
}
