//! Independent reference computations, and one check per documented
//! worked example. Each check first confirms the reference value itself
//! (hand arithmetic, brute force or a second algorithm), then compares
//! the library against it.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resmoves::clustering::{self, ClusterModel};
use resmoves::conceptor::{self, Conceptor};
use resmoves::esn::{self, Reservoir, ReservoirConfig, StateSeries};
use resmoves::ingest::{self, FieldSpec, GameTrace, TraceMetadata, WorldState, POSITION_DIM};
use resmoves::linalg::{self, Matrix};
use resmoves::moves;
use resmoves::replay;
use resmoves::synthetic::{self, SyntheticConfig};

pub type Check = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}


pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// Standard normal by Box–Muller.
pub fn gauss(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

// ---- reference linear algebra ---------------------------------------------

pub fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
    })
}

/// Gauss–Jordan solve of `A X = B` with partial pivoting.
pub fn gauss_solve(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.rows();
    let m = b.cols();
    let mut aug: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = a.row(i).to_vec();
            row.extend_from_slice(b.row(i));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    for c in 0..n + m {
                        aug[r][c] -= f * aug[col][c];
                    }
                }
            }
        }
    }
    Matrix::from_fn(n, m, |i, j| aug[i][n + j])
}

/// Ridge weights (M×N) from the dense normal equations.
pub fn ridge_oracle(x: &Matrix, y: &Matrix, lambda: f64) -> Matrix {
    let xt = x.transpose();
    let mut g = naive_matmul(&xt, x);
    for i in 0..g.rows() {
        g.set(i, i, g.get(i, i) + lambda);
    }
    gauss_solve(&g, &naive_matmul(&xt, y)).transpose()
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
pub fn jacobi_eigenvalues(s: &Matrix) -> Vec<f64> {
    let n = s.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| s.row(i).to_vec()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - sn * akq;
                    a[k][q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - sn * aqk;
                    a[q][k] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Random orthogonal matrix by Gram–Schmidt on a random square.
pub fn random_orthogonal(r: &mut ChaCha8Rng, n: usize) -> Matrix {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| gauss(r)).collect();
        for u in &cols {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

/// Random PSD matrix `Q diag(s) Qᵀ` with its eigenvalues.
pub fn random_psd(r: &mut ChaCha8Rng, n: usize, rank: usize) -> (Matrix, Vec<f64>) {
    let q = random_orthogonal(r, n);
    let mut s: Vec<f64> = (0..n)
        .map(|i| if i < rank { r.random_range(0.05..3.0) } else { 0.0 })
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    let d = Matrix::from_diag(&s);
    let m = naive_matmul(&naive_matmul(&q, &d), &q.transpose());
    let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, j) + m.get(j, i)));
    (sym, s)
}

/// Spectrum-known matrix `Q B Qᵀ`, `B` block diagonal with real entries and
/// scaled 2×2 rotations; returns the matrix and its spectral radius.
pub fn known_spectrum_matrix(r: &mut ChaCha8Rng, n: usize) -> (Matrix, f64) {
    let mut b = Matrix::zeros(n, n);
    let mut rho: f64 = 0.0;
    let mut i = 0;
    while i < n {
        if i + 1 < n && r.random::<f64>() < 0.5 {
            let m: f64 = r.random_range(0.1..2.0);
            let th: f64 = r.random_range(0.1..3.0);
            b.set(i, i, m * th.cos());
            b.set(i, i + 1, -m * th.sin());
            b.set(i + 1, i, m * th.sin());
            b.set(i + 1, i + 1, m * th.cos());
            rho = rho.max(m);
            i += 2;
        } else {
            let v = r.random_range(-2.0..2.0);
            b.set(i, i, v);
            rho = rho.max(v.abs());
            i += 1;
        }
    }
    let q = random_orthogonal(r, n);
    (naive_matmul(&naive_matmul(&q, &b), &q.transpose()), rho)
}

/// `Σ_n x(n) x(n)ᵀ / L` by explicit summation.
pub fn naive_correlation(states: &Matrix) -> Matrix {
    let l = states.rows() as f64;
    Matrix::from_fn(states.cols(), states.cols(), |i, j| {
        states.row_iter().map(|x| x[i] * x[j]).sum::<f64>() / l
    })
}

pub fn nrmse_oracle(pred: &Matrix, target: &Matrix) -> f64 {
    let (l, m) = target.shape();
    let mut err = 0.0;
    let mut var = 0.0;
    for j in 0..m {
        let mean = (0..l).map(|i| target.get(i, j)).sum::<f64>() / l as f64;
        for i in 0..l {
            err += (pred.get(i, j) - target.get(i, j)).powi(2);
            var += (target.get(i, j) - mean).powi(2);
        }
    }
    (err / var).sqrt()
}

// ---- reference clustering -------------------------------------------------

/// Pairwise-counting adjusted Rand index.
pub fn ari_oracle(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut in_a, mut in_b) = (0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            both += (sa && sb) as u8 as f64;
            in_a += sa as u8 as f64;
            in_b += sb as u8 as f64;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let expected = in_a * in_b / pairs;
    let max = 0.5 * (in_a + in_b);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// Identical-spherical-variance BIC written out from its definition.
pub fn bic_oracle(points: &Matrix, labels: &[usize], k: usize) -> f64 {
    let (r, d) = points.shape();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.row_iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut sse = 0.0;
    for (p, &l) in points.row_iter().zip(labels) {
        for (t, v) in p.iter().enumerate() {
            sse += (v - sums[l][t] / counts[l] as f64).powi(2);
        }
    }
    let var = sse / (d as f64 * (r - k) as f64);
    let mut ll = 0.0;
    for &n in &counts {
        if n > 0 {
            let nf = n as f64;
            ll += nf * (nf / r as f64).ln()
                - nf * d as f64 / 2.0 * (2.0 * std::f64::consts::PI * var).ln()
                - (nf - 1.0) * d as f64 / 2.0;
        }
    }
    // Σ (n_j − 1) = R − K, matching the pooled-variance residual term
    ll - (k * (d + 1)) as f64 / 2.0 * (r as f64).ln()
}

/// Well-separated isotropic blobs; returns the points and true labels.
pub fn blobs(r: &mut ChaCha8Rng, k: usize, per: usize, dim: usize, spread: f64, sep: f64) -> (Matrix, Vec<usize>) {
    // centres on a scaled simplex-like layout: centre j at sep · e_j
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for j in 0..k {
        for _ in 0..per {
            let row: Vec<f64> = (0..dim)
                .map(|t| if t == j % dim { sep } else { 0.0 } * (1 + j / dim) as f64 + spread * gauss(r))
                .collect();
            rows.push(row);
            labels.push(j);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

// ---- shared fixtures ------------------------------------------------------

pub fn bundled_trace() -> GameTrace {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic_200.csv");
    ingest::read_csv(&path).expect("bundled trace present")
}

/// Driven, trained and loaded reservoir on the bundled trace with the
/// default configuration.
pub struct Fitted {
    pub reservoir: Reservoir,
    pub series: StateSeries,
    pub drive_terms: Matrix,
    /// Normalized inputs aligned with `series` rows.
    pub inputs: Matrix,
    pub w_out: Matrix,
    pub readout_nrmse: f64,
    pub w_loaded: Matrix,
}

pub fn fit_bundled() -> Fitted {
    let trace = ingest::normalize(&bundled_trace(), &FieldSpec::default()).unwrap();
    let reservoir = Reservoir::init(ReservoirConfig::default()).unwrap();
    let run = reservoir
        .drive_trace(&trace, &vec![0.0; 600])
        .unwrap()
        .trim_washout(100)
        .unwrap();
    let l = run.series.len();
    let inputs = trace.to_matrix().slice_rows(100, trace.len());
    let readout = esn::train_readout(&run.series.slice(0, l - 1), &inputs.slice_rows(1, l), 1e-4).unwrap();
    let loaded = esn::load_reservoir(&run.series, &run.drive_terms, 1e-4).unwrap();
    Fitted {
        reservoir,
        series: run.series,
        drive_terms: run.drive_terms,
        inputs,
        w_out: readout.weights,
        readout_nrmse: readout.nrmse,
        w_loaded: loaded.weights,
    }
}

// ---- checks ---------------------------------------------------------------

pub fn normalize_hand_value() -> Check {
    let oracle: f64 = 52.5 / (52.5 * 1.05);
    check!((oracle - 20.0 / 21.0).abs() < 1e-15, "hand value 20/21 vs {oracle}");
    let mut positions = [0.0; POSITION_DIM];
    positions[0] = 52.5;
    let trace = GameTrace::new(vec![WorldState { cycle: 0, positions }], TraceMetadata::default()).unwrap();
    let got = ingest::normalize(&trace, &FieldSpec::default()).unwrap().states()[0].positions[0];
    check!((got - oracle).abs() < 1e-15, "normalize gave {got}, oracle {oracle}");
    Ok(format!("52.5 → {got:.6}"))
}

pub fn denormalize_hand_value() -> Check {
    let oracle = 0.5 * 52.5 * 1.05;
    check!(oracle == 27.5625, "hand value 27.5625 vs {oracle}");
    let mut v = vec![0.0; POSITION_DIM];
    v[2] = 0.5;
    let got = ingest::denormalize(&v, &FieldSpec::default())[2];
    check!((got - oracle).abs() < 1e-12, "denormalize gave {got}");
    Ok(format!("0.5 → {got}"))
}

pub fn normalize_round_trip() -> Check {
    let mut r = rng(11);
    let spec = FieldSpec::default();
    let states: Vec<WorldState> = (0..100)
        .map(|c| {
            let mut positions = [0.0; POSITION_DIM];
            for (i, p) in positions.iter_mut().enumerate() {
                let bound = spec.scale(i) * 0.999;
                *p = r.random_range(-bound..bound);
            }
            WorldState { cycle: c, positions }
        })
        .collect();
    let trace = GameTrace::new(states, TraceMetadata::default()).unwrap();
    let norm = ingest::normalize(&trace, &spec).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in trace.states().iter().zip(norm.states()) {
        check!(b.positions.iter().all(|v| v.abs() < 1.0), "normalized value outside (-1,1)");
        let back = ingest::denormalize(&b.positions, &spec);
        for (x, y) in a.positions.iter().zip(&back) {
            worst = worst.max((x - y).abs());
        }
    }
    check!(worst < 1e-12, "round-trip error {worst:e}");
    Ok(format!("max error {worst:.1e}"))
}

pub fn matvec_hand_value() -> Check {
    let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
    let oracle = [1.0 * 1.0 + 2.0 * 1.0, 3.0 * 1.0 + 4.0 * 1.0];
    check!(oracle == [3.0, 7.0], "hand arithmetic");
    let got = linalg::matvec(&a, &[1.0, 1.0]).unwrap();
    check!(got == oracle, "matvec gave {got:?}");
    Ok("[3, 7]".into())
}

pub fn ridge_scalar_least_squares() -> Check {
    // w = Σxy / Σx²
    let oracle = (1.0 * 2.0 + 2.0 * 4.0) / (1.0 + 4.0);
    check!(oracle == 2.0, "hand value");
    let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
    let y = Matrix::from_rows(&[[2.0], [4.0]]).unwrap();
    let w = linalg::ridge_solve(&x, &y, 0.0).unwrap();
    check!((w.get(0, 0) - oracle).abs() < 1e-12, "ridge gave {}", w.get(0, 0));
    Ok("W = 2".into())
}

pub fn ridge_shrinkage_monotone() -> Check {
    let mut r = rng(5);
    let x = random_matrix(&mut r, 40, 8);
    let y = random_matrix(&mut r, 40, 3);
    let mut last = f64::INFINITY;
    for lambda in [1.0, 10.0, 100.0] {
        let oracle = ridge_oracle(&x, &y, lambda);
        let got = linalg::ridge_solve(&x, &y, lambda).unwrap();
        let diff = got.frobenius_distance(&oracle);
        check!(diff < 1e-8, "lambda {lambda}: differs from dense oracle by {diff:e}");
        let norm = oracle.frobenius_norm();
        check!(norm < last, "‖W‖ not decreasing at lambda {lambda}");
        last = norm;
    }
    Ok(format!("‖W‖ at λ=100: {last:.4}"))
}

pub fn sym_eig_reconstruction() -> Check {
    let mut r = rng(21);
    let a = random_matrix(&mut r, 10, 10);
    let s = Matrix::from_fn(10, 10, |i, j| a.get(i, j) + a.get(j, i));
    let eig = linalg::sym_eig(&s).unwrap();
    let err = eig.reconstruct().frobenius_distance(&s);
    check!(err < 1e-8, "reconstruction error {err:e}");
    let oracle = jacobi_eigenvalues(&s);
    for (a, b) in eig.values.iter().zip(&oracle) {
        check!((a - b).abs() < 1e-9, "eigenvalue {a} vs Jacobi {b}");
    }
    Ok(format!("reconstruction error {err:.1e}"))
}

pub fn spectral_radius_similarity() -> Check {
    let mut r = rng(33);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let (m, rho) = known_spectrum_matrix(&mut r, 50);
        let got = linalg::spectral_radius(&m).unwrap();
        worst = worst.max((got - rho).abs() / rho);
    }
    check!(worst < 1e-6, "relative error {worst:e}");
    Ok(format!("max relative error {worst:.1e}"))
}

pub fn scalar_drive() -> Check {
    let oracle = (0.5f64 * 0.0 + 1.0 * 1.0 + 0.0).tanh();
    check!((oracle - 0.761594).abs() < 1e-6, "tanh(1) = {oracle}");
    let config = ReservoirConfig::with_size(1, 1, 1);
    let res = Reservoir::from_parts(
        config,
        Matrix::from_rows(&[[1.0]]).unwrap(),
        Matrix::from_rows(&[[0.5]]).unwrap(),
        vec![0.0],
    )
    .unwrap();
    let s = res.drive(&Matrix::from_rows(&[[1.0]]).unwrap(), &[0.0]).unwrap();
    check!(s.row(0)[0] == oracle, "drive gave {}", s.row(0)[0]);
    Ok(format!("x(1) = {oracle:.6}"))
}

/// Largest post-washout gap between two drives from random initial states.
pub fn echo_state_gap(steps: usize, washout: usize) -> f64 {
    let trace = synthetic::generate(&SyntheticConfig::with_steps(steps));
    let inputs = ingest::normalize(&trace, &FieldSpec::default()).unwrap().to_matrix();
    let res = Reservoir::init(ReservoirConfig::default()).unwrap();
    let a = res.drive(&inputs, &esn::random_state(600, 1)).unwrap();
    let b = res.drive(&inputs, &esn::random_state(600, 2)).unwrap();
    let mut gap: f64 = 0.0;
    for t in washout..steps {
        for (u, v) in a.row(t).iter().zip(b.row(t)) {
            gap = gap.max((u - v).abs());
        }
    }
    gap
}

pub fn echo_state_convergence() -> Check {
    let gap = echo_state_gap(500, 200);
    check!(gap < 1e-6, "post-washout gap {gap:e}");
    Ok(format!("gap {gap:.1e}"))
}

pub fn readout_shrinkage() -> Check {
    let mut r = rng(8);
    let states = Matrix::from_fn(60, 20, |_, _| r.random_range(-0.9..0.9));
    let targets = random_matrix(&mut r, 60, 4);
    let series = StateSeries::new(states.clone(), (0..60).collect(), 0).unwrap();
    let strong = esn::train_readout(&series, &targets, 1e-2).unwrap().weights;
    let weak = esn::train_readout(&series, &targets, 1e-6).unwrap().weights;
    let (os, ow) = (ridge_oracle(&states, &targets, 1e-2), ridge_oracle(&states, &targets, 1e-6));
    check!(os.frobenius_norm() < ow.frobenius_norm(), "oracle norms not ordered");
    check!(strong.frobenius_distance(&os) < 1e-8 && weak.frobenius_distance(&ow) < 1e-6, "readout differs from oracle");
    check!(strong.frobenius_norm() < weak.frobenius_norm(), "no shrinkage");
    Ok(format!("‖W‖ {:.3} < {:.3}", strong.frobenius_norm(), weak.frobenius_norm()))
}

pub fn loading_quality() -> Check {
    let f = fit_bundled();
    let l = f.series.len();
    // manual tanh(W̃ x(n) + b) against x(n+1)
    let mut pred = Matrix::zeros(l - 1, 600);
    for n in 0..l - 1 {
        let z = linalg::matvec(&f.w_loaded, f.series.row(n)).unwrap();
        for (i, v) in z.iter().enumerate() {
            pred.set(n, i, (v + f.reservoir.bias[i]).tanh());
        }
    }
    let oracle = nrmse_oracle(&pred, &f.series.states().slice_rows(1, l));
    let got = esn::one_step_state_nrmse(&f.w_loaded, &f.reservoir.bias, &f.series).unwrap();
    check!((oracle - got).abs() < 1e-10, "library {got} vs oracle {oracle}");
    check!(oracle < 0.1, "input-free one-step NRMSE {oracle}");
    Ok(format!("one-step state NRMSE {oracle:.4}"))
}

pub fn loading_interpolates() -> Check {
    let mut r = rng(9);
    let (l, n) = (8, 20);
    let states = Matrix::from_fn(l, n, |_, _| r.random_range(-0.9..0.9));
    let drive = random_matrix(&mut r, l, n);
    let series = StateSeries::new(states.clone(), (0..l as i64).collect(), 0).unwrap();
    let w = esn::load_reservoir(&series, &drive, 0.0).unwrap().weights;
    let mut worst: f64 = 0.0;
    for t in 1..l {
        let pred = linalg::matvec(&w, states.row(t - 1)).unwrap();
        for (p, d) in pred.iter().zip(drive.row(t)) {
            worst = worst.max((p - d).abs());
        }
    }
    check!(worst < 1e-8, "residual {worst:e}");
    Ok(format!("residual {worst:.1e}"))
}

pub fn correlation_summation() -> Check {
    let mut r = rng(12);
    let x = random_matrix(&mut r, 100, 10);
    let series = StateSeries::new(x.clone(), (0..100).collect(), 0).unwrap();
    let got = conceptor::correlation(&series).unwrap();
    let diff = got.frobenius_distance(&naive_correlation(&x));
    check!(diff < 1e-12, "Frobenius difference {diff:e}");
    Ok(format!("difference {diff:.1e}"))
}

pub fn diagonal_conceptor_spectrum() -> Check {
    let oracle: Vec<f64> = [4.0, 1.0, 0.0].iter().map(|s| s / (s + 1.0)).collect();
    check!(oracle == [0.8, 0.5, 0.0], "scalar formula {oracle:?}");
    let c = conceptor::compute_conceptor(&Matrix::from_diag(&[4.0, 1.0, 0.0]), 1.0).unwrap();
    let got = c.spectrum();
    for (a, b) in got.iter().zip(&oracle) {
        check!((a - b).abs() < 1e-12, "spectrum {got:?}");
    }
    Ok(format!("{got:?}"))
}

pub fn rescale_scalar() -> Check {
    let oracle = 0.5 / (0.5 + 0.25 * 0.5);
    check!((oracle - 0.8f64).abs() < 1e-15, "hand value {oracle}");
    let c = Conceptor::from_parts("x", 1.0, 0, vec![0.5], Matrix::from_rows(&[[1.0]]).unwrap()).unwrap();
    let got = c.rescale_aperture(2.0).unwrap().eigenvalues()[0];
    check!((got - oracle).abs() < 1e-12, "rescale gave {got}");
    Ok(format!("{got}"))
}

pub fn rescale_dual_path() -> Check {
    let mut r = rng(14);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let (psd, _) = random_psd(&mut r, 12, 9);
        let alpha = r.random_range(0.3..4.0);
        let gamma = r.random_range(0.3..4.0);
        let via_rescale = conceptor::compute_conceptor(&psd, alpha).unwrap().rescale_aperture(gamma).unwrap();
        let direct = conceptor::compute_conceptor(&psd, alpha * gamma).unwrap();
        worst = worst.max(via_rescale.matrix().frobenius_distance(&direct.matrix()));
    }
    check!(worst < 1e-8, "paths differ by {worst:e}");
    Ok(format!("max difference {worst:.1e}"))
}

pub fn quota_eigen() -> Check {
    let mut r = rng(15);
    let (psd, _) = random_psd(&mut r, 15, 15);
    let oracle = jacobi_eigenvalues(&psd).iter().map(|s| s / (s + 1.0)).sum::<f64>() / 15.0;
    let got = conceptor::quota(&conceptor::compute_conceptor(&psd, 1.0).unwrap());
    check!((got - oracle).abs() < 1e-10, "quota {got} vs oracle {oracle}");
    Ok(format!("quota {got:.6}"))
}

/// All 2^(n-1) − 1 two-way partitions; returns the optimal SSE and labels.
pub fn brute_force_two_partition(points: &Matrix) -> (f64, Vec<usize>) {
    let n = points.rows();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 1u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
        let sse = bic_free_sse(points, &labels, 2);
        if sse < best.0 {
            best = (sse, labels);
        }
    }
    best
}

pub fn bic_free_sse(points: &Matrix, labels: &[usize], k: usize) -> f64 {
    let d = points.cols();
    let mut sse = 0.0;
    for j in 0..k {
        let members: Vec<&[f64]> = points.row_iter().zip(labels).filter(|(_, &l)| l == j).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        for t in 0..d {
            let mean = members.iter().map(|p| p[t]).sum::<f64>() / members.len() as f64;
            sse += members.iter().map(|p| (p[t] - mean).powi(2)).sum::<f64>();
        }
    }
    sse
}

pub fn kmeans_two_pairs() -> Check {
    let points = Matrix::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 10.0], [10.0, 11.0]]).unwrap();
    let (oracle_sse, oracle_labels) = brute_force_two_partition(&points);
    check!((oracle_sse - 1.0).abs() < 1e-12, "brute-force optimum {oracle_sse}");
    let m = clustering::kmeans(&points, 2, 3, 100).unwrap();
    check!((m.inertia - oracle_sse).abs() < 1e-12, "inertia {}", m.inertia);
    check!(ari_oracle(&m.labels, &oracle_labels) == 1.0, "labels {:?}", m.labels);
    let mut means: Vec<(f64, f64)> = m.centroids.row_iter().map(|r| (r[0], r[1])).collect();
    means.sort_by(|a, b| a.0.total_cmp(&b.0));
    check!(means == [(0.0, 0.5), (10.0, 10.5)], "means {means:?}");
    Ok("exact means (0, 0.5), (10, 10.5)".into())
}

pub fn kmeans_more_clusters_lower_inertia() -> Check {
    for seed in 0..10u64 {
        let mut r = rng(100 + seed);
        let points = random_matrix(&mut r, 200, 3);
        let i2 = clustering::kmeans(&points, 2, seed, 300).unwrap().inertia;
        let i3 = clustering::kmeans(&points, 3, seed, 300).unwrap().inertia;
        check!(i3 <= i2 * (1.0 + 1e-12), "seed {seed}: inertia k=3 {i3} > k=2 {i2}");
    }
    Ok("10 datasets".into())
}

fn model_with(points: &Matrix, labels: Vec<usize>, k: usize) -> ClusterModel {
    let d = points.cols();
    let mut c = Matrix::zeros(k, d);
    let mut n = vec![0usize; k];
    for (p, &l) in points.row_iter().zip(&labels) {
        n[l] += 1;
        c.row_mut(l).iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    for (j, &nj) in n.iter().enumerate() {
        c.row_mut(j).iter_mut().for_each(|a| *a /= nj as f64);
    }
    ClusterModel {
        k,
        centroids: c,
        labels,
        inertia: 0.0,
        bic: 0.0,
        inertia_history: Vec::new(),
    }
}

pub fn bic_two_blobs() -> Check {
    let mut r = rng(40);
    let (points, truth) = blobs(&mut r, 2, 100, 2, 0.5, 20.0);
    let one = clustering::bic_score(&model_with(&points, vec![0; 200], 1), &points).unwrap();
    let two = clustering::bic_score(&model_with(&points, truth.clone(), 2), &points).unwrap();
    let (o1, o2) = (bic_oracle(&points, &vec![0; 200], 1), bic_oracle(&points, &truth, 2));
    check!(o2 > o1, "oracle ordering {o2} vs {o1}");
    check!((one - o1).abs() < 1e-8 * o1.abs().max(1.0) && (two - o2).abs() < 1e-8 * o2.abs().max(1.0), "library BIC differs from oracle");
    Ok(format!("BIC(2) {two:.1} > BIC(1) {one:.1}"))
}

pub fn bic_single_blob() -> Check {
    let mut r = rng(41);
    let (points, _) = blobs(&mut r, 1, 1000, 2, 1.0, 0.0);
    let one = clustering::bic_score(&model_with(&points, vec![0; 1000], 1), &points).unwrap();
    let two_model = clustering::kmeans(&points, 2, 1, 300).unwrap();
    let two = clustering::bic_score(&two_model, &points).unwrap();
    let (o1, o2) = (bic_oracle(&points, &vec![0; 1000], 1), bic_oracle(&points, &two_model.labels, 2));
    check!(o1 > o2, "oracle ordering {o1} vs {o2}");
    check!((one - o1).abs() < 1e-8 * o1.abs() && (two - o2).abs() < 1e-8 * o2.abs(), "library BIC differs from oracle");
    Ok(format!("margin {:.2}", one - two))
}

pub fn bic_duplication_preserves_order() -> Check {
    let mut r = rng(42);
    let (points, truth) = blobs(&mut r, 2, 30, 3, 1.0, 6.0);
    let alt: Vec<usize> = (0..60).map(|i| i % 2).collect();
    let doubled = Matrix::from_rows(&points.row_iter().chain(points.row_iter()).collect::<Vec<_>>()).unwrap();
    let twice = |l: &[usize]| l.iter().chain(l).copied().collect::<Vec<_>>();
    let a = bic_oracle(&points, &truth, 2) > bic_oracle(&points, &alt, 2);
    let b = bic_oracle(&doubled, &twice(&truth), 2) > bic_oracle(&doubled, &twice(&alt), 2);
    check!(a == b, "oracle ordering flips on duplication");
    let la = clustering::bic_score(&model_with(&points, truth.clone(), 2), &points).unwrap()
        > clustering::bic_score(&model_with(&points, alt.clone(), 2), &points).unwrap();
    let lb = clustering::bic_score(&model_with(&doubled, twice(&truth), 2), &doubled).unwrap()
        > clustering::bic_score(&model_with(&doubled, twice(&alt), 2), &doubled).unwrap();
    check!(la == a && lb == b, "library ordering disagrees with oracle");
    Ok("ordering preserved".into())
}

pub fn xmeans_three_blobs() -> Check {
    let mut r = rng(43);
    let (points, truth) = blobs(&mut r, 3, 50, 2, 0.5, 10.0);
    let m = clustering::xmeans(&points, 10, 5, 7).unwrap();
    let ari = ari_oracle(&m.labels, &truth);
    check!((clustering::adjusted_rand_index(&m.labels, &truth) - ari).abs() < 1e-12, "ARI disagrees with pair counting");
    check!(m.k == 3, "k = {}", m.k);
    check!(ari > 0.9, "ARI {ari}");
    Ok(format!("k = 3, ARI {ari:.3}"))
}

pub fn rank_one_cluster_conceptor() -> Check {
    let alpha: f64 = 10.0;
    let oracle = 1.0 / (1.0 + alpha.powi(-2));
    let n = 6;
    let states = Matrix::from_fn(5, n, |_, j| if j == 0 { 1.0 } else { 0.0 });
    let series = StateSeries::new(states, (0..5).collect(), 0).unwrap();
    let cc = moves::cluster_conceptors(&series, &[0; 5], alpha, 5).unwrap();
    let spec = cc.conceptors[&0].spectrum();
    check!((spec[0] - oracle).abs() < 1e-12, "leading eigenvalue {}", spec[0]);
    check!(spec[1..].iter().all(|&s| s.abs() < 1e-12), "trailing eigenvalues {spec:?}");
    Ok(format!("{{{oracle:.6}, 0, …}}"))
}

pub fn orthogonal_cluster_conceptors() -> Check {
    let mut r = rng(44);
    let n = 10;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for t in 0..40 {
        let c = t % 2;
        let row: Vec<f64> = (0..n)
            .map(|j| if (j < 5) == (c == 0) { r.random_range(-0.9..0.9) } else { 0.0 })
            .collect();
        rows.push(row);
        labels.push(c);
    }
    let series = StateSeries::new(Matrix::from_rows(&rows).unwrap(), (0..40).collect(), 0).unwrap();
    let cc = moves::cluster_conceptors(&series, &labels, 10.0, 5).unwrap();
    let prod = naive_matmul(&cc.conceptors[&0].matrix(), &cc.conceptors[&1].matrix());
    let norm = prod.frobenius_norm();
    check!(norm < 1e-6, "‖C0 C1‖ = {norm:e}");
    Ok(format!("‖C0 C1‖ {norm:.1e}"))
}

pub fn driven_readout_matches_training() -> Check {
    let f = fit_bundled();
    let l = f.series.len();
    let driven = f.series.slice(0, l - 1);
    let out = replay::readout_trajectory(&driven, &f.w_out).unwrap();
    let oracle = nrmse_oracle(&out, &f.inputs.slice_rows(1, l));
    check!((oracle - f.readout_nrmse).abs() < 1e-10, "readout NRMSE {oracle} vs trained {}", f.readout_nrmse);
    Ok(format!("NRMSE {oracle:.4}"))
}

pub fn horizon_one_bounding_box() -> Check {
    let f = fit_bundled();
    let config = resmoves::PipelineConfig::default();
    let m = clustering::xmeans_with(f.series.states(), &config.xmeans_params()).unwrap();
    // tightest cluster with enough states for a conceptor
    let members = m.members();
    let cc = moves::cluster_conceptors(&f.series, &m.labels, 10.0, 5).unwrap();
    let (&cluster, c) = cc
        .conceptors
        .iter()
        .min_by(|a, b| {
            let spread = |j: usize| bic_free_sse(&f.series.states().select_rows(&members[j]), &vec![0; members[j].len()], 1) / members[j].len() as f64;
            spread(*a.0).total_cmp(&spread(*b.0))
        })
        .ok_or("no cluster has a conceptor")?;
    let rows = &members[cluster];
    let outputs = replay::readout_trajectory(&f.series.select(rows), &f.w_out).unwrap();
    // interior members: the state one step later still belongs to the cluster
    let interior: Vec<usize> = rows.iter().copied().filter(|&r| m.labels.get(r + 1) == Some(&cluster)).collect();
    check!(!interior.is_empty(), "cluster {cluster} has no interior states");
    let mut checked = 0;
    for &row in &interior {
        let at = f.series.cycles()[row];
        let run = replay::predict_continuation(&f.series, at, c, &f.w_loaded, &f.reservoir.bias, &f.w_out, 1).unwrap();
        for j in 0..POSITION_DIM {
            let col: Vec<f64> = (0..outputs.rows()).map(|i| outputs.get(i, j)).collect();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            // box scaled by 1.2 about its centre, with a floor for flat coordinates
            let pad = 0.1 * (hi - lo).max(1e-3);
            let v = run.outputs.get(0, j);
            check!(v >= lo - pad && v <= hi + pad, "cluster {cluster}, cycle {at}, coordinate {j}: {v} outside [{lo}, {hi}] ± {pad}");
        }
        checked += 1;
    }
    Ok(format!("cluster {cluster}: {checked} interior starts inside the inflated box"))
}

/// Mean absolute readout error `h` steps into autonomous continuations.
pub fn continuation_error(f: &Fitted, c: &Conceptor, horizon: usize) -> Vec<f64> {
    let l = f.series.len();
    let mut err = vec![0.0; horizon];
    let starts: Vec<usize> = (0..l - horizon - 1).step_by(3).collect();
    for &i in &starts {
        let run = replay::predict_continuation(&f.series, f.series.cycles()[i], c, &f.w_loaded, &f.reservoir.bias, &f.w_out, horizon).unwrap();
        for (h, e) in err.iter_mut().enumerate() {
            // output step h predicts input row i + 2 + h
            let target = f.inputs.row(i + 2 + h);
            *e += run.outputs.row(h).iter().zip(target).map(|(a, b)| (a - b).abs()).sum::<f64>() / POSITION_DIM as f64;
        }
    }
    err.iter().map(|e| e / starts.len() as f64).collect()
}

pub fn error_grows_with_horizon() -> Check {
    let f = fit_bundled();
    let c = conceptor::conceptor_of_series(&f.series, 10.0, "whole game").unwrap();
    let err = continuation_error(&f, &c, 20);
    check!(err[19] >= err[0], "error at horizon 20 ({}) below horizon 1 ({})", err[19], err[0]);
    Ok(format!("mean error {:.4} at h=1, {:.4} at h=20", err[0], err[19]))
}

pub fn conceptor_json_fidelity() -> Check {
    let mut r = rng(45);
    let (psd, _) = random_psd(&mut r, 20, 14);
    let c = conceptor::compute_conceptor_from(&psd, 3.0, "cluster 1", 40).unwrap();
    let json = serde_json::to_string(&c).unwrap();
    let back: Conceptor = serde_json::from_str(&json).unwrap();
    let worst = c.eigenvalues().iter().zip(back.eigenvalues()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check!(worst < 1e-10, "eigenvalue drift {worst:e}");
    check!(back.matrix().frobenius_distance(&c.matrix()) < 1e-10, "matrix drift");
    Ok(format!("max drift {worst:.1e}"))
}

type CheckFn = fn() -> Check;

/// Every worked-example check, by name.
pub fn all() -> Vec<(&'static str, CheckFn)> {
    vec![
        ("normalize_hand_value", normalize_hand_value),
        ("normalize_round_trip", normalize_round_trip),
        ("denormalize_hand_value", denormalize_hand_value),
        ("matvec_hand_value", matvec_hand_value),
        ("ridge_scalar_least_squares", ridge_scalar_least_squares),
        ("ridge_shrinkage_monotone", ridge_shrinkage_monotone),
        ("sym_eig_reconstruction", sym_eig_reconstruction),
        ("spectral_radius_similarity", spectral_radius_similarity),
        ("scalar_drive", scalar_drive),
        ("echo_state_convergence", echo_state_convergence),
        ("readout_shrinkage", readout_shrinkage),
        ("loading_quality", loading_quality),
        ("loading_interpolates", loading_interpolates),
        ("correlation_summation", correlation_summation),
        ("diagonal_conceptor_spectrum", diagonal_conceptor_spectrum),
        ("rescale_scalar", rescale_scalar),
        ("rescale_dual_path", rescale_dual_path),
        ("quota_eigen", quota_eigen),
        ("kmeans_two_pairs", kmeans_two_pairs),
        ("kmeans_more_clusters_lower_inertia", kmeans_more_clusters_lower_inertia),
        ("bic_two_blobs", bic_two_blobs),
        ("bic_single_blob", bic_single_blob),
        ("bic_duplication_preserves_order", bic_duplication_preserves_order),
        ("xmeans_three_blobs", xmeans_three_blobs),
        ("rank_one_cluster_conceptor", rank_one_cluster_conceptor),
        ("orthogonal_cluster_conceptors", orthogonal_cluster_conceptors),
        ("driven_readout_matches_training", driven_readout_matches_training),
        ("horizon_one_bounding_box", horizon_one_bounding_box),
        ("error_grows_with_horizon", error_grows_with_horizon),
        ("conceptor_json_fidelity", conceptor_json_fidelity),
    ]
}
