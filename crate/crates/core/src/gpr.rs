//! Exact Gaussian process regression with an additive year/month kernel.
//!
//! Features are `[year, month]` coordinates. The covariance is
//! `σf²·(β²·y_u·y_v + (m_u·m_v + α²)²)`: a homogeneous linear kernel on the
//! year axis plus a second-order polynomial kernel on the month axis. The
//! prior mean is zero, so responses are expected to be centred by the caller.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{bfgs, BfgsOptions};

/// A `[year, month]` feature pair.
pub type Feature = [f64; 2];

pub const MIN_NOISE: f64 = 1e-12;
const LOG_LOWER: f64 = -27.631_021_115_928_547; // ln 1e-12
const LOG_UPPER: f64 = 18.420_680_743_952_367; // ln 1e8

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma_f2: f64,
    pub beta2: f64,
    pub alpha2: f64,
}

impl KernelParams {
    pub fn new(sigma_f2: f64, beta2: f64, alpha2: f64) -> Result<Self> {
        for (name, v) in [("sigma_f2", sigma_f2), ("beta2", beta2), ("alpha2", alpha2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            sigma_f2,
            beta2,
            alpha2,
        })
    }

    /// All three hyperparameters set to `v`.
    pub fn uniform(v: f64) -> Self {
        Self {
            sigma_f2: v,
            beta2: v,
            alpha2: v,
        }
    }

    fn to_log(self) -> [f64; 3] {
        [self.sigma_f2.ln(), self.beta2.ln(), self.alpha2.ln()]
    }

    fn from_log(l: &[f64]) -> Self {
        Self {
            sigma_f2: l[0].exp(),
            beta2: l[1].exp(),
            alpha2: l[2].exp(),
        }
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

/// Observation-noise variance σε².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParam(f64);

impl NoiseParam {
    pub fn new(sigma_eps2: f64) -> Result<Self> {
        if !(sigma_eps2.is_finite() && sigma_eps2 >= MIN_NOISE) {
            return Err(Error::InvalidConfig(format!(
                "noise variance must be >= {MIN_NOISE:e}, got {sigma_eps2}"
            )));
        }
        Ok(Self(sigma_eps2))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn kernel_eval(u: &Feature, v: &Feature, p: &KernelParams) -> f64 {
    let poly = u[1] * v[1] + p.alpha2;
    p.sigma_f2 * (p.beta2 * (u[0] * v[0]) + poly * poly)
}

/// Noise-free kernel matrix K(X).
pub fn kernel_matrix(x: &[Feature], p: &KernelParams) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_eval(&x[i], &x[j], p);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// C_N = K(X) + σε²·I.
pub fn gram(x: &[Feature], p: &KernelParams, noise: NoiseParam) -> DMatrix<f64> {
    let mut c = kernel_matrix(x, p);
    for i in 0..x.len() {
        c[(i, i)] += noise.value();
    }
    c
}

/// Cholesky factorization with escalating diagonal jitter: 1e-8 of the
/// mean diagonal, ×10 per retry, up to 1e-2 of the mean diagonal.
/// Returns the factor and the jitter that was added (0 when none).
pub fn cholesky_with_jitter(c: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(ch) = Cholesky::new(c.clone()) {
        return Ok((ch, 0.0));
    }
    let n = c.nrows().max(1);
    let mean_diag = (c.diagonal().sum() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut rel = 1e-8;
    let mut jitter = rel * mean_diag;
    while rel <= 1e-2 * (1.0 + 1e-9) {
        jitter = rel * mean_diag;
        let mut cj = c.clone();
        for i in 0..c.nrows() {
            cj[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(cj) {
            return Ok((ch, jitter));
        }
        rel *= 10.0;
    }
    Err(Error::NotPositiveDefinite { jitter })
}

/// Log marginal likelihood `−½·yᵀC⁻¹y − ½·log|C| − (N/2)·log 2π` and its
/// gradient with respect to `[ln σf², ln β², ln α², ln σε²]`.
pub fn log_marginal_likelihood(
    x: &[Feature],
    y: &[f64],
    p: &KernelParams,
    noise: NoiseParam,
) -> Result<(f64, [f64; 4])> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let c = gram(x, p, noise);
    let (ch, _) = cholesky_with_jitter(&c)?;
    Ok(lml_from_factor(x, y, p, noise, &ch))
}

fn lml_from_factor(
    x: &[Feature],
    y: &[f64],
    p: &KernelParams,
    noise: NoiseParam,
    ch: &Cholesky<f64, Dyn>,
) -> (f64, [f64; 4]) {
    let n = x.len();
    let yv = DVector::from_column_slice(y);
    let b = ch.solve(&yv);
    let log_det: f64 = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let value =
        -0.5 * yv.dot(&b) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // ½·tr((b·bᵀ − C⁻¹)·∂C) for each log-parameter.
    let c_inv = ch.inverse();
    let mut grad = [0.0; 4];
    for i in 0..n {
        for j in 0..n {
            let w = b[i] * b[j] - c_inv[(i, j)];
            let yy = x[i][0] * x[j][0];
            let poly = x[i][1] * x[j][1] + p.alpha2;
            let k = p.sigma_f2 * (p.beta2 * yy + poly * poly);
            grad[0] += w * k;
            grad[1] += w * p.sigma_f2 * p.beta2 * yy;
            grad[2] += w * p.sigma_f2 * 2.0 * poly * p.alpha2;
        }
        grad[3] += (b[i] * b[i] - c_inv[(i, i)]) * noise.value();
    }
    for g in grad.iter_mut() {
        *g *= 0.5;
    }
    (value, grad)
}

/// Hyperparameter search settings for [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    pub init: KernelParams,
    pub init_noise: f64,
    /// Pin σε² instead of optimizing it.
    pub fixed_noise: Option<f64>,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            init: KernelParams::default(),
            init_noise: 1.0,
            fixed_noise: None,
            max_iter: 200,
            grad_tol: 1e-8,
        }
    }
}

/// A conditioned GP: training data, hyperparameters, the Cholesky factor of
/// C_N and the weights `b = C_N⁻¹·y`.
#[derive(Debug, Clone)]
pub struct GprModel {
    pub x: Vec<Feature>,
    pub y: Vec<f64>,
    pub params: KernelParams,
    pub noise: NoiseParam,
    /// Lower-triangular factor L with L·Lᵀ = C_N (+ jitter).
    pub chol: DMatrix<f64>,
    pub weights: DVector<f64>,
    pub log_ml: f64,
    pub jitter: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl GprModel {
    /// Conditions on the data at fixed hyperparameters.
    pub fn condition(
        x: &[Feature],
        y: &[f64],
        params: KernelParams,
        noise: NoiseParam,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::InsufficientData { found: 0, needed: 1 });
        }
        let c = gram(x, &params, noise);
        let (ch, jitter) = cholesky_with_jitter(&c)?;
        let (log_ml, _) = lml_from_factor(x, y, &params, noise, &ch);
        let weights = ch.solve(&DVector::from_column_slice(y));
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            params,
            noise,
            chol: ch.l(),
            weights,
            log_ml,
            jitter,
            iterations: 0,
            converged: true,
        })
    }

    /// Posterior predictive mean and variance at `xq`.
    pub fn predict(&self, xq: &Feature) -> (f64, f64) {
        let kq = DVector::from_iterator(
            self.x.len(),
            self.x.iter().map(|xi| kernel_eval(xi, xq, &self.params)),
        );
        let mean = kq.dot(&self.weights);
        let v = self
            .chol
            .solve_lower_triangular(&kq)
            .expect("Cholesky factor has a positive diagonal");
        let var = self.noise.value() + kernel_eval(xq, xq, &self.params) - v.dot(&v);
        (mean, var.max(0.0))
    }
}

/// Maximizes the log marginal likelihood over the log-hyperparameters with
/// BFGS and analytic gradients, then conditions on the data.
pub fn fit(x: &[Feature], y: &[f64], opts: &FitOptions) -> Result<GprModel> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData {
            found: x.len(),
            needed: 3,
        });
    }
    let fixed = match opts.fixed_noise {
        Some(v) => Some(NoiseParam::new(v)?),
        None => None,
    };
    let bopts = BfgsOptions {
        max_iter: opts.max_iter,
        grad_tol: opts.grad_tol,
        lower: LOG_LOWER,
        upper: LOG_UPPER,
    };
    let objective = |theta: &[f64]| -> Option<(f64, Vec<f64>)> {
        let p = KernelParams::from_log(theta);
        let noise = match fixed {
            Some(n) => n,
            None => NoiseParam(theta[3].exp().max(MIN_NOISE)),
        };
        let (v, g) = log_marginal_likelihood(x, y, &p, noise).ok()?;
        let dim = if fixed.is_some() { 3 } else { 4 };
        Some((-v, g[..dim].iter().map(|c| -c).collect()))
    };

    // Fall back to the edges of the documented init range when the primary
    // start cannot be factorized.
    let starts = [opts.init, KernelParams::uniform(0.2), KernelParams::uniform(5.0)];
    let mut last_err = Error::NotPositiveDefinite { jitter: 0.0 };
    for init in starts {
        let mut theta0 = init.to_log().to_vec();
        if fixed.is_none() {
            theta0.push(opts.init_noise.max(MIN_NOISE).ln());
        }
        if objective(&theta0).is_none() {
            last_err = Error::NotPositiveDefinite { jitter: f64::NAN };
            continue;
        }
        let m = bfgs(objective, &theta0, &bopts);
        let params = KernelParams::from_log(&m.x);
        let noise = fixed.unwrap_or_else(|| NoiseParam(m.x[3].exp().max(MIN_NOISE)));
        match GprModel::condition(x, y, params, noise) {
            Ok(mut model) => {
                model.iterations = m.iterations;
                model.converged = m.converged;
                return Ok(model);
            }
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}
