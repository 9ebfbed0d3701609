//! Reconstruction of summer demand from delayed meter readings.
//!
//! Each calendar month's readings across years are modelled as a linear
//! trend in the year plus a short-term residual that is correlated between
//! consecutive months. Corrupted summer cells are re-estimated by maximizing
//! trend fidelity and lag-1 residual correlation while preserving each
//! year's summer total and keeping every cell nonnegative.
//!
//! The solver projects onto the per-year scaled simplex (exact equality and
//! nonnegativity), takes Barzilai–Borwein scaled projected-gradient steps
//! with central-difference gradients and accepts only Armijo-decreasing
//! steps, so the objective trace is monotone.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::LAST_SUMMER_MONTH;
use crate::timegrid::MonthlySeries;

/// Projection onto the linear-in-year trend space for years `1..=n_years`.
pub fn hat_matrix(n_years: usize) -> Result<DMatrix<f64>> {
    let years: Vec<f64> = (1..=n_years).map(|y| y as f64).collect();
    hat_matrix_for_years(&years)
}

/// `Φ(ΦᵀΦ)⁻¹Φᵀ` for the design with columns `(1, year)`, evaluated in the
/// centred form `1/n + c_i·c_j/Σc²` so that shifting every year by a
/// constant yields the identical matrix.
pub fn hat_matrix_for_years(years: &[f64]) -> Result<DMatrix<f64>> {
    let n = years.len();
    if n < 3 {
        return Err(Error::DegenerateDesign(n));
    }
    let mean = years.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = years.iter().map(|y| y - mean).collect();
    let ss: f64 = c.iter().map(|v| v * v).sum();
    if ss <= 0.0 {
        return Err(Error::DegenerateDesign(n));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| 1.0 / n as f64 + c[i] * c[j] / ss))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub intercept: f64,
    /// msm³ per year
    pub slope: f64,
}

impl TrendFit {
    /// Least-squares line through `(year, value)` for years `1..=n`.
    pub fn fit(column: &[f64]) -> Result<Self> {
        let n = column.len();
        if n < 3 {
            return Err(Error::DegenerateDesign(n));
        }
        let ybar = (n as f64 + 1.0) / 2.0;
        let vbar = column.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, v) in column.iter().enumerate() {
            let dy = (i + 1) as f64 - ybar;
            sxy += dy * (v - vbar);
            sxx += dy * dy;
        }
        let slope = sxy / sxx;
        Ok(Self {
            intercept: vbar - slope * ybar,
            slope,
        })
    }

    pub fn fitted(&self, n_years: usize) -> Vec<f64> {
        (1..=n_years)
            .map(|y| self.intercept + self.slope * y as f64)
            .collect()
    }
}

/// One correction instance: a years × months demand matrix whose leading
/// `n_corrupt_years` rows hold unreliable readings in months `m0..=9`.
#[derive(Debug, Clone)]
pub struct CorrectionProblem {
    demand: Vec<[f64; 12]>,
    m0: u32,
    n_corrupt_years: usize,
    /// Fixed variance threshold below which a correlation term counts as 0.
    /// `None` uses `1e-12·mean² + 1e-12` of each vector.
    pub corr_guard_eps: Option<f64>,
    hat: DMatrix<f64>,
}

impl CorrectionProblem {
    pub fn new(demand: Vec<[f64; 12]>, m0: u32, n_corrupt_years: usize) -> Result<Self> {
        if !(2..=LAST_SUMMER_MONTH).contains(&m0) {
            return Err(Error::InvalidConfig(format!(
                "first corrupted month must lie in 2..=9, got {m0}"
            )));
        }
        let n_years = demand.len();
        if n_corrupt_years == 0 {
            return Err(Error::InvalidConfig("no corrupted years".into()));
        }
        if n_years < n_corrupt_years + 2 || n_years < 3 {
            return Err(Error::InvalidConfig(format!(
                "{n_years} years cannot support {n_corrupt_years} corrupted years plus two clean ones"
            )));
        }
        for (y, row) in demand.iter().enumerate() {
            if let Some(m) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "demand at year {}, month {} is not finite",
                    y + 1,
                    m + 1
                )));
            }
        }
        let lo = m0 as usize - 1;
        let hi = LAST_SUMMER_MONTH as usize;
        for (y, row) in demand.iter().take(n_corrupt_years).enumerate() {
            let total: f64 = row[lo..hi].iter().sum();
            if total < 0.0 {
                return Err(Error::Infeasible(format!(
                    "summer total of year {} is negative ({total})",
                    y + 1
                )));
            }
        }
        for (y, row) in demand.iter().enumerate() {
            if let Some(m) = row.iter().position(|v| *v < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "negative demand at year {}, month {}",
                    y + 1,
                    m + 1
                )));
            }
        }
        let hat = hat_matrix(n_years)?;
        Ok(Self {
            demand,
            m0,
            n_corrupt_years,
            corr_guard_eps: None,
            hat,
        })
    }

    /// Builds the matrix from the full years of a January-anchored series.
    pub fn from_series(series: &MonthlySeries, m0: u32, n_corrupt_years: usize) -> Result<Self> {
        if series.start.month != 1 {
            return Err(Error::InvalidConfig(
                "correction needs a series starting in January".into(),
            ));
        }
        let demand = series
            .values
            .chunks_exact(12)
            .map(|c| {
                let mut row = [0.0; 12];
                row.copy_from_slice(c);
                row
            })
            .collect();
        Self::new(demand, m0, n_corrupt_years)
    }

    pub fn demand(&self) -> &[[f64; 12]] {
        &self.demand
    }

    pub fn m0(&self) -> u32 {
        self.m0
    }

    pub fn n_years(&self) -> usize {
        self.demand.len()
    }

    pub fn n_corrupt_years(&self) -> usize {
        self.n_corrupt_years
    }

    /// Number of corrected months per year.
    pub fn block_width(&self) -> usize {
        (LAST_SUMMER_MONTH - self.m0 + 1) as usize
    }

    pub fn n_variables(&self) -> usize {
        self.block_width() * self.n_corrupt_years
    }

    /// The raw corrupted cells, year-major.
    pub fn raw_block(&self) -> Vec<f64> {
        let lo = self.m0 as usize - 1;
        self.demand[..self.n_corrupt_years]
            .iter()
            .flat_map(|row| row[lo..lo + self.block_width()].iter().copied())
            .collect()
    }

    fn year_totals(&self) -> Vec<f64> {
        let w = self.block_width();
        self.raw_block().chunks(w).map(|c| c.iter().sum()).collect()
    }

    /// Column of month `m` (1-based) across all years with `block` substituted.
    fn column(&self, m: usize, block: &[f64]) -> DVector<f64> {
        let lo = self.m0 as usize;
        let hi = LAST_SUMMER_MONTH as usize;
        let w = self.block_width();
        DVector::from_fn(self.n_years(), |y, _| {
            if y < self.n_corrupt_years && (lo..=hi).contains(&m) {
                block[y * w + (m - lo)]
            } else {
                self.demand[y][m - 1]
            }
        })
    }

    /// Demand matrix with `block` written into the corrupted cells.
    pub fn with_block(&self, block: &[f64]) -> Vec<[f64; 12]> {
        let mut out = self.demand.clone();
        let lo = self.m0 as usize - 1;
        let w = self.block_width();
        for (y, row) in out.iter_mut().take(self.n_corrupt_years).enumerate() {
            row[lo..lo + w].copy_from_slice(&block[y * w..(y + 1) * w]);
        }
        out
    }

    fn guarded_corr(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.sum() / n, b.sum() / n);
        let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / n;
        let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / n;
        let (ea, eb) = match self.corr_guard_eps {
            Some(e) => (e, e),
            None => (1e-12 * ma * ma + 1e-12, 1e-12 * mb * mb + 1e-12),
        };
        if va < ea || vb < eb {
            return 0.0;
        }
        let cov = a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n;
        cov / (va.sqrt() * vb.sqrt())
    }
}

/// The negated sum of mean trend correlation over the corrected months and
/// mean absolute lag-1 residual correlation over the month pairs
/// `(m0−1, m0) … (9, 10)`.
pub fn correction_objective(block: &[f64], problem: &CorrectionProblem) -> Result<f64> {
    if block.len() != problem.n_variables() {
        return Err(Error::LengthMismatch {
            left: block.len(),
            right: problem.n_variables(),
        });
    }
    if let Some(i) = block.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidCandidate(i));
    }
    Ok(objective_unchecked(block, problem))
}

fn objective_unchecked(block: &[f64], problem: &CorrectionProblem) -> f64 {
    let m0 = problem.m0 as usize;
    let last = LAST_SUMMER_MONTH as usize;
    let mut residuals = Vec::with_capacity(last + 2 - m0);
    let mut trend_term = 0.0;
    for m in (m0 - 1)..=(last + 1) {
        let d = problem.column(m, block);
        let t = &problem.hat * &d;
        if (m0..=last).contains(&m) {
            trend_term += problem.guarded_corr(&d, &t);
        }
        residuals.push(d - t);
    }
    let resid_term: f64 = residuals
        .windows(2)
        .map(|w| problem.guarded_corr(&w[0], &w[1]).abs())
        .sum();
    -(trend_term / (last - m0 + 1) as f64 + resid_term / (last + 1 - m0 + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Every corrupted cell starts at this value (msm³).
    Constant(f64),
    /// Each cell starts at the mean of the clean years' readings of its month.
    CleanMonthMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectionOptions {
    pub init: InitStrategy,
    pub restarts: usize,
    /// Relative half-width of the seeded restart perturbations.
    pub perturbation: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            init: InitStrategy::Constant(10.0),
            restarts: 5,
            perturbation: 0.3,
            max_iter: 2000,
            tol: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrectionResult {
    pub corrected: Vec<[f64; 12]>,
    /// Final objective value.
    pub objective_value: f64,
    /// Objective after projection of the start and after every accepted step.
    pub objective_trace: Vec<f64>,
    /// Objective of the raw corrupted cells.
    pub raw_objective: f64,
    /// Largest |corrected − raw| summer total over the corrupted years (msm³).
    pub max_equality_violation: f64,
    /// Smallest corrected cell (msm³).
    pub min_value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the winning start (0 is the unperturbed init).
    pub best_start: usize,
}

impl CorrectionResult {
    /// `series` with its leading full years replaced by the corrected matrix.
    pub fn apply_to(&self, series: &MonthlySeries) -> MonthlySeries {
        let mut values = series.values.clone();
        for (y, row) in self.corrected.iter().enumerate() {
            values[y * 12..y * 12 + 12].copy_from_slice(row);
        }
        MonthlySeries {
            start: series.start,
            values,
        }
    }

    /// Corrected cells, year-major, in the same layout as `raw_block`.
    pub fn block(&self, problem: &CorrectionProblem) -> Vec<f64> {
        let lo = problem.m0 as usize - 1;
        self.corrected[..problem.n_corrupt_years]
            .iter()
            .flat_map(|row| row[lo..lo + problem.block_width()].iter().copied())
            .collect()
    }
}

/// Euclidean projection of `v` onto `{x ≥ 0, Σx = total}`.
fn project_simplex(v: &mut [f64], total: f64) {
    if total <= 0.0 {
        v.iter_mut().for_each(|x| *x = 0.0);
        return;
    }
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - total) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

struct Solver<'a> {
    problem: &'a CorrectionProblem,
    totals: Vec<f64>,
    width: usize,
}

impl Solver<'_> {
    fn project(&self, x: &mut [f64]) {
        for (chunk, total) in x.chunks_mut(self.width).zip(&self.totals) {
            project_simplex(chunk, *total);
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        objective_unchecked(x, self.problem)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut probe = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = 1e-6 * x[i].abs().max(1.0);
                probe[i] = x[i] + h;
                let fp = self.value(&probe);
                probe[i] = x[i] - h;
                let fm = self.value(&probe);
                probe[i] = x[i];
                (fp - fm) / (2.0 * h)
            })
            .collect()
    }

    /// `P(x − g) − x`, whose norm vanishes exactly at stationary points.
    fn projected_step(&self, x: &[f64], g: &[f64], scale: f64) -> Vec<f64> {
        let mut trial: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - scale * b).collect();
        self.project(&mut trial);
        trial.iter().zip(x).map(|(a, b)| a - b).collect()
    }

    fn run(&self, mut x: Vec<f64>, max_iter: usize, tol: f64) -> (Vec<f64>, Vec<f64>, usize, bool) {
        self.project(&mut x);
        let mut fx = self.value(&x);
        let mut trace = vec![fx];
        let mut g = self.gradient(&x);
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let mut lambda = {
            let gn = inf(&g);
            if gn > 0.0 {
                1.0 / gn
            } else {
                1.0
            }
        };
        let mut iterations = 0;
        let mut converged = inf(&self.projected_step(&x, &g, 1.0)) < tol;
        while !converged && iterations < max_iter {
            let d = self.projected_step(&x, &g, lambda);
            let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if slope >= 0.0 {
                // Direction lost descent under the spectral scale: fall back to a unit scale.
                if lambda != 1.0 {
                    lambda = 1.0;
                    continue;
                }
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-14 {
                let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let ft = self.value(&trial);
                if ft <= fx + 1e-4 * t * slope {
                    accepted = Some((trial, ft));
                    break;
                }
                t *= 0.5;
            }
            // x + t·d is a convex combination of two feasible points.
            let Some((xn, fnew)) = accepted else {
                break;
            };
            iterations += 1;
            let gn = self.gradient(&xn);
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|a| a * a).sum();
            lambda = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1e4 * lambda.max(1e-6) }
                .min(1e10);
            let step = inf(&s);
            x = xn;
            fx = fnew;
            g = gn;
            trace.push(fx);
            let pg = inf(&self.projected_step(&x, &g, 1.0));
            converged = pg < tol || (step < tol && pg < tol.sqrt());
        }
        (x, trace, iterations, converged)
    }
}

fn initial_block(problem: &CorrectionProblem, init: InitStrategy) -> Vec<f64> {
    match init {
        InitStrategy::Constant(v) => vec![v; problem.n_variables()],
        InitStrategy::CleanMonthMean => {
            let lo = problem.m0 as usize - 1;
            let w = problem.block_width();
            let clean = &problem.demand[problem.n_corrupt_years..];
            let means: Vec<f64> = (0..w)
                .map(|k| clean.iter().map(|row| row[lo + k]).sum::<f64>() / clean.len() as f64)
                .collect();
            (0..problem.n_corrupt_years)
                .flat_map(|_| means.iter().copied())
                .collect()
        }
    }
}

/// Minimizes the correction objective subject to per-year summer totals and
/// nonnegativity, keeping the best of several seeded starts.
pub fn correct_summer(problem: &CorrectionProblem, opts: &CorrectionOptions) -> Result<CorrectionResult> {
    let init = initial_block(problem, opts.init);
    if let Some(i) = init.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidCandidate(i));
    }
    let solver = Solver {
        problem,
        totals: problem.year_totals(),
        width: problem.block_width(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts = vec![init.clone()];
    for _ in 1..opts.restarts.max(1) {
        starts.push(
            init.iter()
                .map(|v| v * (1.0 + rng.random_range(-opts.perturbation..=opts.perturbation)))
                .collect(),
        );
    }

    let mut best: Option<(usize, Vec<f64>, Vec<f64>, usize, bool)> = None;
    for (k, start) in starts.into_iter().enumerate() {
        let (x, trace, iters, conv) = solver.run(start, opts.max_iter, opts.tol);
        let better = match &best {
            None => true,
            Some((_, _, bt, _, _)) => trace.last() < bt.last(),
        };
        if better {
            best = Some((k, x, trace, iters, conv));
        }
    }
    let (best_start, block, trace, iterations, converged) = best.expect("at least one start");

    let corrected = problem.with_block(&block);
    let max_equality_violation = block
        .chunks(solver.width)
        .zip(&solver.totals)
        .map(|(c, t)| (c.iter().sum::<f64>() - t).abs())
        .fold(0.0, f64::max);
    let min_value = block.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CorrectionResult {
        corrected,
        objective_value: *trace.last().expect("trace is never empty"),
        objective_trace: trace,
        raw_objective: objective_unchecked(&problem.raw_block(), problem),
        max_equality_violation,
        min_value,
        iterations,
        converged,
        best_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn linear_matrix(n_years: usize) -> Vec<[f64; 12]> {
        (1..=n_years)
            .map(|y| {
                let mut row = [0.0; 12];
                for (m, v) in row.iter_mut().enumerate() {
                    *v = 20.0 + 3.0 * m as f64 + (1.0 + 0.1 * m as f64) * y as f64;
                }
                row
            })
            .collect()
    }

    #[test]
    fn hat_reproduces_lines_and_is_idempotent() {
        let h = hat_matrix(9).unwrap();
        let v = DVector::from_fn(9, |i, _| (i + 1) as f64);
        assert!((&h * &v - &v).amax() < 1e-12);
        assert!((&h * &h - &h).amax() <= 1e-10);
        assert!((&h - h.transpose()).amax() < 1e-14);
        assert!((h.trace() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hat_three_years_by_hand() {
        // (ΦᵀΦ)⁻¹ for years 1..3 is [[7/3, -1], [-1, 1/2]]; column 2 of H is 1/3 everywhere.
        let h = hat_matrix(3).unwrap();
        let out = &h * DVector::from_vec(vec![0.0, 1.0, 0.0]);
        for v in out.iter() {
            assert!((v - 2.0 / 6.0).abs() < 1e-14);
        }
        assert_eq!(hat_matrix(2), Err(Error::DegenerateDesign(2)));
    }

    #[test]
    fn hat_invariant_to_year_offset() {
        let base = hat_matrix(9).unwrap();
        let years: Vec<f64> = (2014..2023).map(|y| y as f64).collect();
        assert_eq!(base, hat_matrix_for_years(&years).unwrap());
    }

    #[test]
    fn trend_fit_matches_hat() {
        let col = [3.0, 5.0, 4.0, 8.0, 9.0, 7.0, 12.0, 11.0, 14.0];
        let fit = TrendFit::fit(&col).unwrap();
        let via_hat = hat_matrix(9).unwrap() * DVector::from_column_slice(&col);
        for (a, b) in fit.fitted(9).iter().zip(via_hat.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn perfect_trend_objective_is_minus_one() {
        let p = CorrectionProblem::new(linear_matrix(9), 7, 6).unwrap();
        let psi = correction_objective(&p.raw_block(), &p).unwrap();
        assert!((psi + 1.0).abs() < 1e-12, "{psi}");
    }

    #[test]
    fn variable_counts() {
        let d = linear_matrix(9);
        assert_eq!(CorrectionProblem::new(d.clone(), 7, 6).unwrap().n_variables(), 18);
        assert_eq!(CorrectionProblem::new(d, 6, 6).unwrap().n_variables(), 24);
    }

    #[test]
    fn invalid_inputs() {
        let d = linear_matrix(9);
        let p = CorrectionProblem::new(d.clone(), 7, 6).unwrap();
        let mut block = p.raw_block();
        block[3] = f64::NAN;
        assert_eq!(correction_objective(&block, &p), Err(Error::InvalidCandidate(3)));
        assert!(CorrectionProblem::new(d.clone(), 1, 6).is_err());
        assert!(CorrectionProblem::new(d.clone(), 7, 8).is_err());
        let mut neg = d.clone();
        neg[0][6] = -1000.0;
        assert!(matches!(CorrectionProblem::new(neg, 7, 6), Err(Error::Infeasible(_))));
        let mut neg = d;
        neg[8][0] = -1.0;
        assert!(matches!(CorrectionProblem::new(neg, 7, 6), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn simplex_projection() {
        let mut v = [3.0, -1.0, 0.5];
        project_simplex(&mut v, 2.0);
        assert!((v.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        assert!(v.iter().all(|x| *x >= 0.0));
        assert_eq!(v, [2.0, 0.0, 0.0]);
        let mut w = [1.0, 1.0];
        project_simplex(&mut w, 2.0);
        assert_eq!(w, [1.0, 1.0]);
    }

    #[test]
    fn fixed_point_single_month_block() {
        // With m0 = 9 each year has one variable pinned by its total.
        let d = linear_matrix(9);
        let p = CorrectionProblem::new(d.clone(), 9, 6).unwrap();
        let r = correct_summer(&p, &CorrectionOptions::default()).unwrap();
        assert!(r.iterations <= 1);
        for (a, b) in r.corrected.iter().zip(&d) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-6);
            }
        }
    }

    fn synthetic_problem(seed: u64) -> (CorrectionProblem, Vec<f64>) {
        let out = generate(&SynthConfig {
            seed,
            extra_months: 0,
            ..SynthConfig::default()
        })
        .unwrap();
        let p = CorrectionProblem::from_series(&out.observed, 7, 6).unwrap();
        let truth = CorrectionProblem::from_series(&out.truth, 7, 6).unwrap().raw_block();
        (p, truth)
    }

    #[test]
    fn truth_scores_better_than_corruption() {
        let (p, truth) = synthetic_problem(42);
        let psi_truth = correction_objective(&truth, &p).unwrap();
        let psi_raw = correction_objective(&p.raw_block(), &p).unwrap();
        assert!(psi_truth <= psi_raw, "{psi_truth} > {psi_raw}");
    }

    #[test]
    fn correction_improves_seed_42() {
        let (p, truth) = synthetic_problem(42);
        let r = correct_summer(&p, &CorrectionOptions::default()).unwrap();
        let rmse = |b: &[f64]| {
            (b.iter().zip(&truth).map(|(x, t)| (x - t).powi(2)).sum::<f64>() / b.len() as f64).sqrt()
        };
        let corrected = r.block(&p);
        assert!(rmse(&corrected) < rmse(&p.raw_block()));
        assert!(r.objective_value <= r.raw_objective);
        assert!(r.max_equality_violation <= 1e-6 * 100.0);
        assert!(r.min_value >= -1e-9);
        assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0]));
        // Clean cells untouched.
        for (y, (a, b)) in r.corrected.iter().zip(p.demand()).enumerate() {
            for m in 0..12 {
                if !(y < 6 && (6..9).contains(&m)) {
                    assert_eq!(a[m], b[m]);
                }
            }
        }
    }

    #[test]
    fn year_offset_leaves_solution_unchanged() {
        let (p, _) = synthetic_problem(5);
        let mut shifted = p.clone();
        let years: Vec<f64> = (2014..2023).map(|y| y as f64).collect();
        shifted.hat = hat_matrix_for_years(&years).unwrap();
        let r1 = correct_summer(&p, &CorrectionOptions::default()).unwrap();
        let r2 = correct_summer(&shifted, &CorrectionOptions::default()).unwrap();
        assert_eq!(r1.corrected, r2.corrected);
    }
}
