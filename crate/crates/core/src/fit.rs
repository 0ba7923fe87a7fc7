//! Nonlinear least-squares fits of the power-scaling model families.
//!
//! Both families are three- or two-parameter and occasionally
//! ill-conditioned, so the solver is a derivative-free simplex descent run
//! from a fixed schedule of eight starts, followed by a Gauss-Newton polish.
//! Everything is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The two empirical model families for rate-vs-power curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerModel {
    /// y = a * ln(b * P + c)
    LogForm,
    /// y = a + 1 / (P + b)
    InverseForm,
}

impl PowerModel {
    pub fn arity(self) -> usize {
        match self {
            Self::LogForm => 3,
            Self::InverseForm => 2,
        }
    }

    pub fn evaluate(self, params: &[f64], p: f64) -> f64 {
        match self {
            Self::LogForm => {
                let arg = params[1] * p + params[2];
                if arg <= 0.0 {
                    f64::NAN
                } else {
                    params[0] * arg.ln()
                }
            }
            Self::InverseForm => params[0] + 1.0 / (p + params[1]),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::LogForm => "a*ln(b*P + c)",
            Self::InverseForm => "a + 1/(P + b)",
        }
    }
}

/// Converged fit output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: PowerModel,
    pub parameters: Vec<f64>,
    /// Standard errors from the Gauss-Newton normal equations.
    pub uncertainties: Vec<f64>,
    /// Sum of squared residuals.
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn evaluate(&self, p: f64) -> f64 {
        self.model.evaluate(&self.parameters, p)
    }

    /// Human-readable report.
    pub fn report(&self) -> String {
        let names = ["a", "b", "c"];
        let mut out = format!("model: y = {}\n", self.model.label());
        for (i, (v, u)) in self.parameters.iter().zip(&self.uncertainties).enumerate() {
            out.push_str(&format!("{} = {:.6e} +- {:.2e}\n", names[i], v, u));
        }
        out.push_str(&format!(
            "residual_ss = {:.6e}\nconverged = {}\niterations = {}\n",
            self.residual, self.converged, self.iterations
        ));
        out
    }
}

fn residual_ss(model: PowerModel, params: &[f64], data: &[(f64, f64)]) -> f64 {
    let mut ss = 0.0;
    for &(p, y) in data {
        let f = model.evaluate(params, p);
        if !f.is_finite() {
            return f64::INFINITY;
        }
        let r = y - f;
        ss += r * r;
    }
    ss
}

/// Standard Nelder-Mead on `f`, returning (best point, best value, evals).
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    scale: f64,
    max_iter: usize,
) -> (Vec<f64>, f64, usize) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        let step = if v[i].abs() > 1e-12 { v[i].abs() * scale } else { scale };
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = values.len();

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];
        if values[worst] - values[best] < 1e-14 * (1.0 + values[best].abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for &i in order.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(&simplex[i]) {
                *c += x / n as f64;
            }
        }
        let blend = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(&c, &w)| c + t * (c - w))
                .collect()
        };
        let reflected = blend(1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < values[best] {
            let expanded = blend(2.0);
            let fe = f(&expanded);
            evals += 1;
            if fe < fr {
                simplex[worst] = expanded;
                values[worst] = fe;
            } else {
                simplex[worst] = reflected;
                values[worst] = fr;
            }
        } else if fr < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = fr;
        } else {
            let contracted = blend(-0.5);
            let fc = f(&contracted);
            evals += 1;
            if fc < values[worst] {
                simplex[worst] = contracted;
                values[worst] = fc;
            } else {
                // shrink toward the best vertex
                let best_point = simplex[best].clone();
                for i in 0..=n {
                    if i == best {
                        continue;
                    }
                    for (x, &bp) in simplex[i].iter_mut().zip(&best_point) {
                        *x = bp + 0.5 * (*x - bp);
                    }
                    values[i] = f(&simplex[i]);
                    evals += 1;
                }
            }
        }
    }
    let mut best_i = 0;
    for i in 1..=n {
        if values[i] < values[best_i] {
            best_i = i;
        }
    }
    (simplex[best_i].clone(), values[best_i], evals)
}

/// Gauss-Newton refinement with numeric Jacobian; returns the polished
/// parameters, residual, iteration count, convergence flag, and standard
/// errors.
fn gauss_newton(
    model: PowerModel,
    start: &[f64],
    data: &[(f64, f64)],
) -> (Vec<f64>, f64, usize, bool, Vec<f64>) {
    let n = start.len();
    let m = data.len();
    let mut params = start.to_vec();
    let mut ss = residual_ss(model, &params, data);
    let mut converged = false;
    let mut iterations = 0;
    let mut lambda = 1e-6;

    for _ in 0..200 {
        iterations += 1;
        // Jacobian of residuals r_k = y_k - f(p_k)
        let mut jtj = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut jtr = nalgebra::DVector::<f64>::zeros(n);
        let mut row = vec![0.0; n];
        for &(p, y) in data {
            let f0 = model.evaluate(&params, p);
            if !f0.is_finite() {
                return (params, ss, iterations, false, vec![f64::NAN; n]);
            }
            for j in 0..n {
                let h = 1e-7 * (params[j].abs() + 1e-7);
                let mut shifted = params.clone();
                shifted[j] += h;
                let f1 = model.evaluate(&shifted, p);
                row[j] = if f1.is_finite() { (f1 - f0) / h } else { 0.0 };
            }
            let r = y - f0;
            for i in 0..n {
                jtr[i] += row[i] * r;
                for j in 0..n {
                    jtj[(i, j)] += row[i] * row[j];
                }
            }
        }
        // Levenberg damping keeps near-singular steps finite
        let mut damped = jtj.clone();
        for i in 0..n {
            damped[(i, i)] += lambda * (1.0 + jtj[(i, i)].abs());
        }
        let Some(step) = damped.lu().solve(&jtr) else { break };
        let candidate: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
        let ss_new = residual_ss(model, &candidate, data);
        if ss_new.is_finite() && ss_new <= ss {
            let rel = (ss - ss_new) / (1.0 + ss);
            params = candidate;
            ss = ss_new;
            lambda = (lambda * 0.3).max(1e-12);
            if rel < 1e-10 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e8 {
                converged = ss.is_finite();
                break;
            }
        }
    }

    // standard errors from sigma^2 (J^T J)^-1
    let mut errors = vec![f64::NAN; n];
    if m > n {
        let mut jtj = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut row = vec![0.0; n];
        for &(p, _) in data {
            let f0 = model.evaluate(&params, p);
            for j in 0..n {
                let h = 1e-7 * (params[j].abs() + 1e-7);
                let mut shifted = params.clone();
                shifted[j] += h;
                row[j] = (model.evaluate(&shifted, p) - f0) / h;
            }
            for i in 0..n {
                for j in 0..n {
                    jtj[(i, j)] += row[i] * row[j];
                }
            }
        }
        if let Some(cov) = jtj.try_inverse() {
            let sigma2 = ss / (m - n) as f64;
            for i in 0..n {
                let v = cov[(i, i)] * sigma2;
                errors[i] = if v >= 0.0 { v.sqrt() } else { f64::NAN };
            }
        }
    }
    (params, ss, iterations, converged, errors)
}

/// Deterministic multi-start schedule for each family, scaled to the data.
fn start_points(model: PowerModel, data: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let p_min = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let p_max = data.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    let y_min = data.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let y_max = data.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    let y_span = (y_max - y_min).abs().max(y_max.abs()).max(1e-9);
    match model {
        PowerModel::LogForm => {
            let mut starts = Vec::with_capacity(8);
            for &b in &[1.0 / p_max.max(1e-12), 10.0 / p_max.max(1e-12)] {
                for &c in &[1.0001, 1.5, 3.0, 10.0] {
                    let denom = (b * p_max + c).ln().max(1e-6);
                    starts.push(vec![y_span / denom, b, c]);
                }
            }
            starts
        }
        PowerModel::InverseForm => {
            let span = (p_max - p_min).max(1e-9);
            vec![
                vec![y_min, 1.0 / y_span.max(1e-12)],
                vec![y_min, span],
                vec![y_min, 0.1 * span],
                vec![0.0, span],
                vec![y_min - 0.1 * y_span, 2.0 * span],
                vec![y_min, 10.0 * span],
                vec![y_max, span],
                vec![0.5 * (y_min + y_max), 0.5 * span],
            ]
        }
    }
}

/// Fits `model` to (P, y) samples.
pub fn fit_power_model(data: &[(f64, f64)], model: PowerModel) -> Result<FitResult> {
    let n = model.arity();
    if data.len() < n + 1 {
        return Err(Error::FitFailure(format!(
            "need at least {} points for {}, got {}",
            n + 1,
            model.label(),
            data.len()
        )));
    }
    if data.iter().any(|&(p, y)| !p.is_finite() || !y.is_finite()) {
        return Err(Error::FitFailure("non-finite data point".into()));
    }
    let p0 = data[0].0;
    if data.iter().all(|&(p, _)| p == p0) {
        return Err(Error::FitFailure("degenerate data: all pump powers equal".into()));
    }

    let objective = |params: &[f64]| residual_ss(model, params, data);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in start_points(model, data) {
        let (point, value, _) = nelder_mead(&objective, &start, 0.25, 400);
        if value.is_finite() && best.as_ref().map_or(true, |(_, bv)| value < *bv) {
            best = Some((point, value));
        }
    }
    let (simplex_best, simplex_ss) =
        best.ok_or_else(|| Error::FitFailure("all starts diverged".into()))?;

    let (params, ss, iterations, converged, errors) = gauss_newton(model, &simplex_best, data);
    let (params, ss) =
        if ss <= simplex_ss { (params, ss) } else { (simplex_best, simplex_ss) };
    if !ss.is_finite() {
        return Err(Error::NonConvergence { iterations, residual: ss });
    }
    Ok(FitResult {
        model,
        parameters: params,
        uncertainties: errors,
        residual: ss,
        converged,
        iterations,
    })
}
