//! Figures of merit: correlation fringes, visibility fits, fidelity, QBER.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jones::linear_polarizer;
use crate::source::{kron4, TwoPhotonState};

/// Expected coincidence fraction for polarizers at (theta1, theta2), one
/// point of a correlation fringe.
pub fn coincidence_fraction(state: &TwoPhotonState, theta1_deg: f64, theta2_deg: f64) -> f64 {
    let p1: Matrix2<num_complex::Complex64> = linear_polarizer(theta1_deg).matrix();
    let p2 = linear_polarizer(theta2_deg).matrix();
    state.expectation(&kron4(&p1, &p2)).clamp(0.0, 1.0)
}

/// Fringe over a theta2 grid at fixed theta1.
pub fn correlation_curve(
    state: &TwoPhotonState,
    theta1_deg: f64,
    theta2_grid_deg: &[f64],
) -> Vec<(f64, f64)> {
    theta2_grid_deg
        .iter()
        .map(|&t2| (t2, coincidence_fraction(state, theta1_deg, t2)))
        .collect()
}

/// Result of fitting one polarization-correlation fringe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityResult {
    pub basis_label: String,
    pub visibility: f64,
    /// Fringe phase theta0, degrees.
    pub phase_offset_deg: f64,
    /// Mean fringe level (A/2 + floor of the fitted model).
    pub amplitude: f64,
    /// Standard error on the visibility.
    pub uncertainty: f64,
}

/// Least-squares fit of counts(theta2) = offset + p*cos(2 theta2) +
/// q*sin(2 theta2); visibility = sqrt(p^2 + q^2) / offset.
///
/// The model is linear in (offset, p, q), so the fit is exact; points are
/// weighted by 1/max(y, 1) (Poisson counting weights) and the visibility
/// uncertainty comes from the weighted covariance.
pub fn fit_visibility(samples: &[(f64, f64)], basis_label: &str) -> Result<VisibilityResult> {
    if samples.len() < 4 {
        return Err(Error::FitFailure(format!(
            "visibility fit needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|&(t, y)| !t.is_finite() || !y.is_finite() || y < 0.0) {
        return Err(Error::FitFailure("visibility samples must be finite and non-negative".into()));
    }

    let n = samples.len();
    let mut design = DMatrix::<f64>::zeros(n, 3);
    let mut rhs = DVector::<f64>::zeros(n);
    let mut weights = DVector::<f64>::zeros(n);
    for (i, &(theta, y)) in samples.iter().enumerate() {
        let a = 2.0 * theta.to_radians();
        design[(i, 0)] = 1.0;
        design[(i, 1)] = a.cos();
        design[(i, 2)] = a.sin();
        rhs[i] = y;
        weights[i] = 1.0 / y.max(1.0);
    }
    let mut ata = DMatrix::<f64>::zeros(3, 3);
    let mut atb = DVector::<f64>::zeros(3);
    for i in 0..n {
        let w = weights[i];
        for r in 0..3 {
            atb[r] += w * design[(i, r)] * rhs[i];
            for c in 0..3 {
                ata[(r, c)] += w * design[(i, r)] * design[(i, c)];
            }
        }
    }
    let cov = ata
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::FitFailure("singular design matrix: degenerate angle grid".into()))?;
    let coef = &cov * atb;
    let (offset, p, q) = (coef[0], coef[1], coef[2]);
    if offset <= 0.0 {
        return Err(Error::FitFailure(format!("non-positive fringe offset {offset}")));
    }
    let amp = (p * p + q * q).sqrt();
    let visibility = amp / offset;

    // residual-scaled covariance propagated through V = sqrt(p^2+q^2)/offset
    let mut chi2 = 0.0;
    for i in 0..n {
        let fit = coef[0] * design[(i, 0)] + coef[1] * design[(i, 1)] + coef[2] * design[(i, 2)];
        chi2 += weights[i] * (rhs[i] - fit) * (rhs[i] - fit);
    }
    let dof = (n - 3).max(1) as f64;
    let scale = (chi2 / dof).max(1.0);
    let grad = if amp > 0.0 {
        [-amp / (offset * offset), p / (amp * offset), q / (amp * offset)]
    } else {
        [0.0, 1.0 / offset, 1.0 / offset]
    };
    let mut var = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            var += grad[r] * cov[(r, c)] * grad[c];
        }
    }
    let uncertainty = (var.max(0.0) * scale).sqrt();

    // phase where the fringe peaks: offset + amp*cos(2(theta - theta0))
    let phase_offset_deg = 0.5 * q.atan2(p).to_degrees();

    Ok(VisibilityResult {
        basis_label: basis_label.to_string(),
        visibility,
        phase_offset_deg,
        amplitude: offset,
        uncertainty,
    })
}

/// Fidelity estimator: arithmetic mean of the four linear-basis
/// visibilities. This is an estimator, not full tomography.
pub fn fidelity_from_visibilities(v_h: f64, v_v: f64, v_d: f64, v_a: f64) -> Result<f64> {
    for v in [v_h, v_v, v_d, v_a] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("visibility {v} outside [0, 1]")));
        }
    }
    Ok((v_h + v_v + v_d + v_a) / 4.0)
}

/// QBER convention used for the headline number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QberConvention {
    /// QBER = 1 - F (default; pairs with the fidelity estimator above).
    #[default]
    OneMinusFidelity,
    /// QBER = (1 - V)/2, the fringe-visibility error-rate convention.
    HalfOneMinusVisibility,
}

/// QBER from a fidelity (or mean visibility) estimate.
pub fn qber_estimate(value: f64, convention: QberConvention) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Domain(format!("fidelity {value} outside [0, 1]")));
    }
    Ok(match convention {
        QberConvention::OneMinusFidelity => 1.0 - value,
        QberConvention::HalfOneMinusVisibility => (1.0 - value) / 2.0,
    })
}
