//! Jones-calculus primitives in the lab {H, V} basis.
//!
//! States are complex 2-vectors, elements are 2x2 complex matrices. The
//! orientation angle of a state is reported in (-90, 90] degrees and the
//! ellipticity angle chi = asin(S3/S0)/2 in [-45, 45] degrees, both derived
//! from the Stokes parameters of the Jones vector.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type JonesVector = Vector2<C64>;
pub type JonesMatrix = Matrix2<C64>;

/// A (normalized) single-beam polarization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    components: JonesVector,
}

impl PolarizationState {
    /// Builds a state from raw amplitudes, normalizing to unit power.
    pub fn new(c_h: C64, c_v: C64) -> Result<Self> {
        let v = Vector2::new(c_h, c_v);
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Domain(
                "polarization amplitudes must be finite and not both zero".into(),
            ));
        }
        Ok(Self { components: v / C64::new(norm, 0.0) })
    }

    /// Linear polarization at `angle_deg` from H.
    pub fn linear(angle_deg: f64) -> Self {
        let a = angle_deg.to_radians();
        Self {
            components: Vector2::new(C64::new(a.cos(), 0.0), C64::new(a.sin(), 0.0)),
        }
    }

    pub fn horizontal() -> Self {
        Self::linear(0.0)
    }

    pub fn vertical() -> Self {
        Self::linear(90.0)
    }

    /// Diagonal state (H + V)/sqrt(2).
    pub fn diagonal() -> Self {
        Self::linear(45.0)
    }

    pub fn c_h(&self) -> C64 {
        self.components[0]
    }

    pub fn c_v(&self) -> C64 {
        self.components[1]
    }

    pub fn vector(&self) -> JonesVector {
        self.components
    }

    /// Stokes parameters (S0, S1, S2, S3).
    pub fn stokes(&self) -> [f64; 4] {
        let h = self.components[0];
        let v = self.components[1];
        let s0 = h.norm_sqr() + v.norm_sqr();
        let s1 = h.norm_sqr() - v.norm_sqr();
        let cross = h.conj() * v;
        [s0, s1, 2.0 * cross.re, 2.0 * cross.im]
    }

    /// Orientation angle of the polarization ellipse, degrees in (-90, 90].
    pub fn orientation_deg(&self) -> f64 {
        let [_, s1, s2, _] = self.stokes();
        let mut phi = 0.5 * s2.atan2(s1).to_degrees();
        if phi <= -90.0 {
            phi += 180.0;
        }
        phi
    }

    /// Ellipticity angle chi, degrees in [-45, 45].
    pub fn ellipticity_deg(&self) -> f64 {
        let [s0, _, _, s3] = self.stokes();
        (0.5 * (s3 / s0).clamp(-1.0, 1.0).asin()).to_degrees()
    }

    /// Overlap magnitude |<a|b>|; 1 means equal up to global phase.
    pub fn overlap(&self, other: &Self) -> f64 {
        (self.components.adjoint() * other.components)[(0, 0)].norm()
    }
}

/// A 2x2 Jones operator acting on polarization states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationOperator {
    matrix: JonesMatrix,
}

impl PolarizationOperator {
    pub fn from_matrix(matrix: JonesMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity() -> Self {
        Self { matrix: Matrix2::identity() }
    }

    pub fn matrix(&self) -> JonesMatrix {
        self.matrix
    }

    /// Applies the operator and renormalizes. Errors if the state is
    /// fully extinguished (e.g. a crossed polarizer).
    pub fn apply(&self, state: &PolarizationState) -> Result<PolarizationState> {
        let out = self.matrix * state.vector();
        PolarizationState::new(out[0], out[1])
    }

    /// Applies the operator without renormalizing; the squared norm of the
    /// result is the transmitted power for a normalized input.
    pub fn apply_raw(&self, state: &PolarizationState) -> JonesVector {
        self.matrix * state.vector()
    }

    /// Transmitted power for a normalized input state.
    pub fn transmitted_power(&self, state: &PolarizationState) -> f64 {
        self.apply_raw(state).norm_squared()
    }

    pub fn compose(&self, inner: &Self) -> Self {
        Self { matrix: self.matrix * inner.matrix }
    }

    /// |det M|; 1 for lossless (unitary up to global phase) elements.
    pub fn det_magnitude(&self) -> f64 {
        (self.matrix[(0, 0)] * self.matrix[(1, 1)]
            - self.matrix[(0, 1)] * self.matrix[(1, 0)])
            .norm()
    }

    /// Largest singular value; <= 1 + eps for passive elements.
    pub fn max_singular_value(&self) -> f64 {
        // singular values of a 2x2 via eigenvalues of M^dagger M
        let g = self.matrix.adjoint() * self.matrix;
        let tr = g[(0, 0)].re + g[(1, 1)].re;
        let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        (tr / 2.0 + disc).max(0.0).sqrt()
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let g = self.matrix.adjoint() * self.matrix;
        let id: JonesMatrix = Matrix2::identity();
        (g - id).norm() < tol
    }
}

/// Half-wave plate with its fast axis at `fast_axis_deg` from H.
pub fn half_wave_plate(fast_axis_deg: f64) -> PolarizationOperator {
    let t = 2.0 * fast_axis_deg.to_radians();
    let c = C64::new(t.cos(), 0.0);
    let s = C64::new(t.sin(), 0.0);
    PolarizationOperator::from_matrix(Matrix2::new(c, s, s, -c))
}

/// Rank-1 projector onto the linear state at `transmission_angle_deg`.
pub fn linear_polarizer(transmission_angle_deg: f64) -> PolarizationOperator {
    let a = transmission_angle_deg.to_radians();
    let (s, c) = a.sin_cos();
    let cc = C64::new(c * c, 0.0);
    let ss = C64::new(s * s, 0.0);
    let cs = C64::new(c * s, 0.0);
    PolarizationOperator::from_matrix(Matrix2::new(cc, cs, cs, ss))
}

/// Variable retarder diag(1, e^{i delta}) in the {H, V} basis.
pub fn variable_retarder(retardance_rad: f64) -> PolarizationOperator {
    PolarizationOperator::from_matrix(Matrix2::new(
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::from_polar(1.0, retardance_rad),
    ))
}
