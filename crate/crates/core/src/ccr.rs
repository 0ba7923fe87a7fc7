//! Polarization model of corner-cube retroreflectors.
//!
//! The beam enters along the symmetry axis of one fixed sextant and reflects
//! off the three mutually orthogonal faces (normals x, y, z in the cube
//! frame, beam along (1,1,1)/sqrt(3), incidence angle acos(1/sqrt(3)) at each
//! face). The s/p decomposition per face follows from the face normals; the
//! fixed face order x -> y -> z selects the modeled sextant. The azimuth of
//! the lab H axis about the beam is configurable; the default is calibrated
//! so that H and V inputs leave an uncoated solid cube linearly polarized,
//! matching the measured recovery at those inputs.
//!
//! The output Jones matrix uses the "unfolded" basis convention (the lab
//! basis is carried through as if the beam went straight), under which a
//! perfect-conductor cube is exactly the identity.

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fresnel::fresnel_reflection_geometric;
use crate::jones::{PolarizationOperator, PolarizationState};

/// Default beam azimuth about the cube axis, degrees. Calibrated so H/V
/// inputs to the uncoated solid model return linear (see module docs).
pub const DEFAULT_AZIMUTH_DEG: f64 = 73.6976552132281;

/// Built-in optical constants at the 785 nm characterization wavelength.
/// BK7-like substrate, gold and silver from standard literature tables.
/// All overridable through the experiment config.
pub mod constants {
    use num_complex::Complex64 as C64;

    pub const BK7_INDEX: C64 = C64::new(1.5111, 0.0);
    pub const GOLD_INDEX_785NM: C64 = C64::new(0.160, 4.88);
    pub const SILVER_INDEX_785NM: C64 = C64::new(0.0362, 5.57);
}

/// Coating/substrate variants of the modeled retroreflectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CcrKind {
    /// Solid glass cube, total internal reflection at the back faces.
    UncoatedSolid,
    /// Solid glass cube with gold-coated back faces (glass-metal interface).
    GoldSolid,
    /// Hollow cube of silver front-surface mirrors (air-metal interface).
    SilverHollow,
    /// Lossless polarization-preserving reference.
    Ideal,
}

/// A corner-cube retroreflector model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CcrModel {
    pub kind: CcrKind,
    /// Substrate index for solid cubes.
    #[serde(default = "default_substrate")]
    pub refractive_index_substrate: C64,
    /// Metal index for coated cubes; imaginary part must be non-negative.
    #[serde(default = "default_metal")]
    pub metal_index: C64,
    /// Operating wavelength, nm (informational; constants are per-model).
    #[serde(default = "default_wavelength")]
    pub wavelength_nm: f64,
    /// Beam azimuth about the cube axis, degrees.
    #[serde(default = "default_azimuth")]
    pub azimuth_deg: f64,
}

fn default_substrate() -> C64 {
    constants::BK7_INDEX
}
fn default_metal() -> C64 {
    constants::SILVER_INDEX_785NM
}
fn default_wavelength() -> f64 {
    785.0
}
fn default_azimuth() -> f64 {
    DEFAULT_AZIMUTH_DEG
}

impl CcrModel {
    pub fn ideal() -> Self {
        Self {
            kind: CcrKind::Ideal,
            refractive_index_substrate: constants::BK7_INDEX,
            metal_index: default_metal(),
            wavelength_nm: 785.0,
            azimuth_deg: DEFAULT_AZIMUTH_DEG,
        }
    }

    pub fn uncoated_solid() -> Self {
        Self { kind: CcrKind::UncoatedSolid, ..Self::ideal() }
    }

    pub fn gold_solid() -> Self {
        Self {
            kind: CcrKind::GoldSolid,
            metal_index: constants::GOLD_INDEX_785NM,
            ..Self::ideal()
        }
    }

    pub fn silver_hollow() -> Self {
        Self {
            kind: CcrKind::SilverHollow,
            metal_index: constants::SILVER_INDEX_785NM,
            ..Self::ideal()
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ideal" => Some(Self::ideal()),
            "uncoated-solid" => Some(Self::uncoated_solid()),
            "gold-solid" => Some(Self::gold_solid()),
            "silver-hollow" => Some(Self::silver_hollow()),
            _ => None,
        }
    }

    pub const NAMES: [&'static str; 4] =
        ["ideal", "uncoated-solid", "gold-solid", "silver-hollow"];

    /// Media pair (n1, n2) seen at each face reflection.
    fn interface(&self) -> Result<(C64, C64)> {
        match self.kind {
            CcrKind::UncoatedSolid => {
                let n = self.refractive_index_substrate;
                // TIR condition at the internal face angle
                let sin_i = (2.0 / 3.0_f64).sqrt();
                if n.re * sin_i <= 1.0 {
                    return Err(Error::Domain(format!(
                        "substrate index {} does not satisfy total internal reflection",
                        n.re
                    )));
                }
                Ok((n, C64::new(1.0, 0.0)))
            }
            CcrKind::GoldSolid => {
                check_metal(self.metal_index)?;
                Ok((self.refractive_index_substrate, self.metal_index))
            }
            CcrKind::SilverHollow => {
                check_metal(self.metal_index)?;
                Ok((C64::new(1.0, 0.0), self.metal_index))
            }
            CcrKind::Ideal => Ok((C64::new(1.0, 0.0), C64::new(1.0, 0.0))),
        }
    }
}

fn check_metal(n: C64) -> Result<()> {
    if n.im < 0.0 {
        return Err(Error::Domain(format!(
            "metal index {n} has negative imaginary part (non-physical gain)"
        )));
    }
    Ok(())
}

const FACE_INCIDENCE_DEG: f64 = 54.735610317245346; // acos(1/sqrt(3))

/// Jones operator of the full three-face reflection chain in the lab {H, V}
/// basis. The ideal kind is the exact identity.
pub fn ccr_reflect(model: &CcrModel) -> Result<PolarizationOperator> {
    let (r_s, r_p): (C64, C64) = match model.kind {
        CcrKind::Ideal => {
            model.interface()?;
            (C64::new(-1.0, 0.0), C64::new(1.0, 0.0))
        }
        _ => {
            let (n1, n2) = model.interface()?;
            fresnel_reflection_geometric(FACE_INCIDENCE_DEG, n1, n2)?
        }
    };
    Ok(chain_operator(r_s, r_p, model.azimuth_deg.to_radians()))
}

fn chain_operator(r_s: C64, r_p: C64, azimuth_rad: f64) -> PolarizationOperator {
    let normals = [Vector3::x(), Vector3::y(), Vector3::z()];
    let d0: Vector3<f64> = -Vector3::new(1.0, 1.0, 1.0) / 3.0_f64.sqrt();

    // transverse lab basis, rotated by the azimuth about the beam
    let mut e_h = Vector3::x() - d0 * Vector3::x().dot(&d0);
    e_h.normalize_mut();
    let e_v = d0.cross(&e_h);
    let (s_az, c_az) = azimuth_rad.sin_cos();
    let (e_h, e_v) = (e_h * c_az + e_v * s_az, -e_h * s_az + e_v * c_az);

    let mut cols = [[C64::new(0.0, 0.0); 2]; 2];
    for (idx, input) in [(0usize, (1.0, 0.0)), (1usize, (0.0, 1.0))] {
        let mut field: Vector3<C64> =
            (e_h * input.0 + e_v * input.1).map(|x| C64::new(x, 0.0));
        let mut dir = d0;
        for n in &normals {
            let mut s_hat = dir.cross(n);
            s_hat.normalize_mut();
            let p_in = dir.cross(&s_hat);
            let dir_next = dir - *n * (2.0 * dir.dot(n));
            let p_out = dir_next.cross(&s_hat);

            let es: C64 = field
                .iter()
                .zip(s_hat.iter())
                .map(|(f, g)| f * C64::new(*g, 0.0))
                .sum();
            let ep: C64 = field
                .iter()
                .zip(p_in.iter())
                .map(|(f, g)| f * C64::new(*g, 0.0))
                .sum();
            field = s_hat.map(|x| C64::new(x, 0.0)) * (r_s * es)
                + p_out.map(|x| C64::new(x, 0.0)) * (r_p * ep);
            dir = dir_next;
        }
        // unfolded output basis: e_h kept, e_v sign chosen so ideal = identity
        let e_v_out = -dir.cross(&e_h);
        let out_h: C64 = field
            .iter()
            .zip(e_h.iter())
            .map(|(f, g)| f * C64::new(*g, 0.0))
            .sum();
        let out_v: C64 = field
            .iter()
            .zip(e_v_out.iter())
            .map(|(f, g)| f * C64::new(*g, 0.0))
            .sum();
        cols[idx] = [out_h, out_v];
    }
    PolarizationOperator::from_matrix(Matrix2::new(
        cols[0][0], cols[1][0], cols[0][1], cols[1][1],
    ))
}

/// One point of a polarization characterization sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub hwp_angle_deg: f64,
    pub orientation_deg: f64,
    pub ellipticity_deg: f64,
}

/// Sweeps an H input rotated by a half-wave plate through the retroreflector
/// and reports output orientation and ellipticity per HWP angle.
///
/// Orientations are reported in the polarimeter frame calibrated on the
/// H input (HWP at 0): the fixed orientation offset common to the whole
/// sweep is subtracted, as an instrument calibration would.
pub fn ccr_polarization_sweep(model: &CcrModel, hwp_angles_deg: &[f64]) -> Result<Vec<SweepPoint>> {
    if hwp_angles_deg.is_empty() {
        return Err(Error::Domain("empty HWP angle list".into()));
    }
    let op = ccr_reflect(model)?;
    let reference = op.apply(&PolarizationState::horizontal())?.orientation_deg();
    hwp_angles_deg
        .iter()
        .map(|&theta| {
            let input = PolarizationState::linear(2.0 * theta);
            let out = op.apply(&input)?;
            let mut phi = out.orientation_deg() - reference;
            while phi <= -90.0 {
                phi += 180.0;
            }
            while phi > 90.0 {
                phi -= 180.0;
            }
            Ok(SweepPoint {
                hwp_angle_deg: theta,
                orientation_deg: phi,
                ellipticity_deg: out.ellipticity_deg(),
            })
        })
        .collect()
}

/// Signed deviation of a sweep orientation from the ideal 2*theta line,
/// wrapped to (-90, 90].
pub fn orientation_deviation_deg(point: &SweepPoint) -> f64 {
    let ideal = 2.0 * point.hwp_angle_deg;
    let mut dev = point.orientation_deg - ideal;
    while dev <= -90.0 {
        dev += 180.0;
    }
    while dev > 90.0 {
        dev -= 180.0;
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ideal_is_identity() {
        let op = ccr_reflect(&CcrModel::ideal()).unwrap();
        let h = op.apply(&PolarizationState::horizontal()).unwrap();
        assert!(h.overlap(&PolarizationState::horizontal()) > 1.0 - 1e-12);
        assert_abs_diff_eq!(h.ellipticity_deg(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ideal_sweep_is_the_2theta_line() {
        let pts =
            ccr_polarization_sweep(&CcrModel::ideal(), &[-22.5, 0.0, 22.5, 45.0]).unwrap();
        for p in &pts {
            assert_abs_diff_eq!(orientation_deviation_deg(p), 0.0, epsilon = 1e-9);
            assert_abs_diff_eq!(p.ellipticity_deg, 0.0, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(pts[2].orientation_deg, 45.0, epsilon = 1e-9);
    }

    #[test]
    fn uncoated_ellipticity_pattern() {
        let model = CcrModel::uncoated_solid();
        let pts = ccr_polarization_sweep(&model, &[-22.5, 0.0, 22.5, 45.0]).unwrap();
        // chi recovers at H/V inputs (HWP 0 and 45) and is large in between
        assert!(pts[1].ellipticity_deg.abs() < 0.5, "chi at H = {}", pts[1].ellipticity_deg);
        assert!(pts[3].ellipticity_deg.abs() < 0.5, "chi at V = {}", pts[3].ellipticity_deg);
        assert!(pts[0].ellipticity_deg.abs() > 5.0);
        assert!(pts[2].ellipticity_deg.abs() > 5.0);
    }

    #[test]
    fn uncoated_linear_at_22p5_gains_ellipticity() {
        // input linear at 22.5 deg means HWP at 11.25 deg
        let op = ccr_reflect(&CcrModel::uncoated_solid()).unwrap();
        let out = op.apply(&PolarizationState::linear(22.5)).unwrap();
        assert!(out.ellipticity_deg().abs() > 5.0);
    }

    #[test]
    fn silver_near_ideal_at_h_and_v() {
        let op = ccr_reflect(&CcrModel::silver_hollow()).unwrap();
        for (input, phi_expect) in
            [(PolarizationState::horizontal(), 0.0), (PolarizationState::vertical(), 90.0)]
        {
            let out = op.apply(&input).unwrap();
            assert!(out.ellipticity_deg().abs() < 2.0);
            let mut err = out.orientation_deg() - phi_expect;
            while err <= -90.0 {
                err += 180.0;
            }
            while err > 90.0 {
                err -= 180.0;
            }
            assert!(err.abs() < 2.0, "orientation error {err}");
        }
    }

    #[test]
    fn gold_sweep_stays_within_five_degrees_orientation() {
        let angles: Vec<f64> = (0..=36).map(|i| -45.0 + 2.5 * i as f64).collect();
        let pts = ccr_polarization_sweep(&CcrModel::gold_solid(), &angles).unwrap();
        let max_dev = pts
            .iter()
            .map(|p| orientation_deviation_deg(p).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 5.0, "max orientation deviation {max_dev}");
    }

    #[test]
    fn sweep_orientation_is_180_periodic() {
        let model = CcrModel::uncoated_solid();
        let a = ccr_polarization_sweep(&model, &[10.0]).unwrap();
        let b = ccr_polarization_sweep(&model, &[100.0]).unwrap();
        assert_abs_diff_eq!(a[0].orientation_deg, b[0].orientation_deg, epsilon = 1e-9);
    }

    #[test]
    fn transmitted_power_bounds() {
        for name in CcrModel::NAMES {
            let model = CcrModel::by_name(name).unwrap();
            let op = ccr_reflect(&model).unwrap();
            let (n1, n2) = model.interface().unwrap();
            let per_face = if model.kind == CcrKind::Ideal {
                1.0
            } else {
                let (r_s, r_p) =
                    crate::fresnel::fresnel_reflection(FACE_INCIDENCE_DEG, n1, n2).unwrap();
                r_s.norm_sqr().min(r_p.norm_sqr())
            };
            for angle in [0.0, 17.0, 45.0, 90.0, 130.0] {
                let power = op.transmitted_power(&PolarizationState::linear(angle));
                assert!(power <= 1.0 + 1e-12);
                assert!(power >= per_face.powi(3) - 1e-12);
            }
        }
    }

    #[test]
    fn rejects_gain_metal() {
        let mut model = CcrModel::silver_hollow();
        model.metal_index = C64::new(0.04, -5.0);
        assert!(ccr_reflect(&model).is_err());
    }
}
