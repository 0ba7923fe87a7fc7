//! Fresnel amplitude reflection coefficients for complex media.
//!
//! Sign convention: both coefficients are reported so that `r_s == r_p` at
//! normal incidence (the s and p field directions are chosen to coincide for
//! a normally incident beam). Internal consumers that track the p direction
//! geometrically (see [`crate::ccr`]) flip the p sign to the convention in
//! which a perfect conductor has `r_p = +1`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Amplitude reflection coefficients (r_s, r_p) for a plane interface from
/// medium `n1` into medium `n2` at `incidence_deg` from the normal.
///
/// For total internal reflection both magnitudes are 1 and the coefficients
/// pick up different phases. Absorbing media are described by an index with
/// positive imaginary part.
pub fn fresnel_reflection(incidence_deg: f64, n1: C64, n2: C64) -> Result<(C64, C64)> {
    if !(n1.re.is_finite() && n1.im.is_finite() && n2.re.is_finite() && n2.im.is_finite()) {
        return Err(Error::Domain("refractive indices must be finite".into()));
    }
    if !(0.0..90.0).contains(&incidence_deg) {
        return Err(Error::Domain(format!(
            "incidence angle {incidence_deg} deg outside [0, 90)"
        )));
    }
    let theta = incidence_deg.to_radians();
    let cos_i = C64::new(theta.cos(), 0.0);
    let sin_i = C64::new(theta.sin(), 0.0);
    let sin_t = n1 / n2 * sin_i;
    // principal branch gives the decaying evanescent wave past the critical angle
    let cos_t = (C64::new(1.0, 0.0) - sin_t * sin_t).sqrt();

    let r_s = (n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t);
    let r_p = (n1 * cos_t - n2 * cos_i) / (n1 * cos_t + n2 * cos_i);
    Ok((r_s, r_p))
}

/// Same interface, with r_p in the geometric convention where the p unit
/// vectors follow the beam (right-handed (s, p, k) before and after), so a
/// perfect conductor gives r_s = -1, r_p = +1.
pub(crate) fn fresnel_reflection_geometric(
    incidence_deg: f64,
    n1: C64,
    n2: C64,
) -> Result<(C64, C64)> {
    let (r_s, r_p) = fresnel_reflection(incidence_deg, n1, n2)?;
    Ok((r_s, -r_p))
}
