//! Quasi-phase matching: the momentum mismatch of collinear Type-0 SPDC in a
//! periodically poled crystal, its temperature/wavelength solution, the sinc^2
//! spectral envelope, the focal parameter, and 2-D sweep maps.
//!
//! All internal lengths are meters; the API accepts nm, um, mm and C.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::dispersion::DispersionModel;
use crate::error::{Error, Result};

/// Crystal parameters relevant to quasi-phase matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSpec {
    /// Poling period, um.
    pub poling_period_um: f64,
    /// Crystal length, mm.
    pub length_mm: f64,
    /// Operating temperature, C.
    pub temperature_c: f64,
    #[serde(default = "DispersionModel::ktp_z")]
    pub dispersion: DispersionModel,
}

impl Default for CrystalSpec {
    fn default() -> Self {
        Self {
            poling_period_um: 3.425,
            length_mm: 10.0,
            temperature_c: 25.5,
            dispersion: DispersionModel::ktp_z(),
        }
    }
}

impl CrystalSpec {
    pub fn validate(&self) -> Result<()> {
        if self.poling_period_um <= 0.0 || self.length_mm <= 0.0 {
            return Err(Error::Domain(
                "poling period and crystal length must be positive".into(),
            ));
        }
        let t = self.temperature_c;
        let [lo, hi] = self.dispersion.temp_range_c;
        if t < lo || t > hi {
            return Err(Error::OutOfRange {
                model: self.dispersion.name.clone(),
                quantity: "temp_C",
                value: t,
                min: lo,
                max: hi,
            });
        }
        Ok(())
    }
}

/// A solved (or probed) pump/signal/idler triple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchPoint {
    pub lambda_p_nm: f64,
    pub lambda_s_nm: f64,
    pub lambda_i_nm: f64,
    pub temperature_c: f64,
    /// Momentum mismatch, rad/m.
    pub delta_k: f64,
}

impl PhaseMatchPoint {
    /// Enforces energy conservation (1/lp = 1/ls + 1/li within 1e-9 /nm) and
    /// the signal-is-shorter convention at construction.
    pub fn new(
        lambda_p_nm: f64,
        lambda_s_nm: f64,
        lambda_i_nm: f64,
        temperature_c: f64,
        delta_k: f64,
    ) -> Result<Self> {
        let residual = (1.0 / lambda_p_nm - 1.0 / lambda_s_nm - 1.0 / lambda_i_nm).abs();
        if residual > 1e-9 {
            return Err(Error::Domain(format!(
                "energy conservation violated: residual {residual:e} /nm"
            )));
        }
        if lambda_s_nm > lambda_i_nm {
            return Err(Error::Domain(
                "signal wavelength must not exceed idler wavelength".into(),
            ));
        }
        Ok(Self { lambda_p_nm, lambda_s_nm, lambda_i_nm, temperature_c, delta_k })
    }
}

/// Idler wavelength from energy conservation, nm.
pub fn idler_from_energy(lambda_p_nm: f64, lambda_s_nm: f64) -> Result<f64> {
    if lambda_s_nm <= lambda_p_nm {
        return Err(Error::Domain(format!(
            "signal {lambda_s_nm} nm must be longer than pump {lambda_p_nm} nm"
        )));
    }
    Ok(1.0 / (1.0 / lambda_p_nm - 1.0 / lambda_s_nm))
}

/// Quasi-phase-matching momentum mismatch, rad/m:
/// 2 pi [ n_p/lp - n_s/ls - n_i/li - 1/Lambda ].
pub fn delta_k(
    spec: &CrystalSpec,
    lambda_p_nm: f64,
    lambda_s_nm: f64,
    lambda_i_nm: f64,
    temp_c: f64,
) -> Result<f64> {
    let n_p = spec.dispersion.refractive_index(lambda_p_nm, temp_c)?;
    let n_s = spec.dispersion.refractive_index(lambda_s_nm, temp_c)?;
    let n_i = spec.dispersion.refractive_index(lambda_i_nm, temp_c)?;
    let nm = 1e-9;
    let grating = 1.0 / (spec.poling_period_um * 1e-6);
    Ok(2.0 * PI
        * (n_p / (lambda_p_nm * nm)
            - n_s / (lambda_s_nm * nm)
            - n_i / (lambda_i_nm * nm)
            - grating))
}

/// Options for the signal-wavelength root finder.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// |delta_k| convergence tolerance, rad/m.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Guard band below degeneracy excluded from the non-degenerate signal
    /// branch, nm.
    pub degenerate_guard_nm: f64,
    /// Include the degenerate point in the bracket (degenerate-branch search).
    pub include_degenerate: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_iterations: 200,
            degenerate_guard_nm: 5.0,
            include_degenerate: false,
        }
    }
}

/// Solves the quasi-phase-matching condition for the signal wavelength at a
/// fixed pump and temperature, with the idler slaved to energy conservation.
///
/// The search bracket on the non-degenerate branch is
/// [1.6 lambda_p, 2 lambda_p - guard]; with `include_degenerate` the upper
/// edge is just below 2 lambda_p.
pub fn phase_match_solve(
    spec: &CrystalSpec,
    lambda_p_nm: f64,
    temp_c: f64,
    options: &SolveOptions,
) -> Result<PhaseMatchPoint> {
    spec.validate()?;
    let f = |ls: f64| -> Result<f64> {
        let li = idler_from_energy(lambda_p_nm, ls)?;
        delta_k(spec, lambda_p_nm, ls, li, temp_c)
    };
    let lo = 2.0 * lambda_p_nm * 0.8;
    let hi = if options.include_degenerate {
        2.0 * lambda_p_nm - 1e-6
    } else {
        2.0 * lambda_p_nm - options.degenerate_guard_nm
    };
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo * f_hi > 0.0 {
        return Err(Error::NoPhaseMatch { lo_nm: lo, hi_nm: hi, temp_c });
    }

    // bisection with a secant acceleration step once the bracket is tight
    let (mut a, mut b, mut fa, mut fb) = (lo, hi, f_lo, f_hi);
    let mut best = (a, fa);
    for iter in 0..options.max_iterations {
        let mid = if iter % 2 == 1 && (fb - fa).abs() > 0.0 {
            let secant = a - fa * (b - a) / (fb - fa);
            if secant > a && secant < b {
                secant
            } else {
                0.5 * (a + b)
            }
        } else {
            0.5 * (a + b)
        };
        let fm = f(mid)?;
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm.abs() < options.tolerance {
            let ls = mid;
            let li = idler_from_energy(lambda_p_nm, ls)?;
            return PhaseMatchPoint::new(lambda_p_nm, ls, li, temp_c, fm);
        }
        if fa * fm <= 0.0 {
            b = mid;
            fb = fm;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Err(Error::NonConvergence { iterations: options.max_iterations, residual: best.1 })
}

/// Relative SPDC intensity sinc^2(delta_k L_eff / 2) over a signal grid,
/// normalized to 1 at delta_k = 0.
///
/// `double_pass` uses L_eff = 2 L for the folded interaction length.
pub fn spectral_envelope(
    spec: &CrystalSpec,
    lambda_p_nm: f64,
    temp_c: f64,
    lambda_s_grid_nm: &[f64],
    double_pass: bool,
) -> Result<Vec<f64>> {
    let l_eff = spec.length_mm * 1e-3 * if double_pass { 2.0 } else { 1.0 };
    lambda_s_grid_nm
        .iter()
        .map(|&ls| {
            let li = idler_from_energy(lambda_p_nm, ls)?;
            let dk = delta_k(spec, lambda_p_nm, ls, li, temp_c)?;
            let x = dk * l_eff / 2.0;
            Ok(if x.abs() < 1e-12 { 1.0 } else { (x.sin() / x).powi(2) })
        })
        .collect()
}

/// Dimensionless focal parameter xi = L / (k w^2) with k = 2 pi n / lambda.
pub fn focal_parameter(length_mm: f64, lambda_nm: f64, n: f64, waist_um: f64) -> Result<f64> {
    if length_mm <= 0.0 || lambda_nm <= 0.0 || n <= 0.0 || waist_um <= 0.0 {
        return Err(Error::Domain("focal parameter inputs must be positive".into()));
    }
    let length = length_mm * 1e-3;
    let lambda = lambda_nm * 1e-9;
    let waist = waist_um * 1e-6;
    let k = 2.0 * PI * n / lambda;
    Ok(length / (k * waist * waist))
}

/// Pump/signal/idler focusing geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusGeometry {
    pub waist_pump_um: f64,
    pub waist_signal_um: f64,
    pub waist_idler_um: f64,
}

impl FocusGeometry {
    /// xi for each mode at the given wavelengths and temperature.
    pub fn focal_parameters(
        &self,
        spec: &CrystalSpec,
        point: &PhaseMatchPoint,
    ) -> Result<[f64; 3]> {
        let modes = [
            (point.lambda_p_nm, self.waist_pump_um),
            (point.lambda_s_nm, self.waist_signal_um),
            (point.lambda_i_nm, self.waist_idler_um),
        ];
        let mut out = [0.0; 3];
        for (slot, (lambda, waist)) in out.iter_mut().zip(modes) {
            let n = spec.dispersion.refractive_index(lambda, point.temperature_c)?;
            *slot = focal_parameter(spec.length_mm, lambda, n, waist)?;
        }
        Ok(out)
    }
}

/// Which scalar a phase-match map reports per (pump wavelength, temperature).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapObservable {
    /// Spectral envelope integrated over the signal detection band.
    PairRateProxy,
    /// Fraction of the envelope (within a +-40 nm analysis window) that
    /// falls inside the detection band.
    HeraldingProxy,
}

/// Detection band for the map proxies, defaults to the 10 nm filter at 780 nm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBand {
    pub center_nm: f64,
    pub width_nm: f64,
}

impl Default for DetectionBand {
    fn default() -> Self {
        Self { center_nm: 780.0, width_nm: 10.0 }
    }
}

/// One cell of a phase-match map; errors are reported per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MapCell {
    pub lambda_p_nm: f64,
    pub temperature_c: f64,
    pub value: std::result::Result<f64, String>,
}

const MAP_WINDOW_HALF_NM: f64 = 40.0;
const MAP_GRID_POINTS: usize = 801;

/// Evaluates a map observable at a single (pump, temperature) cell.
pub fn map_cell_value(
    spec: &CrystalSpec,
    lambda_p_nm: f64,
    temp_c: f64,
    observable: MapObservable,
    band: &DetectionBand,
) -> Result<f64> {
    let lo = band.center_nm - MAP_WINDOW_HALF_NM;
    let hi = band.center_nm + MAP_WINDOW_HALF_NM;
    let step = (hi - lo) / (MAP_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..MAP_GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let envelope = spectral_envelope(spec, lambda_p_nm, temp_c, &grid, true)?;
    let band_lo = band.center_nm - band.width_nm / 2.0;
    let band_hi = band.center_nm + band.width_nm / 2.0;
    let in_band: f64 = grid
        .iter()
        .zip(&envelope)
        .filter(|(l, _)| **l >= band_lo && **l <= band_hi)
        .map(|(_, v)| v * step)
        .sum();
    match observable {
        MapObservable::PairRateProxy => Ok(in_band),
        MapObservable::HeraldingProxy => {
            let total: f64 = envelope.iter().map(|v| v * step).sum();
            Ok(if total > 0.0 { in_band / total } else { 0.0 })
        }
    }
}

/// Row-major map over pump-wavelength and temperature grids.
pub fn phase_match_map(
    spec: &CrystalSpec,
    lambda_p_grid_nm: &[f64],
    temp_grid_c: &[f64],
    observable: MapObservable,
    band: &DetectionBand,
) -> Result<Vec<MapCell>> {
    if lambda_p_grid_nm.is_empty() || temp_grid_c.is_empty() {
        return Err(Error::Domain("phase-match map grids must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(lambda_p_grid_nm.len() * temp_grid_c.len());
    for &lp in lambda_p_grid_nm {
        for &t in temp_grid_c {
            let value =
                map_cell_value(spec, lp, t, observable, band).map_err(|e| e.to_string());
            cells.push(MapCell { lambda_p_nm: lp, temperature_c: t, value });
        }
    }
    Ok(cells)
}
