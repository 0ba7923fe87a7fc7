//! Subcommand implementations. Each writes plot-ready CSV files into the
//! output directory and returns core errors unchanged.

use std::fmt::Write as _;
use std::path::Path;

use fldi_core::allan::{allan_deviation, default_block_sizes, loglog_slope, TimeSeries};
use fldi_core::analysis::{
    fidelity_from_visibilities, fit_visibility, qber_estimate, QberConvention, VisibilityResult,
};
use fldi_core::ccr::{ccr_polarization_sweep, CcrModel};
use fldi_core::config::{linspace, split_seed, ExperimentConfig};
use fldi_core::detect::{
    count_coincidences, power_sweep, simulate_tags, PolarizerSetting, PowerSweepSpec, RateSummary,
};
use fldi_core::error::{Error, Result};
use fldi_core::fit::{fit_power_model, PowerModel};
use fldi_core::phasematch::{phase_match_map, DetectionBand, MapObservable};
use fldi_core::source::{fidelity, trace_paths, MisalignmentSetting, TwoPhotonState};
use fldi_core::{misalignment_coupling, BASIS_LABELS};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::write(out_dir.join(name), contents)?;
    Ok(())
}

pub fn cmd_state(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let state = trace_paths(&config.source)?;
    let f_plus = fidelity(&state, &TwoPhotonState::phi_plus())?;
    let f_minus = fidelity(&state, &TwoPhotonState::phi_minus())?;

    let mut csv = String::from("basis,re,im\n");
    match &state {
        TwoPhotonState::Pure(v) => {
            for (label, amp) in BASIS_LABELS.iter().zip(v.iter()) {
                writeln!(csv, "{label},{},{}", amp.re, amp.im).unwrap();
                println!("{label}: {:+.6} {:+.6}i", amp.re, amp.im);
            }
        }
        TwoPhotonState::Mixed(rho) => {
            // density-matrix entries, row-major, labelled "HH|VV" style
            for (i, row_label) in BASIS_LABELS.iter().enumerate() {
                for (j, col_label) in BASIS_LABELS.iter().enumerate() {
                    writeln!(csv, "{row_label}|{col_label},{},{}", rho[(i, j)].re, rho[(i, j)].im)
                        .unwrap();
                }
                println!(
                    "rho[{row_label}]: diag = {:.6}",
                    rho[(i, i)].re
                );
            }
        }
    }
    write_file(out_dir, "state.csv", &csv)?;
    println!("fidelity(phi_plus) = {f_plus:.6}");
    println!("fidelity(phi_minus) = {f_minus:.6}");
    write_file(
        out_dir,
        "state_fidelity.csv",
        &format!("target,fidelity\nphi_plus,{f_plus}\nphi_minus,{f_minus}\n"),
    )
}

pub fn cmd_phasematch(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let pm = &config.phasematch;
    let lambdas = linspace(pm.lambda_p_min_nm, pm.lambda_p_max_nm, pm.lambda_p_points);
    let temps = linspace(pm.temp_min_c, pm.temp_max_c, pm.temp_points);
    let band = DetectionBand { center_nm: pm.band_center_nm, width_nm: pm.band_width_nm };

    for (observable, name) in [
        (MapObservable::PairRateProxy, "phasematch_pair_rate.csv"),
        (MapObservable::HeraldingProxy, "phasematch_heralding.csv"),
    ] {
        let cells = phase_match_map(&config.crystal, &lambdas, &temps, observable, &band)?;
        let mut csv = String::from("lambda_p_nm,temp_C,value\n");
        let mut failed = 0usize;
        for cell in &cells {
            match &cell.value {
                Ok(v) => writeln!(csv, "{},{},{v}", cell.lambda_p_nm, cell.temperature_c).unwrap(),
                Err(msg) => {
                    failed += 1;
                    eprintln!(
                        "cell ({}, {}): {msg}",
                        cell.lambda_p_nm, cell.temperature_c
                    );
                    writeln!(csv, "{},{},nan", cell.lambda_p_nm, cell.temperature_c).unwrap();
                }
            }
        }
        write_file(out_dir, name, &csv)?;
        println!("{name}: {} cells, {failed} failed", cells.len());
    }
    Ok(())
}

pub fn cmd_powersweep(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let block = &config.powersweep;
    let powers = linspace(block.power_min_mw, block.power_max_mw, block.power_points);
    let spec = PowerSweepSpec {
        pairs_per_s_per_mw: block.pairs_per_s_per_mw,
        multipair_coherence_ns: block.multipair_coherence_ns,
        window_ns: config.window_ns,
        duration_s: block.duration_s,
    };
    let state = trace_paths(&config.source)?;
    let detectors = (config.detectors[0], config.detectors[1]);
    let summaries = power_sweep(
        &spec,
        &state,
        &detectors,
        &powers,
        split_seed(config.seed, "powersweep"),
    )?;

    let mut csv = String::from(RateSummary::CSV_HEADER);
    csv.push('\n');
    for s in &summaries {
        csv.push_str(&s.csv_row());
        csv.push('\n');
    }
    write_file(out_dir, "powersweep.csv", &csv)?;

    let series = |f: &dyn Fn(&RateSummary) -> f64| -> Vec<(f64, f64)> {
        summaries
            .iter()
            .map(|s| (s.pump_power_mw, f(s)))
            .filter(|(_, y)| y.is_finite())
            .collect()
    };
    let mut fits = String::new();
    for (label, data, model) in [
        ("coincidences", series(&|s| s.coincidences), PowerModel::LogForm),
        ("car", series(&|s| s.car), PowerModel::LogForm),
        ("brightness", series(&|s| s.brightness_per_mw), PowerModel::InverseForm),
        ("heralding_signal", series(&|s| s.heralding_signal), PowerModel::InverseForm),
    ] {
        writeln!(fits, "[{label}]").unwrap();
        match fit_power_model(&data, model) {
            Ok(fit) => fits.push_str(&fit.report()),
            Err(e) => writeln!(fits, "fit failed: {e}").unwrap(),
        }
        fits.push('\n');
    }
    write_file(out_dir, "powersweep_fits.txt", &fits)?;
    println!("powersweep.csv: {} powers", summaries.len());
    Ok(())
}

fn basis_label(theta1: f64) -> String {
    match theta1 {
        t if t == 0.0 => "H".into(),
        t if t == 90.0 => "V".into(),
        t if t == 45.0 => "D".into(),
        t if t == 135.0 => "A".into(),
        t => format!("P{t}"),
    }
}

pub fn cmd_visibility(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let block = &config.visibility;
    let state = trace_paths(&config.source)?;
    let detectors = (config.detectors[0], config.detectors[1]);
    let n_points = (180.0 / block.theta2_step_deg).ceil() as usize;
    let theta2_grid: Vec<f64> = (0..n_points).map(|i| block.theta2_step_deg * i as f64).collect();

    let mut curves = String::from("basis,theta2_deg,coincidences\n");
    let mut results: Vec<VisibilityResult> = Vec::new();
    for (b, &theta1) in block.theta1_list_deg.iter().enumerate() {
        let label = basis_label(theta1);
        let mut samples = Vec::with_capacity(theta2_grid.len());
        for (i, &theta2) in theta2_grid.iter().enumerate() {
            let seed = split_seed(config.seed, &format!("visibility/{b}/{i}"));
            let stream = simulate_tags(
                block.pairs_per_point as f64,
                &state,
                PolarizerSetting::Angles { signal_deg: theta1, idler_deg: theta2 },
                &detectors,
                1.0,
                seed,
                0.0,
            )?;
            let (c, ..) = count_coincidences(&stream, config.window_ns)?;
            writeln!(curves, "{label},{theta2},{c}").unwrap();
            samples.push((theta2, c as f64));
        }
        results.push(fit_visibility(&samples, &label)?);
    }
    write_file(out_dir, "visibility_curves.csv", &curves)?;

    let mut summary = String::from("basis,visibility,uncertainty,phase_offset_deg\n");
    for r in &results {
        writeln!(
            summary,
            "{},{},{},{}",
            r.basis_label, r.visibility, r.uncertainty, r.phase_offset_deg
        )
        .unwrap();
        println!("V_{} = {:.4} +- {:.4}", r.basis_label, r.visibility, r.uncertainty);
    }
    write_file(out_dir, "visibility_summary.csv", &summary)?;

    let mut metrics = String::from("metric,value\n");
    if results.len() == 4 {
        let v: Vec<f64> = results.iter().map(|r| r.visibility.clamp(0.0, 1.0)).collect();
        let f = fidelity_from_visibilities(v[0], v[1], v[2], v[3])?;
        let q = qber_estimate(f, QberConvention::OneMinusFidelity)?;
        writeln!(metrics, "fidelity,{f}").unwrap();
        writeln!(metrics, "qber,{q}").unwrap();
        println!("fidelity = {f:.4}, QBER = {q:.4}");
    } else {
        eprintln!("fidelity needs exactly 4 bases, got {}", results.len());
    }
    write_file(out_dir, "visibility_metrics.csv", &metrics)
}

pub fn cmd_misalign(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let block = &config.misalign;
    let tips = linspace(block.tip_min_deg, block.tip_max_deg, block.tip_points);
    let mut csv = String::from("tip_deg,coupling,relative_coincidences,relative_heralding\n");
    for &tip in &tips {
        let setting = MisalignmentSetting {
            tip_deg: tip,
            tilt_deg: 0.0,
            beam_waist_at_coupler_um: block.beam_waist_at_coupler_um,
            lever_arm_mm: block.lever_arm_mm,
            compensated: block.compensated,
        };
        let eta = misalignment_coupling(&setting)?;
        // both photons must couple for a coincidence; heralding scales as one
        writeln!(csv, "{tip},{eta},{},{eta}", eta * eta).unwrap();
    }
    write_file(out_dir, "misalign.csv", &csv)?;
    println!("misalign.csv: {} points (compensated = {})", tips.len(), block.compensated);
    Ok(())
}

pub fn cmd_stability(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let block = &config.stability;
    let n_bins = (block.duration_s / block.tau_s).floor() as usize;
    let mut rng = ChaCha12Rng::seed_from_u64(split_seed(config.seed, "stability"));

    let mean_c = block.mean_coincidence_rate * block.tau_s;
    let mean_s = mean_c * block.singles_ratio;
    let mut coincidences = Vec::with_capacity(n_bins);
    let mut singles_signal = Vec::with_capacity(n_bins);
    let mut singles_idler = Vec::with_capacity(n_bins);
    let mut brightness = Vec::with_capacity(n_bins);
    let mut heralding = Vec::with_capacity(n_bins);
    for i in 0..n_bins {
        let drift = 1.0 + block.drift_per_hour * (i as f64 * block.tau_s) / 3600.0;
        let c = sample_poisson(&mut rng, mean_c * drift);
        let s1 = sample_poisson(&mut rng, mean_s * drift);
        let s2 = sample_poisson(&mut rng, mean_s * drift);
        coincidences.push(c / block.tau_s);
        singles_signal.push(s1 / block.tau_s);
        singles_idler.push(s2 / block.tau_s);
        brightness.push(c / block.tau_s / config.pump_power_mw);
        heralding.push(if s2 > 0.0 { c / s2 } else { 0.0 });
    }

    // decimated (~1 s) time series keeps the file reviewable
    let per_sec = (1.0 / block.tau_s).round().max(1.0) as usize;
    let mut series_csv = String::from(
        "time_s,coincidences_per_s,singles_signal_per_s,singles_idler_per_s,\
         brightness_per_mw,heralding_signal\n",
    );
    let mut i = 0;
    while i < n_bins {
        let j = (i + per_sec).min(n_bins);
        let avg = |v: &[f64]| v[i..j].iter().sum::<f64>() / (j - i) as f64;
        writeln!(
            series_csv,
            "{},{},{},{},{},{}",
            i as f64 * block.tau_s,
            avg(&coincidences),
            avg(&singles_signal),
            avg(&singles_idler),
            avg(&brightness),
            avg(&heralding),
        )
        .unwrap();
        i = j;
    }
    write_file(out_dir, "stability_timeseries.csv", &series_csv)?;

    let sizes = default_block_sizes(n_bins);
    let mut slopes = String::from("parameter,slope\n");
    for (name, values) in [
        ("coincidences", &coincidences),
        ("singles_signal", &singles_signal),
        ("brightness", &brightness),
        ("heralding", &heralding),
    ] {
        let series = TimeSeries::new(values.clone(), block.tau_s)?;
        let curve = allan_deviation(&series, &sizes)?;
        write_file(out_dir, &format!("allan_{name}.csv"), &curve.to_csv())?;
        match loglog_slope(&curve) {
            Ok(slope) => {
                writeln!(slopes, "{name},{slope}").unwrap();
                println!("allan slope [{name}] = {slope:.3}");
            }
            Err(e) => writeln!(slopes, "{name},nan # {e}").unwrap(),
        }
    }
    write_file(out_dir, "allan_slopes.csv", &slopes)?;
    println!("stability: {n_bins} bins at tau = {} s", block.tau_s);
    Ok(())
}

fn sample_poisson(rng: &mut impl Rng, mean: f64) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng)
}

pub fn cmd_ccr(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    let block = &config.ccr_sweep;
    let n = (90.0 / block.hwp_step_deg).ceil() as usize + 1;
    let angles: Vec<f64> = (0..n).map(|i| block.hwp_step_deg * i as f64).collect();
    for name in &block.models {
        let model = CcrModel::by_name(name).ok_or_else(|| {
            Error::Config {
                path: None,
                msg: format!(
                    "unknown retroreflector model {name:?}; valid names: {}",
                    CcrModel::NAMES.join(", ")
                ),
            }
        })?;
        let points = ccr_polarization_sweep(&model, &angles)?;
        let mut csv = String::from("hwp_angle_deg,orientation_deg,ellipticity_deg\n");
        for p in &points {
            writeln!(csv, "{},{},{}", p.hwp_angle_deg, p.orientation_deg, p.ellipticity_deg)
                .unwrap();
        }
        write_file(out_dir, &format!("ccr_{name}.csv"), &csv)?;
        println!("ccr_{name}.csv: {} points", points.len());
    }
    Ok(())
}
