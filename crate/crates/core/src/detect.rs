//! Monte Carlo tag generation and coincidence counting.
//!
//! Pairs are emitted Poissonian in time, each pair samples one of the four
//! polarizer outcomes from the two-photon state, photons survive detector
//! efficiency, pick up Gaussian timing jitter and dark counts, and are
//! thinned by dead time. Rates are then recovered from the tag streams by
//! greedy one-to-one window matching.

use nalgebra::Matrix2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jones::linear_polarizer;
use crate::source::{kron4, TwoPhotonState};

/// One detection channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorModel {
    /// Photon detection probability in [0, 1].
    pub efficiency: f64,
    /// Dark counts per second.
    pub dark_rate: f64,
    /// Gaussian timing jitter, ps (one sigma).
    pub jitter_sigma_ps: f64,
    /// Dead time after each accepted tag, ns.
    pub dead_time_ns: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self { efficiency: 1.0, dark_rate: 0.0, jitter_sigma_ps: 0.0, dead_time_ns: 0.0 }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::Domain(format!("efficiency {} outside [0, 1]", self.efficiency)));
        }
        if self.dark_rate < 0.0 || self.jitter_sigma_ps < 0.0 || self.dead_time_ns < 0.0 {
            return Err(Error::Domain("detector parameters must be non-negative".into()));
        }
        Ok(())
    }
}

/// Timestamp streams for the two channels, integer picoseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagStream {
    pub signal_ps: Vec<u64>,
    pub idler_ps: Vec<u64>,
    pub duration_ps: u64,
}

const FILE_MAGIC: &str = "TAGS1";

impl TagStream {
    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 * 1e-12
    }

    pub fn validate(&self) -> Result<()> {
        for (name, ch) in [("signal", &self.signal_ps), ("idler", &self.idler_ps)] {
            if !ch.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Data(format!("{name} timestamps not strictly increasing")));
            }
            if ch.last().is_some_and(|&t| t > self.duration_ps) {
                return Err(Error::Data(format!("{name} timestamp beyond stream duration")));
            }
        }
        Ok(())
    }

    /// Writes the text header plus binary (channel u8, timestamp_ps u64 LE)
    /// records.
    pub fn write(&self, mut out: impl std::io::Write) -> Result<()> {
        writeln!(out, "{FILE_MAGIC} duration_ps={} channels=2", self.duration_ps)?;
        let mut merged: Vec<(u8, u64)> = self
            .signal_ps
            .iter()
            .map(|&t| (0u8, t))
            .chain(self.idler_ps.iter().map(|&t| (1u8, t)))
            .collect();
        merged.sort_by_key(|&(ch, t)| (t, ch));
        for (ch, t) in merged {
            out.write_all(&[ch])?;
            out.write_all(&t.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn read(mut input: impl std::io::BufRead) -> Result<Self> {
        let mut header = String::new();
        input.read_line(&mut header)?;
        let header = header.trim_end();
        let mut duration_ps = None;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(FILE_MAGIC) {
            return Err(Error::Data(format!("bad tag-stream header: {header:?}")));
        }
        for field in fields {
            if let Some(v) = field.strip_prefix("duration_ps=") {
                duration_ps = Some(
                    v.parse::<u64>()
                        .map_err(|e| Error::Data(format!("bad duration_ps {v:?}: {e}")))?,
                );
            } else if let Some(v) = field.strip_prefix("channels=") {
                if v != "2" {
                    return Err(Error::Data(format!("unsupported channel count {v}")));
                }
            } else {
                return Err(Error::Data(format!("unknown header field {field:?}")));
            }
        }
        let duration_ps =
            duration_ps.ok_or_else(|| Error::Data("header missing duration_ps".into()))?;
        let mut signal = Vec::new();
        let mut idler = Vec::new();
        let mut record = [0u8; 9];
        loop {
            match input.read_exact(&mut record) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(e.into()),
            }
            let t = u64::from_le_bytes(record[1..9].try_into().unwrap());
            match record[0] {
                0 => signal.push(t),
                1 => idler.push(t),
                ch => return Err(Error::Data(format!("unknown channel id {ch}"))),
            }
        }
        let stream = Self { signal_ps: signal, idler_ps: idler, duration_ps };
        stream.validate()?;
        Ok(stream)
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    /// Imports `channel,timestamp_ps` CSV (header optional).
    pub fn read_csv(input: impl std::io::BufRead, duration_ps: u64) -> Result<Self> {
        let mut signal = Vec::new();
        let mut idler = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (i == 0 && line.starts_with("channel")) {
                continue;
            }
            let (ch, ts) = line
                .split_once(',')
                .ok_or_else(|| Error::Data(format!("line {}: expected two columns", i + 1)))?;
            let t: u64 = ts
                .trim()
                .parse()
                .map_err(|e| Error::Data(format!("line {}: bad timestamp: {e}", i + 1)))?;
            match ch.trim() {
                "0" | "signal" => signal.push(t),
                "1" | "idler" => idler.push(t),
                other => return Err(Error::Data(format!("line {}: bad channel {other:?}", i + 1))),
            }
        }
        signal.sort_unstable();
        idler.sort_unstable();
        let stream = Self { signal_ps: signal, idler_ps: idler, duration_ps };
        stream.validate()?;
        Ok(stream)
    }
}

/// Detected rates derived from a tag stream at one pump power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub singles_signal: f64,
    pub singles_idler: f64,
    pub coincidences: f64,
    pub accidentals: f64,
    pub car: f64,
    /// True when accidentals were zero and `car` is the +inf sentinel.
    pub car_is_infinite: bool,
    pub heralding_signal: f64,
    pub heralding_idler: f64,
    /// Heralding with the accidental rate subtracted from the coincidences.
    pub heralding_signal_corrected: f64,
    pub heralding_idler_corrected: f64,
    pub brightness_per_mw: f64,
    pub pump_power_mw: f64,
    pub window_ns: f64,
}

impl RateSummary {
    pub const CSV_HEADER: &'static str = "pump_power_mw,singles_signal,singles_idler,coincidences,\
         accidentals,car,heralding_signal,heralding_idler,heralding_signal_corrected,\
         heralding_idler_corrected,brightness_per_mw,window_ns";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.pump_power_mw,
            self.singles_signal,
            self.singles_idler,
            self.coincidences,
            self.accidentals,
            if self.car_is_infinite { "inf".to_string() } else { self.car.to_string() },
            self.heralding_signal,
            self.heralding_idler,
            self.heralding_signal_corrected,
            self.heralding_idler_corrected,
            self.brightness_per_mw,
            self.window_ns,
        )
    }
}

/// Polarizer setting for one simulated measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PolarizerSetting {
    None,
    Angles { signal_deg: f64, idler_deg: f64 },
}

/// The four outcome probabilities (both pass, signal only, idler only,
/// neither) for a pair hitting the two polarizers.
fn outcome_probabilities(state: &TwoPhotonState, setting: PolarizerSetting) -> [f64; 4] {
    match setting {
        PolarizerSetting::None => [1.0, 0.0, 0.0, 0.0],
        PolarizerSetting::Angles { signal_deg, idler_deg } => {
            let p1 = linear_polarizer(signal_deg).matrix();
            let p2 = linear_polarizer(idler_deg).matrix();
            let id = Matrix2::identity();
            let p_both = state.expectation(&kron4(&p1, &p2));
            let p_sig = state.expectation(&kron4(&p1, &id));
            let p_idl = state.expectation(&kron4(&id, &p2));
            let both = p_both.clamp(0.0, 1.0);
            let sig_only = (p_sig - p_both).max(0.0);
            let idl_only = (p_idl - p_both).max(0.0);
            let neither = (1.0 - both - sig_only - idl_only).max(0.0);
            [both, sig_only, idl_only, neither]
        }
    }
}

fn poisson_sample(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

fn sorted_uniform_times(rng: &mut impl Rng, count: u64, duration_ps: u64) -> Vec<f64> {
    let mut times: Vec<f64> =
        (0..count).map(|_| rng.gen_range(0.0..duration_ps as f64)).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times
}

/// Generates tag streams for one measurement.
///
/// `extra_uncorrelated_rate` adds pairs that reach the detectors at
/// independent random times in each arm; it models multi-pair emissions that
/// contribute only to accidentals.
pub fn simulate_tags(
    pair_rate: f64,
    state: &TwoPhotonState,
    setting: PolarizerSetting,
    detectors: &(DetectorModel, DetectorModel),
    duration_s: f64,
    seed: u64,
    extra_uncorrelated_rate: f64,
) -> Result<TagStream> {
    if pair_rate < 0.0 || extra_uncorrelated_rate < 0.0 {
        return Err(Error::Domain("rates must be non-negative".into()));
    }
    if duration_s <= 0.0 {
        return Err(Error::Domain(format!("duration {duration_s} s must be positive")));
    }
    detectors.0.validate()?;
    detectors.1.validate()?;

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let duration_ps = (duration_s * 1e12).round() as u64;
    let probs = outcome_probabilities(state, setting);

    let mut signal: Vec<u64> = Vec::new();
    let mut idler: Vec<u64> = Vec::new();

    let n_pairs = poisson_sample(&mut rng, pair_rate * duration_s);
    let jitter0 = gaussian(detectors.0.jitter_sigma_ps);
    let jitter1 = gaussian(detectors.1.jitter_sigma_ps);
    for t in sorted_uniform_times(&mut rng, n_pairs, duration_ps) {
        let u: f64 = rng.gen();
        let (pass_signal, pass_idler) = if u < probs[0] {
            (true, true)
        } else if u < probs[0] + probs[1] {
            (true, false)
        } else if u < probs[0] + probs[1] + probs[2] {
            (false, true)
        } else {
            (false, false)
        };
        if pass_signal && rng.gen::<f64>() < detectors.0.efficiency {
            push_jittered(&mut signal, t, &jitter0, &mut rng, duration_ps);
        }
        if pass_idler && rng.gen::<f64>() < detectors.1.efficiency {
            push_jittered(&mut idler, t, &jitter1, &mut rng, duration_ps);
        }
    }

    // uncorrelated extras and darks land independently in each channel
    for (ch, det, jit) in
        [(&mut signal, &detectors.0, &jitter0), (&mut idler, &detectors.1, &jitter1)]
    {
        let n_extra = poisson_sample(
            &mut rng,
            (extra_uncorrelated_rate * det.efficiency + det.dark_rate) * duration_s,
        );
        for t in sorted_uniform_times(&mut rng, n_extra, duration_ps) {
            push_jittered(ch, t, jit, &mut rng, duration_ps);
        }
    }

    signal.sort_unstable();
    idler.sort_unstable();
    apply_dead_time(&mut signal, detectors.0.dead_time_ns);
    apply_dead_time(&mut idler, detectors.1.dead_time_ns);

    let stream = TagStream { signal_ps: signal, idler_ps: idler, duration_ps };
    stream.validate()?;
    Ok(stream)
}

fn gaussian(sigma_ps: f64) -> Option<Normal<f64>> {
    (sigma_ps > 0.0).then(|| Normal::new(0.0, sigma_ps).expect("positive sigma"))
}

fn push_jittered(
    channel: &mut Vec<u64>,
    t_ps: f64,
    jitter: &Option<Normal<f64>>,
    rng: &mut impl Rng,
    duration_ps: u64,
) {
    let t = match jitter {
        Some(dist) => t_ps + dist.sample(rng),
        None => t_ps,
    };
    let t = t.round();
    if t >= 0.0 && t <= duration_ps as f64 {
        channel.push(t as u64);
    }
}

/// Drops tags closer than the dead time to the previously accepted tag, and
/// collapses equal timestamps.
fn apply_dead_time(channel: &mut Vec<u64>, dead_time_ns: f64) {
    let dead_ps = (dead_time_ns * 1e3).round() as u64;
    let mut last: Option<u64> = None;
    channel.retain(|&t| match last {
        Some(prev) if t <= prev.saturating_add(dead_ps) && (dead_ps > 0 || t == prev) => false,
        _ => {
            last = Some(t);
            true
        }
    });
}

/// Greedy one-to-one coincidence matching within |t1 - t2| <= window/2.
/// Returns (coincidences, signal singles, idler singles).
pub fn count_coincidences(stream: &TagStream, window_ns: f64) -> Result<(u64, u64, u64)> {
    if window_ns <= 0.0 {
        return Err(Error::Domain(format!("window {window_ns} ns must be positive")));
    }
    stream.validate()?;
    let half_ps = (window_ns * 1e3 / 2.0).floor() as u64;
    let (a, b) = (&stream.signal_ps, &stream.idler_ps);
    let mut coincidences = 0u64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        let (t1, t2) = (a[i], b[j]);
        if t1 + half_ps < t2 {
            i += 1;
        } else if t2 + half_ps < t1 {
            j += 1;
        } else {
            coincidences += 1;
            i += 1;
            j += 1;
        }
    }
    Ok((coincidences, a.len() as u64, b.len() as u64))
}

/// Accidental coincidence rate A = S1 * S2 * window, pairs/s.
pub fn accidental_rate(singles_1: f64, singles_2: f64, window_ns: f64) -> Result<f64> {
    if singles_1 < 0.0 || singles_2 < 0.0 || window_ns < 0.0 {
        return Err(Error::Domain("accidental_rate inputs must be non-negative".into()));
    }
    Ok(singles_1 * singles_2 * window_ns * 1e-9)
}

/// Reduces a stream to all Fig.-of-merit rates at one pump power.
pub fn rate_summary(stream: &TagStream, window_ns: f64, pump_power_mw: f64) -> Result<RateSummary> {
    if pump_power_mw <= 0.0 {
        return Err(Error::Domain(format!("pump power {pump_power_mw} mW must be positive")));
    }
    let (c, s1, s2) = count_coincidences(stream, window_ns)?;
    let dur = stream.duration_s();
    if dur <= 0.0 {
        return Err(Error::Data("stream has zero duration".into()));
    }
    let s_signal = s1 as f64 / dur;
    let s_idler = s2 as f64 / dur;
    let coincidences = c as f64 / dur;
    let accidentals = accidental_rate(s_signal, s_idler, window_ns)?;
    let (car, car_is_infinite) = if accidentals > 0.0 {
        (coincidences / accidentals, false)
    } else {
        (f64::INFINITY, true)
    };
    let ratio = |num: f64, den: f64| if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 };
    let corrected = (coincidences - accidentals).max(0.0);
    Ok(RateSummary {
        singles_signal: s_signal,
        singles_idler: s_idler,
        coincidences,
        accidentals,
        car,
        car_is_infinite,
        heralding_signal: ratio(coincidences, s_idler),
        heralding_idler: ratio(coincidences, s_signal),
        heralding_signal_corrected: ratio(corrected, s_idler),
        heralding_idler_corrected: ratio(corrected, s_signal),
        brightness_per_mw: coincidences / pump_power_mw,
        pump_power_mw,
        window_ns,
    })
}

/// Inputs for a pump-power sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSweepSpec {
    /// Detected-pair rate per mW of pump at low power.
    pub pairs_per_s_per_mw: f64,
    /// Coherence time for the multi-pair accidental term, ns.
    pub multipair_coherence_ns: f64,
    pub window_ns: f64,
    pub duration_s: f64,
}

impl Default for PowerSweepSpec {
    fn default() -> Self {
        Self {
            pairs_per_s_per_mw: 2.5e6,
            multipair_coherence_ns: 2.0,
            window_ns: 20.0,
            duration_s: 0.05,
        }
    }
}

/// Simulates one measurement per pump power. Multi-pair emissions enter as
/// independent uncorrelated pairs at rate^2 * tau_coh; saturation comes from
/// the detectors' dead time.
pub fn power_sweep(
    spec: &PowerSweepSpec,
    state: &TwoPhotonState,
    detectors: &(DetectorModel, DetectorModel),
    powers_mw: &[f64],
    seed: u64,
) -> Result<Vec<RateSummary>> {
    if powers_mw.is_empty() {
        return Err(Error::Domain("empty power grid".into()));
    }
    if !powers_mw.windows(2).all(|w| w[0] < w[1]) || powers_mw[0] <= 0.0 {
        return Err(Error::Domain("power grid must be positive and ascending".into()));
    }
    powers_mw
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let pair_rate = spec.pairs_per_s_per_mw * p;
            let extra = pair_rate * pair_rate * spec.multipair_coherence_ns * 1e-9;
            let stream = simulate_tags(
                pair_rate,
                state,
                PolarizerSetting::None,
                detectors,
                spec.duration_s,
                seed.wrapping_add(1 + i as u64),
                extra,
            )?;
            rate_summary(&stream, spec.window_ns, p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ideal_detectors() -> (DetectorModel, DetectorModel) {
        (DetectorModel::default(), DetectorModel::default())
    }

    #[test]
    fn zero_rates_give_empty_streams() {
        let s = simulate_tags(
            0.0,
            &TwoPhotonState::phi_plus(),
            PolarizerSetting::None,
            &ideal_detectors(),
            1.0,
            7,
            0.0,
        )
        .unwrap();
        assert!(s.signal_ps.is_empty() && s.idler_ps.is_empty());
    }

    #[test]
    fn poisson_counts_near_expectation() {
        let rate = 50_000.0;
        let duration = 1.0;
        let s = simulate_tags(
            rate,
            &TwoPhotonState::phi_plus(),
            PolarizerSetting::None,
            &ideal_detectors(),
            duration,
            11,
            0.0,
        )
        .unwrap();
        let expect = rate * duration;
        let band = 5.0 * expect.sqrt();
        for n in [s.signal_ps.len() as f64, s.idler_ps.len() as f64] {
            assert!((n - expect).abs() < band, "n = {n}, expect {expect} +- {band}");
        }
    }

    #[test]
    fn crossed_polarizers_give_accidentals_only() {
        let dets = ideal_detectors();
        let s = simulate_tags(
            100_000.0,
            &TwoPhotonState::phi_plus(),
            PolarizerSetting::Angles { signal_deg: 0.0, idler_deg: 90.0 },
            &dets,
            1.0,
            3,
            0.0,
        )
        .unwrap();
        let (c, s1, s2) = count_coincidences(&s, 20.0).unwrap();
        let acc = accidental_rate(s1 as f64, s2 as f64, 20.0).unwrap();
        assert!((c as f64) < acc + 3.0 * acc.sqrt().max(3.0), "C = {c}, A = {acc}");
    }

    #[test]
    fn identical_streams_all_coincide() {
        let tags: Vec<u64> = (0..100).map(|i| i * 1_000_000).collect();
        let stream =
            TagStream { signal_ps: tags.clone(), idler_ps: tags, duration_ps: 200_000_000 };
        let (c, s1, s2) = count_coincidences(&stream, 20.0).unwrap();
        assert_eq!((c, s1, s2), (100, 100, 100));
    }

    #[test]
    fn window_boundary_is_inclusive() {
        // half window of 20 ns = 10 000 ps
        let stream = TagStream {
            signal_ps: vec![100_000],
            idler_ps: vec![110_000],
            duration_ps: 1_000_000,
        };
        assert_eq!(count_coincidences(&stream, 20.0).unwrap().0, 1);
        let stream = TagStream {
            signal_ps: vec![100_000],
            idler_ps: vec![110_001],
            duration_ps: 1_000_000,
        };
        assert_eq!(count_coincidences(&stream, 20.0).unwrap().0, 0);
    }

    #[test]
    fn greedy_matching_uses_each_tag_once() {
        let stream = TagStream {
            signal_ps: vec![100_000],
            idler_ps: vec![95_000, 105_000],
            duration_ps: 1_000_000,
        };
        assert_eq!(count_coincidences(&stream, 20.0).unwrap().0, 1);
    }

    #[test]
    fn uncorrelated_streams_match_accidental_oracle() {
        let dets = ideal_detectors();
        let window = 20.0;
        let mut total_c = 0.0;
        let mut total_a = 0.0;
        for seed in 0..10u64 {
            let s = simulate_tags(
                0.0,
                &TwoPhotonState::phi_plus(),
                PolarizerSetting::None,
                &dets,
                0.5,
                seed,
                200_000.0,
            )
            .unwrap();
            let (c, s1, s2) = count_coincidences(&s, window).unwrap();
            total_c += c as f64;
            total_a += accidental_rate(s1 as f64 / 0.5, s2 as f64 / 0.5, window).unwrap() * 0.5;
        }
        assert!(
            (total_c - total_a).abs() < 3.0 * total_a.sqrt(),
            "C = {total_c}, A = {total_a}"
        );
    }

    #[test]
    fn accidental_rate_examples() {
        assert_abs_diff_eq!(accidental_rate(1e6, 1e6, 20.0).unwrap(), 20_000.0, epsilon = 1e-6);
        assert_eq!(accidental_rate(1e6, 1e6, 0.0).unwrap(), 0.0);
        let a1 = accidental_rate(5e5, 7e5, 10.0).unwrap();
        let a2 = accidental_rate(5e5, 7e5, 20.0).unwrap();
        assert_abs_diff_eq!(a2, 2.0 * a1, epsilon = 1e-9);
    }

    #[test]
    fn rate_summary_brightness_anchor() {
        // 215 000 coincident pairs over 1 s at 0.086 mW
        let tags: Vec<u64> = (0..215_000u64).map(|i| i * 4_000_000).collect();
        let stream = TagStream {
            signal_ps: tags.clone(),
            idler_ps: tags,
            duration_ps: 1_000_000_000_000,
        };
        let summary = rate_summary(&stream, 20.0, 0.086).unwrap();
        assert_abs_diff_eq!(summary.brightness_per_mw, 2.5e6, epsilon = 2e3);
        assert!(!summary.car_is_infinite);
    }

    #[test]
    fn rate_summary_heralding_anchor() {
        // heralding_signal = C / S_idler = 2.1e5 / 1.5e6 = 0.14
        let duration_ps: u64 = 1_000_000_000_000;
        let pairs: Vec<u64> = (0..210_000u64).map(|i| i * 4_000_000).collect();
        let mut idler = pairs.clone();
        idler.extend((0..1_290_000u64).map(|i| 840_000_000_000 + i * 123_457));
        idler.sort_unstable();
        idler.dedup();
        let stream = TagStream { signal_ps: pairs, idler_ps: idler, duration_ps };
        let summary = rate_summary(&stream, 20.0, 1.0).unwrap();
        assert!((summary.heralding_signal - 0.14).abs() < 0.005, "{}", summary.heralding_signal);
    }

    #[test]
    fn empty_stream_summary() {
        let stream = TagStream { signal_ps: vec![], idler_ps: vec![], duration_ps: 1_000_000 };
        let summary = rate_summary(&stream, 20.0, 1.0).unwrap();
        assert_eq!(summary.coincidences, 0.0);
        assert_eq!(summary.heralding_signal, 0.0);
        assert_eq!(summary.brightness_per_mw, 0.0);
        assert!(summary.car_is_infinite);
    }

    #[test]
    fn determinism_byte_for_byte() {
        let args = (
            80_000.0,
            TwoPhotonState::phi_plus(),
            PolarizerSetting::Angles { signal_deg: 0.0, idler_deg: 10.0 },
            (
                DetectorModel { efficiency: 0.4, dark_rate: 500.0, jitter_sigma_ps: 120.0,
                    dead_time_ns: 25.0 },
                DetectorModel { efficiency: 0.5, dark_rate: 300.0, jitter_sigma_ps: 90.0,
                    dead_time_ns: 25.0 },
            ),
        );
        let a = simulate_tags(args.0, &args.1, args.2, &args.3, 0.2, 42, 1000.0).unwrap();
        let b = simulate_tags(args.0, &args.1, args.2, &args.3, 0.2, 42, 1000.0).unwrap();
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        a.write(&mut buf_a).unwrap();
        b.write(&mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
    }

    #[test]
    fn dead_time_never_increases_singles() {
        let base = DetectorModel { dead_time_ns: 0.0, ..DetectorModel::default() };
        let dead = DetectorModel { dead_time_ns: 1000.0, ..DetectorModel::default() };
        let s0 = simulate_tags(
            200_000.0,
            &TwoPhotonState::phi_plus(),
            PolarizerSetting::None,
            &(base, base),
            0.2,
            9,
            0.0,
        )
        .unwrap();
        let s1 = simulate_tags(
            200_000.0,
            &TwoPhotonState::phi_plus(),
            PolarizerSetting::None,
            &(dead, dead),
            0.2,
            9,
            0.0,
        )
        .unwrap();
        assert!(s1.signal_ps.len() <= s0.signal_ps.len());
        assert!(s1.idler_ps.len() <= s0.idler_ps.len());
        // dead-time spacing holds
        assert!(s1.signal_ps.windows(2).all(|w| w[1] - w[0] > 1_000_000));
    }

    #[test]
    fn malus_law_fraction() {
        // coincidence fraction for |Phi+> follows cos^2(theta2 - theta1)
        let dets = ideal_detectors();
        for theta2 in [0.0, 22.5, 45.0, 67.5] {
            let s = simulate_tags(
                100_000.0,
                &TwoPhotonState::phi_plus(),
                PolarizerSetting::Angles { signal_deg: 0.0, idler_deg: theta2 },
                &dets,
                1.0,
                5,
                0.0,
            )
            .unwrap();
            let (c, ..) = count_coincidences(&s, 2.0).unwrap();
            let expect = 100_000.0 * 0.5 * theta2.to_radians().cos().powi(2);
            let band = 5.0 * expect.sqrt().max(10.0);
            assert!(
                (c as f64 - expect).abs() < band,
                "theta2 = {theta2}: C = {c}, expect {expect} +- {band}"
            );
        }
    }

    #[test]
    fn binary_roundtrip() {
        let stream = TagStream {
            signal_ps: vec![5, 100, 4000],
            idler_ps: vec![7, 100, 9000],
            duration_ps: 10_000,
        };
        let mut buf = Vec::new();
        stream.write(&mut buf).unwrap();
        let back = TagStream::read(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(stream, back);
    }

    #[test]
    fn csv_import() {
        let csv = "channel,timestamp_ps\n0,100\n1,150\nsignal,300\nidler,450\n";
        let stream = TagStream::read_csv(std::io::BufReader::new(csv.as_bytes()), 1000).unwrap();
        assert_eq!(stream.signal_ps, vec![100, 300]);
        assert_eq!(stream.idler_ps, vec![150, 450]);
    }

    #[test]
    fn unsorted_input_rejected() {
        let stream =
            TagStream { signal_ps: vec![50, 20], idler_ps: vec![], duration_ps: 1000 };
        assert!(count_coincidences(&stream, 20.0).is_err());
    }

    #[test]
    fn power_sweep_linear_without_saturation() {
        let spec = PowerSweepSpec {
            pairs_per_s_per_mw: 1.0e6,
            multipair_coherence_ns: 0.0,
            window_ns: 20.0,
            duration_s: 0.2,
        };
        let powers = [0.02, 0.04, 0.08, 0.16];
        let out = power_sweep(
            &spec,
            &TwoPhotonState::phi_plus(),
            &(DetectorModel::default(), DetectorModel::default()),
            &powers,
            1,
        )
        .unwrap();
        for (s, &p) in out.iter().zip(&powers) {
            let expect = spec.pairs_per_s_per_mw * p;
            let band = 5.0 * (expect * spec.duration_s).sqrt() / spec.duration_s;
            assert!(
                (s.coincidences - expect).abs() < band,
                "P = {p}: C = {}, expect {expect}",
                s.coincidences
            );
            assert!((s.brightness_per_mw - spec.pairs_per_s_per_mw).abs() < band / p);
        }
    }

    #[test]
    fn power_sweep_brightness_drops_with_saturation() {
        let spec = PowerSweepSpec {
            pairs_per_s_per_mw: 2.5e6,
            multipair_coherence_ns: 2.0,
            window_ns: 20.0,
            duration_s: 0.05,
        };
        let det = DetectorModel {
            efficiency: 0.5,
            dark_rate: 100.0,
            jitter_sigma_ps: 100.0,
            dead_time_ns: 30.0,
        };
        let powers = [0.02, 0.1, 0.5, 2.0];
        let out = power_sweep(&spec, &TwoPhotonState::phi_plus(), &(det, det), &powers, 2).unwrap();
        assert!(
            out.last().unwrap().brightness_per_mw < out.first().unwrap().brightness_per_mw,
            "brightness did not decrease: {:?}",
            out.iter().map(|s| s.brightness_per_mw).collect::<Vec<_>>()
        );
        // CAR decreases with power once multi-pair accidentals dominate
        assert!(out.last().unwrap().car < out.first().unwrap().car);
    }

    #[test]
    fn power_sweep_rejects_bad_grid() {
        let spec = PowerSweepSpec::default();
        let dets = (DetectorModel::default(), DetectorModel::default());
        assert!(power_sweep(&spec, &TwoPhotonState::phi_plus(), &dets, &[], 0).is_err());
        assert!(power_sweep(&spec, &TwoPhotonState::phi_plus(), &dets, &[-0.1, 0.2], 0).is_err());
        assert!(power_sweep(&spec, &TwoPhotonState::phi_plus(), &dets, &[0.2, 0.1], 0).is_err());
    }
}
