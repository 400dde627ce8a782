//! Transfer-function magnitude scan from the attack input to every terminal
//! and torsional output, stealth ratios, and peak-band detection.
//!
//! Magnitudes are evaluated by a direct shifted solve `(j*2*pi*f*I - A) z = b`
//! per grid point (robust near defective A); the eigen route exists only as a
//! cross-check. Grid points are independent and evaluated in parallel with
//! output ordered by frequency.

use nalgebra::{Complex, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::shifted_solve;
use crate::statespace::{StateSpaceSystem, VarKind};

/// Uniform frequency grid in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub f_start: f64,
    pub f_end: f64,
    pub step: f64,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid {
            f_start: 0.0,
            f_end: 60.0,
            step: 0.01,
        }
    }
}

impl FrequencyGrid {
    pub fn new(f_start: f64, f_end: f64, step: f64) -> Result<FrequencyGrid> {
        if !(f_start >= 0.0 && f_start < f_end && step > 0.0) {
            return Err(Error::model(format!(
                "invalid frequency grid: start {f_start}, end {f_end}, step {step}"
            )));
        }
        Ok(FrequencyGrid { f_start, f_end, step })
    }

    pub fn points(&self) -> Vec<f64> {
        let n = ((self.f_end - self.f_start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.f_start + i as f64 * self.step).collect()
    }
}

/// Magnitude arrays per output over a frequency grid. `gamma1[j][i]` is the
/// magnitude of terminal output j at grid point i; `gamma2` likewise for the
/// torsional difference outputs. Singular grid points (undamped resonance
/// hit exactly) carry `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct FrequencyScan {
    pub frequencies_hz: Vec<f64>,
    pub gamma1: Vec<Vec<f64>>,
    pub gamma2: Vec<Vec<f64>>,
    pub y1_labels: Vec<String>,
    pub y2_labels: Vec<String>,
    /// (torsional output index, paired terminal output index) per ratio row.
    pub pairing: Vec<(usize, usize)>,
}

/// Pointwise stealth ratios |Gamma2|_k / |Gamma1|_i for the pairing rule:
/// every speed difference pairs with its generator's terminal speed, every
/// angle difference with the terminal angle. Entries are `INFINITY` where
/// the terminal magnitude sits below the floor (reported as unbounded).
#[derive(Debug, Clone)]
pub struct RatioSet {
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub pairing: Vec<(usize, usize)>,
}

/// Relative floor under which a terminal magnitude is treated as zero for
/// ratio purposes.
pub const RATIO_DENOMINATOR_FLOOR: f64 = 1e-12;

/// Evaluate |Gamma1| and |Gamma2| for the given input column over the grid.
pub fn transfer_magnitudes(
    system: &StateSpaceSystem,
    attack_input: usize,
    grid: &FrequencyGrid,
) -> Result<FrequencyScan> {
    if attack_input >= system.b.ncols() {
        return Err(Error::Dimension {
            context: "attack input column".into(),
            expected: system.b.ncols(),
            found: attack_input,
        });
    }
    let freqs = grid.points();
    let b_col: DVector<f64> = system.b.column(attack_input).into_owned();
    let n_y1 = system.c1.nrows();
    let n_y2 = system.c2.nrows();

    let per_point: Vec<(Vec<f64>, Vec<f64>)> = freqs
        .par_iter()
        .map(|&f| {
            let s = Complex::new(0.0, 2.0 * std::f64::consts::PI * f);
            match shifted_solve(&system.a, s, &b_col) {
                Some(z) => {
                    let y1 = (0..n_y1)
                        .map(|r| {
                            let mut acc = Complex::new(0.0, 0.0);
                            for c in 0..z.len() {
                                let w = system.c1[(r, c)];
                                if w != 0.0 {
                                    acc += z[c] * w;
                                }
                            }
                            acc.norm()
                        })
                        .collect();
                    let y2 = (0..n_y2)
                        .map(|r| {
                            let mut acc = Complex::new(0.0, 0.0);
                            for c in 0..z.len() {
                                let w = system.c2[(r, c)];
                                if w != 0.0 {
                                    acc += z[c] * w;
                                }
                            }
                            acc.norm()
                        })
                        .collect();
                    (y1, y2)
                }
                // exactly singular: undamped resonance on the grid point
                None => (vec![f64::INFINITY; n_y1], vec![f64::INFINITY; n_y2]),
            }
        })
        .collect();

    let mut gamma1 = vec![vec![0.0; freqs.len()]; n_y1];
    let mut gamma2 = vec![vec![0.0; freqs.len()]; n_y2];
    for (i, (y1, y2)) in per_point.into_iter().enumerate() {
        for (j, v) in y1.into_iter().enumerate() {
            gamma1[j][i] = v;
        }
        for (k, v) in y2.into_iter().enumerate() {
            gamma2[k][i] = v;
        }
    }

    let pairing = system.ratio_pairing.clone();
    Ok(FrequencyScan {
        frequencies_hz: freqs,
        gamma1,
        gamma2,
        y1_labels: system.y1_labels(),
        y2_labels: system.y2_labels(),
        pairing,
    })
}

/// Compute the stealth ratio arrays for a scan.
pub fn ratio_rm(scan: &FrequencyScan) -> RatioSet {
    let mut values = Vec::with_capacity(scan.pairing.len());
    let mut labels = Vec::with_capacity(scan.pairing.len());
    for &(k, i) in &scan.pairing {
        let denom_max = scan.gamma1[i]
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        let floor = RATIO_DENOMINATOR_FLOOR * denom_max;
        let series: Vec<f64> = scan.gamma2[k]
            .iter()
            .zip(scan.gamma1[i].iter())
            .map(|(&num, &den)| {
                if !den.is_finite() || den > floor {
                    num / den
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        values.push(series);
        labels.push(format!("rm_{}", scan.y2_labels[k]));
    }
    RatioSet {
        values,
        labels,
        pairing: scan.pairing.clone(),
    }
}

/// A detected resonance band on one torsional output.
#[derive(Debug, Clone)]
pub struct PeakBand {
    pub output: String,
    pub output_index: usize,
    pub center_hz: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub magnitude: f64,
    pub r_m: f64,
    /// Internal oscillation exceeds the paired terminal response.
    pub stealth: bool,
}

fn median_finite(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Classic peak prominence: height above the higher of the two key saddles
/// toward the nearest taller samples (or the array ends).
fn prominence(y: &[f64], i: usize) -> f64 {
    let h = y[i];
    let mut left_min = h;
    let mut j = i;
    while j > 0 {
        j -= 1;
        if y[j] > h {
            break;
        }
        left_min = left_min.min(y[j]);
    }
    let mut right_min = h;
    let mut j = i;
    while j + 1 < y.len() {
        j += 1;
        if y[j] > h {
            break;
        }
        right_min = right_min.min(y[j]);
    }
    h - left_min.max(right_min)
}

/// Locate local maxima of every |Gamma2| array with prominence at or above
/// the threshold (default: 10x the array's median), with half-prominence
/// bands and the stealth flag from the paired ratio. Sorted by peak ratio
/// descending (unbounded ratios first), ties by center frequency.
pub fn find_peaks(scan: &FrequencyScan, ratios: &RatioSet, prominence_threshold: Option<f64>) -> Vec<PeakBand> {
    let mut bands = Vec::new();
    for (row, &(k, _i)) in scan.pairing.iter().enumerate() {
        let y = &scan.gamma2[k];
        let threshold = prominence_threshold.unwrap_or_else(|| 10.0 * median_finite(y));
        for idx in 1..y.len().saturating_sub(1) {
            if !y[idx].is_finite() {
                continue;
            }
            if !(y[idx] > y[idx - 1] && y[idx] >= y[idx + 1]) {
                continue;
            }
            let prom = prominence(y, idx);
            if prom < threshold {
                continue;
            }
            let level = y[idx] - prom / 2.0;
            let mut lo = idx;
            while lo > 0 && y[lo - 1].is_finite() && y[lo - 1] >= level && y[lo - 1] <= y[idx] {
                lo -= 1;
            }
            let mut hi = idx;
            while hi + 1 < y.len() && y[hi + 1].is_finite() && y[hi + 1] >= level && y[hi + 1] <= y[idx] {
                hi += 1;
            }
            let r_m = ratios.values[row][idx];
            bands.push(PeakBand {
                output: scan.y2_labels[k].clone(),
                output_index: k,
                center_hz: scan.frequencies_hz[idx],
                f_lo: scan.frequencies_hz[lo],
                f_hi: scan.frequencies_hz[hi],
                magnitude: y[idx],
                r_m,
                stealth: r_m > 1.0,
            });
        }
    }
    bands.sort_by(|a, b| {
        b.r_m
            .total_cmp(&a.r_m)
            .then(a.center_hz.total_cmp(&b.center_hz))
            .then(a.output_index.cmp(&b.output_index))
    });
    bands
}

/// Frequency of the tallest terminal-angle response across all generators;
/// the band around it is the one terminal protection watches.
pub fn global_terminal_angle_peak(system: &StateSpaceSystem, scan: &FrequencyScan) -> f64 {
    use crate::statespace::Mass;
    let n = system.state_map.n_generators();
    let mut best = (0.0_f64, 0usize);
    for g in 0..n {
        let j = system.state_map.index(g, Mass::G, VarKind::Angle);
        for (i, &v) in scan.gamma1[j].iter().enumerate() {
            if v.is_finite() && v > best.0 {
                best = (v, i);
            }
        }
    }
    scan.frequencies_hz[best.1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::{build_susceptance, kron_reduce};
    use crate::statespace::assemble;
    use std::f64::consts::PI;

    fn fixture_scan(grid: &FrequencyGrid) -> (StateSpaceSystem, FrequencyScan) {
        let model = fixtures::two_area();
        let b = build_susceptance(&model.network);
        let rc = kron_reduce(&b, &model).unwrap();
        let sys = assemble(&model, &rc).unwrap();
        let input = sys.input_index("3").unwrap();
        let scan = transfer_magnitudes(&sys, input, grid).unwrap();
        (sys, scan)
    }

    #[test]
    fn grid_points_are_inclusive() {
        let g = FrequencyGrid::new(0.0, 60.0, 0.01).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 6001);
        assert_eq!(pts[0], 0.0);
        assert!((pts[6000] - 60.0).abs() < 1e-9);
    }

    #[test]
    fn high_frequency_rolloff() {
        let model = fixtures::two_area();
        let b = build_susceptance(&model.network);
        let rc = kron_reduce(&b, &model).unwrap();
        let sys = assemble(&model, &rc).unwrap();
        let input = sys.input_index("3").unwrap();
        let grid = FrequencyGrid::new(900.0, 1000.0, 50.0).unwrap();
        let far = transfer_magnitudes(&sys, input, &grid).unwrap();
        let grid_mid = FrequencyGrid::new(25.0, 30.0, 1.0).unwrap();
        let mid = transfer_magnitudes(&sys, input, &grid_mid).unwrap();
        for k in 0..far.gamma2.len() {
            let far_max = far.gamma2[k].iter().copied().fold(0.0, f64::max);
            let mid_max = mid.gamma2[k].iter().copied().fold(0.0, f64::max);
            assert!(far_max < mid_max, "output {k}: no roll-off ({far_max} vs {mid_max})");
        }
    }

    #[test]
    fn two_mass_resonance_blows_up_near_the_pole() {
        let omega_0m = 2.0 * PI * 60.0;
        let (h1, h2, k) = (0.9, 0.25, 20.0);
        let sys = crate::statespace::test_support::two_mass_system(h1, h2, k, omega_0m);
        let f_n = (k * omega_0m * (h1 + h2) / (2.0 * h1 * h2)).sqrt() / (2.0 * PI);
        let grid = FrequencyGrid::new(f_n - 5.0, f_n + 5.0, 0.1).unwrap();
        let scan = transfer_magnitudes(&sys, 0, &grid).unwrap();
        let at = |f: f64| -> f64 {
            let i = ((f - grid.f_start) / grid.step).round() as usize;
            scan.gamma2[0][i]
        };
        assert!(at(f_n - 0.1) > 10.0 * at(f_n - 5.0));
        assert!(at(f_n + 0.1) > 10.0 * at(f_n + 5.0));
    }

    #[test]
    fn ratio_trivial_cases() {
        // identical numerator and denominator -> 1; zero numerator -> 0
        let scan = FrequencyScan {
            frequencies_hz: vec![0.0, 1.0, 2.0],
            gamma1: vec![vec![1.0, 2.0, 3.0]],
            gamma2: vec![vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0]],
            y1_labels: vec!["w".into()],
            y2_labels: vec!["dw1".into(), "dw2".into()],
            pairing: vec![(0, 0), (1, 0)],
        };
        let r = ratio_rm(&scan);
        assert_eq!(r.values[0], vec![1.0, 1.0, 1.0]);
        assert_eq!(r.values[1], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn ratio_floor_marks_unbounded() {
        let scan = FrequencyScan {
            frequencies_hz: vec![0.0, 1.0],
            gamma1: vec![vec![1.0, 1e-15]],
            gamma2: vec![vec![0.5, 0.5]],
            y1_labels: vec!["w".into()],
            y2_labels: vec!["dw".into()],
            pairing: vec![(0, 0)],
        };
        let r = ratio_rm(&scan);
        assert_eq!(r.values[0][0], 0.5);
        assert!(r.values[0][1].is_infinite());
    }

    #[test]
    fn exactly_singular_grid_point_records_infinity() {
        use crate::statespace::{OutputIndexMap, StateIndexMap};
        // integrator pair: A singular, so the f = 0 grid point cannot be
        // solved and must carry the sentinel
        let a = nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let b = nalgebra::DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let c2 = nalgebra::DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let sys = StateSpaceSystem::from_parts(
            a,
            b,
            c2,
            StateIndexMap::new(vec![]),
            OutputIndexMap::new(vec![]),
            vec!["drive".into()],
            vec![(0, 0)],
        )
        .unwrap();
        let grid = FrequencyGrid::new(0.0, 1.0, 0.5).unwrap();
        let scan = transfer_magnitudes(&sys, 0, &grid).unwrap();
        assert!(scan.gamma1[0][0].is_infinite());
        assert!(scan.gamma2[0][0].is_infinite());
        assert!(scan.gamma2[0][1].is_finite());
    }

    #[test]
    fn monotone_array_has_no_peaks() {
        let scan = FrequencyScan {
            frequencies_hz: (0..100).map(|i| i as f64).collect(),
            gamma1: vec![(0..100).map(|i| 100.0 - i as f64).collect()],
            gamma2: vec![(0..100).map(|i| 100.0 - i as f64).collect()],
            y1_labels: vec!["w".into()],
            y2_labels: vec!["dw".into()],
            pairing: vec![(0, 0)],
        };
        let r = ratio_rm(&scan);
        assert!(find_peaks(&scan, &r, None).is_empty());
    }

    #[test]
    fn two_mass_peak_found_within_one_grid_step() {
        let omega_0m = 2.0 * PI * 60.0;
        let (h1, h2, k) = (0.9, 0.25, 20.0);
        let sys = crate::statespace::test_support::two_mass_system(h1, h2, k, omega_0m);
        let f_n = (k * omega_0m * (h1 + h2) / (2.0 * h1 * h2)).sqrt() / (2.0 * PI);
        let grid = FrequencyGrid::default();
        let scan = transfer_magnitudes(&sys, 0, &grid).unwrap();
        let ratios = ratio_rm(&scan);
        let peaks = find_peaks(&scan, &ratios, None);
        let speed_peaks: Vec<&PeakBand> = peaks.iter().filter(|p| p.output_index == 0).collect();
        assert_eq!(speed_peaks.len(), 1, "expected exactly one speed-difference peak");
        assert!(
            (speed_peaks[0].center_hz - f_n).abs() <= grid.step + 1e-12,
            "peak at {} vs closed form {}",
            speed_peaks[0].center_hz,
            f_n
        );
        assert!(speed_peaks[0].f_lo <= speed_peaks[0].center_hz && speed_peaks[0].center_hz <= speed_peaks[0].f_hi);
    }

    #[test]
    fn fixture_peaks_match_eigenfrequencies() {
        let grid = FrequencyGrid::default();
        let (sys, scan) = fixture_scan(&grid);
        let ratios = ratio_rm(&scan);
        let peaks = find_peaks(&scan, &ratios, None);
        let modes = sys.eig_modes().unwrap();
        let light: Vec<f64> = modes
            .lightly_damped(0.05)
            .iter()
            .map(|m| m.frequency_hz)
            .collect();
        assert!(!peaks.is_empty());
        for p in &peaks {
            let nearest = light
                .iter()
                .map(|f| (f - p.center_hz).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(
                nearest <= grid.step + 1e-12,
                "peak {} at {} Hz has no lightly damped mode within one step (nearest {nearest})",
                p.output,
                p.center_hz
            );
        }
    }

    #[test]
    fn doubling_input_column_doubles_magnitudes_exactly() {
        let grid = FrequencyGrid::new(10.0, 30.0, 0.5).unwrap();
        let model = fixtures::two_area();
        let b = build_susceptance(&model.network);
        let rc = kron_reduce(&b, &model).unwrap();
        let sys = assemble(&model, &rc).unwrap();
        let mut sys2 = sys.clone();
        sys2.b *= 2.0;
        let input = sys.input_index("3").unwrap();
        let s1 = transfer_magnitudes(&sys, input, &grid).unwrap();
        let s2 = transfer_magnitudes(&sys2, input, &grid).unwrap();
        for (a, b) in s1.gamma2.iter().flatten().zip(s2.gamma2.iter().flatten()) {
            assert_eq!(*b, 2.0 * *a);
        }
    }

    #[test]
    fn terminal_angle_response_vanishes_above_swing_band() {
        use crate::statespace::{Mass, VarKind};
        let grid = FrequencyGrid::default();
        let (sys, scan) = fixture_scan(&grid);
        let n = sys.state_map.n_generators();
        let theta_rows: Vec<usize> = (0..n)
            .map(|g| sys.state_map.index(g, Mass::G, VarKind::Angle))
            .collect();
        let global_max = theta_rows
            .iter()
            .flat_map(|&j| scan.gamma1[j].iter().copied())
            .fold(0.0, f64::max);
        // above the swing/first-torsional region the terminal angle barely
        // responds, while torsional angle differences keep finite peaks
        let cut = scan.frequencies_hz.iter().position(|&f| f >= 15.0).unwrap();
        for &j in &theta_rows {
            let tail_max = scan.gamma1[j][cut..].iter().copied().fold(0.0, f64::max);
            assert!(
                tail_max < 0.05 * global_max,
                "terminal angle still {tail_max} above 15 Hz (global max {global_max})"
            );
        }
        let ratios = ratio_rm(&scan);
        let peaks = find_peaks(&scan, &ratios, None);
        assert!(
            peaks.iter().any(|p| p.output.starts_with("dth_") && p.center_hz > 15.0),
            "no torsional angle peak above 15 Hz"
        );
    }

    #[test]
    fn grid_refinement_keeps_peak_centers() {
        let coarse = FrequencyGrid::new(5.0, 55.0, 0.02).unwrap();
        let fine = FrequencyGrid::new(5.0, 55.0, 0.01).unwrap();
        let (_, scan_c) = fixture_scan(&coarse);
        let (_, scan_f) = fixture_scan(&fine);
        let rc = ratio_rm(&scan_c);
        let rf = ratio_rm(&scan_f);
        let pc = find_peaks(&scan_c, &rc, None);
        let pf = find_peaks(&scan_f, &rf, None);
        for p in &pc {
            let nearest = pf
                .iter()
                .filter(|q| q.output_index == p.output_index)
                .map(|q| (q.center_hz - p.center_hz).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(
                nearest <= coarse.step + 1e-12,
                "peak {} at {} moved by {nearest}",
                p.output,
                p.center_hz
            );
        }
    }
}
