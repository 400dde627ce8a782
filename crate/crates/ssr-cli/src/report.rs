//! Vulnerability summary built from prior `peaks` and `simulate` outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

struct PeakRow {
    output: String,
    center: f64,
    lo: f64,
    hi: f64,
    magnitude: f64,
    r_m: f64,
    stealth: bool,
}

struct SeverityEntry {
    segment: usize,
    r_omega: Option<f64>, // None = unbounded
}

fn parse_ratio(s: &str) -> Result<Option<f64>, String> {
    match s {
        "inf" => Ok(None),
        "undefined" => Ok(Some(0.0)),
        v => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| format!("bad ratio value `{v}`")),
    }
}

fn read_peaks(path: &Path) -> Result<Vec<PeakRow>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(format!("{}:{}: expected 7 columns", path.display(), i + 1));
        }
        let num = |s: &str| -> Result<f64, String> {
            if s == "inf" {
                Ok(f64::INFINITY)
            } else {
                s.parse::<f64>().map_err(|_| format!("bad number `{s}`"))
            }
        };
        rows.push(PeakRow {
            output: f[0].to_string(),
            center: num(f[1])?,
            lo: num(f[2])?,
            hi: num(f[3])?,
            magnitude: num(f[4])?,
            r_m: num(f[5])?,
            stealth: f[6] == "true",
        });
    }
    Ok(rows)
}

fn read_severity(path: &Path) -> Result<BTreeMap<String, Vec<SeverityEntry>>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut map: BTreeMap<String, Vec<SeverityEntry>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(format!("{}:{}: expected 8 columns", path.display(), i + 1));
        }
        let entry = SeverityEntry {
            segment: f[1].parse().map_err(|_| format!("bad segment `{}`", f[1]))?,
            r_omega: parse_ratio(f[4])?,
        };
        map.entry(f[0].to_string()).or_default().push(entry);
    }
    Ok(map)
}

/// Generator id embedded in an output label like `dw_G1_s1_s2`.
fn generator_of(output: &str) -> Option<&str> {
    output.split('_').nth(1)
}

pub fn render(peaks_path: &Path, severity_path: &Path) -> Result<String, String> {
    let peaks = read_peaks(peaks_path)?;
    let severity = read_severity(severity_path)?;

    let mut out = String::new();
    out.push_str("Vulnerability summary\n");
    out.push_str("=====================\n");
    if peaks.is_empty() {
        out.push_str("no vulnerable bands found\n");
        return Ok(out);
    }

    out.push_str(&format!(
        "{:<4} {:<16} {:<10} {:>9} {:>18} {:>12} {:>10} {:>8}\n",
        "rank", "output", "generator", "f_hz", "band_hz", "peak_mag", "r_m", "stealth"
    ));
    for (rank, p) in peaks.iter().enumerate() {
        let gen = generator_of(&p.output).unwrap_or("?");
        let rm = if p.r_m.is_infinite() { "unbounded".to_string() } else { format!("{:.3}", p.r_m) };
        out.push_str(&format!(
            "{:<4} {:<16} {:<10} {:>9.2} {:>8.2}-{:<9.2} {:>12.4e} {:>10} {:>8}\n",
            rank + 1,
            p.output,
            gen,
            p.center,
            p.lo,
            p.hi,
            p.magnitude,
            rm,
            p.stealth
        ));
    }

    // cross-check: a generator with a stealth band whose simulated severity
    // also shows R_w > 1 has its frequency-domain claim confirmed
    let mut notes = Vec::new();
    let mut flagged: Vec<&str> = peaks
        .iter()
        .filter(|p| p.stealth)
        .filter_map(|p| generator_of(&p.output))
        .collect();
    flagged.sort_unstable();
    flagged.dedup();
    for gen in flagged {
        let Some(entries) = severity.get(gen) else { continue };
        let worst = entries.iter().max_by(|a, b| {
            let av = a.r_omega.unwrap_or(f64::INFINITY);
            let bv = b.r_omega.unwrap_or(f64::INFINITY);
            av.total_cmp(&bv)
        });
        if let Some(w) = worst {
            if w.r_omega.is_none_or(|v| v > 1.0) {
                let shown = w.r_omega.map_or("unbounded".to_string(), |v| format!("{v:.3}"));
                notes.push(format!(
                    "note: {gen} stealth bands (R_M > 1) confirmed by simulation: \
                     R_w = {shown} on shaft segment {}",
                    w.segment
                ));
            }
        }
    }
    notes.sort();
    if !notes.is_empty() {
        out.push('\n');
        for n in notes {
            out.push_str(&n);
            out.push('\n');
        }
    }
    Ok(out)
}
