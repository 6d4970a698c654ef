//! Position-series files and machine-readable fit reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{GmwmxError, Result};
use crate::estimator::FitResult;

/// Regularly sampled series with a missingness mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    /// Epochs in MJD on a regular grid.
    pub epochs: Vec<f64>,
    /// Observed values; zero where the mask is zero.
    pub values: Vec<f64>,
    /// 1 where observed.
    pub mask: Vec<u8>,
    pub sampling_period: f64,
    pub offsets: Vec<f64>,
}

impl TimeSeries {
    /// Series on the grid `t0 + i * period`; values at masked positions are set to zero.
    pub fn regular(t0: f64, period: f64, values: Vec<f64>, mask: Vec<u8>) -> Self {
        assert_eq!(values.len(), mask.len(), "values and mask differ in length");
        let epochs = (0..values.len()).map(|i| t0 + i as f64 * period).collect();
        let values = values.iter().zip(&mask).map(|(&v, &z)| if z == 0 { 0.0 } else { v }).collect();
        TimeSeries { epochs, values, mask, sampling_period: period, offsets: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| GmwmxError::Parse { line, message: format!("not a finite number: '{tok}'") })
}

/// Parses the text of a `.mom` file.
///
/// Header lines start with `#`; `# sampling period <p>` and `# offset <mjd>` are recognized
/// and other comments are ignored. Data lines hold `<mjd> <value>`. Missing grid epochs
/// get value 0 and mask 0.
pub fn parse_mom(text: &str) -> Result<TimeSeries> {
    let mut period = 1.0;
    let mut offsets = Vec::new();
    let mut rows: Vec<(f64, f64, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        if let Some(h) = s.strip_prefix('#') {
            let toks: Vec<&str> = h.split_whitespace().collect();
            match toks.as_slice() {
                [a, b, v] if a.eq_ignore_ascii_case("sampling") && b.eq_ignore_ascii_case("period") => {
                    period = parse_f64(v, line)?;
                    if period <= 0.0 {
                        return Err(GmwmxError::Parse { line, message: "sampling period must be positive".into() });
                    }
                }
                [a, v] if a.eq_ignore_ascii_case("offset") => offsets.push(parse_f64(v, line)?),
                _ => {}
            }
            continue;
        }
        let toks: Vec<&str> = s.split_whitespace().collect();
        if toks.len() < 2 {
            return Err(GmwmxError::Parse { line, message: "expected '<mjd> <value>'".into() });
        }
        let t = parse_f64(toks[0], line)?;
        let v = parse_f64(toks[1], line)?;
        if let Some(&(prev, _, _)) = rows.last() {
            if t == prev {
                return Err(GmwmxError::DuplicateEpoch { line });
            }
            if t < prev {
                return Err(GmwmxError::NonMonotoneEpochs { line });
            }
        }
        rows.push((t, v, line));
    }
    let Some(&(t0, _, _)) = rows.first() else {
        return Err(GmwmxError::Parse { line: text.lines().count().max(1), message: "no data lines".into() });
    };
    let t_end = rows.last().unwrap().0;
    let n = ((t_end - t0) / period).round() as usize + 1;
    let mut values = vec![0.0; n];
    let mut mask = vec![0u8; n];
    for &(t, v, line) in &rows {
        let pos = (t - t0) / period;
        let i = pos.round();
        if (pos - i).abs() > 1e-6 {
            return Err(GmwmxError::Parse { line, message: format!("epoch {t} is off the sampling grid") });
        }
        let i = i as usize;
        if mask[i] != 0 {
            return Err(GmwmxError::DuplicateEpoch { line });
        }
        values[i] = v;
        mask[i] = 1;
    }
    let mut ts = TimeSeries::regular(t0, period, values, mask);
    ts.offsets = offsets;
    Ok(ts)
}

pub fn read_mom(path: &Path) -> Result<TimeSeries> {
    parse_mom(&fs::read_to_string(path)?)
}

/// Formats a series as `.mom` text; masked epochs are omitted.
pub fn format_mom(ts: &TimeSeries) -> String {
    let mut out = String::new();
    writeln!(out, "# sampling period {}", ts.sampling_period).unwrap();
    for o in &ts.offsets {
        writeln!(out, "# offset {o}").unwrap();
    }
    for ((t, v), z) in ts.epochs.iter().zip(&ts.values).zip(&ts.mask) {
        if *z != 0 {
            writeln!(out, "{t} {v:e}").unwrap();
        }
    }
    out
}

pub fn write_mom(path: &Path, ts: &TimeSeries) -> Result<()> {
    fs::write(path, format_mom(ts))?;
    Ok(())
}

/// Shortest-round-trip scientific notation; non-finite values become `null`.
fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

fn string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

/// Options that change the content of [`format_fit`].
#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// Omit stage timings, making output byte-identical across runs.
    pub omit_timings: bool,
    /// Key-value pairs echoed under `config`, in order.
    pub config: Vec<(String, String)>,
}

/// JSON report of a fit with fixed key order and 17 significant digits.
pub fn format_fit(fit: &FitResult, opts: &ReportOptions) -> String {
    let mut o = String::from("{\n  \"beta\": [\n");
    let p = fit.beta.len();
    for i in 0..p {
        let (lo, hi) = fit.intervals[i];
        writeln!(
            o,
            "    {{\"name\": {}, \"estimate\": {}, \"std_error\": {}, \"ci_low\": {}, \"ci_high\": {}}}{}",
            string(&fit.beta_names[i]),
            num(fit.beta[i]),
            num(fit.std_errors[i]),
            num(lo),
            num(hi),
            if i + 1 < p { "," } else { "" }
        )
        .unwrap();
    }
    o.push_str("  ],\n  \"gamma\": [\n");
    let names = fit.noise.param_names();
    let params = fit.noise.params();
    for (i, (n, v)) in names.iter().zip(&params).enumerate() {
        writeln!(
            o,
            "    {{\"name\": {}, \"value\": {}}}{}",
            string(n),
            num(*v),
            if i + 1 < params.len() { "," } else { "" }
        )
        .unwrap();
    }
    let m = &fit.missingness;
    write!(
        o,
        "  ],\n  \"noise_model\": {},\n  \"missingness\": {{\"p1\": {}, \"p2\": {}, \"mu\": {}}},\n  \"wv\": [\n",
        string(&fit.noise.to_string()),
        num(m.p1),
        num(m.p2),
        num(m.mu())
    )
    .unwrap();
    let j = fit.wv_empirical.values.len();
    for s in 0..j {
        writeln!(
            o,
            "    {{\"scale\": {}, \"empirical\": {}, \"fitted\": {}}}{}",
            s + 1,
            num(fit.wv_empirical.values[s]),
            num(fit.wv_fitted[s]),
            if s + 1 < j { "," } else { "" }
        )
        .unwrap();
    }
    write!(
        o,
        "  ],\n  \"objective\": {},\n  \"converged\": {},\n  \"ci_level\": {},\n  \"ci_method\": {},\n",
        num(fit.objective),
        fit.converged,
        num(fit.ci_level),
        string(fit.interval_method.as_str())
    )
    .unwrap();
    if !opts.omit_timings {
        o.push_str("  \"timings\": {");
        let parts: Vec<String> = fit.timings.iter().map(|(k, v)| format!("{}: {}", string(k), num(*v))).collect();
        o.push_str(&parts.join(", "));
        o.push_str("},\n");
    }
    o.push_str("  \"config\": {");
    let parts: Vec<String> = opts.config.iter().map(|(k, v)| format!("{}: {}", string(k), string(v))).collect();
    o.push_str(&parts.join(", "));
    write!(o, "}},\n  \"version\": {}\n}}\n", string(env!("CARGO_PKG_VERSION"))).unwrap();
    o
}

pub fn write_fit(path: &Path, fit: &FitResult, opts: &ReportOptions) -> Result<()> {
    fs::write(path, format_fit(fit, opts))?;
    Ok(())
}

/// CSV table of the empirical wavelet variance.
pub fn format_wv_csv(values: &[f64], counts: &[usize]) -> String {
    let mut o = String::from("scale,n_coefficients,wv\n");
    for (j, (v, c)) in values.iter().zip(counts).enumerate() {
        writeln!(o, "{},{},{}", j + 1, c, num(*v)).unwrap();
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_become_masked_zeros() {
        let ts = parse_mom("# offset 55432\n0 1.5\n1 2.5\n3 -1\n").unwrap();
        assert_eq!(ts.values, vec![1.5, 2.5, 0.0, -1.0]);
        assert_eq!(ts.mask, vec![1, 1, 0, 1]);
        assert_eq!(ts.offsets, vec![55432.0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_mom("# only header\n"), Err(GmwmxError::Parse { .. })));
        assert!(matches!(parse_mom("0 1\n0 2\n"), Err(GmwmxError::DuplicateEpoch { line: 2 })));
        assert!(matches!(parse_mom("1 1\n0 2\n"), Err(GmwmxError::NonMonotoneEpochs { line: 2 })));
        assert!(matches!(parse_mom("0 1\n1 x\n"), Err(GmwmxError::Parse { line: 2, .. })));
    }

    #[test]
    fn mom_round_trip() {
        let mut ts = TimeSeries::regular(50000.0, 1.0, vec![0.1, -2.0, 3.0, 7.25e-3], vec![1, 0, 1, 1]);
        ts.offsets = vec![50001.0];
        assert_eq!(parse_mom(&format_mom(&ts)).unwrap(), ts);
    }
}
