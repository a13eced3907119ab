//! Time-series resampling onto the scheduling grid.

use crate::{CoreError, Result};

/// One timestamped sample of a forecast series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub minutes: f64,
    pub value: f64,
}

/// Resamples a timestamped series onto `n_k` steps of `t_unit_h` hours using
/// previous-value hold: the value of step `k` is the last sample at or
/// before the step's start time.
///
/// The series must start at minute 0 and cover the whole horizon. A
/// multi-sample series is considered to end at `last + (last - second_last)`
/// minutes, i.e. the final sample holds for one trailing gap; a single
/// sample is a constant and covers any horizon.
pub fn resample_profile(samples: &[Sample], t_unit_h: f64, n_k: usize, field: &str) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(CoreError::validation(field, "profile has no samples"));
    }
    for w in samples.windows(2) {
        if w[1].minutes <= w[0].minutes {
            return Err(CoreError::validation(
                field,
                format!(
                    "timestamps must be strictly increasing ({} then {})",
                    w[0].minutes, w[1].minutes
                ),
            ));
        }
    }
    if samples[0].minutes > 0.0 {
        return Err(CoreError::validation(
            field,
            format!("profile must start at minute 0, first sample at {}", samples[0].minutes),
        ));
    }
    let horizon_min = n_k as f64 * t_unit_h * 60.0;
    if samples.len() > 1 {
        let n = samples.len();
        let trailing_gap = samples[n - 1].minutes - samples[n - 2].minutes;
        let coverage_end = samples[n - 1].minutes + trailing_gap;
        // Tiny slack so a 96-sample 15-min series covers a 24 h horizon.
        if coverage_end + 1e-9 < horizon_min {
            return Err(CoreError::validation(
                field,
                format!(
                    "profile covers only {:.1} of {:.1} minutes",
                    coverage_end, horizon_min
                ),
            ));
        }
    }

    let mut out = Vec::with_capacity(n_k);
    let mut cursor = 0usize;
    for k in 0..n_k {
        let t = k as f64 * t_unit_h * 60.0;
        while cursor + 1 < samples.len() && samples[cursor + 1].minutes <= t + 1e-9 {
            cursor += 1;
        }
        out.push(samples[cursor].value);
    }
    Ok(out)
}

/// Parses a two-column `minutes,value` CSV (header row required).
pub fn parse_profile_csv(text: &str, context: &str) -> Result<Vec<Sample>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.to_ascii_lowercase().replace(' ', "").starts_with("minutes,") => {}
        _ => {
            return Err(CoreError::parse(
                context,
                "expected header row `minutes,value`".to_string(),
            ))
        }
    }
    let mut samples = Vec::new();
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let parse_field = |part: Option<&str>, what: &str| -> Result<f64> {
            part.ok_or_else(|| CoreError::parse(context, format!("line {}: missing {what}", lineno + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| CoreError::parse(context, format!("line {}: {what}: {e}", lineno + 1)))
        };
        let minutes = parse_field(parts.next(), "minutes")?;
        let value = parse_field(parts.next(), "value")?;
        samples.push(Sample { minutes, value });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn evenly(values: &[f64], spacing_min: f64) -> Vec<Sample> {
        values
            .iter()
            .enumerate()
            .map(|(i, &value)| Sample { minutes: i as f64 * spacing_min, value })
            .collect()
    }

    #[test]
    fn identity_at_matching_spacing() {
        let values: Vec<f64> = (0..96).map(|i| (i as f64).sin()).collect();
        let samples = evenly(&values, 15.0);
        let out = resample_profile(&samples, 0.25, 96, "p").unwrap();
        assert_eq!(out, values);
    }

    #[test]
    fn hourly_values_repeat_four_times() {
        let values: Vec<f64> = (0..24).map(|i| i as f64 * 10.0).collect();
        let samples = evenly(&values, 60.0);
        let out = resample_profile(&samples, 0.25, 96, "p").unwrap();
        assert_eq!(out.len(), 96);
        for k in 0..96 {
            assert_eq!(out[k], values[k / 4]);
        }
    }

    #[test]
    fn short_series_is_a_coverage_error() {
        // 12 hourly samples cover 12 h; a 96-step 15-min horizon needs 24 h.
        let values: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let samples = evenly(&values, 60.0);
        let err = resample_profile(&samples, 0.25, 96, "p").unwrap_err();
        assert!(err.to_string().contains("covers only"));
    }

    #[test]
    fn values_preserved_at_sample_timestamps() {
        let samples = vec![
            Sample { minutes: 0.0, value: 1.0 },
            Sample { minutes: 30.0, value: 2.0 },
            Sample { minutes: 45.0, value: 3.0 },
            Sample { minutes: 1440.0, value: 4.0 },
        ];
        let out = resample_profile(&samples, 0.25, 96, "p").unwrap();
        assert_eq!(out[0], 1.0);
        assert_eq!(out[2], 2.0);
        assert_eq!(out[3], 3.0);
        // Step 4 at minute 60 still holds the minute-45 value.
        assert_eq!(out[4], 3.0);
    }

    #[test]
    fn single_sample_is_a_constant() {
        let samples = vec![Sample { minutes: 0.0, value: 7.5 }];
        let out = resample_profile(&samples, 1.0, 24, "p").unwrap();
        assert!(out.iter().all(|&v| v == 7.5));
    }

    #[test]
    fn non_monotone_timestamps_rejected() {
        let samples = vec![
            Sample { minutes: 0.0, value: 1.0 },
            Sample { minutes: 10.0, value: 2.0 },
            Sample { minutes: 10.0, value: 3.0 },
        ];
        assert!(resample_profile(&samples, 0.25, 4, "p").is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let text = "minutes,value\n0,1.5\n60,2.5\n120,-3.0\n";
        let samples = parse_profile_csv(text, "test.csv").unwrap();
        assert_eq!(samples.len(), 3);
        assert_eq!(samples[1], Sample { minutes: 60.0, value: 2.5 });
    }

    #[test]
    fn csv_requires_header() {
        assert!(parse_profile_csv("0,1.5\n60,2.5\n", "test.csv").is_err());
    }
}
