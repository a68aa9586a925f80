//! Robust outlier flagging: median ± k·MAD per channel.

use super::frame::{Cell, MonitoringSeries};
use crate::error::{Error, Result};

/// Channels with fewer valued cells than this pass through untouched.
const MIN_SUPPORT: usize = 3;

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median and raw (unscaled) median absolute deviation.
pub fn median_mad(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - med).abs()).collect();
    (med, median(&mut dev))
}

/// Flags every observed value outside `[median − k·MAD, median + k·MAD]` as
/// abnormal, on all channels.
pub fn flag_abnormal(series: &MonitoringSeries, k: f64) -> Result<MonitoringSeries> {
    let all: Vec<&str> = series.channels().iter().map(String::as_str).collect();
    flag_abnormal_channels(series, k, &all)
}

/// Same as [`flag_abnormal`] restricted to the named channels.
///
/// Median and MAD are taken over every cell that carries a value, whatever its
/// flag, so a second pass sees the same statistics and flags nothing new.
pub fn flag_abnormal_channels(
    series: &MonitoringSeries,
    k: f64,
    channels: &[&str],
) -> Result<MonitoringSeries> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Config(format!("abnormality factor k must be > 0, got {k}")));
    }
    let mut out = series.clone();
    for id in channels {
        let ch = series.channel_index(id)?;
        let column = series.column(ch);
        let values: Vec<f64> = column.iter().filter_map(Cell::value).collect();
        if values.is_empty() {
            return Err(Error::DegenerateChannel(id.to_string()));
        }
        if values.len() < MIN_SUPPORT {
            continue;
        }
        let (med, mad) = median_mad(&values);
        let (lo, hi) = (med - k * mad, med + k * mad);
        let flagged: Vec<Cell> = column
            .into_iter()
            .map(|c| match c {
                Cell::Observed(v) if v < lo || v > hi => Cell::Abnormal(v),
                other => other,
            })
            .collect();
        out = out.with_column(ch, &flagged)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::frame::{MonitoringFrame, Quality};
    use proptest::prelude::*;

    fn series(values: &[Option<f64>]) -> MonitoringSeries {
        let frames = values
            .iter()
            .enumerate()
            .map(|(i, v)| MonitoringFrame {
                timestamp: i as i64,
                cells: vec![v.map_or(Cell::Missing, Cell::Observed)],
            })
            .collect();
        MonitoringSeries::new(vec!["x".into()], frames).unwrap()
    }

    #[test]
    fn single_spike_on_constant_channel() {
        let mut v = vec![Some(4.5); 20];
        v[7] = Some(450.0);
        let out = flag_abnormal(&series(&v), 6.0).unwrap();
        // brute force: median 4.5, MAD 0, so only values != 4.5 leave the band
        let flagged: Vec<usize> = out
            .column(0)
            .iter()
            .enumerate()
            .filter(|(_, c)| c.quality() == Quality::Abnormal)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(flagged, vec![7]);
        assert_eq!(out.column(0)[7], Cell::Abnormal(450.0));
    }

    #[test]
    fn constant_channel_flags_nothing() {
        let out = flag_abnormal(&series(&[Some(2.0); 10]), 6.0).unwrap();
        assert_eq!(out.count_quality(Quality::Abnormal), 0);
    }

    #[test]
    fn two_points_pass_through() {
        let s = series(&[Some(1.0), Some(1000.0)]);
        assert_eq!(flag_abnormal(&s, 6.0).unwrap(), s);
    }

    #[test]
    fn all_missing_is_degenerate() {
        let s = series(&[None, None, None]);
        assert!(matches!(flag_abnormal(&s, 6.0), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn non_positive_k_rejected() {
        assert!(flag_abnormal(&series(&[Some(1.0); 4]), 0.0).is_err());
    }

    #[test]
    fn band_edges_match_hand_median_mad() {
        // values 1..=9 plus 40: median 5.5, |dev| = 4.5,3.5,..,0.5,0.5,..,3.5,34.5 -> MAD 2.5
        let mut v: Vec<Option<f64>> = (1..=9).map(|i| Some(i as f64)).collect();
        v.push(Some(40.0));
        let out = flag_abnormal(&series(&v), 3.0).unwrap();
        // band [5.5 - 7.5, 5.5 + 7.5] = [-2, 13]
        assert_eq!(out.count_quality(Quality::Abnormal), 1);
        assert_eq!(out.column(0)[9], Cell::Abnormal(40.0));
    }

    proptest! {
        #[test]
        fn idempotent(values in prop::collection::vec(prop::option::weighted(0.9, -50.0f64..50.0), 1..60),
                      k in 0.5f64..8.0) {
            let s = series(&values);
            if let Ok(once) = flag_abnormal(&s, k) {
                let twice = flag_abnormal(&once, k).unwrap();
                prop_assert_eq!(once, twice);
            }
        }
    }
}
