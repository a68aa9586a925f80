use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::frame::MonitoringSeries;
use super::normalize::ChannelScale;
use crate::error::{Error, Result};

/// Chronological train / validation / test ranges over window indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl Split {
    /// 70 / 10 / 20 with round-half-up on the first two shares; the remainder
    /// goes to test.
    pub fn chronological(n: usize) -> Split {
        let train = (7 * n + 5) / 10;
        let val = ((n + 5) / 10).min(n - train);
        Split {
            train: 0..train,
            validation: train..train + val,
            test: train + val..n,
        }
    }
}

/// Supervised windows over one channel: `inputs[i]` is `window` consecutive
/// values and `targets[i]` the value right after them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDataset {
    pub channel: String,
    pub window: usize,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    /// Frame index of the first value of each window.
    pub starts: Vec<usize>,
    pub split: Split,
    /// Scale used to bring values back to physical units.
    pub scale: ChannelScale,
}

impl ForecastDataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Frames touched by the training windows, inputs and targets included.
    pub fn train_frame_range(&self) -> Range<usize> {
        match self.split.train.clone().last() {
            Some(last) => self.starts[self.split.train.start]..self.starts[last] + self.window + 1,
            None => 0..0,
        }
    }

    /// Frame ranges (train, validation, test), each spanning inputs and targets.
    pub fn frame_ranges(&self) -> [Range<usize>; 3] {
        let span = |r: &Range<usize>| match r.clone().last() {
            Some(last) => self.starts[r.start]..self.starts[last] + self.window + 1,
            None => 0..0,
        };
        [span(&self.split.train), span(&self.split.validation), span(&self.split.test)]
    }

    pub fn subset(&self, range: Range<usize>) -> (Vec<Vec<f64>>, Vec<f64>) {
        (self.inputs[range.clone()].to_vec(), self.targets[range].to_vec())
    }
}

/// Builds sliding windows of length `window` over `channel`. A window and its
/// target must all be clean (observed or imputed); windows touching a missing
/// or abnormal cell are skipped.
pub fn make_windows(series: &MonitoringSeries, window: usize, channel: &str) -> Result<ForecastDataset> {
    make_windows_scaled(series, window, channel, ChannelScale::IDENTITY)
}

/// As [`make_windows`], recording the scale the series was normalized with.
pub fn make_windows_scaled(
    series: &MonitoringSeries,
    window: usize,
    channel: &str,
    scale: ChannelScale,
) -> Result<ForecastDataset> {
    if window == 0 {
        return Err(Error::Config("window length must be positive".into()));
    }
    let ch = series.channel_index(channel)?;
    let values: Vec<Option<f64>> = series.column(ch).iter().map(|c| c.clean_value()).collect();
    let clean = values.iter().filter(|v| v.is_some()).count();
    if clean < window + 1 {
        return Err(Error::InsufficientData(format!(
            "channel `{channel}` has {clean} clean frames, need at least {}",
            window + 1
        )));
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut starts = Vec::new();
    // run = length of the clean run ending at the current index
    let mut run = 0usize;
    for (i, v) in values.iter().enumerate() {
        if v.is_some() {
            run += 1;
        } else {
            run = 0;
        }
        if run > window {
            let start = i - window;
            inputs.push(values[start..i].iter().map(|v| v.unwrap()).collect());
            targets.push(v.unwrap());
            starts.push(start);
        }
    }
    let split = Split::chronological(targets.len());
    Ok(ForecastDataset {
        channel: channel.to_string(),
        window,
        inputs,
        targets,
        starts,
        split,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::frame::{Cell, MonitoringFrame};
    use proptest::prelude::*;

    fn series(n: usize, missing: &[usize]) -> MonitoringSeries {
        let frames = (0..n)
            .map(|i| MonitoringFrame {
                timestamp: i as i64,
                cells: vec![if missing.contains(&i) { Cell::Missing } else { Cell::Observed(i as f64) }],
            })
            .collect();
        MonitoringSeries::new(vec!["x".into()], frames).unwrap()
    }

    #[test]
    fn twelve_clean_frames_give_two_windows() {
        let d = make_windows(&series(12, &[]), 10, "x").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.inputs[1], (1..11).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(d.targets, vec![10.0, 11.0]);
    }

    #[test]
    fn gap_in_the_middle_breaks_every_window() {
        let d = make_windows(&series(12, &[6]), 10, "x").unwrap();
        assert_eq!(d.len(), 0);
    }

    #[test]
    fn hundred_frames_split_63_9_18() {
        let d = make_windows(&series(100, &[]), 10, "x").unwrap();
        assert_eq!(d.len(), 90);
        assert_eq!(d.split.train, 0..63);
        assert_eq!(d.split.validation, 63..72);
        assert_eq!(d.split.test, 72..90);
    }

    #[test]
    fn too_few_clean_frames() {
        assert!(matches!(
            make_windows(&series(10, &[]), 10, "x"),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn abnormal_cells_break_windows() {
        let s = series(13, &[]);
        let mut col = s.column(0);
        col[0] = Cell::Abnormal(0.0);
        let s = s.with_column(0, &col).unwrap();
        assert_eq!(make_windows(&s, 10, "x").unwrap().len(), 2);
    }

    #[test]
    fn train_frame_range_covers_targets() {
        let d = make_windows(&series(100, &[]), 10, "x").unwrap();
        assert_eq!(d.train_frame_range(), 0..73);
    }

    proptest! {
        #[test]
        fn window_count_is_n_minus_l(n in 2usize..300, l in 1usize..20) {
            prop_assume!(n > l);
            let d = make_windows(&series(n, &[]), l, "x").unwrap();
            prop_assert_eq!(d.len(), n - l);
        }

        #[test]
        fn split_is_a_chronological_partition(n in 0usize..5000) {
            let s = Split::chronological(n);
            prop_assert_eq!(s.train.start, 0);
            prop_assert_eq!(s.train.end, s.validation.start);
            prop_assert_eq!(s.validation.end, s.test.start);
            prop_assert_eq!(s.test.end, n);
        }
    }
}
