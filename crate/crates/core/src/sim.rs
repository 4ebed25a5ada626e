//! Event generation from intensity video.
//!
//! Each pixel tracks a reference log intensity. Between two frames the log
//! intensity is interpolated linearly in time; every time it moves a full
//! contrast threshold `C` away from the reference, the pixel fires an event
//! whose polarity is the sign of the change, and the reference steps by
//! exactly `±C`. Event times are the interpolated crossing instants rounded
//! to the nearest microsecond.
//!
//! Log intensities are measured relative to each pixel's first frame, so a
//! global gain on the input cancels out (exactly, for power-of-two gains).

use rayon::prelude::*;
use thiserror::Error;

use crate::events::{Event, EventStream, Polarity, SensorGeometry};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {index}: timestamp {timestamp} does not follow {previous}")]
    NonIncreasingTimestamp {
        index: usize,
        previous: u64,
        timestamp: u64,
    },
    #[error("frame {index}: intensity {value} at ({x}, {y}) must be positive and finite")]
    NonPositiveIntensity {
        index: usize,
        x: usize,
        y: usize,
        value: f64,
    },
    #[error("frame {index}: size {found} differs from {expected}")]
    SizeMismatch {
        index: usize,
        expected: String,
        found: String,
    },
    #[error("frame of {width}x{height} needs {expected} values, got {found}")]
    BadFrame {
        width: usize,
        height: usize,
        expected: usize,
        found: usize,
    },
    #[error("contrast threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
}

/// Linear intensity image captured at `timestamp` microseconds.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
    timestamp: u64,
}

impl IntensityFrame {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f64>,
        timestamp: u64,
    ) -> Result<Self, SimError> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(SimError::BadFrame {
                width,
                height,
                expected: width * height,
                found: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
            timestamp,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamp(&self) -> u64 {
        self.timestamp
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * gain).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimConfig {
    pub contrast_threshold: f64,
    pub refractory_period_us: u64,
}

impl SimConfig {
    pub fn new(contrast_threshold: f64) -> Self {
        Self {
            contrast_threshold,
            refractory_period_us: 0,
        }
    }
}

fn check_frames(frames: &[IntensityFrame]) -> Result<SensorGeometry, SimError> {
    if frames.len() < 2 {
        return Err(SimError::TooFewFrames(frames.len()));
    }
    let (w, h) = (frames[0].width, frames[0].height);
    let geometry = SensorGeometry::new(w as u32, h as u32).map_err(|_| SimError::BadFrame {
        width: w,
        height: h,
        expected: w * h,
        found: frames[0].values.len(),
    })?;
    for (index, f) in frames.iter().enumerate() {
        if (f.width, f.height) != (w, h) {
            return Err(SimError::SizeMismatch {
                index,
                expected: format!("{w}x{h}"),
                found: format!("{}x{}", f.width, f.height),
            });
        }
        if index > 0 && f.timestamp <= frames[index - 1].timestamp {
            return Err(SimError::NonIncreasingTimestamp {
                index,
                previous: frames[index - 1].timestamp,
                timestamp: f.timestamp,
            });
        }
        if let Some(i) = f.values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::NonPositiveIntensity {
                index,
                x: i % w,
                y: i / w,
                value: f.values[i],
            });
        }
    }
    Ok(geometry)
}

/// Events of one pixel, in time order.
fn simulate_pixel(
    frames: &[IntensityFrame],
    pixel: usize,
    config: &SimConfig,
) -> Vec<(u64, Polarity)> {
    let c = config.contrast_threshold;
    let base = frames[0].values[pixel];
    let mut out = Vec::new();
    // Reference log intensity is `level * c` relative to the first frame.
    let mut level: i64 = 0;
    let mut previous = 0.0f64;
    let mut last_fired: Option<u64> = None;

    for pair in frames.windows(2) {
        let (t0, t1) = (pair[0].timestamp, pair[1].timestamp);
        let current = (pair[1].values[pixel] / base).ln();
        let dt = (t1 - t0) as f64;
        let delta = current - previous;

        let mut fire = |target: f64, p: Polarity, out: &mut Vec<(u64, Polarity)>| {
            let frac = (target - previous) / delta;
            let t = t0 + ((frac * dt).round() as u64).min(t1 - t0);
            let ready = last_fired.is_none_or(|l| t - l >= config.refractory_period_us);
            if ready {
                out.push((t, p));
                last_fired = Some(t);
            }
        };

        while current >= (level + 1) as f64 * c {
            level += 1;
            fire(level as f64 * c, Polarity::On, &mut out);
        }
        while current <= (level - 1) as f64 * c {
            level -= 1;
            fire(level as f64 * c, Polarity::Off, &mut out);
        }
        previous = current;
    }
    out
}

/// Runs the sensor model over `frames` and returns the merged event stream,
/// ordered by time and then by row-major pixel index.
pub fn simulate(frames: &[IntensityFrame], config: &SimConfig) -> Result<EventStream, SimError> {
    let c = config.contrast_threshold;
    if !(c.is_finite() && c > 0.0) {
        return Err(SimError::InvalidThreshold(c));
    }
    let geometry = check_frames(frames)?;
    let width = geometry.width();

    let per_pixel: Vec<Vec<(u64, Polarity)>> = (0..geometry.pixel_count())
        .into_par_iter()
        .map(|pixel| simulate_pixel(frames, pixel, config))
        .collect();

    let mut events: Vec<(usize, Event)> = per_pixel
        .into_iter()
        .enumerate()
        .flat_map(|(pixel, evs)| {
            let (x, y) = ((pixel % width) as u16, (pixel / width) as u16);
            evs.into_iter()
                .map(move |(t, p)| (pixel, Event::new(x, y, t, p)))
        })
        .collect();
    // Stable: same-pixel events with equal timestamps keep generation order.
    events.sort_by_key(|(pixel, e)| (e.t, *pixel));
    Ok(EventStream::new(
        geometry,
        events.into_iter().map(|(_, e)| e).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(values: Vec<f64>, width: usize, t: u64) -> IntensityFrame {
        let height = values.len() / width;
        IntensityFrame::new(width, height, values, t).unwrap()
    }

    #[test]
    fn constant_intensity_is_silent() {
        let frames: Vec<_> = (0..5).map(|i| frame(vec![3.0; 6], 3, i * 100)).collect();
        let s = simulate(&frames, &SimConfig::new(0.1)).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.geometry(), SensorGeometry::new(3, 2).unwrap());
    }

    #[test]
    fn ramp_of_three_and_a_half_thresholds() {
        let c = 0.2f64;
        let frames = vec![
            frame(vec![1.0], 1, 0),
            frame(vec![(3.5 * c).exp()], 1, 1000),
        ];
        let s = simulate(&frames, &SimConfig::new(c)).unwrap();
        // Crossings at 1000 * k / 3.5 = 285.71, 571.43, 857.14 µs.
        let expected: Vec<Event> = [286, 571, 857]
            .iter()
            .map(|&t| Event::new(0, 0, t, Polarity::On))
            .collect();
        assert_eq!(s.events(), &expected[..]);
    }

    #[test]
    fn ramp_matches_fine_step_integration() {
        // Independent check: march L(t) on a 1 ns grid and record threshold crossings.
        let c = 0.15f64;
        let rise = 3.5 * c;
        let mut crossings = Vec::new();
        let mut k = 1;
        let steps = 1_000_000u64;
        for i in 0..=steps {
            let t = i as f64 * 1000.0 / steps as f64;
            let l = rise * t / 1000.0;
            if k <= 3 && l >= k as f64 * c {
                crossings.push(t.round() as u64);
                k += 1;
            }
        }
        let frames = vec![
            frame(vec![2.0], 1, 0),
            frame(vec![2.0 * rise.exp()], 1, 1000),
        ];
        let s = simulate(&frames, &SimConfig::new(c)).unwrap();
        let ts: Vec<u64> = s.events().iter().map(|e| e.t).collect();
        assert_eq!(ts, crossings);
    }

    #[test]
    fn falling_then_rising() {
        let c = 0.5;
        let frames = vec![
            frame(vec![1.0], 1, 0),
            frame(vec![(-1.2f64).exp()], 1, 100),
            frame(vec![1.0], 1, 200),
        ];
        let s = simulate(&frames, &SimConfig::new(c)).unwrap();
        let p: Vec<Polarity> = s.events().iter().map(|e| e.p).collect();
        // Down two thresholds to -1.0, then back up through -0.5 and 0.0.
        assert_eq!(
            p,
            vec![Polarity::Off, Polarity::Off, Polarity::On, Polarity::On]
        );
    }

    #[test]
    fn refractory_suppresses_but_reference_keeps_stepping() {
        let c = 0.1;
        let frames = vec![
            frame(vec![1.0], 1, 0),
            frame(vec![(1.05f64).exp()], 1, 1000),
        ];
        let all = simulate(&frames, &SimConfig::new(c)).unwrap();
        assert_eq!(all.len(), 10);
        let cfg = SimConfig {
            contrast_threshold: c,
            refractory_period_us: 250,
        };
        let s = simulate(&frames, &cfg).unwrap();
        let ts: Vec<u64> = s.events().iter().map(|e| e.t).collect();
        // Crossings every ~95.2 µs; only those >= 250 µs after the last emitted one survive.
        let mut expected = Vec::new();
        for t in all.events().iter().map(|e| e.t) {
            if expected.last().is_none_or(|&l: &u64| t - l >= 250) {
                expected.push(t);
            }
        }
        assert_eq!(ts, expected);
        for w in ts.windows(2) {
            assert!(w[1] - w[0] >= 250);
        }
    }

    #[test]
    fn simultaneous_events_sorted_row_major() {
        let frames = vec![frame(vec![1.0; 4], 2, 0), frame(vec![2.0; 4], 2, 10)];
        let s = simulate(&frames, &SimConfig::new(0.5)).unwrap();
        let px: Vec<(u64, u16, u16)> = s.events().iter().map(|e| (e.t, e.y, e.x)).collect();
        let mut sorted = px.clone();
        sorted.sort();
        assert_eq!(px, sorted);
        assert_eq!(s.len(), 4);
    }

    #[test]
    fn invalid_input_is_rejected() {
        let good = frame(vec![1.0; 4], 2, 0);
        assert_eq!(
            simulate(std::slice::from_ref(&good), &SimConfig::new(0.1)),
            Err(SimError::TooFewFrames(1))
        );
        let same_time = frame(vec![1.0; 4], 2, 0);
        assert!(matches!(
            simulate(&[good.clone(), same_time], &SimConfig::new(0.1)),
            Err(SimError::NonIncreasingTimestamp { index: 1, .. })
        ));
        let dark = frame(vec![1.0, 0.0, 1.0, 1.0], 2, 5);
        assert!(matches!(
            simulate(&[good.clone(), dark], &SimConfig::new(0.1)),
            Err(SimError::NonPositiveIntensity {
                index: 1,
                x: 1,
                y: 0,
                ..
            })
        ));
        let other = frame(vec![1.0; 6], 3, 5);
        assert!(matches!(
            simulate(&[good.clone(), other], &SimConfig::new(0.1)),
            Err(SimError::SizeMismatch { index: 1, .. })
        ));
        let next = frame(vec![1.0; 4], 2, 5);
        assert!(simulate(&[good, next], &SimConfig::new(0.0)).is_err());
        assert!(IntensityFrame::new(2, 2, vec![1.0; 3], 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_frames() -> impl Strategy<Value = Vec<IntensityFrame>> {
            (2usize..6, 1usize..4, 1usize..4).prop_flat_map(|(n, w, h)| {
                (
                    prop::collection::vec(prop::collection::vec(0.05f64..20.0, w * h), n),
                    prop::collection::vec(1u64..5_000, n),
                )
                    .prop_map(move |(vals, gaps)| {
                        let mut t = 0;
                        vals.into_iter()
                            .zip(gaps)
                            .map(|(v, g)| {
                                t += g;
                                IntensityFrame::new(w, h, v, t).unwrap()
                            })
                            .collect()
                    })
            })
        }

        proptest! {
            #[test]
            fn power_of_two_gain_is_invisible(frames in arb_frames(), e in -8i32..8, c in 0.05f64..1.0) {
                let gain = 2f64.powi(e);
                let scaled: Vec<_> = frames.iter().map(|f| f.scaled(gain)).collect();
                let cfg = SimConfig::new(c);
                prop_assert_eq!(simulate(&frames, &cfg).unwrap(), simulate(&scaled, &cfg).unwrap());
            }

            #[test]
            fn brightening_only_yields_on_events(frames in arb_frames(), c in 0.05f64..1.0) {
                let mut frames = frames;
                frames.truncate(2);
                let brighter: Vec<f64> = frames[0].values().iter().map(|v| v * 1.7).collect();
                frames[1] = IntensityFrame::new(frames[0].width(), frames[0].height(), brighter, frames[1].timestamp()).unwrap();
                let s = simulate(&frames, &SimConfig::new(c)).unwrap();
                prop_assert!(s.events().iter().all(|e| e.p == Polarity::On));
            }

            #[test]
            fn per_segment_count_bound(frames in arb_frames(), c in 0.05f64..1.0) {
                let pair = &frames[..2];
                let s = simulate(pair, &SimConfig::new(c)).unwrap();
                prop_assert!(s.validate().is_empty());
                let w = pair[0].width();
                for pixel in 0..pair[0].values().len() {
                    let dl = (pair[1].values()[pixel].ln() - pair[0].values()[pixel].ln()).abs();
                    let n = s
                        .events()
                        .iter()
                        .filter(|e| e.y as usize * w + e.x as usize == pixel)
                        .count();
                    prop_assert!(n <= (dl / c).floor() as usize + 1);
                }
            }
        }
    }
}
