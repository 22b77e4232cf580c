//! CSV trace format: header `t_us,ch1,ch2,ch3,ch4,ch5[,label]`, one row per
//! sample, strictly increasing integer microsecond timestamps.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::SignalWindow;
use crate::error::{Error, Result};
use crate::gesture::GestureClass;
use crate::CHANNELS;

/// Continuous multi-channel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub t_us: Vec<i64>,
    pub channels: Vec<Vec<f64>>,
    pub sample_rate_hz: f64,
    /// Empty when the trace carries no label column.
    pub labels: Vec<Option<GestureClass>>,
}

/// Timestamp of sample `i` for a stream starting at `t0_us`.
pub(crate) fn sample_time_us(t0_us: i64, i: usize, sample_rate_hz: f64) -> i64 {
    t0_us + (i as f64 * 1e6 / sample_rate_hz).round() as i64
}

impl Trace {
    pub fn from_channels(channels: Vec<Vec<f64>>, sample_rate_hz: f64, t0_us: i64) -> Result<Self> {
        let n = channels.first().map(Vec::len).unwrap_or(0);
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::RejectedInput("trace channels differ in length".into()));
        }
        Ok(Trace {
            t_us: (0..n).map(|i| sample_time_us(t0_us, i, sample_rate_hz)).collect(),
            channels,
            sample_rate_hz,
            labels: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.t_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_us.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }

    pub fn with_label(mut self, label: GestureClass) -> Self {
        self.labels = vec![Some(label); self.len()];
        self
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file)
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        write_header(&mut w, !self.labels.is_empty())?;
        for i in 0..self.len() {
            let mut row = Vec::with_capacity(CHANNELS + 2);
            row.push(self.t_us[i].to_string());
            row.extend(self.channels.iter().map(|c| c[i].to_string()));
            if let Some(l) = self.labels.get(i) {
                row.push(l.map(|l| l.to_string()).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path, sample_rate_hz: f64) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(file, sample_rate_hz)
    }

    pub fn read_from<R: Read>(input: R, sample_rate_hz: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers()?.clone();
        let expected = ["t_us", "ch1", "ch2", "ch3", "ch4", "ch5"];
        let has_label = match headers.len() {
            6 => false,
            7 if &headers[6] == "label" => true,
            _ => {
                return Err(Error::RejectedInput(format!(
                    "unexpected trace header {:?}",
                    headers.iter().collect::<Vec<_>>()
                )))
            }
        };
        if headers.iter().take(6).ne(expected) {
            return Err(Error::RejectedInput(format!(
                "unexpected trace header {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }

        let mut trace = Trace {
            t_us: Vec::new(),
            channels: vec![Vec::new(); CHANNELS],
            sample_rate_hz,
            labels: Vec::new(),
        };
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| Error::RejectedInput(format!("row {}: {what}", row + 1));
            let t: i64 = rec[0].trim().parse().map_err(|_| bad("bad timestamp"))?;
            if let Some(&prev) = trace.t_us.last() {
                if t <= prev {
                    return Err(bad("timestamps must be strictly increasing"));
                }
            }
            trace.t_us.push(t);
            for c in 0..CHANNELS {
                let v: f64 = rec[c + 1].trim().parse().map_err(|_| bad("bad sample value"))?;
                if !v.is_finite() {
                    return Err(bad("non-finite sample value"));
                }
                trace.channels[c].push(v);
            }
            if has_label {
                let l = rec[6].trim();
                trace.labels.push(if l.is_empty() { None } else { Some(l.parse()?) });
            }
        }
        Ok(trace)
    }
}

fn write_header<W: Write>(w: &mut csv::Writer<W>, label: bool) -> Result<()> {
    let mut header = vec!["t_us", "ch1", "ch2", "ch3", "ch4", "ch5"];
    if label {
        header.push("label");
    }
    w.write_record(&header)?;
    Ok(())
}

/// Writes windows back to back in the trace format, each sample row carrying
/// the window label.
pub fn write_windows_csv(path: &Path, windows: &[SignalWindow]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    write_header(&mut w, true)?;
    let mut last_t = i64::MIN;
    for win in windows {
        for i in 0..win.len() {
            let t = sample_time_us(win.t0_us, i, win.sample_rate_hz);
            if t <= last_t {
                return Err(Error::RejectedInput("window timestamps overlap or go backwards".into()));
            }
            last_t = t;
            let mut row = Vec::with_capacity(CHANNELS + 2);
            row.push(t.to_string());
            row.extend(win.samples().iter().map(|c| c[i].to_string()));
            row.push(win.label.map(|l| l.to_string()).unwrap_or_default());
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a file written by [`write_windows_csv`], splitting it every
/// `window_len` rows.
pub fn read_windows_csv(path: &Path, sample_rate_hz: f64, window_len: usize) -> Result<Vec<SignalWindow>> {
    let trace = Trace::read_csv(path, sample_rate_hz)?;
    if window_len == 0 || trace.len() % window_len != 0 {
        return Err(Error::RejectedInput(format!(
            "{} rows do not divide into windows of {window_len}",
            trace.len()
        )));
    }
    (0..trace.len() / window_len)
        .map(|k| {
            let s = k * window_len;
            let samples = trace.channels.iter().map(|c| c[s..s + window_len].to_vec()).collect();
            let label = trace.labels.get(s).copied().flatten();
            SignalWindow::new(samples, sample_rate_hz, trace.t_us[s], label)
        })
        .collect()
}
