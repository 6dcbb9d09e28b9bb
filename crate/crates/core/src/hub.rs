//! Sensor hub: samples ECG and temperature, frames each reading as one CSV
//! line and writes it to a simulated serial link read by the health monitor.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pacing::Pacer;
use crate::rng::RandomStream;
use crate::world::{EcgTempSample, LeadStatus};

pub const DEFAULT_CADENCE: Duration = Duration::from_millis(100);
pub const DEFAULT_BAUD: u32 = 9600;
/// Byte written over a corrupted position. Never valid in a frame.
pub const CORRUPTION_BYTE: u8 = b'#';

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HubError {
    #[error("invalid field {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("malformed frame {line:?}: {reason}")]
    MalformedFrame { line: String, reason: String },
}

/// One newline-terminated CSV line: `ecg,ambient,object,lead\n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerialFrame {
    pub line: String,
}

impl SerialFrame {
    pub fn as_bytes(&self) -> &[u8] {
        self.line.as_bytes()
    }
}

pub fn frame_csv(ecg: i32, ambient_c: f64, object_c: f64, lead: u8) -> Result<SerialFrame, HubError> {
    let finite = |field, v: f64| {
        if v.is_finite() {
            Ok(())
        } else {
            Err(HubError::InvalidField { field, reason: format!("{v} is not finite") })
        }
    };
    finite("ambientTempC", ambient_c)?;
    finite("objectTempC", object_c)?;
    if lead > 1 {
        return Err(HubError::InvalidField { field: "leadStatus", reason: format!("{lead} not in {{0,1}}") });
    }
    Ok(SerialFrame { line: format!("{ecg},{ambient_c:.2},{object_c:.2},{lead}\n") })
}

pub fn frame_reading(r: &EcgTempSample) -> Result<SerialFrame, HubError> {
    frame_csv(r.ecg_value, r.ambient_temp_c, r.object_temp_c, r.lead_status.code())
}

/// Inverse of [`frame_csv`]. A trailing newline (and `\r`) is optional.
pub fn parse_sensor_frame(line: &str) -> Result<EcgTempSample, HubError> {
    let malformed = |reason: String| HubError::MalformedFrame { line: line.to_string(), reason };
    let body = line.strip_suffix('\n').unwrap_or(line);
    let body = body.strip_suffix('\r').unwrap_or(body);
    let fields: Vec<&str> = body.split(',').collect();
    if fields.len() != 4 {
        return Err(malformed(format!("expected 4 fields, got {}", fields.len())));
    }
    let ecg_value: i32 = fields[0].parse().map_err(|_| malformed(format!("ecgValue {:?}", fields[0])))?;
    let temp = |name: &str, s: &str| -> Result<f64, HubError> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(malformed(format!("{name} {s:?}"))),
        }
    };
    let ambient_temp_c = temp("ambientTempC", fields[1])?;
    let object_temp_c = temp("objectTempC", fields[2])?;
    let lead_status = match fields[3] {
        "0" => LeadStatus::Connected,
        "1" => LeadStatus::Off,
        other => return Err(malformed(format!("leadStatus {other:?}"))),
    };
    Ok(EcgTempSample { ecg_value, ambient_temp_c, object_temp_c, lead_status })
}

#[derive(Debug, Default)]
struct LinkInner {
    buf: VecDeque<u8>,
    writer_open: bool,
    reader_open: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("serial link closed")]
pub struct LinkClosed;

/// Create a connected writer/reader pair.
pub fn serial_link() -> (SerialWriter, SerialReader) {
    let inner = Arc::new(Mutex::new(LinkInner { buf: VecDeque::new(), writer_open: true, reader_open: true }));
    (SerialWriter { inner: inner.clone(), corruption: None }, SerialReader { inner })
}

/// Writing end. Each frame is appended in one locked operation, so frames
/// never interleave on the wire.
#[derive(Debug)]
pub struct SerialWriter {
    inner: Arc<Mutex<LinkInner>>,
    corruption: Option<(f64, RandomStream)>,
}

impl SerialWriter {
    /// Replace one byte of each frame with [`CORRUPTION_BYTE`] with probability `p`.
    pub fn with_corruption(mut self, p: f64, rng: RandomStream) -> Self {
        self.corruption = (p > 0.0).then_some((p, rng));
        self
    }

    /// Returns whether the frame was corrupted in transit.
    pub fn write_frame(&mut self, frame: &SerialFrame) -> Result<bool, LinkClosed> {
        let mut bytes = frame.as_bytes().to_vec();
        let mut corrupted = false;
        if let Some((p, rng)) = self.corruption.as_mut() {
            if rng.random::<f64>() < *p && bytes.len() > 1 {
                // Keep the terminator so the damage stays inside one line.
                let i = rng.random_range(0..bytes.len() - 1);
                bytes[i] = CORRUPTION_BYTE;
                corrupted = true;
            }
        }
        let mut inner = self.inner.lock().expect("serial link poisoned");
        if !inner.reader_open {
            return Err(LinkClosed);
        }
        inner.buf.extend(bytes);
        Ok(corrupted)
    }
}

impl Drop for SerialWriter {
    fn drop(&mut self) {
        if let Ok(mut inner) = self.inner.lock() {
            inner.writer_open = false;
        }
    }
}

#[derive(Debug)]
pub struct SerialReader {
    inner: Arc<Mutex<LinkInner>>,
}

impl SerialReader {
    /// Take up to `max_bytes` of buffered bytes. `Err` once the writer is gone
    /// and the buffer is drained.
    pub fn read_chunk(&mut self, max_bytes: usize) -> Result<Vec<u8>, LinkClosed> {
        let mut inner = self.inner.lock().expect("serial link poisoned");
        if inner.buf.is_empty() && !inner.writer_open {
            return Err(LinkClosed);
        }
        let n = max_bytes.min(inner.buf.len());
        Ok(inner.buf.drain(..n).collect())
    }

    pub fn buffered(&self) -> usize {
        self.inner.lock().expect("serial link poisoned").buf.len()
    }
}

impl Drop for SerialReader {
    fn drop(&mut self) {
        if let Ok(mut inner) = self.inner.lock() {
            inner.reader_open = false;
        }
    }
}

/// Bytes a reader may take per `period` at `baud` (8N1 framing, 10 bits per byte).
pub fn byte_budget(baud: u32, period: Duration) -> usize {
    ((f64::from(baud) / 10.0) * period.as_secs_f64()).floor().max(1.0) as usize
}

/// Reassembles arbitrarily chunked bytes into complete lines.
#[derive(Debug, Default, Clone)]
pub struct LineAssembler {
    pending: Vec<u8>,
}

impl LineAssembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed bytes; returns every line completed by them, newline included.
    /// Invalid UTF-8 is replaced so the parser sees and rejects it.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<String> {
        let mut out = Vec::new();
        for &b in bytes {
            self.pending.push(b);
            if b == b'\n' {
                out.push(String::from_utf8_lossy(&self.pending).into_owned());
                self.pending.clear();
            }
        }
        out
    }

    pub fn partial_len(&self) -> usize {
        self.pending.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HubReport {
    pub frames_sent: u64,
    pub frames_corrupted: u64,
    pub invalid_readings: u64,
    pub sink_closed: bool,
}

/// Frame one reading per cadence tick. Invalid readings are skipped and
/// counted; a closed link stops the loop.
pub fn hub_loop<I, P>(source: I, sink: &mut SerialWriter, pacer: &mut P, cadence: Duration) -> HubReport
where
    I: IntoIterator<Item = EcgTempSample>,
    P: Pacer + ?Sized,
{
    let mut report = HubReport::default();
    for reading in source {
        match frame_reading(&reading) {
            Ok(frame) => match sink.write_frame(&frame) {
                Ok(corrupted) => {
                    report.frames_sent += 1;
                    report.frames_corrupted += u64::from(corrupted);
                }
                Err(LinkClosed) => {
                    report.sink_closed = true;
                    tracing::info!(frames = report.frames_sent, "serial link closed, hub stopping");
                    break;
                }
            },
            Err(e) => {
                report.invalid_readings += 1;
                tracing::warn!(error = %e, "reading not framed");
            }
        }
        pacer.wait(cadence);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pacing::VirtualPacer;
    use crate::rng;
    use proptest::prelude::*;

    fn reading(ecg: i32, a: f64, o: f64, lead: LeadStatus) -> EcgTempSample {
        EcgTempSample { ecg_value: ecg, ambient_temp_c: a, object_temp_c: o, lead_status: lead }
    }

    #[test]
    fn golden_frames() {
        assert_eq!(frame_csv(512, 25.0, 36.5, 0).unwrap().line, "512,25.00,36.50,0\n");
        assert_eq!(frame_csv(0, 0.0, 0.0, 1).unwrap().line, "0,0.00,0.00,1\n");
        assert!(matches!(
            frame_csv(512, f64::NAN, 36.5, 0),
            Err(HubError::InvalidField { field: "ambientTempC", .. })
        ));
        assert!(frame_csv(512, 25.0, 36.5, 2).is_err());
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_sensor_frame("512,25.00,36.50,0\n").unwrap(), reading(512, 25.0, 36.5, LeadStatus::Connected));
        assert!(parse_sensor_frame("512,25.00\n").is_err());
        assert!(parse_sensor_frame("512,abc,36.50,0\n").is_err());
        assert!(parse_sensor_frame("512,25.00,36.50,2\n").is_err());
        assert!(parse_sensor_frame("512,25.00,inf,0\n").is_err());
    }

    #[test]
    fn one_second_is_ten_frames() {
        let (mut w, mut r) = serial_link();
        let src = std::iter::repeat_n(reading(512, 25.0, 36.5, LeadStatus::Connected), 10);
        let rep = hub_loop(src, &mut w, &mut VirtualPacer::new(), DEFAULT_CADENCE);
        assert_eq!(rep.frames_sent, 10);
        let bytes = r.read_chunk(usize::MAX).unwrap();
        assert_eq!(LineAssembler::new().push(&bytes).len(), 10);
    }

    #[test]
    fn lead_off_frames_end_in_one() {
        let (mut w, mut r) = serial_link();
        let src = std::iter::repeat_n(reading(512, 25.0, 36.5, LeadStatus::Off), 5);
        hub_loop(src, &mut w, &mut VirtualPacer::new(), DEFAULT_CADENCE);
        let lines = LineAssembler::new().push(&r.read_chunk(usize::MAX).unwrap());
        assert!(lines.iter().all(|l| l.ends_with(",1\n")));
    }

    #[test]
    fn closed_reader_stops_hub() {
        let (mut w, r) = serial_link();
        drop(r);
        let src = std::iter::repeat_n(reading(1, 1.0, 1.0, LeadStatus::Connected), 5);
        let rep = hub_loop(src, &mut w, &mut VirtualPacer::new(), DEFAULT_CADENCE);
        assert!(rep.sink_closed);
        assert_eq!(rep.frames_sent, 0);
    }

    #[test]
    fn reader_sees_closure_after_drain() {
        let (mut w, mut r) = serial_link();
        w.write_frame(&frame_csv(1, 1.0, 1.0, 0).unwrap()).unwrap();
        drop(w);
        assert!(!r.read_chunk(100).unwrap().is_empty());
        assert_eq!(r.read_chunk(100), Err(LinkClosed));
    }

    #[test]
    fn corrupted_frames_always_fail_to_parse() {
        let (w, mut r) = serial_link();
        let mut w = w.with_corruption(1.0, rng::stream(3));
        for i in 0..500 {
            w.write_frame(&frame_csv(i, 25.0 + f64::from(i) / 7.0, -3.25, (i % 2) as u8).unwrap()).unwrap();
        }
        let lines = LineAssembler::new().push(&r.read_chunk(usize::MAX).unwrap());
        assert_eq!(lines.len(), 500);
        assert!(lines.iter().all(|l| parse_sensor_frame(l).is_err()));
    }

    #[test]
    fn byte_budget_at_9600_baud() {
        assert_eq!(byte_budget(9600, Duration::from_millis(10)), 9);
        assert_eq!(byte_budget(9600, Duration::from_secs(1)), 960);
    }

    proptest! {
        #[test]
        fn round_trip(ecg in 0i32..1024, a in -4000i32..6000, o in -4000i32..6000, lead in 0u8..2) {
            let (a, o) = (f64::from(a) / 100.0, f64::from(o) / 100.0);
            let f = frame_csv(ecg, a, o, lead).unwrap();
            let p = parse_sensor_frame(&f.line).unwrap();
            prop_assert_eq!(p.ecg_value, ecg);
            prop_assert_eq!(p.ambient_temp_c, a);
            prop_assert_eq!(p.object_temp_c, o);
            prop_assert_eq!(p.lead_status.code(), lead);
            prop_assert_eq!(frame_reading(&p).unwrap(), f);
        }

        #[test]
        fn adversarial_chunking_never_yields_partial_lines(
            n in 1usize..40,
            chunks in proptest::collection::vec(1usize..30, 1..200),
        ) {
            let (mut w, mut r) = serial_link();
            let frames: Vec<_> = (0..n).map(|i| frame_csv(i as i32, 20.0, 36.0 + i as f64 / 10.0, 0).unwrap()).collect();
            for f in &frames {
                w.write_frame(f).unwrap();
            }
            let mut asm = LineAssembler::new();
            let mut got = Vec::new();
            for c in chunks.iter().cycle() {
                let bytes = r.read_chunk(*c).unwrap();
                if bytes.is_empty() {
                    break;
                }
                got.extend(asm.push(&bytes));
            }
            let expected: Vec<String> = frames.into_iter().map(|f| f.line).collect();
            prop_assert_eq!(got, expected);
        }
    }
}
