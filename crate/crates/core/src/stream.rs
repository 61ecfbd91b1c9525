//! Real-time replay: JSON-lines frames in, one JSON record per frame out.
//!
//! Reader, worker and writer run on their own threads joined by bounded
//! channels, so records leave in the order frames arrived.

use std::io::{BufRead, Write};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::parse_frame_json;
use crate::reconstruct::Reconstructor;

pub const DEFAULT_QUEUE_DEPTH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamOptions {
    /// Emit only the distal pose instead of the full polyline.
    pub tip_only: bool,
    /// Drop frames when the worker queue is full instead of blocking.
    pub drop_on_overflow: bool,
    pub queue_depth: usize,
}

impl Default for StreamOptions {
    fn default() -> Self {
        Self {
            tip_only: false,
            drop_on_overflow: true,
            queue_depth: DEFAULT_QUEUE_DEPTH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StreamStats {
    pub received: u64,
    pub reconstructed: u64,
    pub errors: u64,
    pub dropped: u64,
    pub max_latency: Duration,
    pub total_latency: Duration,
    pub elapsed: Duration,
}

impl StreamStats {
    pub fn mean_latency(&self) -> Duration {
        if self.reconstructed == 0 {
            Duration::ZERO
        } else {
            self.total_latency / self.reconstructed as u32
        }
    }

    /// Frames leaving the pipeline per second of wall time.
    pub fn throughput(&self) -> f64 {
        let s = self.elapsed.as_secs_f64();
        if s > 0.0 {
            (self.reconstructed + self.errors) as f64 / s
        } else {
            0.0
        }
    }
}

/// One output line.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamRecord {
    Centerline {
        id: u64,
        t: f64,
        deflection: &'static str,
        tip: [f64; 2],
        tip_angle_deg: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        points: Option<Vec<[f64; 3]>>,
    },
    Error {
        id: u64,
        #[serde(skip_serializing_if = "Option::is_none")]
        stage: Option<String>,
        message: String,
    },
    Dropped {
        count: u64,
        total: u64,
    },
}

struct Job {
    id: u64,
    line: Vec<u8>,
    dropped_before: u64,
}

enum Work {
    Job(Job),
    Dropped(u64),
}

enum Output {
    Record(StreamRecord, Option<Duration>),
    Dropped(u64),
}

fn process(job: &Job, reconstructor: &Reconstructor, tip_only: bool) -> (StreamRecord, Option<Duration>) {
    let error = |e: Error| {
        let stage = match &e {
            Error::Pipeline { stage, .. } => Some(stage.to_string()),
            _ => None,
        };
        StreamRecord::Error {
            id: job.id,
            stage,
            message: e.to_string(),
        }
    };
    let text = match std::str::from_utf8(&job.line) {
        Ok(t) => t,
        Err(_) => return (error(Error::Parse("line is not valid UTF-8".into())), None),
    };
    let frame = match parse_frame_json(text) {
        Ok(f) => f,
        Err(e) => return (error(e), None),
    };
    let start = Instant::now();
    let rec = match reconstructor.reconstruct(&frame) {
        Ok(r) => r,
        Err(e) => return (error(e), None),
    };
    let latency = start.elapsed();
    let c = &rec.centerline;
    let points = (!tip_only).then(|| {
        c.arc
            .iter()
            .zip(&c.points)
            .map(|(s, p)| [*s, p[0], p[1]])
            .collect()
    });
    let record = StreamRecord::Centerline {
        id: job.id,
        t: frame.timestamp,
        deflection: rec.estimates[0].deflection.as_str(),
        tip: c.tip(),
        tip_angle_deg: c.tip_angle().to_degrees(),
        points,
    };
    (record, Some(latency))
}

fn read_stage<R: BufRead>(mut input: R, tx: SyncSender<Work>, drop_on_overflow: bool) -> Result<u64> {
    let mut id = 0u64;
    let mut pending_drops = 0u64;
    loop {
        let mut line = Vec::new();
        if input.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        while matches!(line.last(), Some(b'\n' | b'\r')) {
            line.pop();
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let job = Job {
            id,
            line,
            dropped_before: pending_drops,
        };
        id += 1;
        if drop_on_overflow {
            match tx.try_send(Work::Job(job)) {
                Ok(()) => pending_drops = 0,
                Err(TrySendError::Full(_)) => pending_drops += 1,
                Err(TrySendError::Disconnected(_)) => break,
            }
        } else if tx.send(Work::Job(job)).is_err() {
            break;
        } else {
            pending_drops = 0;
        }
    }
    if pending_drops > 0 {
        let _ = tx.send(Work::Dropped(pending_drops));
    }
    Ok(id)
}

fn work_stage(rx: Receiver<Work>, tx: SyncSender<Output>, reconstructor: &Reconstructor, tip_only: bool) {
    for work in rx {
        let out = match work {
            Work::Dropped(n) => vec![Output::Dropped(n)],
            Work::Job(job) => {
                let mut out = Vec::with_capacity(2);
                if job.dropped_before > 0 {
                    out.push(Output::Dropped(job.dropped_before));
                }
                let (record, latency) = process(&job, reconstructor, tip_only);
                out.push(Output::Record(record, latency));
                out
            }
        };
        for o in out {
            if tx.send(o).is_err() {
                return;
            }
        }
    }
}

fn write_stage<W: Write>(mut output: W, rx: Receiver<Output>) -> Result<StreamStats> {
    let mut stats = StreamStats::default();
    for o in rx {
        let record = match o {
            Output::Dropped(n) => {
                stats.dropped += n;
                StreamRecord::Dropped {
                    count: n,
                    total: stats.dropped,
                }
            }
            Output::Record(r, latency) => {
                match (&r, latency) {
                    (StreamRecord::Centerline { .. }, Some(l)) => {
                        stats.reconstructed += 1;
                        stats.total_latency += l;
                        stats.max_latency = stats.max_latency.max(l);
                    }
                    _ => stats.errors += 1,
                }
                r
            }
        };
        let text = serde_json::to_string(&record).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(output, "{text}")?;
    }
    output.flush()?;
    Ok(stats)
}

/// Replays JSON-lines frames from `input`, writing one record per frame to
/// `output`. Returns once the input is exhausted and every record is written.
pub fn run_stream<R, W>(input: R, output: W, reconstructor: &Reconstructor, options: StreamOptions) -> Result<StreamStats>
where
    R: BufRead + Send,
    W: Write + Send,
{
    if options.queue_depth == 0 {
        return Err(Error::invariant("queue_depth", "must be at least 1"));
    }
    let start = Instant::now();
    let (work_tx, work_rx) = sync_channel(options.queue_depth);
    let (out_tx, out_rx) = sync_channel(options.queue_depth);
    let (received, stats) = thread::scope(|scope| {
        let reader = scope.spawn(move || read_stage(input, work_tx, options.drop_on_overflow));
        scope.spawn(move || work_stage(work_rx, out_tx, reconstructor, options.tip_only));
        let writer = scope.spawn(move || write_stage(output, out_rx));
        let received = reader.join().expect("reader thread panicked");
        let stats = writer.join().expect("writer thread panicked");
        (received, stats)
    });
    let mut stats = stats?;
    stats.received = received?;
    stats.elapsed = start.elapsed();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::io::frame_to_json;

    fn records(text: &[u8]) -> Vec<serde_json::Value> {
        std::str::from_utf8(text)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect()
    }

    #[test]
    fn empty_input_is_clean() {
        let r = Reconstructor::from_config(&Config::default()).unwrap();
        let mut out = Vec::new();
        let stats = run_stream(&b""[..], &mut out, &r, StreamOptions::default()).unwrap();
        assert!(out.is_empty());
        assert_eq!(stats.received, 0);
    }

    #[test]
    fn malformed_line_yields_one_error_record() {
        let config = Config::default();
        let r = Reconstructor::from_config(&config).unwrap();
        let line = frame_to_json(&config.geometry().reference_frame(0.0));
        let input = format!("{line}\n{{bad\n{line}\n");
        let mut out = Vec::new();
        let options = StreamOptions {
            tip_only: true,
            drop_on_overflow: false,
            ..Default::default()
        };
        let stats = run_stream(input.as_bytes(), &mut out, &r, options).unwrap();
        let recs = records(&out);
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[1]["type"], "error");
        assert_eq!(stats.errors, 1);
        assert_eq!(stats.reconstructed, 2);
        let ids: Vec<u64> = recs.iter().map(|r| r["id"].as_u64().unwrap()).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert!((recs[0]["tip"][1].as_f64().unwrap() - 35.0).abs() < 1e-9);
        assert!(recs[0].get("points").is_none());
    }
}
