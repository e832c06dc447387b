use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::schedule::AffectedJob;
use crate::model::{JobId, Profit, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: Tick,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Release {
        job: JobId,
    },
    AcceptAppend {
        job: JobId,
    },
    AcceptContention {
        job: JobId,
        affected: Vec<AffectedJob>,
        profit_accept: Option<Profit>,
        profit_decline: Option<Profit>,
    },
    Decline {
        job: JobId,
        profit_accept: Option<Profit>,
        profit_decline: Option<Profit>,
    },
    Execute {
        job: JobId,
        start: Tick,
        end: Tick,
    },
    Complete {
        job: JobId,
    },
    Fail {
        job: JobId,
        shortage: Tick,
    },
    Idle {
        start: Tick,
        end: Tick,
    },
}

/// Receives trace events as the engine produces them.
pub trait TraceSink {
    fn record(&mut self, event: &TraceEvent) -> io::Result<()>;
}

impl TraceSink for Vec<TraceEvent> {
    fn record(&mut self, event: &TraceEvent) -> io::Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// Writes one JSON object per line.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        JsonLinesSink { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> TraceSink for JsonLinesSink<W> {
    fn record(&mut self, event: &TraceEvent) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, event)?;
        self.out.write_all(b"\n")
    }
}

/// Forwards every event to two sinks.
pub struct Tee<'a, A: TraceSink + ?Sized, B: TraceSink + ?Sized>(pub &'a mut A, pub &'a mut B);

impl<A: TraceSink + ?Sized, B: TraceSink + ?Sized> TraceSink for Tee<'_, A, B> {
    fn record(&mut self, event: &TraceEvent) -> io::Result<()> {
        self.0.record(event)?;
        self.1.record(event)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimulationTrace {
    pub events: Vec<TraceEvent>,
}

impl SimulationTrace {
    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        let mut sink = JsonLinesSink::new(&mut buf);
        for e in &self.events {
            sink.record(e).expect("writing to memory cannot fail");
        }
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    /// Parses a JSON-lines trace. Blank lines are ignored; the error carries
    /// the 1-based line number.
    pub fn from_json_lines(reader: impl BufRead) -> Result<Self, (usize, String)> {
        let mut events = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| (i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let event: TraceEvent =
                serde_json::from_str(&line).map_err(|e| (i + 1, e.to_string()))?;
            events.push(event);
        }
        Ok(SimulationTrace { events })
    }

    pub fn executions(&self) -> impl Iterator<Item = (JobId, Tick, Tick)> + '_ {
        self.events.iter().filter_map(|e| match e.kind {
            EventKind::Execute { job, start, end } => Some((job, start, end)),
            _ => None,
        })
    }
}
