//! Readers and writers for the canonical trace file formats.
//!
//! Both formats are plain text with `\n` line endings and no quoting.
//! Line 1 is a header naming the schema version and record kind; every
//! following line is either a `#`-prefixed comment or a record:
//!
//! ```text
//! version=1,kind=contacts          version=1,kind=visits
//! node_a,node_b,start,end          node,location,start,end
//! ```
//!
//! Times are trace-relative seconds as non-negative decimals.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::trace::{ContactEvent, LocationVisit, NodeRegistry};

pub const CONTACTS_HEADER: &str = "version=1,kind=contacts";
pub const VISITS_HEADER: &str = "version=1,kind=visits";

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line 1: expected header `{expected}`, found `{found}`")]
    BadHeader { expected: &'static str, found: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    FieldCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: invalid {field} `{value}`")]
    BadNumber { line: usize, field: &'static str, value: String },
    #[error("line {line}: negative time `{value}`")]
    NegativeTime { line: usize, value: f64 },
    #[error("line {line}: empty field")]
    EmptyField { line: usize },
    #[error("self-contact at line {line}")]
    SelfContact { line: usize },
    #[error("line {line}: start {start} > end {end}")]
    StartAfterEnd { line: usize, start: f64, end: f64 },
}

#[derive(Debug)]
pub struct ParsedContacts {
    pub events: Vec<ContactEvent>,
    pub registry: NodeRegistry,
}

#[derive(Debug)]
pub struct ParsedVisits {
    pub visits: Vec<LocationVisit>,
    pub nodes: NodeRegistry,
    pub locations: NodeRegistry,
}

fn parse_time(raw: &str, line: usize, field: &'static str) -> Result<f64, ParseError> {
    let value: f64 = raw
        .trim()
        .parse()
        .map_err(|_| ParseError::BadNumber { line, field, value: raw.to_owned() })?;
    if !value.is_finite() {
        return Err(ParseError::BadNumber { line, field, value: raw.to_owned() });
    }
    if value < 0.0 {
        return Err(ParseError::NegativeTime { line, value });
    }
    Ok(value)
}

fn split_record(line: &str, lineno: usize) -> Result<[&str; 4], ParseError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(ParseError::FieldCount { line: lineno, expected: 4, found: fields.len() });
    }
    if fields.iter().any(|f| f.trim().is_empty()) {
        return Err(ParseError::EmptyField { line: lineno });
    }
    Ok([fields[0], fields[1], fields[2], fields[3]])
}

fn check_header(
    lines: &mut impl Iterator<Item = io::Result<String>>,
    expected: &'static str,
) -> Result<(), ParseError> {
    let first = lines.next().transpose()?.unwrap_or_default();
    if first.trim_end() != expected {
        return Err(ParseError::BadHeader { expected, found: first });
    }
    Ok(())
}

/// Parses the contacts schema, canonicalizing each record (undirected,
/// lower index first) and registering nodes in first-appearance order.
pub fn parse_contacts<R: BufRead>(reader: R) -> Result<ParsedContacts, ParseError> {
    let mut lines = reader.lines();
    check_header(&mut lines, CONTACTS_HEADER)?;
    let mut registry = NodeRegistry::new();
    let mut events = Vec::new();
    let mut lineno = 1usize;
    for line in lines {
        lineno += 1;
        let line = line?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let [id_a, id_b, raw_start, raw_end] = split_record(&line, lineno)?;
        let start = parse_time(raw_start, lineno, "start_seconds")?;
        let end = parse_time(raw_end, lineno, "end_seconds")?;
        if start > end {
            return Err(ParseError::StartAfterEnd { line: lineno, start, end });
        }
        let a = registry.get_or_insert(id_a.trim());
        let b = registry.get_or_insert(id_b.trim());
        if a == b {
            return Err(ParseError::SelfContact { line: lineno });
        }
        events.push(ContactEvent::new(a, b, start, end).expect("validated above"));
    }
    Ok(ParsedContacts { events, registry })
}

/// Parses the visits schema; nodes and locations get separate registries.
pub fn parse_visits<R: BufRead>(reader: R) -> Result<ParsedVisits, ParseError> {
    let mut lines = reader.lines();
    check_header(&mut lines, VISITS_HEADER)?;
    let mut nodes = NodeRegistry::new();
    let mut locations = NodeRegistry::new();
    let mut visits = Vec::new();
    let mut lineno = 1usize;
    for line in lines {
        lineno += 1;
        let line = line?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let [id_node, id_loc, raw_start, raw_end] = split_record(&line, lineno)?;
        let start = parse_time(raw_start, lineno, "start_seconds")?;
        let end = parse_time(raw_end, lineno, "end_seconds")?;
        if start > end {
            return Err(ParseError::StartAfterEnd { line: lineno, start, end });
        }
        let node = nodes.get_or_insert(id_node.trim());
        let location = locations.get_or_insert(id_loc.trim());
        visits.push(LocationVisit::new(node, location, start, end).expect("validated above"));
    }
    Ok(ParsedVisits { visits, nodes, locations })
}

/// Writes the contacts schema. Node indices are resolved to their external
/// ids through `registry`; record order is preserved.
pub fn write_contacts<W: Write>(
    mut w: W,
    events: &[ContactEvent],
    registry: &NodeRegistry,
) -> io::Result<()> {
    writeln!(w, "{CONTACTS_HEADER}")?;
    for ev in events {
        let a = registry.id_of(ev.a).expect("event node registered");
        let b = registry.id_of(ev.b).expect("event node registered");
        writeln!(w, "{a},{b},{},{}", ev.start, ev.end)?;
    }
    Ok(())
}

pub fn write_visits<W: Write>(
    mut w: W,
    visits: &[LocationVisit],
    nodes: &NodeRegistry,
    locations: &NodeRegistry,
) -> io::Result<()> {
    writeln!(w, "{VISITS_HEADER}")?;
    for v in visits {
        let node = nodes.id_of(v.node).expect("visit node registered");
        let loc = locations.id_of(v.location).expect("visit location registered");
        writeln!(w, "{node},{loc},{},{}", v.start, v.end)?;
    }
    Ok(())
}
