//! Contact-log ingestion: parsing, validation, libero inference, defensive
//! alignment and rally assembly. Output is the canonical point-log archive
//! (line-delimited JSON, one `PointLog` per line) consumed by every
//! downstream stage.

mod alignment;
mod assemble;
mod libero;
mod parse;
mod schema;
pub mod test_fixtures;

pub use alignment::{resolve_defensive_positions, slot_is_front, slot_role, RotationRole};
pub use assemble::{assemble_points, AssembledPoints};
pub use libero::{infer_libero, LiberoKey};
pub use parse::{
    parse_contact_file, parse_lineup_file, write_contact_file, ParsedContacts, PointRef, Rejection,
};
pub use schema::{SchemaConfig, OPTIONAL_FIELDS, REQUIRED_FIELDS};

use crate::error::{Error, Result};
use crate::types::PointLog;
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum IngestError {
    #[error("MissingColumn: schema field '{field}' has no matching column")]
    MissingColumn { field: String },
    #[error("AmbiguousLibero: {team} in {match_id} set {set_index} has {} off-lineup contributors: {candidates:?}", candidates.len())]
    AmbiguousLibero {
        match_id: String,
        set_index: u32,
        team: String,
        candidates: Vec<String>,
    },
    #[error("IncompleteLineup: {team} slot {slot} is unfilled")]
    IncompleteLineup { team: String, slot: u8 },
    #[error("strict mode: {count} row(s) rejected, first: row {row}: {reason}")]
    StrictRejection {
        count: usize,
        row: usize,
        reason: String,
    },
}

/// Write the point-log archive: one JSON `PointLog` per line.
pub fn write_point_archive(path: &Path, points: &[PointLog]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut w = std::io::BufWriter::new(file);
    for p in points {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    w.flush()
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

pub fn read_point_archive(path: &Path) -> Result<Vec<PointLog>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let mut points = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        points.push(serde_json::from_str(&line)?);
    }
    Ok(points)
}
