use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulation::DiagnosticsRow;

/// Writes a header named after the [`DiagnosticsRow`] fields and one line per
/// row. Floats use shortest round-trip formatting.
pub fn write_diagnostics<W: Write>(rows: &[DiagnosticsRow], writer: W) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter {
            name: "diagnostics".into(),
            message: "refusing to write an empty table".into(),
        });
    }
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv(rows: &[DiagnosticsRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_diagnostics(rows, std::io::BufWriter::new(file))
}

pub fn read_diagnostics<R: Read>(reader: R) -> Result<Vec<DiagnosticsRow>> {
    let mut r = csv::Reader::from_reader(reader);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_diagnostics_csv(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    read_diagnostics(std::fs::File::open(path)?)
}
