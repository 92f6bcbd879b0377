//! Reading and writing SER curves.
//!
//! CSV files carry the header `p_db,ser,std_err,trials`. Floats are written
//! in Rust's shortest round-trip form, so a curve read back is bit-identical
//! to the one written.

use std::io::{Read, Write};
use std::path::Path;

use crate::montecarlo::{SerCurve, SerPoint};
use crate::{Error, Result};

pub const CSV_HEADER: [&str; 4] = ["p_db", "ser", "std_err", "trials"];

pub fn write_csv<W: Write>(curve: &SerCurve, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &curve.rows {
        w.write_record([
            format!("{}", r.p_db),
            format!("{:e}", r.ser),
            format!("{:e}", r.std_err),
            r.trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<SerCurve> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::InvalidCurve(format!(
            "expected header {}, found {}",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in rd.deserialize::<SerPoint>().enumerate() {
        let row = record.map_err(|e| Error::InvalidCurve(format!("row {}: {e}", line + 1)))?;
        if !(0.0..=0.5).contains(&row.ser) || !(row.std_err >= 0.0) {
            return Err(Error::InvalidCurve(format!("row {}: ser or std_err out of range", line + 1)));
        }
        rows.push(row);
    }
    Ok(SerCurve { rows })
}

pub fn write_csv_file(curve: &SerCurve, path: &Path) -> Result<()> {
    write_csv(curve, std::fs::File::create(path)?)
}

pub fn read_csv_file(path: &Path) -> Result<SerCurve> {
    read_csv(std::fs::File::open(path)?)
}

pub fn to_json(curve: &SerCurve) -> String {
    serde_json::to_string_pretty(curve).expect("curves serialize")
}
