//! On-disk formats: CSV tables, line-delimited JSON records and feature files.
//!
//! CSV files are comma separated, UTF-8, LF terminated, with a mandatory
//! header row.

mod features;
mod records;
mod tables;

pub use features::{
    read_features, read_features_binary, read_features_csv, write_features_binary,
    write_features_csv, FEATURE_MAGIC,
};
pub use records::{
    read_records, write_records, PresentationRecord, Record, RecordSet, SessionHeader,
};
pub use tables::{
    read_matrix, read_pool, read_predictions, read_table, write_matrix, write_pool,
    write_predictions, write_table,
};

pub(crate) fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// Formats a float with the shortest representation that parses back exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}
