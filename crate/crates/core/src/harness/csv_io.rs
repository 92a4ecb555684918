use serde::Deserialize;

use super::record::RunRecord;
use crate::error::{Error, Result};

const HEADER: [&str; 7] = ["eps", "energy", "morse_index", "nullity", "nodal_domains", "residual", "iterations"];

/// One parsed CSV row; result columns are empty for failed records.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub eps: f64,
    pub energy: Option<f64>,
    pub morse_index: Option<usize>,
    pub nullity: Option<usize>,
    pub nodal_domains: Option<usize>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header plus one row per record, ordered by `eps`.
pub fn export_csv(records: &[RunRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.problem.eps.total_cmp(&b.problem.eps));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for r in sorted {
        let row = match &r.result {
            Some(x) => [
                real(r.problem.eps),
                real(x.energy),
                x.morse_index.to_string(),
                x.nullity.to_string(),
                x.nodal_domains.to_string(),
                real(x.residual),
                x.iterations.to_string(),
            ],
            None => [real(r.problem.eps), String::new(), String::new(), String::new(), String::new(), String::new(), String::new()],
        };
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != HEADER {
        return Err(Error::Precondition(format!("unexpected csv header {header:?}")));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
