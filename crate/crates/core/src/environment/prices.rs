use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::stages::PriceSeries;

#[derive(Debug, Deserialize)]
struct PriceRow {
    tau: usize,
    eur_per_mwh: f64,
}

/// Reads a `tau,eur_per_mwh` CSV with rows for `tau = 0, 1, ...` in order.
pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let mut values = Vec::new();
    for row in reader.deserialize::<PriceRow>() {
        let row = row?;
        if row.tau != values.len() {
            return Err(Error::Data(format!(
                "{}: expected tau {} but found {}",
                path.display(),
                values.len(),
                row.tau
            )));
        }
        values.push(row.eur_per_mwh);
    }
    if values.is_empty() {
        return Err(Error::Data(format!("{}: no prices", path.display())));
    }
    PriceSeries::new(values)
}
