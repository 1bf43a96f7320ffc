//! Bundled data.

use crate::model::Dataset;

/// Annual maximum wind speed (m/s) and minimum temperature (°C) at the
/// Niwot Ridge station, 2001-2010. Response column `wind`; covariates
/// `year` and `temperature`.
pub const NIWOT_CSV: &str = "\
year,temperature,wind
2001,-7.40,33.42
2002,-11.95,44.04
2003,-17.99,42.92
2004,-25.63,42.51
2005,-16.61,45.75
2006,-10.93,47.78
2007,-9.21,43.34
2008,-26.13,48.69
2009,-20.27,43.20
2010,-19.00,43.00
";

pub fn niwot() -> Dataset {
    Dataset::from_csv_reader(NIWOT_CSV.as_bytes(), "wind").expect("bundled data parses")
}

/// Looks up a bundled dataset by name.
pub fn by_name(name: &str) -> Option<Dataset> {
    match name.trim().to_ascii_lowercase().as_str() {
        "niwot" => Some(niwot()),
        _ => None,
    }
}

/// Raw CSV text of a bundled dataset, for choosing another response column.
pub fn csv_by_name(name: &str) -> Option<&'static str> {
    match name.trim().to_ascii_lowercase().as_str() {
        "niwot" => Some(NIWOT_CSV),
        _ => None,
    }
}
