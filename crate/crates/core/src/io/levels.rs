//! Level tables as CSV: `kernel_index,level0,level1,level2`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::io::write_atomic;
use crate::itp::LevelTable;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    kernel_index: usize,
    level0: f64,
    level1: f64,
    level2: f64,
}

pub fn levels_to_csv(table: &LevelTable) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (m, l) in table.rows().iter().enumerate() {
        w.serialize(Row {
            kernel_index: m,
            level0: l[0],
            level1: l[1],
            level2: l[2],
        })
        .expect("writing to memory");
    }
    w.into_inner().expect("writing to memory")
}

pub fn levels_from_csv(bytes: &[u8]) -> Result<LevelTable, FormatError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut levels = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| FormatError::LevelTable(e.to_string()))?;
        if row.kernel_index != i {
            return Err(FormatError::LevelTable(format!(
                "row {i} has kernel_index {}, expected {i}",
                row.kernel_index
            )));
        }
        levels.push([row.level0, row.level1, row.level2]);
    }
    if levels.is_empty() {
        return Err(FormatError::LevelTable("no rows".into()));
    }
    LevelTable::new(levels).map_err(|e| FormatError::LevelTable(e.to_string()))
}

pub fn write_levels(path: &Path, table: &LevelTable) -> Result<()> {
    write_atomic(path, &levels_to_csv(table))
}

pub fn read_levels(path: &Path) -> Result<LevelTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(levels_from_csv(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let table = LevelTable::new(vec![[0.1, 0.2 + 1e-17, 0.30000000000000004], [1e-9, 2e-9, 7.5]]).unwrap();
        let back = levels_from_csv(&levels_to_csv(&table)).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn header_is_stable() {
        let table = LevelTable::new(vec![[1.0, 2.0, 3.0]]).unwrap();
        let text = String::from_utf8(levels_to_csv(&table)).unwrap();
        assert_eq!(text.lines().next(), Some("kernel_index,level0,level1,level2"));
    }

    #[test]
    fn malformed_tables() {
        assert!(levels_from_csv(b"kernel_index,level0,level1,level2\n").is_err());
        assert!(levels_from_csv(b"kernel_index,level0,level1,level2\n1,1,2,3\n").is_err());
        assert!(levels_from_csv(b"kernel_index,level0,level1,level2\n0,3,2,1\n").is_err());
        assert!(levels_from_csv(b"kernel_index,level0,level1,level2\n0,x,2,3\n").is_err());
    }
}
