//! Modulation-and-coding scheme table.
//!
//! The candidate set ships as a plain-text CSV resource embedded in the
//! binary and also present in the source tree, so deployments can diff or
//! replace it. Rows cover indices 10 through 24 of the standard downlink
//! table that spans QPSK through 256-QAM; code rates are the standard's
//! 1024-denominator fractions rendered to six decimal places.

use crate::{Error, Result};

/// Built-in table text, identical to `resources/mcs_table2.csv`.
pub const BUILTIN_TABLE_CSV: &str = include_str!("../../resources/mcs_table2.csv");

/// One selectable modulation-and-coding scheme.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McsEntry {
    /// Table index, contiguous from 10 to 24.
    pub index: u8,
    /// Constellation size M, one of 4, 16, 64, 256.
    pub modulation_order: u32,
    /// Code rate in [0.11, 0.92].
    pub code_rate: f64,
}

impl McsEntry {
    /// Information bits per symbol: log2(M) times the code rate.
    pub fn spectral_efficiency(&self) -> f64 {
        (self.modulation_order as f64).log2() * self.code_rate
    }
}

/// Validated, index-ordered scheme table.
#[derive(Clone, Debug, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
    checksum: u64,
}

pub const FIRST_INDEX: u8 = 10;
pub const LAST_INDEX: u8 = 24;
pub const N_CLASSES: usize = (LAST_INDEX - FIRST_INDEX + 1) as usize;

impl McsTable {
    /// The embedded default table.
    pub fn builtin() -> McsTable {
        McsTable::from_csv(BUILTIN_TABLE_CSV).expect("embedded table is valid")
    }

    /// Parse and validate CSV text with header `index,modulation_order,code_rate`.
    pub fn from_csv(text: &str) -> Result<McsTable> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Data("empty scheme table".into()))?;
        if header.trim() != "index,modulation_order,code_rate" {
            return Err(Error::Data(format!("unexpected table header: {header}")));
        }
        let mut entries = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Data(format!("malformed table row: {line}")));
            }
            let index: u8 = fields[0]
                .parse()
                .map_err(|_| Error::Data(format!("bad index in row: {line}")))?;
            let modulation_order: u32 = fields[1]
                .parse()
                .map_err(|_| Error::Data(format!("bad modulation order in row: {line}")))?;
            let code_rate: f64 = fields[2]
                .parse()
                .map_err(|_| Error::Data(format!("bad code rate in row: {line}")))?;
            entries.push(McsEntry { index, modulation_order, code_rate });
        }
        let table = McsTable { entries, checksum: fnv1a(text.as_bytes()) };
        table.validate()?;
        Ok(table)
    }

    /// Read a replacement table from disk.
    pub fn from_csv_path(path: &std::path::Path) -> Result<McsTable> {
        let text = std::fs::read_to_string(path)?;
        McsTable::from_csv(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.entries.len() != N_CLASSES {
            return Err(Error::Data(format!(
                "scheme table must have {N_CLASSES} rows, got {}",
                self.entries.len()
            )));
        }
        let mut prev_se = 0.0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.index != FIRST_INDEX + i as u8 {
                return Err(Error::Data(format!(
                    "indices must run {FIRST_INDEX}..={LAST_INDEX} contiguously, found {} at row {i}",
                    e.index
                )));
            }
            if ![4, 16, 64, 256].contains(&e.modulation_order) {
                return Err(Error::Data(format!("unsupported modulation order {}", e.modulation_order)));
            }
            if !(0.11..=0.92).contains(&e.code_rate) {
                return Err(Error::Data(format!("code rate {} outside [0.11, 0.92]", e.code_rate)));
            }
            let se = e.spectral_efficiency();
            if se <= prev_se {
                return Err(Error::Data(format!(
                    "spectral efficiency must increase strictly with the index, violated at {}",
                    e.index
                )));
            }
            prev_se = se;
        }
        Ok(())
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    /// Entry by table index, if within range.
    pub fn entry(&self, index: u8) -> Option<&McsEntry> {
        if (FIRST_INDEX..=LAST_INDEX).contains(&index) {
            Some(&self.entries[(index - FIRST_INDEX) as usize])
        } else {
            None
        }
    }

    /// FNV-1a hash of the source CSV text; recorded in dataset manifests so a
    /// dataset refuses to load against a different table.
    pub fn checksum(&self) -> u64 {
        self.checksum
    }

    /// Zero-based class id for a table index.
    pub fn class_of(index: u8) -> usize {
        debug_assert!((FIRST_INDEX..=LAST_INDEX).contains(&index));
        (index - FIRST_INDEX) as usize
    }

    /// Table index for a zero-based class id.
    pub fn index_of(class: usize) -> u8 {
        debug_assert!(class < N_CLASSES);
        FIRST_INDEX + class as u8
    }
}

/// FNV-1a 64-bit hash.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_table_has_expected_shape() {
        let t = McsTable::builtin();
        assert_eq!(t.entries().len(), 15);
        assert_eq!(t.entries().first().unwrap().index, 10);
        assert_eq!(t.entries().last().unwrap().index, 24);
        let e10 = t.entry(10).unwrap();
        assert_eq!(e10.modulation_order, 16);
        assert!((e10.code_rate - 0.642578).abs() < 1e-12);
        let e24 = t.entry(24).unwrap();
        assert_eq!(e24.modulation_order, 256);
        assert!((e24.code_rate - 0.821289).abs() < 1e-12);
        assert!(t.entry(9).is_none());
        assert!(t.entry(25).is_none());
    }

    #[test]
    fn spectral_efficiency_increases_strictly() {
        let t = McsTable::builtin();
        let se: Vec<f64> = t.entries().iter().map(|e| e.spectral_efficiency()).collect();
        assert!(se.windows(2).all(|w| w[1] > w[0]), "{se:?}");
        assert!((se[0] - 4.0 * 0.642578).abs() < 1e-12);
    }

    #[test]
    fn rates_and_orders_stay_in_contract_ranges() {
        let t = McsTable::builtin();
        for e in t.entries() {
            assert!([4u32, 16, 64, 256].contains(&e.modulation_order));
            assert!((0.11..=0.92).contains(&e.code_rate));
        }
    }

    #[test]
    fn checksum_is_stable_and_content_sensitive() {
        let a = McsTable::builtin().checksum();
        let b = McsTable::from_csv(BUILTIN_TABLE_CSV).unwrap().checksum();
        assert_eq!(a, b);
        let altered = BUILTIN_TABLE_CSV.replace("0.642578", "0.642579");
        let c = McsTable::from_csv(&altered).unwrap().checksum();
        assert_ne!(a, c);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        // missing row
        let short: String = BUILTIN_TABLE_CSV.lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(McsTable::from_csv(&short).is_err());
        // non-monotone spectral efficiency: swap two rows
        let mut lines: Vec<&str> = BUILTIN_TABLE_CSV.lines().collect();
        lines.swap(3, 4);
        assert!(McsTable::from_csv(&lines.join("\n")).is_err());
        // rate outside range
        let bad = BUILTIN_TABLE_CSV.replace("0.821289", "0.990000");
        assert!(McsTable::from_csv(&bad).is_err());
        // wrong header
        let bad2 = BUILTIN_TABLE_CSV.replace("index,", "idx,");
        assert!(McsTable::from_csv(&bad2).is_err());
    }
}
