//! Minimal CSV emission with locale-independent number formatting.

use std::fmt::Write as _;

/// Round-trip formatting with 17 significant digits.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

/// Shortest representation that round-trips; used where exact short values
/// (grid times, ratios) read better.
pub fn short(x: f64) -> String {
    format!("{x}")
}

pub struct CsvTable {
    buf: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf, columns: header.len() }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut n = 0;
        for (i, c) in cells.into_iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            let _ = write!(self.buf, "{}", c.as_ref());
            n += 1;
        }
        debug_assert_eq!(n, self.columns, "row width does not match header");
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}
