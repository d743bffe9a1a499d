//! Column tables and their CSV/JSON encodings.

use std::io::Write;

use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Flag(bool),
    Missing,
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    names: Vec<&'static str>,
    columns: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(names: &[&'static str]) -> Self {
        Self {
            names: names.to_vec(),
            columns: vec![Vec::new(); names.len()],
        }
    }

    pub fn push(&mut self, row: &[Cell]) {
        assert_eq!(row.len(), self.names.len(), "row width must match the header");
        for (col, &cell) in self.columns.iter_mut().zip(row) {
            col.push(cell);
        }
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn write(&self, format: Format, out: impl Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names)?;
        for i in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| cell_text(c[i])))?;
        }
        w.flush()
    }

    fn write_json(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut obj = Map::new();
        for (name, col) in self.names.iter().zip(&self.columns) {
            let values = col
                .iter()
                .map(|&c| match c {
                    Cell::Num(v) => round_sig(v).map_or(Value::Null, Value::from),
                    Cell::Flag(b) => Value::Bool(b),
                    Cell::Missing => Value::Null,
                })
                .collect();
            obj.insert(name.to_string(), Value::Array(values));
        }
        serde_json::to_writer_pretty(&mut out, &Value::Object(obj))?;
        writeln!(out)
    }
}

fn cell_text(cell: Cell) -> String {
    match cell {
        Cell::Num(v) => format_sig(v),
        Cell::Flag(b) => b.to_string(),
        Cell::Missing => String::new(),
    }
}

const SIG_DIGITS: usize = 12;

/// Decimal (never exponent) notation with 12 significant digits.
/// Non-finite values become empty fields.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return String::new();
    }
    if v == 0.0 {
        return format!("{:.*}", SIG_DIGITS - 1, 0.0);
    }
    // Exponent after rounding, so 9.9999999999995 counts as 10.
    let sci = format!("{:.*e}", SIG_DIGITS - 1, v);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

/// `v` rounded to 12 significant digits, so JSON matches the CSV values.
fn round_sig(v: f64) -> Option<f64> {
    v.is_finite()
        .then(|| format!("{:.*e}", SIG_DIGITS - 1, v).parse().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.0), "0.00000000000");
        assert_eq!(format_sig(1.0), "1.00000000000");
        assert_eq!(format_sig(-4.242640687119285), "-4.24264068712");
        assert_eq!(format_sig(1234.5678), "1234.56780000");
        assert_eq!(format_sig(2.5e-7), "0.000000250000000000");
        assert_eq!(format_sig(9.99999999999951), "10.0000000000");
        assert_eq!(format_sig(f64::NAN), "");
        assert!(!format_sig(3.2e-40).contains('e'));
    }

    #[test]
    fn csv_and_json_share_columns() {
        let mut t = Table::new(&["kappa", "Xi", "defined"]);
        t.push(&[Cell::Num(0.0), Cell::Missing, Cell::Flag(false)]);
        t.push(&[Cell::Num(0.25), Cell::Num(1.0 / 3.0), Cell::Flag(true)]);
        let mut csv = Vec::new();
        t.write(Format::Csv, &mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "kappa,Xi,defined\n0.00000000000,,false\n0.250000000000,0.333333333333,true\n"
        );
        let mut json = Vec::new();
        t.write(Format::Json, &mut json).unwrap();
        let v: Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["Xi"][0], Value::Null);
        assert_eq!(v["Xi"][1].as_f64().unwrap(), 0.333333333333);
        assert_eq!(v["defined"][1], Value::Bool(true));
    }
}
