//! Column tables rendered as CSV or JSON.

use serde_json::{Map, Value};

use crate::checks::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// 17 significant digits, round-trip exact for `f64`.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column_max(&self, name: &str) -> Option<f64> {
        let c = self.columns.iter().position(|&n| n == name)?;
        self.rows
            .iter()
            .filter_map(|r| match r[c] {
                Cell::Num(v) => Some(v),
                Cell::Text(_) => None,
            })
            .reduce(f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => fmt_num(*v),
                    Cell::Text(s) => s.clone(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Array of row objects; non-finite numbers become `null`.
    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (name, c) in self.columns.iter().zip(row) {
                    let v = match c {
                        Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
                        Cell::Text(s) => Value::String(s.clone()),
                    };
                    m.insert((*name).to_string(), v);
                }
                Value::Object(m)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("tables serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_uses_seventeen_digits() {
        let mut t = Table::new(&["label", "x"]);
        t.push(vec![Cell::Text("+1/2".into()), Cell::Num(0.1)]);
        t.push(vec![Cell::Text("-1/2".into()), Cell::Num(-0.375)]);
        assert_eq!(t.to_csv(), "label,x\n+1/2,1.0000000000000001e-1\n-1/2,-3.7500000000000000e-1\n");
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn json_rows_and_nan() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::Num(1.5), Cell::Num(f64::NAN)]);
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v[0]["a"], 1.5);
        assert!(v[0]["b"].is_null());
    }

    #[test]
    fn column_max_skips_text() {
        let mut t = Table::new(&["l", "v"]);
        t.push(vec![Cell::Text("a".into()), Cell::Num(1.0)]);
        t.push(vec![Cell::Text("b".into()), Cell::Num(3.0)]);
        assert_eq!(t.column_max("v"), Some(3.0));
        assert_eq!(t.column_max("l"), None);
        assert_eq!(t.column_max("zz"), None);
    }
}
