//! Deterministic CSV output: `# key: value` metadata, a header, rows, and
//! optional trailing comment lines.

use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub trailer: Vec<String>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), ..Self::default() }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    /// Value of metadata `key`, if present.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Column `name` of every row.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            writeln!(s, "# {k}: {v}").unwrap();
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        s.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 cells"));
        for line in &self.trailer {
            writeln!(s, "# {line}").unwrap();
        }
        s
    }

    /// Metadata lines of a CSV produced by [`Table::to_csv`].
    pub fn parse_metadata(csv: &str) -> Vec<(String, String)> {
        csv.lines()
            .map_while(|l| l.strip_prefix("# "))
            .filter_map(|l| l.split_once(": "))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }
}

/// Fixed six-decimal formatting; NaN prints as `nan`.
pub fn f6(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}

pub fn f2(x: f64) -> String {
    format!("{x:.2}")
}

/// Scientific notation with nine significant digits.
pub fn e9(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.8e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_of_metadata() {
        let mut t = Table::new(&["a", "b"]);
        t.meta("seed", 7);
        t.meta("rule", "x;y");
        t.push(vec!["1".into(), "p,q".into()]);
        t.trailer.push("fit: 1".into());
        let csv = t.to_csv();
        assert_eq!(csv, "# seed: 7\n# rule: x;y\na,b\n1,\"p,q\"\n# fit: 1\n");
        assert_eq!(Table::parse_metadata(&csv), t.metadata);
        assert_eq!(t.get("seed"), Some("7"));
        assert_eq!(t.column("b").unwrap(), vec!["p,q"]);
    }

    #[test]
    fn number_formats() {
        assert_eq!(f6(0.5), "0.500000");
        assert_eq!(f6(f64::NAN), "nan");
        assert_eq!(f2(-2.5), "-2.50");
        assert_eq!(e9(1234.5), "1.23450000e3");
    }
}
