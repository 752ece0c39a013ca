use std::io::Write;

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Table {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of one task: a structured payload for JSON and a flat table for CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub task: &'static str,
    pub ok: bool,
    pub result: Value,
    pub table: Table,
}

#[derive(Serialize)]
struct Envelope<'a> {
    task: &'a str,
    ok: bool,
    result: &'a Value,
}

impl Document {
    pub fn new<T: Serialize>(task: &'static str, ok: bool, result: &T, table: Table) -> serde_json::Result<Document> {
        Ok(Document {
            task,
            ok,
            result: serde_json::to_value(result)?,
            table,
        })
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> serde_json::Result<()> {
        let env = Envelope {
            task: self.task,
            ok: self.ok,
            result: &self.result,
        };
        serde_json::to_writer_pretty(&mut out, &env)?;
        out.write_all(b"\n").map_err(serde_json::Error::io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_numbers_carry_seventeen_digits() {
        let mut t = Table::new(&["x", "n", "label"]);
        t.push(vec![0.1.into(), 3usize.into(), "a,b".into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,n,label\n1.0000000000000001e-1,3,\"a,b\"\n");
        let x: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(x, 0.1);
    }
}
