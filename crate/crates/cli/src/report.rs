use std::io::{self, Write};

/// Versioned CSV output: a `# qnd-lab,v1,<command>` line, optional comment
/// lines, a column header, then rows.
pub struct Csv<'a> {
    out: &'a mut dyn Write,
}

impl<'a> Csv<'a> {
    pub fn new(out: &'a mut dyn Write, command: &str, columns: &[&str]) -> io::Result<Self> {
        writeln!(out, "# qnd-lab,v1,{command}")?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self { out })
    }

    pub fn row(&mut self, fields: &[String]) -> io::Result<()> {
        writeln!(self.out, "{}", fields.join(","))
    }
}

/// Twelve significant digits, shortest form that reads back to the rounded
/// value (`1.0`, `0.243975018237`, `1e-15`).
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("scientific notation parses");
    // no negative zero in reports
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:?}")
}

pub fn text(s: &str) -> String {
    s.to_string()
}
