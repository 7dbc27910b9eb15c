//! CSV ingestion and emission.

use std::fmt;
use std::io::Write;
use std::path::Path;

use crate::cqed::Analyzer;
use crate::error::{Error, Result};
use crate::estimation::Spectrum;

pub const SPECTRUM_HEADER: [&str; 2] = ["detuning_ghz", "intensity"];

/// One table cell. Floats are written with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Float(v) => write!(f, "{v:.16e}"),
            Cell::Int(v) => write!(f, "{v}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra `# key=value` lines written after the provenance line.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn from_spectrum(s: &Spectrum) -> Self {
        let mut t = Table::new(SPECTRUM_HEADER);
        for (x, y) in s.points() {
            t.push(vec![x.into(), y.into()]);
        }
        t
    }
}

/// Origin of a table, embedded as its first comment line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

/// Render a table as CSV preceded by its provenance comment.
pub fn write_table_to<W: Write>(table: &Table, provenance: &Provenance, mut out: W) -> Result<()> {
    let io = |e| Error::io("writing table", e);
    writeln!(
        out,
        "# qps {} config_sha256={} seed={}",
        provenance.command, provenance.config_sha256, provenance.seed
    )
    .map_err(io)?;
    for n in &table.notes {
        writeln!(out, "# {n}").map_err(io)?;
    }
    writeln!(out, "{}", table.columns.join(",")).map_err(io)?;
    for row in &table.rows {
        let line: Vec<String> = row.iter().map(Cell::to_string).collect();
        writeln!(out, "{}", line.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_table(table: &Table, provenance: &Provenance, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_table_to(table, provenance, std::io::BufWriter::new(file))
}

/// Parse spectrum CSV text. Rows are sorted by detuning; duplicates are rejected.
pub fn parse_spectrum_csv(text: &str, channel: Analyzer) -> Result<Spectrum> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Table {
        row: 1,
        message: e.to_string(),
    })?;
    if header.iter().collect::<Vec<_>>() != SPECTRUM_HEADER {
        return Err(Error::Table {
            row: header.position().map_or(1, |p| p.line()),
            message: format!("expected header `{}`", SPECTRUM_HEADER.join(",")),
        });
    }
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Table {
            row: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Table {
                    row,
                    message: format!("{name} `{raw}` is not a finite number"),
                })
        };
        let (x, y) = (field(0, "detuning_ghz")?, field(1, "intensity")?);
        if y < 0.0 {
            return Err(Error::Table {
                row,
                message: format!("intensity {y} is negative"),
            });
        }
        points.push((x, y, row));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Table {
            row: w[0].2.max(w[1].2),
            message: format!("duplicate detuning {}", w[0].0),
        });
    }
    let (x, y) = points.into_iter().map(|(x, y, _)| (x, y)).unzip();
    Spectrum::new(x, y, channel)
}

pub fn read_spectrum_csv(path: impl AsRef<Path>, channel: Analyzer) -> Result<Spectrum> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_spectrum_csv(&text, channel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prov() -> Provenance {
        Provenance {
            command: "spectrum".into(),
            config_sha256: "ab".into(),
            seed: 3,
        }
    }

    #[test]
    fn two_rows() {
        let s = parse_spectrum_csv(
            "detuning_ghz,intensity\n1.0,0.5\n-1.0,0.25\n",
            Analyzer::CrossCircular,
        )
        .unwrap();
        assert_eq!(s.detunings(), &[-1.0, 1.0]);
        assert_eq!(s.intensities(), &[0.25, 0.5]);
    }

    #[test]
    fn bad_row_cites_row_two() {
        match parse_spectrum_csv("detuning_ghz,intensity\nabc,1.0\n", Analyzer::CrossCircular)
            .unwrap_err()
        {
            Error::Table { row, .. } => assert_eq!(row, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn duplicates_and_headers() {
        assert!(parse_spectrum_csv(
            "detuning_ghz,intensity\n1,1\n1,2\n",
            Analyzer::CrossCircular
        )
        .is_err());
        assert!(parse_spectrum_csv("x,y\n1,1\n", Analyzer::CrossCircular).is_err());
        assert!(
            parse_spectrum_csv("detuning_ghz,intensity\n1\n", Analyzer::CrossCircular).is_err()
        );
    }

    #[test]
    fn round_trip_is_lossless() {
        let x: Vec<f64> = (0..50).map(|i| -3.0 + i as f64 * 0.1 + 1e-13).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1.234567).sin().abs() / 3.0).collect();
        let s = Spectrum::new(x, y, Analyzer::CrossCircular).unwrap();
        let mut buf = Vec::new();
        write_table_to(&Table::from_spectrum(&s), &prov(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# qps spectrum config_sha256=ab seed=3\n"));
        let back = parse_spectrum_csv(&text, Analyzer::CrossCircular).unwrap();
        assert_eq!(back.detunings(), s.detunings());
        assert_eq!(back.intensities(), s.intensities());
    }

    #[test]
    fn integer_cells() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec![Cell::Int(7), Cell::Float(0.5)]);
        t.note("shift=1");
        let mut buf = Vec::new();
        write_table_to(&t, &prov(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(
            text.ends_with("# shift=1\na,b\n7,5.0000000000000000e-1\n"),
            "{text}"
        );
    }
}
