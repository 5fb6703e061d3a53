//! Tabular output. Missing values print as `-`.

use crate::config::Format;
use crate::harness::ReportRow;

/// A header plus string cells, rendered as CSV, TSV or an aligned table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.delimited(b','),
            Format::Tsv => self.delimited(b'\t'),
            Format::Pretty => self.pretty(),
        }
    }

    fn delimited(&self, delimiter: u8) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(Vec::new());
        w.write_record(&self.header).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("utf-8 input")
    }

    fn pretty(&self) -> String {
        let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&width)
                .enumerate()
                .map(|(k, (c, &w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            parts.join("  ").trim_end().to_owned() + "\n"
        };
        let mut out = line(&self.header);
        let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
        out += &line(&rule);
        for row in &self.rows {
            out += &line(row);
        }
        out
    }
}

pub fn opt(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_owned(), |x| format!("{x:.decimals$}"))
}

pub const REPORT_COLUMNS: [&str; 16] = [
    "example",
    "method",
    "rho",
    "n",
    "p",
    "family",
    "mmms",
    "rsd",
    "fp_pi",
    "fn_pi",
    "fp_fdr",
    "fn_fdr",
    "replications",
    "failed",
    "flagged",
    "wall_seconds",
];

/// Report rows as a table; `timing` keeps the trailing `wall_seconds`
/// column, the only one that varies between identical runs.
pub fn report_table(rows: &[ReportRow], timing: bool) -> Table {
    let ncols = if timing { REPORT_COLUMNS.len() } else { REPORT_COLUMNS.len() - 1 };
    let mut t = Table::new(REPORT_COLUMNS[..ncols].iter().copied());
    for r in rows {
        let mut cells = vec![
            r.example.clone(),
            r.method.label().to_owned(),
            opt(r.rho, 2),
            r.n.to_string(),
            r.p.to_string(),
            r.family.name().to_owned(),
            opt(r.mmms, 1),
            opt(r.rsd, 2),
            opt(r.fp_pi, 2),
            opt(r.fn_pi, 2),
            opt(r.fp_fdr, 2),
            opt(r.fn_fdr, 2),
            r.replications.to_string(),
            r.failed.to_string(),
            r.flagged.to_string(),
        ];
        if timing {
            cells.push(format!("{:.3}", r.wall_seconds));
        }
        t.push(cells);
    }
    t
}
