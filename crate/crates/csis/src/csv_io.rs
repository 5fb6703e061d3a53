//! CSV datasets: a header row, one numeric column per variable.

use std::io::{Read, Write};
use std::path::Path;

use csis_core::{ConditioningSet, Dataset, Matrix};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Scale candidate columns to mean 0 and variance 1 (divisor n).
    pub standardize: bool,
    /// Subtract the mean from conditioning columns.
    pub center_conditioning: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            center_conditioning: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub data: Dataset,
    pub cond: ConditioningSet,
    /// Constant candidate columns that were dropped.
    pub excluded: Vec<String>,
}

impl Loaded {
    /// Dataset column index of `name`.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.data.column_names()?.iter().position(|c| c == name)
    }
}

pub fn load_csv(path: &Path, response: &str, conditioning: &[String], opts: LoadOptions) -> Result<Loaded> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, response, conditioning, opts)
}

pub fn read_csv<R: Read>(reader: R, response: &str, conditioning: &[String], opts: LoadOptions) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let y_col = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| Error::MissingColumn(response.to_owned()))?;
    for c in conditioning {
        if c == response {
            return Err(Error::Usage(format!("'{c}' is the response and cannot be conditioned on")));
        }
        if !header.contains(c) {
            return Err(Error::MissingColumn(c.clone()));
        }
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        for (k, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                line,
                column: header[k].clone(),
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    line,
                    column: header[k].clone(),
                    value: cell.to_owned(),
                });
            }
            columns[k].push(v);
        }
    }
    let n = columns[y_col].len();

    let y = std::mem::take(&mut columns[y_col]);
    let mut names = Vec::new();
    let mut kept = Vec::new();
    let mut cond_idx = Vec::new();
    let mut excluded = Vec::new();
    for (k, mut col) in columns.into_iter().enumerate() {
        if k == y_col {
            continue;
        }
        let name = &header[k];
        let is_cond = conditioning.contains(name);
        let mean = col.iter().sum::<f64>() / n as f64;
        if is_cond {
            if opts.center_conditioning {
                col.iter_mut().for_each(|v| *v -= mean);
            }
            cond_idx.push(kept.len());
        } else {
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            if col.iter().all(|&v| v == col[0]) || var == 0.0 {
                log::warn!("column '{name}' is constant and was excluded");
                excluded.push(name.clone());
                continue;
            }
            if opts.standardize {
                let sd = var.sqrt();
                col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
            }
        }
        names.push(name.clone());
        kept.push(col);
    }
    let p = kept.len();
    let x = Matrix::from_columns(n, &kept)?;
    let data = Dataset::new(x, y)?.with_column_names(names)?;
    let cond = ConditioningSet::new(cond_idx, p)?;
    Ok(Loaded { data, cond, excluded })
}

/// Writes `data` with a header of its column labels followed by `y`.
/// Values use the shortest representation that parses back exactly.
pub fn write_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..data.p()).map(|j| data.column_label(j)).collect();
    header.push("y".to_owned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        row.clear();
        row.extend((0..data.p()).map(|j| data.x().get(i, j).to_string()));
        row.push(data.y()[i].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn save_csv(path: &Path, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, cond: &[&str]) -> Result<Loaded> {
        let cond: Vec<String> = cond.iter().map(|s| s.to_string()).collect();
        read_csv(text.as_bytes(), "y", &cond, LoadOptions::default())
    }

    #[test]
    fn three_rows() {
        let l = load("y,x1,x2\n1,2,3\n0,5,1\n1,1,1\n", &[]).unwrap();
        assert_eq!((l.data.n(), l.data.p()), (3, 2));
        assert_eq!(l.data.y(), &[1.0, 0.0, 1.0]);
        assert_eq!(l.column("x2"), Some(1));
    }

    #[test]
    fn constant_column_dropped() {
        let l = load("x1,c,y,x2\n1,4,0,2\n2,4,1,3\n3,4,0,5\n", &[]).unwrap();
        assert_eq!(l.excluded, vec!["c".to_string()]);
        assert_eq!(l.data.p(), 2);
        assert_eq!(l.data.column_names().unwrap(), &["x1".to_string(), "x2".to_string()]);
    }

    #[test]
    fn standardized_moments() {
        let l = load("y,a,b\n1,10,-3\n2,11,4\n3,15,8\n4,12,1\n5,30,0\n", &["b"]).unwrap();
        let a = l.data.x().col(l.column("a").unwrap());
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        assert!(mean.abs() <= 1e-12 && (var - 1.0).abs() <= 1e-12);
        // conditioning columns are left alone
        assert_eq!(l.data.x().col(l.column("b").unwrap()), &[-3.0, 4.0, 8.0, 1.0, 0.0]);
        assert_eq!(l.cond.indices(), &[1]);
    }

    #[test]
    fn centering_conditioning_columns() {
        let cond = vec!["b".to_string()];
        let opts = LoadOptions { center_conditioning: true, ..Default::default() };
        let l = read_csv("y,a,b\n1,1,1\n2,2,2\n3,4,6\n".as_bytes(), "y", &cond, opts).unwrap();
        assert_eq!(l.data.x().col(1), &[-2.0, -1.0, 3.0]);
    }

    #[test]
    fn errors_name_the_cell() {
        let err = load("y,x1\n1,2\n0,abc\n", &[]).unwrap_err();
        match err {
            Error::NonNumeric { line, column, value } => {
                assert_eq!((line, column.as_str(), value.as_str()), (3, "x1", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(load("a,b\n1,2\n2,3\n", &[]), Err(Error::MissingColumn(_))));
        assert!(matches!(load("y,a\n1,2\n2,3\n", &["zz"]), Err(Error::MissingColumn(_))));
        assert_eq!(load("y,x1\n1,2\n", &[]).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn quoted_fields() {
        let l = load("\"y\",\"x, 1\"\n\"1\",\"2.5\"\n0,3\n", &[]).unwrap();
        assert_eq!(l.data.column_names().unwrap(), &["x, 1".to_string()]);
    }
}
