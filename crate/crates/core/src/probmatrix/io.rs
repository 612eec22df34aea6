//! Matrix files.
//!
//! CSV: a header `row,<column id>...`, then one line per blanked sentence
//! with the sentence text as row id and one log-probability per column;
//! EMPTY is an empty field.
//!
//! Binary (little endian): magic `GFMX`, format version (u32), row count and
//! column count (u64 each), row ids then column ids as length-prefixed UTF-8
//! (u32 length), then the cells column by column as f64 with `+inf` standing
//! for EMPTY.

use std::io::{self, Read, Write};

use thiserror::Error;

use super::{BlankedSentence, MatrixError, ProbMatrix, SenseId, SenseMatrix};

const MAGIC: &[u8; 4] = b"GFMX";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("not a matrix file (bad magic)")]
    BadMagic,
    #[error("unsupported matrix format version {0}")]
    Version(u32),
    #[error("malformed matrix file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Layout shared by both file formats; cells are column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixTable {
    pub row_ids: Vec<String>,
    pub column_ids: Vec<String>,
    pub cells: Vec<Option<f64>>,
}

impl MatrixTable {
    fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells[col * self.row_ids.len() + row]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), MatrixFileError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string()];
        header.extend(self.column_ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.row_ids.iter().enumerate() {
            let mut record = vec![id.clone()];
            record.extend((0..self.column_ids.len()).map(|j| match self.get(i, j) {
                Some(v) => format!("{v:?}"),
                None => String::new(),
            }));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, MatrixFileError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = r.headers()?.clone();
        if header.get(0) != Some("row") {
            return Err(MatrixFileError::Malformed("first header field must be 'row'".into()));
        }
        let column_ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut row_ids = Vec::new();
        let mut by_row: Vec<Vec<Option<f64>>> = Vec::new();
        for record in r.records() {
            let record = record?;
            row_ids.push(record.get(0).unwrap_or_default().to_string());
            let values = record
                .iter()
                .skip(1)
                .map(|f| {
                    if f.is_empty() {
                        Ok(None)
                    } else {
                        f.parse::<f64>()
                            .map(Some)
                            .map_err(|_| MatrixFileError::Malformed(format!("bad cell {f:?}")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            by_row.push(values);
        }
        let n = row_ids.len();
        let mut cells = vec![None; n * column_ids.len()];
        for (i, values) in by_row.into_iter().enumerate() {
            for (j, v) in values.into_iter().enumerate() {
                cells[j * n + i] = v;
            }
        }
        Ok(MatrixTable {
            row_ids,
            column_ids,
            cells,
        })
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), MatrixFileError> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.row_ids.len() as u64).to_le_bytes())?;
        out.write_all(&(self.column_ids.len() as u64).to_le_bytes())?;
        for s in self.row_ids.iter().chain(&self.column_ids) {
            out.write_all(&(s.len() as u32).to_le_bytes())?;
            out.write_all(s.as_bytes())?;
        }
        for v in &self.cells {
            out.write_all(&v.unwrap_or(f64::INFINITY).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, MatrixFileError> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(MatrixFileError::BadMagic);
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(MatrixFileError::Version(version));
        }
        input.read_exact(&mut b8)?;
        let n_rows = u64::from_le_bytes(b8) as usize;
        input.read_exact(&mut b8)?;
        let n_cols = u64::from_le_bytes(b8) as usize;
        let mut read_string = |input: &mut R| -> Result<String, MatrixFileError> {
            input.read_exact(&mut b4)?;
            let mut buf = vec![0u8; u32::from_le_bytes(b4) as usize];
            input.read_exact(&mut buf)?;
            String::from_utf8(buf).map_err(|_| MatrixFileError::Malformed("identifier is not UTF-8".into()))
        };
        let row_ids = (0..n_rows).map(|_| read_string(&mut input)).collect::<Result<Vec<_>, _>>()?;
        let column_ids = (0..n_cols).map(|_| read_string(&mut input)).collect::<Result<Vec<_>, _>>()?;
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for _ in 0..n_rows * n_cols {
            input.read_exact(&mut b8)?;
            let v = f64::from_le_bytes(b8);
            cells.push((v != f64::INFINITY).then_some(v));
        }
        Ok(MatrixTable {
            row_ids,
            column_ids,
            cells,
        })
    }

    fn check_rows(&self, rows: &[BlankedSentence]) -> Result<(), MatrixError> {
        if rows.len() != self.row_ids.len() {
            return Err(MatrixError::RowMismatch(format!(
                "file has {} rows, corpus expands to {}",
                self.row_ids.len(),
                rows.len()
            )));
        }
        if let Some((id, row)) = self.row_ids.iter().zip(rows).find(|(id, row)| **id != row.text()) {
            return Err(MatrixError::RowMismatch(format!("{id:?} vs {:?}", row.text())));
        }
        Ok(())
    }
}

impl From<&ProbMatrix> for MatrixTable {
    fn from(m: &ProbMatrix) -> Self {
        MatrixTable {
            row_ids: m.rows().iter().map(BlankedSentence::text).collect(),
            column_ids: m.columns().to_vec(),
            cells: m.cells.iter().copied().map(Some).collect(),
        }
    }
}

impl From<&SenseMatrix> for MatrixTable {
    fn from(m: &SenseMatrix) -> Self {
        MatrixTable {
            row_ids: m.rows().iter().map(BlankedSentence::text).collect(),
            column_ids: m.columns().iter().map(SenseId::to_string).collect(),
            cells: m.cells.clone(),
        }
    }
}

impl ProbMatrix {
    /// Rebuilds a matrix from a file table and the corpus expansion that
    /// produced it.
    pub fn from_table(table: MatrixTable, rows: Vec<BlankedSentence>) -> Result<Self, MatrixFileError> {
        table.check_rows(&rows)?;
        let cells = table
            .cells
            .iter()
            .enumerate()
            .map(|(p, v)| {
                v.ok_or_else(|| {
                    MatrixFileError::Malformed(format!(
                        "EMPTY cell at row {}, column {:?}",
                        p % rows.len().max(1),
                        table.column_ids[p / rows.len().max(1)]
                    ))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProbMatrix::from_parts(rows, table.column_ids, cells)?)
    }
}

impl SenseMatrix {
    pub fn from_table(table: MatrixTable, rows: Vec<BlankedSentence>) -> Result<Self, MatrixFileError> {
        table.check_rows(&rows)?;
        let columns = table
            .column_ids
            .iter()
            .map(|id| id.parse::<SenseId>().map_err(MatrixFileError::Malformed))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SenseMatrix::from_parts(rows, columns, table.cells)?)
    }
}
