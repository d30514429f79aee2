//! Contingency-table documents: CSV grids and records, and JSON.
//!
//! Flat count sequences are always in φ-order: the cell `(i_1, …, i_d)` sits
//! at position `i_1 + Σ_{ℓ≥2} (i_ℓ − 1) r_1 ⋯ r_{ℓ−1}` (1-based), so the
//! first coordinate varies fastest.
//!
//! CSV comes in two layouts. A grid holds a two-way table with one row per
//! level of the first axis; with `header` set, the first row carries column
//! labels and the first column row labels. Records hold any number of axes,
//! one `i1,…,id,count` line per cell, after a header line whose last field
//! is `count`; unlisted cells are zero. In both layouts a count written as
//! `-` or `--` declares a structural zero.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{CountArray, MultiIndex, Shape, SupportSet};

/// A parsed table with its structural-zero declarations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableDocument {
    pub shape: Shape,
    /// φ-order.
    pub counts: Vec<u64>,
    pub structural_zeros: Vec<MultiIndex>,
    pub labels: Option<Vec<Vec<String>>>,
}

impl TableDocument {
    pub fn new(
        shape: Shape,
        counts: Vec<u64>,
        structural_zeros: Vec<MultiIndex>,
        labels: Option<Vec<Vec<String>>>,
    ) -> Result<Self> {
        if counts.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} counts for dims {:?} ({} cells)",
                counts.len(),
                shape.dims(),
                shape.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for z in &structural_zeros {
            let o = shape.offset(z)?;
            if !seen.insert(o) {
                return Err(Error::Domain(format!("structural zero {z} declared twice")));
            }
            if counts[o] > 0 {
                return Err(Error::SupportContradiction { cell: z.0.clone(), count: counts[o] });
            }
        }
        if seen.len() == shape.len() {
            return Err(Error::Domain("every cell is declared a structural zero".into()));
        }
        if let Some(labels) = &labels {
            if labels.len() != shape.ndim() {
                return Err(Error::DimensionMismatch(format!(
                    "{} label lists for {} axes",
                    labels.len(),
                    shape.ndim()
                )));
            }
            for (l, (names, &r)) in labels.iter().zip(shape.dims()).enumerate() {
                if names.len() != r {
                    return Err(Error::DimensionMismatch(format!(
                        "axis {} has {r} levels but {} labels",
                        l + 1,
                        names.len()
                    )));
                }
            }
        }
        let mut structural_zeros = structural_zeros;
        structural_zeros.sort_by_key(|z| shape.offset(z).unwrap_or(usize::MAX));
        Ok(TableDocument { shape, counts, structural_zeros, labels })
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count_array(&self) -> CountArray {
        CountArray::new(self.shape.clone(), self.counts.clone()).expect("validated lengths")
    }

    /// All cells except the structural zeros.
    pub fn support(&self) -> SupportSet {
        SupportSet::excluding(self.shape.clone(), &self.structural_zeros).expect("validated zeros")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::Domain(format!("unknown table format {other:?}"))),
        }
    }
}

impl TableFormat {
    /// Guess from a file extension.
    pub fn from_path(path: &std::path::Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(TableFormat::Csv),
            "json" => Some(TableFormat::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// Grid layout: first row and first column hold labels.
    pub header: bool,
}

pub fn parse_table(text: &str, format: TableFormat, opts: CsvOptions) -> Result<TableDocument> {
    match format {
        TableFormat::Csv => parse_csv(text, opts),
        TableFormat::Json => parse_json(text),
    }
}

fn is_zero_marker(s: &str) -> bool {
    s == "-" || s == "--"
}

fn parse_count(s: &str, line: usize) -> Result<u64> {
    s.parse::<u64>().map_err(|_| Error::Parse { line, message: format!("bad count {s:?}") })
}

fn csv_rows(text: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<String> = rec.iter().map(str::to_owned).collect();
        if fields.iter().all(String::is_empty) {
            continue;
        }
        rows.push((line, fields));
    }
    Ok(rows)
}

fn parse_csv(text: &str, opts: CsvOptions) -> Result<TableDocument> {
    let rows = csv_rows(text)?;
    let Some((_, first)) = rows.first() else {
        return Err(Error::Parse { line: 1, message: "empty document".into() });
    };
    if first.last().is_some_and(|f| f.eq_ignore_ascii_case("count")) {
        parse_csv_records(&rows)
    } else {
        parse_csv_grid(&rows, opts)
    }
}

fn parse_csv_grid(rows: &[(usize, Vec<String>)], opts: CsvOptions) -> Result<TableDocument> {
    let (col_labels, body) = if opts.header {
        let (_, head) = &rows[0];
        (Some(head[1..].to_vec()), &rows[1..])
    } else {
        (None, rows)
    };
    let skip = usize::from(opts.header);
    let r1 = body.len();
    let r2 = body.first().map_or(0, |(_, f)| f.len().saturating_sub(skip));
    let mut grid = vec![vec![None; r2]; r1];
    let mut row_labels = Vec::new();
    for (i, (line, fields)) in body.iter().enumerate() {
        if fields.len() != r2 + skip {
            return Err(Error::Parse {
                line: *line,
                message: format!("expected {} fields, found {}", r2 + skip, fields.len()),
            });
        }
        if opts.header {
            row_labels.push(fields[0].clone());
        }
        for (j, f) in fields[skip..].iter().enumerate() {
            grid[i][j] = if is_zero_marker(f) { None } else { Some(parse_count(f, *line)?) };
        }
    }
    let shape = Shape::new(vec![r1, r2]).map_err(|e| Error::Parse {
        line: rows[0].0,
        message: format!("grid must be at least 2x2: {e}"),
    })?;
    let mut counts = vec![0u64; r1 * r2];
    let mut zeros = Vec::new();
    for (i, row) in grid.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            match cell {
                Some(c) => counts[i + r1 * j] = *c,
                None => zeros.push(MultiIndex::new([i + 1, j + 1])),
            }
        }
    }
    let labels = col_labels.map(|cols| vec![row_labels, cols]);
    TableDocument::new(shape, counts, zeros, labels)
}

fn parse_csv_records(rows: &[(usize, Vec<String>)]) -> Result<TableDocument> {
    let (_, head) = &rows[0];
    let d = head.len() - 1;
    if d == 0 {
        return Err(Error::Parse { line: rows[0].0, message: "records need coordinate columns".into() });
    }
    let mut cells: Vec<(usize, Vec<usize>, Option<u64>)> = Vec::new();
    for (line, fields) in &rows[1..] {
        if fields.len() != d + 1 {
            return Err(Error::Parse {
                line: *line,
                message: format!("expected {} fields, found {}", d + 1, fields.len()),
            });
        }
        let coords = fields[..d]
            .iter()
            .map(|f| {
                f.parse::<usize>()
                    .ok()
                    .filter(|&i| i >= 1)
                    .ok_or_else(|| Error::Parse { line: *line, message: format!("bad coordinate {f:?}") })
            })
            .collect::<Result<Vec<_>>>()?;
        let count = if is_zero_marker(&fields[d]) { None } else { Some(parse_count(&fields[d], *line)?) };
        cells.push((*line, coords, count));
    }
    let dims: Vec<usize> = (0..d).map(|l| cells.iter().map(|c| c.1[l]).max().unwrap_or(0)).collect();
    let shape = Shape::new(dims).map_err(|e| Error::Parse { line: rows[0].0, message: e.to_string() })?;
    records_to_document(shape, cells, None)
}

fn records_to_document(
    shape: Shape,
    cells: Vec<(usize, Vec<usize>, Option<u64>)>,
    labels: Option<Vec<Vec<String>>>,
) -> Result<TableDocument> {
    let mut counts = vec![0u64; shape.len()];
    let mut seen = vec![false; shape.len()];
    let mut zeros = Vec::new();
    for (line, coords, count) in cells {
        let idx = MultiIndex(coords);
        let o = shape.offset(&idx)?;
        if seen[o] {
            return Err(Error::Parse { line, message: format!("cell {idx} listed twice") });
        }
        seen[o] = true;
        match count {
            Some(c) => counts[o] = c,
            None => zeros.push(idx),
        }
    }
    TableDocument::new(shape, counts, zeros, labels)
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRecord {
    cell: Vec<usize>,
    count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonTable {
    dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    records: Option<Vec<JsonRecord>>,
    #[serde(default)]
    structural_zeros: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Vec<String>>>,
}

fn parse_json(text: &str) -> Result<TableDocument> {
    let doc: JsonTable = serde_json::from_str(text)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let shape = Shape::new(doc.dims)?;
    let zeros: Vec<MultiIndex> = doc.structural_zeros.into_iter().map(MultiIndex).collect();
    match (doc.counts, doc.records) {
        (Some(counts), None) => TableDocument::new(shape, counts, zeros, doc.labels),
        (None, Some(records)) => {
            let cells = records.into_iter().map(|r| (0, r.cell, Some(r.count))).collect();
            let counted = records_to_document(shape.clone(), cells, doc.labels)?;
            TableDocument::new(shape, counted.counts, zeros, counted.labels)
        }
        _ => Err(Error::Parse { line: 1, message: "give exactly one of \"counts\" or \"records\"".into() }),
    }
}

/// JSON in the flat-counts layout.
pub fn to_json(doc: &TableDocument) -> String {
    let table = JsonTable {
        dims: doc.shape.dims().to_vec(),
        counts: Some(doc.counts.clone()),
        records: None,
        structural_zeros: doc.structural_zeros.iter().map(|z| z.0.clone()).collect(),
        labels: doc.labels.clone(),
    };
    serde_json::to_string_pretty(&table).expect("plain data serialises")
}

/// CSV records layout, one line per cell in φ-order.
pub fn to_csv_records(doc: &TableDocument) -> String {
    let d = doc.shape.ndim();
    let mut out: Vec<String> = Vec::with_capacity(doc.shape.len() + 1);
    let mut head: Vec<String> = (1..=d).map(|l| format!("i{l}")).collect();
    head.push("count".into());
    out.push(head.join(","));
    let support = doc.support();
    for o in 0..doc.shape.len() {
        let idx = doc.shape.index_of(o);
        let mut fields: Vec<String> = idx.0.iter().map(usize::to_string).collect();
        fields.push(if support.contains_offset(o) { doc.counts[o].to_string() } else { "-".into() });
        out.push(fields.join(","));
    }
    out.join("\n") + "\n"
}

/// CSV grid for a two-way table; labels are written when present.
pub fn to_csv_grid(doc: &TableDocument) -> Result<String> {
    let &[r1, r2] = doc.shape.dims() else {
        return Err(Error::Domain("grid layout needs exactly two axes".into()));
    };
    let support = doc.support();
    let mut lines = Vec::new();
    if let Some(labels) = &doc.labels {
        let mut head = vec![String::new()];
        head.extend(labels[1].iter().cloned());
        lines.push(head.join(","));
    }
    for i in 0..r1 {
        let mut fields = Vec::new();
        if let Some(labels) = &doc.labels {
            fields.push(labels[0][i].clone());
        }
        for j in 0..r2 {
            let o = i + r1 * j;
            fields.push(if support.contains_offset(o) { doc.counts[o].to_string() } else { "-".into() });
        }
        lines.push(fields.join(","));
    }
    Ok(lines.join("\n") + "\n")
}
