//! Chunk-oriented ARFF and CSV readers and writers.
//!
//! Supported ARFF subset: numeric attributes plus exactly one nominal class
//! attribute, dense rows, no missing values. The class attribute is the last
//! attribute unless exactly one nominal attribute appears elsewhere.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::datamodel::{Chunk, ChunkSource, DataError, Matrix};

#[derive(Debug, Error)]
pub enum StreamIoError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unsupported ARFF feature: {what}")]
    Unsupported { line: usize, what: String },
    #[error("line {line}: header ended without @data")]
    MissingData { line: usize },
    #[error("line {line}: duplicate attribute name {name:?}")]
    DuplicateAttribute { line: usize, name: String },
    #[error("line {line}: attribute {name:?} must be numeric (only the class may be nominal)")]
    NonNumericAttribute { line: usize, name: String },
    #[error("line {line}: class attribute {name:?} needs at least 2 nominal values")]
    ClassTooSmall { line: usize, name: String },
    #[error("line {line}: no nominal class attribute declared")]
    NoClassAttribute { line: usize },
    #[error("line {line}: expected {expected} values, found {got}")]
    Arity { line: usize, expected: usize, got: usize },
    #[error("line {line}: unknown class value {value:?}")]
    UnknownNominal { line: usize, value: String },
    #[error("line {line}: cannot parse {value:?} as a finite number")]
    BadNumber { line: usize, value: String },
    #[error("line {line}: missing values ('?') are not supported")]
    MissingValue { line: usize },
    #[error("invalid chunk: {0}")]
    Data(#[from] DataError),
    #[error("chunk has {got} features, stream layout declares {expected}")]
    LayoutMismatch { expected: usize, got: usize },
    #[error("label {label} outside the {n_classes} declared classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl StreamIoError {
    /// Source line of a parse error, when known.
    pub fn line(&self) -> Option<usize> {
        use StreamIoError::*;
        match self {
            Syntax { line, .. }
            | Unsupported { line, .. }
            | MissingData { line }
            | DuplicateAttribute { line, .. }
            | NonNumericAttribute { line, .. }
            | ClassTooSmall { line, .. }
            | NoClassAttribute { line }
            | Arity { line, .. }
            | UnknownNominal { line, .. }
            | BadNumber { line, .. }
            | MissingValue { line } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttributeKind {
    Numeric,
    Nominal(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArffHeader {
    pub relation_name: String,
    pub attributes: Vec<Attribute>,
    pub class_attribute_index: usize,
}

impl ArffHeader {
    pub fn n_features(&self) -> usize {
        self.attributes.len() - 1
    }

    pub fn class_values(&self) -> &[String] {
        match &self.attributes[self.class_attribute_index].kind {
            AttributeKind::Nominal(v) => v,
            AttributeKind::Numeric => unreachable!("class attribute is nominal"),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_values().len()
    }
}

/// Line source that tracks line numbers and strips CR/LF.
#[derive(Debug)]
pub struct LineReader<R> {
    inner: R,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> LineReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, line_no: 0, buf: String::new() }
    }

    /// Next line with its 1-based number, or `None` at end of input.
    fn next_line(&mut self) -> Result<Option<(usize, &str)>, StreamIoError> {
        self.buf.clear();
        if self.inner.read_line(&mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        let s = self.buf.trim_end_matches(['\n', '\r']);
        Ok(Some((self.line_no, s)))
    }

    pub fn lines_read(&self) -> usize {
        self.line_no
    }
}

/// Splits off one possibly-quoted token; returns (token, rest).
fn take_token(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    let mut chars = s.char_indices();
    let (_, first) = chars.next()?;
    if first == '\'' || first == '"' {
        let end = s[1..].find(first)? + 1;
        Some((s[1..end].to_string(), &s[end + 1..]))
    } else {
        let end = s.find(char::is_whitespace).unwrap_or(s.len());
        Some((s[..end].to_string(), &s[end..]))
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    let b = s.as_bytes();
    if b.len() >= 2 && (b[0] == b'\'' || b[0] == b'"') && b[b.len() - 1] == b[0] {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn keyword<'a>(line: &'a str, kw: &str) -> Option<&'a str> {
    let head = line.get(..kw.len())?;
    if head.eq_ignore_ascii_case(kw) {
        let rest = &line[kw.len()..];
        if rest.is_empty() || rest.starts_with(char::is_whitespace) {
            return Some(rest);
        }
    }
    None
}

fn parse_attribute(line_no: usize, rest: &str) -> Result<Attribute, StreamIoError> {
    let syntax = |message: &str| StreamIoError::Syntax { line: line_no, message: message.into() };
    let (name, ty) = take_token(rest).ok_or_else(|| syntax("@attribute needs a name and a type"))?;
    let ty = ty.trim();
    if ty.is_empty() {
        return Err(syntax("@attribute needs a type"));
    }
    let kind = if ty.starts_with('{') {
        let inner = ty
            .strip_prefix('{')
            .and_then(|t| t.strip_suffix('}'))
            .ok_or_else(|| syntax("unterminated nominal value list"))?;
        let values: Vec<String> = inner
            .split(',')
            .map(|v| unquote(v).to_string())
            .filter(|v| !v.is_empty())
            .collect();
        AttributeKind::Nominal(values)
    } else {
        let word = ty.split_whitespace().next().unwrap_or("").to_ascii_lowercase();
        match word.as_str() {
            "numeric" | "real" | "integer" => AttributeKind::Numeric,
            "string" | "date" | "relational" => {
                return Err(StreamIoError::Unsupported {
                    line: line_no,
                    what: format!("{word} attribute {name:?}"),
                })
            }
            _ => return Err(syntax(&format!("unknown attribute type {ty:?}"))),
        }
    };
    Ok(Attribute { name, kind })
}

/// Reads header lines up to and including `@data`.
pub fn parse_header<R: BufRead>(lines: &mut LineReader<R>) -> Result<ArffHeader, StreamIoError> {
    let mut relation_name = String::new();
    let mut attributes: Vec<Attribute> = Vec::new();
    let mut attribute_lines = Vec::new();
    let data_line = loop {
        let Some((no, raw)) = lines.next_line()? else {
            return Err(StreamIoError::MissingData { line: lines.lines_read() });
        };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = keyword(line, "@relation") {
            relation_name = take_token(rest).map(|t| t.0).unwrap_or_default();
        } else if let Some(rest) = keyword(line, "@attribute") {
            let attr = parse_attribute(no, rest)?;
            if attributes.iter().any(|a| a.name.eq_ignore_ascii_case(&attr.name)) {
                return Err(StreamIoError::DuplicateAttribute { line: no, name: attr.name });
            }
            attributes.push(attr);
            attribute_lines.push(no);
        } else if keyword(line, "@data").is_some() {
            break no;
        } else {
            return Err(StreamIoError::Syntax { line: no, message: format!("unexpected header line {line:?}") });
        }
    };

    let nominal: Vec<usize> = attributes
        .iter()
        .enumerate()
        .filter(|(_, a)| matches!(a.kind, AttributeKind::Nominal(_)))
        .map(|(i, _)| i)
        .collect();
    let last = attributes.len().checked_sub(1);
    let class_attribute_index = match (last, nominal.as_slice()) {
        (None, _) | (_, []) => return Err(StreamIoError::NoClassAttribute { line: data_line }),
        (Some(l), ns) if ns.contains(&l) => l,
        (Some(_), [one]) => *one,
        (Some(_), ns) => ns[1],
    };
    if let Some(&bad) = nominal.iter().find(|&&i| i != class_attribute_index) {
        return Err(StreamIoError::NonNumericAttribute {
            line: attribute_lines[bad],
            name: attributes[bad].name.clone(),
        });
    }
    if let AttributeKind::Nominal(v) = &attributes[class_attribute_index].kind {
        if v.len() < 2 {
            return Err(StreamIoError::ClassTooSmall {
                line: attribute_lines[class_attribute_index],
                name: attributes[class_attribute_index].name.clone(),
            });
        }
    }
    Ok(ArffHeader { relation_name, attributes, class_attribute_index })
}

/// Streaming ARFF reader holding at most one chunk in memory.
#[derive(Debug)]
pub struct ArffReader<R> {
    lines: LineReader<R>,
    header: ArffHeader,
    chunk_size: usize,
    done: bool,
}

impl<R: BufRead> ArffReader<R> {
    pub fn new(source: R, chunk_size: usize) -> Result<Self, StreamIoError> {
        let mut lines = LineReader::new(source);
        let header = parse_header(&mut lines)?;
        Ok(Self { lines, header, chunk_size: chunk_size.max(1), done: false })
    }

    pub fn header(&self) -> &ArffHeader {
        &self.header
    }

    fn parse_row(&self, no: usize, line: &str, row: &mut Vec<f64>) -> Result<usize, StreamIoError> {
        if line.starts_with('{') {
            return Err(StreamIoError::Unsupported { line: no, what: "sparse instance".into() });
        }
        let expected = self.header.attributes.len();
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected {
            return Err(StreamIoError::Arity { line: no, expected, got: fields.len() });
        }
        row.clear();
        let mut label = 0;
        for (i, f) in fields.iter().enumerate() {
            if *f == "?" {
                return Err(StreamIoError::MissingValue { line: no });
            }
            if i == self.header.class_attribute_index {
                let v = unquote(f);
                label = self
                    .header
                    .class_values()
                    .iter()
                    .position(|c| c == v)
                    .ok_or_else(|| StreamIoError::UnknownNominal { line: no, value: v.to_string() })?;
            } else {
                let x: f64 = f
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| StreamIoError::BadNumber { line: no, value: f.to_string() })?;
                row.push(x);
            }
        }
        Ok(label)
    }

    /// Next chunk of up to `chunk_size` rows; the last one may be short.
    pub fn read_chunk(&mut self) -> Result<Option<Chunk>, StreamIoError> {
        if self.done {
            return Ok(None);
        }
        let mut features = Matrix::zeros(0, self.header.n_features());
        let mut labels = Vec::with_capacity(self.chunk_size);
        let mut row = Vec::with_capacity(self.header.n_features());
        while labels.len() < self.chunk_size {
            let parsed = match self.lines.next_line()? {
                None => {
                    self.done = true;
                    break;
                }
                Some((no, raw)) => {
                    let line = raw.trim();
                    if line.is_empty() || line.starts_with('%') {
                        continue;
                    }
                    let line = line.to_string();
                    self.parse_row(no, &line, &mut row)?
                }
            };
            features.push_row(&row)?;
            labels.push(parsed);
        }
        if labels.is_empty() {
            return Ok(None);
        }
        Ok(Some(Chunk::new(features, labels)?))
    }
}

impl<R: BufRead> ChunkSource for ArffReader<R> {
    type Error = StreamIoError;

    fn classes(&self) -> Vec<usize> {
        (0..self.header.n_classes()).collect()
    }

    fn next_chunk(&mut self) -> Option<Result<Chunk, StreamIoError>> {
        self.read_chunk().transpose()
    }
}

/// Reads CSV written by [`write_stream`]: a header row then `f0,...,label` rows.
#[derive(Debug)]
pub struct CsvReader<R> {
    lines: LineReader<R>,
    n_features: usize,
    classes: Vec<usize>,
    chunk_size: usize,
    done: bool,
}

impl<R: BufRead> CsvReader<R> {
    pub fn new(source: R, chunk_size: usize, n_classes: usize) -> Result<Self, StreamIoError> {
        let mut lines = LineReader::new(source);
        let (no, header) = lines.next_line()?.ok_or(StreamIoError::Syntax {
            line: 0,
            message: "empty CSV input".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.last() != Some(&"label") {
            return Err(StreamIoError::Syntax {
                line: no,
                message: "CSV header must end with a \"label\" column".into(),
            });
        }
        let n_features = cols.len() - 1;
        Ok(Self { lines, n_features, classes: (0..n_classes).collect(), chunk_size: chunk_size.max(1), done: false })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn read_chunk(&mut self) -> Result<Option<Chunk>, StreamIoError> {
        if self.done {
            return Ok(None);
        }
        let mut features = Matrix::zeros(0, self.n_features);
        let mut labels = Vec::new();
        let mut row = Vec::with_capacity(self.n_features);
        while labels.len() < self.chunk_size {
            let Some((no, raw)) = self.lines.next_line()? else {
                self.done = true;
                break;
            };
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != self.n_features + 1 {
                return Err(StreamIoError::Arity { line: no, expected: self.n_features + 1, got: fields.len() });
            }
            row.clear();
            for f in &fields[..self.n_features] {
                let x: f64 = f
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| StreamIoError::BadNumber { line: no, value: f.to_string() })?;
                row.push(x);
            }
            let raw_label = fields[self.n_features];
            let label: usize = raw_label
                .parse()
                .ok()
                .filter(|l| self.classes.contains(l))
                .ok_or_else(|| StreamIoError::UnknownNominal { line: no, value: raw_label.to_string() })?;
            features.push_row(&row)?;
            labels.push(label);
        }
        if labels.is_empty() {
            return Ok(None);
        }
        Ok(Some(Chunk::new(features, labels)?))
    }
}

impl<R: BufRead> ChunkSource for CsvReader<R> {
    type Error = StreamIoError;

    fn classes(&self) -> Vec<usize> {
        self.classes.clone()
    }

    fn next_chunk(&mut self) -> Option<Result<Chunk, StreamIoError>> {
        self.read_chunk().transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Arff,
    Csv,
}

impl Format {
    pub fn parse(s: &str) -> Option<Format> {
        match s.to_ascii_lowercase().as_str() {
            "arff" => Some(Format::Arff),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

/// Shape shared by every chunk of a serialized stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamLayout {
    pub relation: String,
    pub n_features: usize,
    pub n_classes: usize,
}

/// Writes a stream; returns the number of data rows. Floats use the shortest
/// representation that parses back to the identical value.
pub fn write_stream<'a, W, I>(
    sink: &mut W,
    layout: &StreamLayout,
    chunks: I,
    format: Format,
) -> Result<usize, StreamIoError>
where
    W: Write,
    I: IntoIterator<Item = &'a Chunk>,
{
    match format {
        Format::Arff => {
            writeln!(sink, "@relation {}", layout.relation)?;
            writeln!(sink)?;
            for j in 0..layout.n_features {
                writeln!(sink, "@attribute f{j} numeric")?;
            }
            let values: Vec<String> = (0..layout.n_classes).map(|c| c.to_string()).collect();
            writeln!(sink, "@attribute class {{{}}}", values.join(","))?;
            writeln!(sink)?;
            writeln!(sink, "@data")?;
        }
        Format::Csv => {
            let mut cols: Vec<String> = (0..layout.n_features).map(|j| format!("f{j}")).collect();
            cols.push("label".into());
            writeln!(sink, "{}", cols.join(","))?;
        }
    }
    let mut rows = 0;
    let mut line = String::new();
    for chunk in chunks {
        if chunk.n_features() != layout.n_features && !chunk.is_empty() {
            return Err(StreamIoError::LayoutMismatch { expected: layout.n_features, got: chunk.n_features() });
        }
        for (x, &label) in chunk.features().iter_rows().zip(chunk.labels()) {
            if label >= layout.n_classes {
                return Err(StreamIoError::LabelOutOfRange { label, n_classes: layout.n_classes });
            }
            line.clear();
            for v in x {
                line.push_str(&v.to_string());
                line.push(',');
            }
            line.push_str(&label.to_string());
            writeln!(sink, "{line}")?;
            rows += 1;
        }
    }
    sink.flush()?;
    Ok(rows)
}
