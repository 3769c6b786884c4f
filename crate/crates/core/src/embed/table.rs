use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::util::{self, Fingerprint};
use crate::{Error, Result};

/// Reserved token that stores the out-of-vocabulary vector in vector files.
pub const OOV_TOKEN: &str = "</OOV>";

/// Dense vectors keyed by token, plus an optional out-of-vocabulary vector.
///
/// The text format is
///
/// ```text
/// <row_count> <dim>
/// <token> <v_1> ... <v_dim>
/// ...
/// </OOV> <v_1> ... <v_dim>      (optional, always last)
/// ```
///
/// `row_count` does not include the `</OOV>` line. Values are written with
/// the shortest decimal representation that parses back to the same `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
    oov: Option<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(
        tokens: Vec<String>,
        dim: usize,
        data: Vec<f64>,
        oov: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation("embedding dim must be positive".into()));
        }
        if data.len() != tokens.len() * dim {
            return Err(Error::Shape(format!(
                "{} values for {} rows of dim {}",
                data.len(),
                tokens.len(),
                dim
            )));
        }
        if let Some(v) = &oov {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "OOV vector has length {}, expected {dim}",
                    v.len()
                )));
            }
        }
        if !data.iter().chain(oov.iter().flatten()).all(|x| x.is_finite()) {
            return Err(Error::Validation("embedding contains non-finite values".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::Validation("empty token in embedding table".into()));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate token `{t}`")));
            }
        }
        Ok(EmbeddingTable {
            tokens,
            index,
            dim,
            data,
            oov,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// In-vocabulary vector, if any.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.row(i))
    }

    pub fn oov_vector(&self) -> Option<&[f64]> {
        self.oov.as_deref()
    }

    pub fn with_oov(mut self, oov: Vec<f64>) -> Result<Self> {
        if oov.len() != self.dim || !oov.iter().all(|x| x.is_finite()) {
            return Err(Error::Validation("OOV vector must be finite with table dim".into()));
        }
        self.oov = Some(oov);
        Ok(self)
    }

    /// Whole-token lookup: in-vocabulary tokens get their row, all other
    /// tokens share the OOV vector.
    pub fn lookup_token(&self, token: &str) -> Result<&[f64]> {
        match self.get(token) {
            Some(v) => Ok(v),
            None => self
                .oov_vector()
                .ok_or_else(|| Error::MissingOov(token.to_owned())),
        }
    }

    pub fn fingerprint(&self) -> String {
        let mut fp = Fingerprint::default();
        fp.u64(self.dim as u64);
        for t in &self.tokens {
            fp.str(t);
        }
        fp.f64s(&self.data);
        match &self.oov {
            Some(v) => fp.u64(1).f64s(v),
            None => fp.u64(0),
        };
        fp.finish()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.tokens {
            if t.chars().any(char::is_whitespace) || t == OOV_TOKEN {
                return Err(Error::Validation(format!(
                    "token `{t}` cannot be stored in a vector file"
                )));
            }
        }
        let io = |e| Error::io("<vector writer>", e);
        writeln!(w, "{} {}", self.tokens.len(), self.dim).map_err(io)?;
        for (i, t) in self.tokens.iter().enumerate() {
            write_row(&mut w, t, self.row(i)).map_err(io)?;
        }
        if let Some(v) = &self.oov {
            write_row(&mut w, OOV_TOKEN, v).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let w = util::create(path)?;
        self.write(w).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            e => e,
        })
    }

    pub fn read<R: BufRead>(reader: R, origin: &str) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io(origin, e))?,
            None => return Err(Error::parse(origin, 1, "missing header")),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| s.parse::<usize>().ok();
        let (rows, dim) = match fields.as_slice() {
            [r, d] => match (parse_usize(r), parse_usize(d)) {
                (Some(r), Some(d)) if d > 0 => (r, d),
                _ => return Err(Error::parse(origin, 1, "header must be `<rows> <dim>`")),
            },
            _ => return Err(Error::parse(origin, 1, "header must be `<rows> <dim>`")),
        };

        let mut tokens = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        let mut oov = None;
        let mut last_line = 1;
        for (i, line) in lines {
            let lineno = i + 1;
            last_line = lineno;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() {
                continue;
            }
            if oov.is_some() {
                return Err(Error::parse(origin, lineno, "row after the OOV line"));
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default();
            let values: Vec<f64> = parts
                .map(|s| match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::parse(origin, lineno, format!("bad value `{s}`"))),
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {dim} values, found {}", values.len()),
                ));
            }
            if token == OOV_TOKEN {
                oov = Some(values);
            } else {
                if tokens.len() == rows {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("more rows than the {rows} declared"),
                    ));
                }
                tokens.push(token.to_owned());
                data.extend(values);
            }
        }
        if tokens.len() != rows {
            return Err(Error::parse(
                origin,
                last_line,
                format!("declared {rows} rows, found {}", tokens.len()),
            ));
        }
        Self::new(tokens, dim, data, oov).map_err(|e| match e {
            Error::Validation(msg) => Error::parse(origin, 0, msg),
            e => e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(util::open(path)?, &path.display().to_string())
    }
}

fn write_row<W: Write>(w: &mut W, token: &str, values: &[f64]) -> std::io::Result<()> {
    w.write_all(token.as_bytes())?;
    for v in values {
        write!(w, " {v}")?;
    }
    w.write_all(b"\n")
}
