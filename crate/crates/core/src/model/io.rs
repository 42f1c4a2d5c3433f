//! Plain-text model format:
//!
//! ```text
//! odqp 1
//! n m p
//! Q
//! <n rows of n values>
//! c
//! <n values>
//! A
//! ...
//! ```
//! Blocks appear in the order `Q c A b G h`; an empty block is just its label.
//! `#` starts a comment.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{ModelError, QpModel};
use crate::linalg::Mat;
use crate::scalar::Real;

pub fn save<T: Real>(model: &QpModel<T>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load<T: Real>(path: impl AsRef<Path>) -> Result<QpModel<T>, ModelError> {
    read_model(BufReader::new(File::open(path)?))
}

fn write_row<T: Real, W: Write>(w: &mut W, row: &[T]) -> std::io::Result<()> {
    let line: Vec<String> = row.iter().map(|v| v.to_decimal()).collect();
    writeln!(w, "{}", line.join(" "))
}

pub fn write_model<T: Real, W: Write>(model: &QpModel<T>, w: &mut W) -> Result<(), ModelError> {
    writeln!(w, "odqp 1")?;
    writeln!(w, "{} {} {}", model.n(), model.m(), model.p())?;
    let mat = |w: &mut W, label: &str, m: &Mat<T>| -> std::io::Result<()> {
        writeln!(w, "{label}")?;
        for i in 0..m.nrows() {
            write_row(w, m.row(i))?;
        }
        Ok(())
    };
    let vec = |w: &mut W, label: &str, v: &[T]| -> std::io::Result<()> {
        writeln!(w, "{label}")?;
        if !v.is_empty() {
            write_row(w, v)?;
        }
        Ok(())
    };
    mat(w, "Q", model.q())?;
    vec(w, "c", model.c())?;
    mat(w, "A", model.a())?;
    vec(w, "b", model.b())?;
    mat(w, "G", model.g())?;
    vec(w, "h", model.h())?;
    Ok(())
}

struct Lines {
    items: Vec<(usize, String)>,
    pos: usize,
}

impl Lines {
    fn new<R: BufRead>(r: R) -> Result<Self, ModelError> {
        let mut items = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if !body.is_empty() {
                items.push((i + 1, body.to_string()));
            }
        }
        Ok(Self { items, pos: 0 })
    }

    fn next(&mut self, what: &str) -> Result<(usize, &str), ModelError> {
        let last = self.items.last().map_or(0, |l| l.0);
        let item = self.items.get(self.pos).ok_or_else(|| ModelError::Parse {
            line: last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })?;
        self.pos += 1;
        Ok((item.0, item.1.as_str()))
    }

    fn label(&mut self, label: &str) -> Result<(), ModelError> {
        let (line, body) = self.next(&format!("block label `{label}`"))?;
        if body != label {
            return Err(ModelError::Parse { line, msg: format!("expected block label `{label}`, found `{body}`") });
        }
        Ok(())
    }

    fn values<T: Real>(&mut self, count: usize, what: &str) -> Result<Vec<T>, ModelError> {
        let (line, body) = self.next(what)?;
        let toks: Vec<&str> = body.split_whitespace().collect();
        if toks.len() != count {
            return Err(ModelError::Parse {
                line,
                msg: format!("expected {count} values for {what}, found {}", toks.len()),
            });
        }
        toks.iter()
            .map(|t| {
                t.parse::<T>().map_err(|_| ModelError::Parse { line, msg: format!("invalid number `{t}`") })
            })
            .collect()
    }

    fn matrix<T: Real>(&mut self, label: &str, rows: usize, cols: usize) -> Result<Mat<T>, ModelError> {
        self.label(label)?;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            data.extend(self.values::<T>(cols, &format!("row {i} of {label}"))?);
        }
        Ok(Mat::from_vec(rows, cols, data))
    }

    fn vector<T: Real>(&mut self, label: &str, len: usize) -> Result<Vec<T>, ModelError> {
        self.label(label)?;
        if len == 0 {
            return Ok(Vec::new());
        }
        self.values(len, label)
    }
}

pub fn read_model<T: Real, R: BufRead>(r: R) -> Result<QpModel<T>, ModelError> {
    let mut lines = Lines::new(r)?;
    let (line, header) = lines.next("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["odqp", "1"] {
        return Err(ModelError::Parse { line, msg: format!("expected `odqp 1`, found `{header}`") });
    }
    let (line, dims) = lines.next("dimensions")?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| ModelError::Parse { line, msg: format!("bad dimensions: {e}") })?;
    let [n, m, p] = dims[..] else {
        return Err(ModelError::Parse { line, msg: "expected `n m p`".into() });
    };
    let q = lines.matrix("Q", n, n)?;
    let c = lines.vector("c", n)?;
    let a = lines.matrix("A", m, n)?;
    let b = lines.vector("b", m)?;
    let g = lines.matrix("G", p, n)?;
    let h = lines.vector("h", p)?;
    if let Some((line, body)) = lines.items.get(lines.pos) {
        return Err(ModelError::Parse { line: *line, msg: format!("trailing content `{body}`") });
    }
    QpModel::new(q, c, a, b, g, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{degenerate_suite, random_qp};

    fn round_trip(m: &QpModel<f64>) -> QpModel<f64> {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        read_model(buf.as_slice()).unwrap()
    }

    #[test]
    fn random_round_trip_is_exact() {
        let m: QpModel<f64> = random_qp(4, 2, 3, 7).unwrap();
        assert_eq!(round_trip(&m), m);
    }

    #[test]
    fn tiny_entries_survive() {
        let m = &degenerate_suite::<f64>()[1];
        let back = round_trip(m);
        assert_eq!(back.q()[(0, 0)], 1e-10);
        assert_eq!(back.q()[(0, 1)], 1e-12);
        assert_eq!(&back, m);
    }

    #[test]
    fn f32_round_trip() {
        let m: QpModel<f32> = random_qp(3, 1, 2, 5).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(read_model::<f32, _>(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn row_count_mismatch_is_a_parse_error() {
        let text = "odqp 1\n2 2 0\nQ\n1 0\n0 1\nc\n0 0\nA\n1 1\nb\n1 2\nG\nh\n";
        match read_model::<f64, _>(text.as_bytes()) {
            Err(ModelError::Parse { line, .. }) => assert_eq!(line, 10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn comments_and_trailing_garbage() {
        let ok = "# a comment\nodqp 1\n1 0 0 # dims\nQ\n2\nc\n-1\nA\nb\nG\nh\n";
        let m = read_model::<f64, _>(ok.as_bytes()).unwrap();
        assert_eq!(m.c(), &[-1.0]);
        let bad = format!("{ok}extra\n");
        assert!(matches!(read_model::<f64, _>(bad.as_bytes()), Err(ModelError::Parse { line: 12, .. })));
    }

    #[test]
    fn bad_header() {
        assert!(matches!(
            read_model::<f64, _>("qp 2\n".as_bytes()),
            Err(ModelError::Parse { line: 1, .. })
        ));
    }
}
