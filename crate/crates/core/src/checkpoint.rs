//! Self-describing binary checkpoint format (little-endian).
//!
//! ```text
//! "C2CNMT" version:u8
//! hidden:u32 src_vocab_size:u32 tgt_vocab_size:u32
//! src vocab block, tgt vocab block    (byte_len:u32, vocab file text)
//! 8 arrays: rows:u32 cols:u32 data:f64[rows*cols]
//!   encoder W, U, b; decoder W, U, b; output W, b   (biases are n×1)
//! ```

use std::fs;
use std::path::Path;

use crate::error::{CheckpointError, Error, Result};
use crate::layers::{DenseParams, LstmParams};
use crate::model::Seq2SeqModel;
use crate::numerics::Matrix;
use crate::vocab::CharVocab;

pub const MAGIC: &[u8; 6] = b"C2CNMT";
pub const VERSION: u8 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::contract(format!("value {v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_array(out: &mut Vec<u8>, rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    put_u32(out, rows)?;
    put_u32(out, cols)?;
    out.reserve(data.len() * 8);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(())
}

pub fn to_bytes(model: &Seq2SeqModel) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(64 + model.num_params() * 8);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    put_u32(&mut out, model.hidden())?;
    put_u32(&mut out, model.src_vocab().len())?;
    put_u32(&mut out, model.tgt_vocab().len())?;
    for vocab in [model.src_vocab(), model.tgt_vocab()] {
        let text = vocab.to_text();
        put_u32(&mut out, text.len())?;
        out.extend_from_slice(text.as_bytes());
    }
    let (enc, dec, o) = (model.encoder(), model.decoder(), model.output());
    for lstm in [enc, dec] {
        put_array(&mut out, lstm.w.rows(), lstm.w.cols(), lstm.w.as_slice())?;
        put_array(&mut out, lstm.u.rows(), lstm.u.cols(), lstm.u.as_slice())?;
        put_array(&mut out, lstm.b.len(), 1, &lstm.b)?;
    }
    put_array(&mut out, o.w.rows(), o.w.cols(), o.w.as_slice())?;
    put_array(&mut out, o.b.len(), 1, &o.b)?;
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(CheckpointError::Truncated(what)),
        }
    }

    fn u32(&mut self, what: &'static str) -> Result<usize, CheckpointError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn vocab(&mut self, what: &'static str, expected_len: usize) -> Result<CharVocab, CheckpointError> {
        let n = self.u32(what)?;
        let bytes = self.take(n, what)?;
        let text = std::str::from_utf8(bytes)
            .map_err(|_| CheckpointError::Inconsistent(format!("{what} is not UTF-8")))?;
        let vocab = CharVocab::from_text(text).map_err(|e| CheckpointError::Inconsistent(format!("{what}: {e}")))?;
        if vocab.len() != expected_len {
            return Err(CheckpointError::Inconsistent(format!(
                "{what} has {} symbols, header says {expected_len}",
                vocab.len()
            )));
        }
        Ok(vocab)
    }

    fn array(&mut self, what: &'static str, rows: usize, cols: usize) -> Result<Vec<f64>, CheckpointError> {
        let (r, c) = (self.u32(what)?, self.u32(what)?);
        if (r, c) != (rows, cols) {
            return Err(CheckpointError::Inconsistent(format!(
                "{what} is {r}×{c}, expected {rows}×{cols}"
            )));
        }
        let n = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).ok_or(CheckpointError::Truncated(what))?;
        let bytes = self.take(n, what)?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CheckpointError::Inconsistent(format!("{what} holds non-finite values")));
        }
        Ok(data)
    }

    fn matrix(&mut self, what: &'static str, rows: usize, cols: usize) -> Result<Matrix, CheckpointError> {
        let data = self.array(what, rows, cols)?;
        Matrix::from_vec(rows, cols, data).map_err(|e| CheckpointError::Inconsistent(format!("{what}: {e}")))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Seq2SeqModel> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(MAGIC.len(), "magic").map_err(|_| CheckpointError::BadMagic)?;
    if magic != MAGIC {
        return Err(CheckpointError::BadMagic.into());
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: VERSION,
        }
        .into());
    }
    let hidden = r.u32("hidden size")?;
    let src_len = r.u32("source vocab size")?;
    let tgt_len = r.u32("target vocab size")?;
    if hidden == 0 {
        return Err(CheckpointError::Inconsistent("hidden size is zero".into()).into());
    }
    let src_vocab = r.vocab("source vocab", src_len)?;
    let tgt_vocab = r.vocab("target vocab", tgt_len)?;
    let g = 4 * hidden;
    let lstm = |r: &mut Reader, input: usize, names: [&'static str; 3]| -> Result<LstmParams, CheckpointError> {
        Ok(LstmParams {
            w: r.matrix(names[0], g, input)?,
            u: r.matrix(names[1], g, hidden)?,
            b: r.array(names[2], g, 1)?,
        })
    };
    let encoder = lstm(&mut r, src_len, ["encoder W", "encoder U", "encoder b"])?;
    let decoder = lstm(&mut r, tgt_len, ["decoder W", "decoder U", "decoder b"])?;
    let output = DenseParams {
        w: r.matrix("output W", tgt_len, hidden)?,
        b: r.array("output b", tgt_len, 1)?,
    };
    if r.pos != buf.len() {
        return Err(CheckpointError::Inconsistent(format!("{} trailing bytes", buf.len() - r.pos)).into());
    }
    Seq2SeqModel::from_parts(encoder, decoder, output, src_vocab, tgt_vocab)
        .map_err(|e| CheckpointError::Inconsistent(e.to_string()).into())
}

/// Writes through a temporary sibling file and renames it into place.
pub fn save_checkpoint(model: &Seq2SeqModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = to_bytes(model)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Seq2SeqModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{lstm_step, LstmState, StepInput};

    fn model() -> Seq2SeqModel {
        let src = CharVocab::build(&["abc d\n\\"]);
        let tgt = CharVocab::build(&["xyzé"]);
        Seq2SeqModel::new(src, tgt, 8, 77).unwrap()
    }

    #[test]
    fn round_trip_is_identity() {
        let m = model();
        let back = from_bytes(&to_bytes(&m).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.flat_params(), m.flat_params());
    }

    #[test]
    fn round_trip_preserves_step_outputs_bitwise() {
        let m = model();
        let back = from_bytes(&to_bytes(&m).unwrap()).unwrap();
        let x: Vec<f64> = (0..m.src_vocab().len()).map(|i| i as f64 * 0.1).collect();
        let s = LstmState {
            h: vec![0.1; 8],
            c: vec![-0.3; 8],
        };
        let a = lstm_step(m.encoder(), StepInput::Dense(&x), &s).unwrap().0;
        let b = lstm_step(back.encoder(), StepInput::Dense(&x), &s).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&model()).unwrap();
        assert_eq!(&bytes[..6], b"C2CNMT");
        assert_eq!(bytes[6], 1);
        assert_eq!(u32::from_le_bytes(bytes[7..11].try_into().unwrap()), 8);
    }

    #[test]
    fn distinct_load_errors() {
        let good = to_bytes(&model()).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(from_bytes(&bad), Err(Error::Checkpoint(CheckpointError::BadMagic))));
        assert!(from_bytes(&bad).unwrap_err().to_string().contains("bad magic"));

        let mut bad = good.clone();
        bad[6] = 2;
        assert!(matches!(
            from_bytes(&bad),
            Err(Error::Checkpoint(CheckpointError::VersionMismatch { found: 2, .. }))
        ));

        for cut in [3, 9, 20, good.len() / 2, good.len() - 1] {
            assert!(
                matches!(from_bytes(&good[..cut]), Err(Error::Checkpoint(CheckpointError::Truncated(_))) | Err(Error::Checkpoint(CheckpointError::BadMagic))),
                "cut at {cut}"
            );
        }

        let mut bad = good.clone();
        bad[7] = 9; // hidden size 9 does not match the stored arrays
        assert!(matches!(from_bytes(&bad), Err(Error::Checkpoint(CheckpointError::Inconsistent(_)))));

        let mut bad = good;
        bad.push(0);
        assert!(matches!(from_bytes(&bad), Err(Error::Checkpoint(CheckpointError::Inconsistent(_)))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = model();
        save_checkpoint(&m, &path).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), m);
        assert!(matches!(load_checkpoint(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
