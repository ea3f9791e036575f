//! Plain-text embedding tables: one `id v1 v2 ... vN` line per utterance.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Embedding, EmbeddingSource};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub fn load_external_embeddings(path: impl AsRef<Path>) -> Result<BTreeMap<String, Embedding>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, message: String| Error::EmbeddingFile {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut table = BTreeMap::new();
    let mut dim = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut tokens = raw.split_whitespace();
        let Some(id) = tokens.next() else {
            continue;
        };
        let vector = tokens
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(line, format!("`{t}` is not a finite number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if vector.is_empty() {
            return Err(bad(line, format!("`{id}` has no values")));
        }
        match dim {
            None => dim = Some(vector.len()),
            Some(d) if d != vector.len() => {
                return Err(bad(
                    line,
                    format!("expected {d} values, found {}", vector.len()),
                ))
            }
            _ => {}
        }
        if table.contains_key(id) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let emb = Embedding::new(vector, EmbeddingSource::External, id)?;
        table.insert(id.to_string(), emb);
    }
    Ok(table)
}

/// Writes embeddings in the sidecar format, atomically.
pub fn write_embeddings<'a>(
    path: impl AsRef<Path>,
    embeddings: impl IntoIterator<Item = &'a Embedding>,
) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for e in embeddings {
        if e.utterance_id().is_empty() || e.utterance_id().contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!(
                "utterance id `{}` cannot be written",
                e.utterance_id()
            )));
        }
        text.push_str(e.utterance_id());
        for v in e.vector() {
            write!(text, " {v}").expect("writing to a String");
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())?;
    Ok(())
}
