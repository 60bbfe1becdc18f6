//! Small file helpers: atomic writes and JSON-lines.

use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::Path;

/// Writes `path` through a sibling temp file that is renamed into place only
/// after `fill` succeeds, so readers never observe a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> io::Result<()>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_jsonl<T: Serialize>(out: &mut dyn Write, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut *out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses JSON lines, skipping blank lines. Errors carry the line number.
pub fn read_jsonl<T: DeserializeOwned, R: BufRead>(input: R) -> io::Result<Vec<T>> {
    let mut items = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))
        })?;
        items.push(item);
    }
    Ok(items)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let file = std::fs::File::open(path)?;
    read_jsonl(io::BufReader::new(file))
}
