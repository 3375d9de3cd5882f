use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::NullTable;
use crate::error::{Error, Result};
use crate::pvalue::{Direction, MethodSpec};

type Key = (String, usize, usize, u64);

/// In-memory table store with optional on-disk persistence.
///
/// Files are CSV: a `method,K,B,seed,direction` header line, one value line,
/// then a `stat` line followed by the B sorted statistics.
#[derive(Debug, Default)]
pub struct TableCache {
    dir: Option<PathBuf>,
    tables: Mutex<HashMap<Key, Arc<NullTable>>>,
}

impl TableCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()), tables: Mutex::default() }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// File name for a table key.
    pub fn file_name(method: &MethodSpec, k: usize, b: usize, seed: u64) -> String {
        let stem: String = method
            .key()
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
            .collect();
        format!("{stem}_K{k}_B{b}_seed{seed}.csv")
    }

    pub fn get(&self, method: &MethodSpec, k: usize, b: usize, seed: u64) -> Option<Arc<NullTable>> {
        let key = (method.key(), k, b, seed);
        if let Some(t) = self.tables.lock().expect("table cache poisoned").get(&key) {
            return Some(Arc::clone(t));
        }
        let path = self.dir.as_ref()?.join(Self::file_name(method, k, b, seed));
        match read_table(&path, method) {
            Ok(t) if t.k == k && t.b == b && t.seed == seed => {
                log::debug!("loaded null table {}", path.display());
                let t = Arc::new(t);
                self.tables.lock().expect("table cache poisoned").insert(key, Arc::clone(&t));
                Some(t)
            }
            Ok(_) => None,
            Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => None,
            Err(e) => {
                log::warn!("ignoring unreadable table {}: {e}", path.display());
                None
            }
        }
    }

    pub fn insert(&self, table: NullTable) -> Result<Arc<NullTable>> {
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir)?;
            let path = dir.join(Self::file_name(&table.method, table.k, table.b, table.seed));
            write_table(&table, &path)?;
        }
        let key = (table.method.key(), table.k, table.b, table.seed);
        let table = Arc::new(table);
        self.tables
            .lock()
            .expect("table cache poisoned")
            .insert(key, Arc::clone(&table));
        Ok(table)
    }

    /// Keys of every table currently held, as `method/K/B/seed` strings.
    pub fn keys(&self) -> Vec<String> {
        let mut keys: Vec<String> = self
            .tables
            .lock()
            .expect("table cache poisoned")
            .keys()
            .map(|(m, k, b, s)| format!("{m}/K={k}/B={b}/seed={s}"))
            .collect();
        keys.sort();
        keys
    }
}

/// Writes a table, going through a temporary file so readers never see a
/// partial table.
pub fn write_table(table: &NullTable, path: &Path) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        writeln!(w, "method,K,B,seed,direction")?;
        writeln!(
            w,
            "{},{},{},{},{}",
            table.method.key(),
            table.k,
            table.b,
            table.seed,
            table.direction.as_str()
        )?;
        writeln!(w, "stat")?;
        for s in table.stats() {
            writeln!(w, "{s}")?;
        }
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a table written by [`write_table`]; the stored method key must match
/// `method`.
pub fn read_table(path: &Path, method: &MethodSpec) -> Result<NullTable> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let mut next = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse(format!("{}: truncated table file", path.display())))?
            .map_err(Error::from)
    };
    if next()?.trim() != "method,K,B,seed,direction" {
        return Err(Error::Parse(format!("{}: bad header", path.display())));
    }
    let meta = next()?;
    let fields: Vec<&str> = meta.trim().split(',').collect();
    if fields.len() != 5 {
        return Err(Error::Parse(format!("{}: bad metadata line", path.display())));
    }
    if fields[0] != method.key() {
        return Err(Error::Mismatch(format!(
            "{} holds {}, expected {}",
            path.display(),
            fields[0],
            method.key()
        )));
    }
    let parse_err = |what: &str| Error::Parse(format!("{}: bad {what}", path.display()));
    let k: usize = fields[1].parse().map_err(|_| parse_err("K"))?;
    let b: usize = fields[2].parse().map_err(|_| parse_err("B"))?;
    let seed: u64 = fields[3].parse().map_err(|_| parse_err("seed"))?;
    let direction: Direction = fields[4].parse()?;
    if next()?.trim() != "stat" {
        return Err(parse_err("column header"));
    }
    let mut stats = Vec::with_capacity(b);
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        stats.push(line.parse::<f64>().map_err(|_| parse_err("statistic"))?);
    }
    if stats.len() != b {
        return Err(Error::Parse(format!(
            "{}: expected {b} statistics, found {}",
            path.display(),
            stats.len()
        )));
    }
    if stats.windows(2).any(|w| w[0] > w[1]) {
        return Err(parse_err("ordering (statistics must be ascending)"));
    }
    NullTable::from_stats(method.clone(), k, seed, direction, stats)
}
