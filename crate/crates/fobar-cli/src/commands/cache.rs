//! The `cache stats` subcommand.

use std::path::Path;

use anyhow::Result;
use fobar::llm::CacheStore;

pub fn cmd_cache_stats(dir: &Path) -> Result<()> {
    if !dir.is_dir() {
        println!("no cache directory at {}", dir.display());
        return Ok(());
    }
    let store = CacheStore::open_read_only(dir).map_err(|e| anyhow::anyhow!("{e}"))?;
    let stats = store.stats().map_err(|e| anyhow::anyhow!("{e}"))?;
    if stats.is_empty() {
        println!("cache at {} holds no record files", dir.display());
        return Ok(());
    }
    println!("{:<32} {:>10} {:>12}", "model", "records", "bytes");
    let mut total_records = 0;
    let mut total_bytes = 0;
    for s in &stats {
        println!("{:<32} {:>10} {:>12}", s.model, s.records, s.bytes);
        total_records += s.records;
        total_bytes += s.bytes;
    }
    println!("{:<32} {:>10} {:>12}", "total", total_records, total_bytes);
    Ok(())
}
