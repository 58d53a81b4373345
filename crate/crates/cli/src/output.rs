//! Output directory: every file carries the config hash.

use crate::config::RunConfig;
use serde::Serialize;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub struct Output {
    pub dir: PathBuf,
    pub hash: String,
    pub written: Vec<PathBuf>,
}

impl Output {
    /// Creates the directory and echoes the effective config into `config.toml`.
    pub fn create(dir: &Path, cfg: &RunConfig) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let mut out = Output { dir: dir.to_path_buf(), hash: cfg.hash(), written: Vec::new() };
        let text = cfg.to_toml();
        out.text("config.toml", |w, h| {
            writeln!(w, "{h}")?;
            w.write_all(text.as_bytes())
        })?;
        Ok(out)
    }

    /// `# config_hash=...`, the first line of every text file.
    pub fn header(&self) -> String {
        format!("# config_hash={}", self.hash)
    }

    pub fn text<F>(&mut self, name: &str, f: F) -> std::io::Result<()>
    where
        F: FnOnce(&mut BufWriter<File>, &str) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        let h = self.header();
        f(&mut w, &h)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// Pretty JSON with a top-level `config_hash` field.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut v = serde_json::to_value(value)?;
        if let serde_json::Value::Object(m) = &mut v {
            m.insert("config_hash".into(), self.hash.clone().into());
        }
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &v)?;
        writeln!(w)?;
        w.flush()?;
        self.written.push(path);
        Ok(())
    }
}
