//! CSV files with a `# key: value` manifest header, and the run index.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const FORMAT_VERSION: &str = "levirotor-csv 1";

/// Provenance shared by every file of one invocation.
#[derive(Debug, Clone)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, source: &str, config_hash: &str, seed: u64) -> Self {
        let entries = vec![
            ("format".into(), FORMAT_VERSION.into()),
            ("levirotor".into(), env!("CARGO_PKG_VERSION").into()),
            ("command".into(), command.into()),
            ("source".into(), source.into()),
            ("config_sha256".into(), config_hash.into()),
            ("seed".into(), seed.to_string()),
        ];
        Manifest { entries }
    }

    pub fn with(&self, key: &str, value: impl ToString) -> Self {
        let mut m = self.clone();
        m.entries.push((key.into(), value.to_string()));
        m
    }

    fn write_header(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// A CSV stream with its manifest already written.
pub struct Table {
    writer: csv::Writer<BufWriter<File>>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, manifest: &Manifest, columns: &[&str]) -> Result<Self, CliError> {
        let mut file = BufWriter::new(File::create(dir.join(name))?);
        manifest.write_header(&mut file)?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(columns)?;
        Ok(Table { writer })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<(), CliError> {
        self.writer.write_record(values.iter().map(|x| num(*x)))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Output directory plus the list of files written into it.
pub struct OutDir {
    pub path: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path)?;
        Ok(OutDir { path: path.to_path_buf(), files: Vec::new() })
    }

    pub fn table(&mut self, name: &str, manifest: &Manifest, columns: &[&str]) -> Result<Table, CliError> {
        self.files.push(name.to_string());
        Table::create(&self.path, name, manifest, columns)
    }

    /// Writes the normalized config and `manifest.txt` indexing all files.
    pub fn finish(self, manifest: &Manifest, normalized_config: &str) -> Result<(), CliError> {
        fs::write(self.path.join("config.toml"), normalized_config)?;
        let mut w = BufWriter::new(File::create(self.path.join("manifest.txt"))?);
        manifest.write_header(&mut w)?;
        writeln!(w, "# config: config.toml")?;
        for f in &self.files {
            writeln!(w, "# file: {f}")?;
        }
        w.flush()?;
        Ok(())
    }
}
