use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

pub const VALUES: &str = "values.csv";
pub const POLICY: &str = "policy.csv";
pub const BANDS: &str = "bands.csv";
pub const SUMMARY: &str = "summary.json";

/// Writes the fixed set of artifacts into one directory.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn csv<T, I>(&self, name: &str, rows: I) -> io::Result<()>
    where
        T: Serialize,
        I: IntoIterator<Item = T>,
    {
        let mut w = csv::Writer::from_path(self.path(name)).map_err(io::Error::other)?;
        for row in rows {
            w.serialize(row).map_err(io::Error::other)?;
        }
        w.flush()
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> io::Result<()> {
        let mut f = io::BufWriter::new(fs::File::create(self.path(name))?);
        serde_json::to_writer_pretty(&mut f, value).map_err(io::Error::other)?;
        f.write_all(b"\n")?;
        f.flush()
    }
}
