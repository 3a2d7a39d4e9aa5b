use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::RunError;

/// First line of every file written by a run.
pub fn header_line(cfg: &RunConfig) -> String {
    format!("# twoscale {} config={}", env!("CARGO_PKG_VERSION"), cfg.hash())
}

/// Output directory; every file starts with [`header_line`].
pub struct Output {
    dir: PathBuf,
    header: String,
    written: Vec<PathBuf>,
}

impl Output {
    /// Creates the directory and echoes the configuration into `config.toml`.
    pub fn create(cfg: &RunConfig) -> Result<Self, RunError> {
        let dir = cfg.out.clone();
        std::fs::create_dir_all(&dir).map_err(|source| RunError::Io { path: dir.clone(), source })?;
        let mut out = Self { dir, header: header_line(cfg), written: Vec::new() };
        out.write("config.toml", &cfg.to_toml())?;
        Ok(out)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| RunError::Io { path: parent.to_path_buf(), source })?;
        }
        let text = format!("{}\n{body}", self.header);
        std::fs::write(&path, text).map_err(|source| RunError::Io { path: path.clone(), source })?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Full double precision (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}
