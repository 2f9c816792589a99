//! CSV writing with a provenance header.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(command: &str, cfg: &ExperimentConfig, extra: &str) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# dgcopula {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(text, "# command: {command}");
        let _ = writeln!(text, "# seed: {}", cfg.seed);
        let _ = writeln!(text, "# config-sha256: {}", cfg.hash(extra));
        Self { text }
    }

    pub fn comment(&mut self, line: &str) -> &mut Self {
        let _ = writeln!(self.text, "# {line}");
        self
    }

    pub fn row<I, S>(&mut self, cells: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let line: Vec<String> = cells.into_iter().map(|c| c.as_ref().to_string()).collect();
        self.text.push_str(&line.join(","));
        self.text.push('\n');
        self
    }

    pub fn into_string(self) -> String {
        self.text
    }

    /// Writes to `path`, or stdout when `path` is `None`.
    pub fn write(self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => std::fs::write(p, self.text.as_bytes())
                .with_context(|| format!("cannot write {}", p.display())),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(self.text.as_bytes())?;
                out.flush()?;
                Ok(())
            }
        }
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:?}")
    }
}

/// `ratios.csv` → `ratios.<suffix>.csv`.
pub fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}.{suffix}.{ext}"))
}
