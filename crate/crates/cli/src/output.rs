use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

/// Artifact sink for one run. Without a directory, tables and the summary
/// go to stdout.
pub struct Output {
    dir: Option<PathBuf>,
    plot: bool,
    echo_tables: bool,
    files: Vec<String>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>, plot: bool, echo_tables: bool) -> Result<Self> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
        }
        Ok(Output { dir, plot, echo_tables, files: Vec::new() })
    }

    /// Writes a preformatted artifact; a no-op without a directory.
    pub fn write_file(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let Some(dir) = self.dir.as_ref() else {
            return Ok(());
        };
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes `<name>.csv`, plus `<name>.dat` for gnuplot when plotting.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner()?;
        if self.dir.is_none() {
            if self.echo_tables {
                let mut out = std::io::stdout().lock();
                writeln!(out, "# {name}")?;
                out.write_all(&bytes)?;
            }
            return Ok(());
        }
        self.write_file(&format!("{name}.csv"), &bytes)?;
        if self.plot {
            let mut dat = format!("# {}\n", header.join(" "));
            for r in rows {
                let fields: Vec<String> = r.iter().map(|f| f.replace(' ', "")).collect();
                dat.push_str(&fields.join(" "));
                dat.push('\n');
            }
            self.write_file(&format!("{name}.dat"), dat.as_bytes())?;
        }
        Ok(())
    }

    pub fn summary(&mut self, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        match self.dir {
            Some(_) => self.write_file("summary.json", text.as_bytes()),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    /// `manifest.json`: the run configuration plus provenance. It is the
    /// only artifact that varies between identical runs (wall time).
    pub fn manifest(
        &mut self,
        command: &str,
        config: &impl Serialize,
        seed: Option<u64>,
        wall_secs: f64,
    ) -> Result<()> {
        if self.dir.is_none() {
            return Ok(());
        }
        let manifest = serde_json::json!({
            "command": command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "config": config,
            "seed": seed,
            "threads": rayon::current_num_threads(),
            "versions": {
                "threshold-lab": threshold_lab::VERSION,
                "cli": env!("CARGO_PKG_VERSION"),
            },
            "wall_time_secs": wall_secs,
            "files": self.files,
        });
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        self.write_file("manifest.json", text.as_bytes())
    }
}
