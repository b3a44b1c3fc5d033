use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::OutputArgs;

/// Resolved destination of a command's rows.
pub enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    /// `--out` if given, otherwise stdout.
    pub fn stdout_default(args: &OutputArgs) -> Sink {
        match &args.out {
            Some(p) if p.as_os_str() != "-" => Sink::File(p.clone()),
            _ => Sink::Stdout,
        }
    }

    /// `--out` if given, otherwise `name` inside `dir`.
    pub fn file_default(args: &OutputArgs, dir: &Path, name: &str) -> Sink {
        match &args.out {
            Some(p) if p.as_os_str() == "-" => Sink::Stdout,
            Some(p) => Sink::File(p.clone()),
            None => Sink::File(dir.join(name)),
        }
    }

    pub fn open(&self) -> Result<Box<dyn Write>> {
        Ok(match self {
            Sink::Stdout => Box::new(io::stdout().lock()),
            Sink::File(p) => Box::new(BufWriter::new(create(p)?)),
        })
    }

    /// Writes `rows` as CSV, or as one JSON document built by `json`.
    pub fn emit<T: Serialize, J: Serialize>(&self, args: &OutputArgs, rows: &[T], json: J) -> Result<()> {
        let mut w = self.open()?;
        if args.json {
            serde_json::to_writer_pretty(&mut w, &json)?;
            writeln!(w)?;
        } else {
            rfft_core::report::write_csv(rows, &mut w)?;
        }
        w.flush()?;
        if let Sink::File(p) = self {
            log::info!("wrote {}", p.display());
            eprintln!("{}", p.display());
        }
        Ok(())
    }
}

/// Creates `path` and any missing parent directories.
pub fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    File::create(path).with_context(|| format!("cannot create {}", path.display()))
}
