//! Output plumbing: run metadata, input digests, and the three output
//! shapes (JSON with a `meta` object, CSV with `#` header lines, binary with
//! a `.meta.json` sidecar).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::exit::InputError;

pub struct Run {
    command: String,
    config: Value,
    inputs: BTreeMap<String, String>,
}

impl Run {
    pub fn new<C: Serialize>(command: &str, config: &C) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
        })
    }

    /// Hashes `path` into the metadata and returns an open reader on it.
    pub fn open(&mut self, path: &Path) -> Result<File> {
        let mut f = File::open(path).map_err(|e| InputError(format!("cannot open {}: {e}", path.display())))?;
        let mut h = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        loop {
            let n = f.read(&mut buf)?;
            if n == 0 {
                break;
            }
            h.update(&buf[..n]);
        }
        self.inputs
            .insert(path.display().to_string(), hex::encode(h.finalize()));
        Ok(File::open(path)?)
    }

    pub fn meta(&self) -> Value {
        json!({
            "tool": "miscale",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
        })
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut h = vec![
            format!("miscale {}", env!("CARGO_PKG_VERSION")),
            format!("command: {}", self.command),
            format!("config: {}", self.config),
        ];
        h.extend(self.inputs.iter().map(|(p, d)| format!("input: {p} sha256:{d}")));
        h
    }

    /// Writes `payload` as a JSON object with an added `meta` member.
    pub fn emit_json<T: Serialize>(&self, payload: &T, out: Option<&Path>) -> Result<()> {
        let mut v = serde_json::to_value(payload)?;
        let obj = match v {
            Value::Object(ref mut m) => m,
            other => {
                v = json!({ "value": other });
                v.as_object_mut().expect("object")
            }
        };
        obj.insert("meta".into(), self.meta());
        let mut w = sink(out)?;
        serde_json::to_writer_pretty(&mut w, &v)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn emit_csv<F>(&self, out: Option<&Path>, write: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write, &[String]) -> Result<()>,
    {
        let mut w = sink(out)?;
        write(&mut w, &self.csv_header())?;
        w.flush()?;
        Ok(())
    }

    /// Writes a binary artifact to `out` and its metadata to
    /// `<out>.meta.json`.
    pub fn emit_binary<F>(&self, out: &Path, write: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let mut w = BufWriter::new(create(out)?);
        write(&mut w)?;
        w.flush()?;
        let side = sidecar(out);
        let mut s = BufWriter::new(create(&side)?);
        serde_json::to_writer_pretty(&mut s, &self.meta())?;
        writeln!(s)?;
        s.flush()?;
        log::info!("wrote {} and {}", out.display(), side.display());
        Ok(())
    }
}

pub fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}
