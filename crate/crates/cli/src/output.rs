//! JSON/CSV writers. Every float is written with 17 significant digits.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Pretty JSON with floats as `{:.16e}`; non-finite floats become `null`.
struct Precise<'a> {
    inner: PrettyFormatter<'a>,
    pretty: bool,
}

fn write_float<W: ?Sized + Write>(w: &mut W, v: f64) -> io::Result<()> {
    if v.is_finite() {
        write!(w, "{v:.16e}")
    } else {
        w.write_all(b"null")
    }
}

impl Formatter for Precise<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write_float(w, v)
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write_float(w, v as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.pretty {
            self.inner.begin_array(w)
        } else {
            w.write_all(b"[")
        }
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.pretty {
            self.inner.end_array(w)
        } else {
            w.write_all(b"]")
        }
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if self.pretty {
            self.inner.begin_array_value(w, first)
        } else if first {
            Ok(())
        } else {
            w.write_all(b",")
        }
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.pretty {
            self.inner.end_array_value(w)
        } else {
            Ok(())
        }
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.pretty {
            self.inner.begin_object(w)
        } else {
            w.write_all(b"{")
        }
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.pretty {
            self.inner.end_object(w)
        } else {
            w.write_all(b"}")
        }
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if self.pretty {
            self.inner.begin_object_key(w, first)
        } else if first {
            Ok(())
        } else {
            w.write_all(b",")
        }
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.pretty {
            self.inner.begin_object_value(w)
        } else {
            w.write_all(b":")
        }
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        if self.pretty {
            self.inner.end_object_value(w)
        } else {
            Ok(())
        }
    }
}

fn serialize<T: Serialize>(value: &T, pretty: bool) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let fmt = Precise {
        inner: PrettyFormatter::with_indent(b"  "),
        pretty,
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn to_pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    serialize(value, true)
}

pub fn to_line<T: Serialize>(value: &T) -> Result<String, CliError> {
    serialize(value, false)
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// `sha256("blob <len>\0" + bytes)`, hex encoded.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Serialize)]
pub struct Metadata {
    pub timestamp_unix: u64,
    pub version: &'static str,
    pub input_hash: String,
    pub seed: u64,
    pub background_density: &'static str,
}

impl Metadata {
    pub fn new(input_hash: String, seed: u64) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            timestamp_unix,
            version: env!("CARGO_PKG_VERSION"),
            input_hash,
            seed,
            background_density: "1 (flat background metric)",
        }
    }
}

#[derive(Serialize)]
struct Report<'a, P: Serialize> {
    command: &'a str,
    payload: &'a P,
    metadata: &'a Metadata,
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Writes `report.json` into `out`.
pub fn write_report<P: Serialize>(
    out: &Path,
    command: &str,
    payload: &P,
    metadata: &Metadata,
) -> Result<(), CliError> {
    let mut text = to_pretty(&Report {
        command,
        payload,
        metadata,
    })?;
    text.push('\n');
    write_file(&out.join("report.json"), &text)
}
