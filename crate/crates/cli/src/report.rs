//! Output files. Every CSV starts with a `# lambda-lab <version>
//! config=<hash>` line; nothing in an output depends on timing or thread
//! count.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub struct Csv {
    w: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(hash: &str, columns: &[&str]) -> Result<Csv, CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "# lambda-lab {} config={hash}", env!("CARGO_PKG_VERSION")).expect("vec write");
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(columns).map_err(io_err)?;
        Ok(Csv { w })
    }

    pub fn row<I, T>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(io_err)
    }

    pub fn finish(self, path: Option<&Path>) -> Result<(), CliError> {
        let bytes = self.w.into_inner().map_err(|e| CliError::io(e.to_string()))?;
        emit(path, &bytes)
    }
}

fn io_err(e: csv::Error) -> CliError {
    CliError::io(e.to_string())
}

pub fn json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    bytes.push(b'\n');
    emit(path, &bytes)
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(bytes)
            .map_err(|e| CliError::io(e.to_string())),
    }
}
