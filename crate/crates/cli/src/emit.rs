use serde::Serialize;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> CliError {
        CliError { code: 2, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<fbar_lab::Error> for CliError {
    fn from(e: fbar_lab::Error) -> CliError {
        CliError { code: e.exit_code(), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::usage(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> CliError {
        CliError::usage(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::usage(format!("json: {e}"))
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    seed: u64,
    report: &'a T,
}

/// Writes reports to `--out` or to stdout.
pub struct Emitter {
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl Emitter {
    fn sink(&self, name: &str, ext: &str) -> Result<Box<dyn Write>, CliError> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}.{ext}", name.replace(' ', "-")));
                Ok(Box::new(std::fs::File::create(path)?))
            }
            None => Ok(Box::new(std::io::stdout().lock())),
        }
    }

    pub fn json<T: Serialize>(&self, command: &str, report: &T) -> Result<(), CliError> {
        let env = Envelope { schema_version: SCHEMA_VERSION, command, seed: self.seed, report };
        let mut w = self.sink(command, "json")?;
        serde_json::to_writer_pretty(&mut w, &env)?;
        writeln!(w)?;
        Ok(())
    }

    /// CSV with a header row; the last column carries the seed.
    pub fn csv(&self, command: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
        let w = self.sink(command, "csv")?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(header.iter().copied().chain(["seed"]))?;
        let seed = self.seed.to_string();
        for mut r in rows {
            r.push(seed.clone());
            c.write_record(&r)?;
        }
        c.flush()?;
        Ok(())
    }

    /// Text written as is.
    pub fn raw(&self, command: &str, ext: &str, text: &str) -> Result<(), CliError> {
        let mut w = self.sink(command, ext)?;
        writeln!(w, "{text}")?;
        Ok(())
    }

    pub fn summary(&self, line: impl AsRef<str>) {
        eprintln!("{}", line.as_ref());
    }
}
