//! CSV sinks with a leading manifest comment line.
//!
//! The manifest is the only line that changes between identical runs (it
//! carries the timestamp); every following line is a pure function of the
//! flags and the seed.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use conelab::GridSpec;

/// Run identity written as the first line of every CSV.
#[derive(Clone, Debug)]
pub struct Manifest {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub grid: Option<GridSpec>,
    pub extra: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Manifest {
        Manifest { command, seed: None, grid: None, extra: Vec::new() }
    }

    pub fn seed(mut self, seed: u64) -> Manifest {
        self.seed = Some(seed);
        self
    }

    pub fn grid(mut self, grid: GridSpec) -> Manifest {
        self.grid = Some(grid);
        self
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Manifest {
        self.extra.push((key.to_string(), value.to_string().replace(' ', ",")));
        self
    }

    fn line(&self) -> String {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        let grid = self.grid.map_or("none".to_string(), |g| format!("{}x{}", g.n(), g.period()));
        let mut s = format!(
            "# cml {} version={} seed={seed} grid={grid} timestamp={stamp}",
            self.command,
            env!("CARGO_PKG_VERSION")
        );
        for (k, v) in &self.extra {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

/// CSV writer to a file or stdout.
pub struct Table {
    csv: csv::Writer<Box<dyn Write>>,
}

impl Table {
    pub fn create(out: Option<&Path>, manifest: &Manifest, header: &[&str]) -> io::Result<Table> {
        let mut sink: Box<dyn Write> = match out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        writeln!(sink, "{}", manifest.line())?;
        let mut csv = csv::Writer::from_writer(sink);
        csv.write_record(header)?;
        Ok(Table { csv })
    }

    pub fn row<I, S>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        Ok(self.csv.write_record(fields)?)
    }

    /// Flushes the rows and appends trailing comment lines.
    pub fn finish(self, trailer: &[String]) -> io::Result<()> {
        let mut sink = self.csv.into_inner().map_err(|e| e.into_error())?;
        for line in trailer {
            writeln!(sink, "# {line}")?;
        }
        sink.flush()
    }
}

/// Shortest representation that reads back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}
