use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde::Serialize;

pub fn open(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

pub fn write_json<T: Serialize>(out: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut w = open(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub const COLUMNS: [&str; 13] = [
    "domain",
    "m",
    "n",
    "solver",
    "N",
    "alpha0",
    "s0",
    "alpha",
    "approx",
    "exact_cvar",
    "exact_var",
    "solve_ms",
    "eval_ms",
];

/// One evaluated `(configuration, s0, alpha)` point.
#[derive(Clone, Debug)]
pub struct Row {
    pub domain: &'static str,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub solver: String,
    pub atoms: usize,
    pub alpha0: f64,
    pub s0: usize,
    pub alpha: f64,
    pub approx: f64,
    pub exact_cvar: f64,
    pub exact_var: f64,
    pub solve_ms: Option<f64>,
    pub eval_ms: Option<f64>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn ms(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

impl Row {
    pub fn normalized(&self) -> f64 {
        self.approx / self.exact_cvar
    }

    pub fn record(&self) -> Vec<String> {
        vec![
            self.domain.to_string(),
            opt(self.rows),
            opt(self.cols),
            self.solver.clone(),
            self.atoms.to_string(),
            self.alpha0.to_string(),
            self.s0.to_string(),
            self.alpha.to_string(),
            self.approx.to_string(),
            self.exact_cvar.to_string(),
            self.exact_var.to_string(),
            ms(self.solve_ms),
            ms(self.eval_ms),
        ]
    }
}

pub struct RowWriter {
    inner: csv::Writer<Box<dyn Write>>,
    normalized: bool,
}

impl RowWriter {
    /// `normalized` adds an `approx / exact_cvar` column after the standard ones.
    pub fn new(out: Option<&Path>, normalized: bool) -> anyhow::Result<Self> {
        let mut inner = csv::Writer::from_writer(open(out)?);
        let mut header: Vec<&str> = COLUMNS.to_vec();
        if normalized {
            header.push("normalized");
        }
        inner.write_record(&header)?;
        Ok(Self { inner, normalized })
    }

    pub fn write(&mut self, row: &Row) -> anyhow::Result<()> {
        let mut rec = row.record();
        if self.normalized {
            rec.push(row.normalized().to_string());
        }
        self.inner.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> anyhow::Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}
