use std::io::Write;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::CliResult;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Row sink. CSV rows are written and flushed as they arrive, JSON is
/// emitted as one document on [`Sink::finish`].
pub struct Sink {
    format: Format,
    out: Box<dyn Write>,
    figure: String,
    params: Vec<(String, String)>,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
    started: bool,
}

impl Sink {
    pub fn new(format: Format, out: Box<dyn Write>) -> Self {
        Self {
            format,
            out,
            figure: String::new(),
            params: Vec::new(),
            columns: Vec::new(),
            rows: Vec::new(),
            started: false,
        }
    }

    pub fn begin(&mut self, figure: &str, params: Vec<(String, String)>, columns: &[&str]) -> CliResult<()> {
        self.figure = figure.to_string();
        self.params = params;
        self.columns = columns.iter().map(|c| c.to_string()).collect();
        self.started = true;
        if self.format == Format::Csv {
            let p: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            writeln!(self.out, "# figure={} {}", self.figure, p.join(" "))?;
            self.write_csv_row(&self.columns.clone())?;
        }
        Ok(())
    }

    fn write_csv_row(&mut self, row: &[String]) -> CliResult<()> {
        let mut wr = csv::WriterBuilder::new().from_writer(Vec::new());
        wr.write_record(row)?;
        let bytes = wr.into_inner().map_err(|e| e.into_error())?;
        self.out.write_all(&bytes)?;
        self.out.flush()?;
        Ok(())
    }

    pub fn row(&mut self, row: Vec<String>) -> CliResult<()> {
        debug_assert!(self.started && row.len() == self.columns.len());
        match self.format {
            Format::Csv => self.write_csv_row(&row),
            Format::Json => {
                self.rows.push(row);
                Ok(())
            }
        }
    }

    /// Copy a CSV table (header + rows) produced by a library writer.
    pub fn csv_table(&mut self, figure: &str, params: Vec<(String, String)>, bytes: &[u8]) -> CliResult<()> {
        let mut rd = csv::Reader::from_reader(bytes);
        let headers: Vec<String> = rd.headers()?.iter().map(String::from).collect();
        let cols: Vec<&str> = headers.iter().map(String::as_str).collect();
        self.begin(figure, params, &cols)?;
        for rec in rd.records() {
            self.row(rec?.iter().map(String::from).collect())?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> CliResult<()> {
        if self.format == Format::Json {
            let params: Map<String, Value> = self.params.iter().map(|(k, v)| (k.clone(), cell(v))).collect();
            let rows: Vec<Value> = self
                .rows
                .iter()
                .map(|r| Value::Array(r.iter().map(|c| cell(c)).collect()))
                .collect();
            let doc = json!({
                "figure": self.figure,
                "params": params,
                "columns": self.columns,
                "rows": rows,
            });
            serde_json::to_writer_pretty(&mut self.out, &doc)?;
            writeln!(self.out)?;
        }
        self.out.flush()?;
        Ok(())
    }
}

fn cell(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Value::from(v),
        _ => Value::from(s),
    }
}

pub fn kv(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().write(buf)
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    fn emit(format: Format) -> String {
        let buf = Shared::default();
        let mut sink = Sink::new(format, Box::new(buf.clone()));
        sink.begin("demo", vec![kv("n", 8)], &["a", "b"]).unwrap();
        sink.row(vec!["1".into(), "x".into()]).unwrap();
        sink.finish().unwrap();
        let bytes = buf.0.lock().unwrap().clone();
        String::from_utf8(bytes).unwrap()
    }

    #[test]
    fn csv_has_figure_line_and_header() {
        assert_eq!(emit(Format::Csv), "# figure=demo n=8\na,b\n1,x\n");
    }

    #[test]
    fn json_converts_numbers() {
        let v: Value = serde_json::from_str(&emit(Format::Json)).unwrap();
        assert_eq!(v["params"]["n"], 8);
        assert_eq!(v["rows"][0][0], 1);
        assert_eq!(v["rows"][0][1], "x");
    }
}
