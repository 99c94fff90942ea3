use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::rational;
use crate::walk::{Flag, ProbResult};

/// Export row `{query, value, stderr, trials, hits, seed, flags}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McRecord {
    pub query: Value,
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub hits: u64,
    pub seed: Option<u64>,
    pub flags: Vec<Flag>,
}

impl McRecord {
    pub fn new(query: Value, r: &ProbResult) -> Self {
        McRecord {
            query,
            value: r.value,
            stderr: r.stderr,
            trials: r.trials,
            hits: r.hits,
            seed: r.seed,
            flags: r.flags.clone(),
        }
    }
}

fn flag_name(f: Flag) -> &'static str {
    match f {
        Flag::LowPrecision => "low_precision",
        Flag::Unreachable => "unreachable",
        Flag::Snapped => "snapped",
    }
}

/// The same columns as the JSON record; the query is embedded as compact JSON
/// and flags are joined with `;`.
pub fn write_records_csv<W: Write>(records: &[McRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "query", "value", "stderr", "trials", "hits", "seed", "flags",
    ])?;
    for r in records {
        w.write_record([
            serde_json::to_string(&r.query)?,
            rational::sig17(r.value),
            rational::sig17(r.stderr),
            r.trials.to_string(),
            r.hits.to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.flags
                .iter()
                .map(|&f| flag_name(f))
                .collect::<Vec<_>>()
                .join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}
