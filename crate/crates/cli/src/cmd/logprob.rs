use anyhow::Result;
use miscale::logprob::{make_shuffle_manifest, validate};
use serde_json::json;

use super::load_records;
use crate::exit::input;
use crate::output::Run;
use crate::{LogprobCmd, ShuffleManifestArgs, Validate};

pub fn run(cmd: LogprobCmd) -> Result<()> {
    match cmd {
        LogprobCmd::Validate(a) => check(a),
        LogprobCmd::ShuffleManifest(a) => manifest(a),
    }
}

fn check(a: Validate) -> Result<()> {
    let mut run = Run::new("logprob validate", &a)?;
    let mut reports = Vec::new();
    let mut bad = 0usize;
    for path in &a.files {
        let report = validate(run.open(path)?)?;
        for v in &report.violations {
            eprintln!("{}:{}: {}", path.display(), v.line, v.message);
        }
        bad += report.violations.len();
        reports.push(json!({ "file": path.display().to_string(), "report": report }));
    }
    run.emit_json(&json!({ "valid": bad == 0, "files": reports }), a.output.as_deref())?;
    if bad > 0 {
        return Err(input(format!("{bad} schema violation(s)")));
    }
    Ok(())
}

fn manifest(a: ShuffleManifestArgs) -> Result<()> {
    let mut run = Run::new("logprob shuffle-manifest", &a)?;
    let recs = load_records(&mut run, &a.records)?;
    let mut ids: Vec<&str> = recs.iter().map(|r| r.sample_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    let m = make_shuffle_manifest(&ids, a.seed)?;
    run.emit_json(&m, a.output.as_deref())
}
