use anyhow::Result;
use miscale::estimators::{avg_of, positionwise_kl, positionwise_nll, smooth_curve, MetricCurve};
use serde_json::json;

use super::load_records;
use crate::output::Run;
use crate::{MetricsAvg, MetricsCmd, MetricsKl, MetricsNll, MetricsSmooth};

pub fn run(cmd: MetricsCmd) -> Result<()> {
    match cmd {
        MetricsCmd::Nll(a) => nll(a),
        MetricsCmd::Kl(a) => kl(a),
        MetricsCmd::Smooth(a) => smooth(a),
        MetricsCmd::Avg(a) => avg(a),
    }
}

fn emit(run: &Run, c: &MetricCurve, out: Option<&std::path::Path>) -> Result<()> {
    run.emit_csv(out, |w, h| Ok(c.write_csv(w, h)?))
}

fn nll(a: MetricsNll) -> Result<()> {
    let mut run = Run::new("metrics nll", &a)?;
    let recs = load_records(&mut run, &a.records)?;
    emit(&run, &positionwise_nll(&recs)?, a.output.as_deref())
}

fn kl(a: MetricsKl) -> Result<()> {
    let mut run = Run::new("metrics kl", &a)?;
    let p = MetricCurve::read_csv(run.open(&a.p)?)?;
    let q = MetricCurve::read_csv(run.open(&a.q)?)?;
    let c = positionwise_kl(&p, &q)?;
    log::info!("average KL {}", avg_of(&c)?);
    emit(&run, &c, a.output.as_deref())
}

fn smooth(a: MetricsSmooth) -> Result<()> {
    let mut run = Run::new("metrics smooth", &a)?;
    let c = MetricCurve::read_csv(run.open(&a.curve)?)?;
    emit(&run, &smooth_curve(&c, a.window)?, a.output.as_deref())
}

fn avg(a: MetricsAvg) -> Result<()> {
    let mut run = Run::new("metrics avg", &a)?;
    let c = MetricCurve::read_csv(run.open(&a.curve)?)?;
    run.emit_json(&json!({ "value": avg_of(&c)?, "positions": c.len() }), a.output.as_deref())
}
