use anyhow::Result;
use miscale::fit::{
    extrapolate, fit_log_with, fit_powerlaw_loglog_with, fit_powerlaw_offset_traced, l2m_required_dim, model_compare,
    FitOptions, PowerLawFit, ScalingSeries,
};
use serde_json::{json, Map, Value};

use crate::output::Run;
use crate::{FitArgs, FitCmd};

pub fn run(cmd: FitCmd) -> Result<()> {
    match cmd {
        FitCmd::Powerlaw(a) => powerlaw(a, false),
        FitCmd::PowerlawOffset(a) => powerlaw(a, true),
        FitCmd::Log(a) => log_fit(a),
        FitCmd::Compare(a) => compare(a),
    }
}

fn load(run: &mut Run, a: &FitArgs) -> Result<ScalingSeries> {
    let s = ScalingSeries::read_csv(run.open(&a.series)?)?;
    let s = s.filter_range(a.x_min, a.x_max);
    log::info!("{} points after x-range filter", s.len());
    Ok(s)
}

fn with_extras(fit: &PowerLawFit, a: &FitArgs) -> Result<Value> {
    let mut v = serde_json::to_value(fit)?;
    let obj: &mut Map<String, Value> = v.as_object_mut().expect("fit serializes to an object");
    if !a.extrapolate.is_empty() {
        let pts: Vec<Value> = a
            .extrapolate
            .iter()
            .map(|&x| json!({ "x": x, "y": extrapolate(fit, x) }))
            .collect();
        obj.insert("extrapolations".into(), Value::Array(pts));
    }
    if let (Some(len), Some(cap)) = (a.l2m_length, a.capacity) {
        let dim = l2m_required_dim(fit, len, cap, a.log_m)?;
        obj.insert(
            "l2m".into(),
            json!({ "length": len, "capacity": cap, "log_m": a.log_m, "required_dim": dim }),
        );
    }
    Ok(v)
}

fn powerlaw(a: FitArgs, offset: bool) -> Result<()> {
    let name = if offset { "fit powerlaw-offset" } else { "fit powerlaw" };
    let mut run = Run::new(name, &a)?;
    let s = load(&mut run, &a)?;
    let opts = FitOptions { weighted: a.weighted };
    let fit = if offset {
        fit_powerlaw_offset_traced(&s, &opts)?.0
    } else {
        fit_powerlaw_loglog_with(&s, &opts)?
    };
    run.emit_json(&with_extras(&fit, &a)?, a.output.as_deref())
}

fn log_fit(a: FitArgs) -> Result<()> {
    let mut run = Run::new("fit log", &a)?;
    let s = load(&mut run, &a)?;
    let fit = fit_log_with(&s, &FitOptions { weighted: a.weighted })?;
    let mut v = serde_json::to_value(fit)?;
    v.as_object_mut()
        .expect("object")
        .insert("model".into(), Value::from("log"));
    run.emit_json(&v, a.output.as_deref())
}

fn compare(a: FitArgs) -> Result<()> {
    let mut run = Run::new("fit compare", &a)?;
    let s = load(&mut run, &a)?;
    let c = model_compare(&s)?;
    for w in &c.warnings {
        log::warn!("{w}");
    }
    run.emit_json(&c, a.output.as_deref())
}
