
use anyhow::Result;
use miscale::fit::ScalingSeries;
use miscale::gaussian::{write_gcov, CovarianceModel, Hierarchy};
use miscale::ngram::{read_real_rows, write_real_rows};
use serde_json::json;

use super::load_model;
use crate::exit::input;
use crate::output::Run;
use crate::{GaussianBuild, GaussianCmd, GaussianKl, GaussianMc, GaussianMi, GaussianSample, GaussianTwopoint, RealFormat};

pub fn run(cmd: GaussianCmd) -> Result<()> {
    match cmd {
        GaussianCmd::Build(a) => build(a),
        GaussianCmd::Mi(a) => mi(a),
        GaussianCmd::Twopoint(a) => twopoint(a),
        GaussianCmd::Sample(a) => sample(a),
        GaussianCmd::Kl(a) => kl(a),
        GaussianCmd::Mc(a) => mc(a),
    }
}

fn build(a: GaussianBuild) -> Result<()> {
    let run = Run::new("gaussian build", &a)?;
    let h = Hierarchy {
        family: a.family,
        layers: a.layers,
        gamma: a.gamma,
        rho: a.rho,
    };
    let m = h.build_with_cap(a.cap)?;
    run.emit_binary(&a.output, |w| Ok(write_gcov(&m, w)?))
}

fn split(ell: Option<usize>, ratio: Option<f64>, len: usize) -> Result<usize> {
    match (ell, ratio) {
        (Some(e), _) => Ok(e),
        (None, r) => {
            let r = r.unwrap_or(0.5);
            if !(r > 0.0 && r < 1.0) {
                return Err(input(format!("--ratio must lie in (0, 1), got {r}")));
            }
            Ok(((r * len as f64).round() as usize).clamp(1, len - 1))
        }
    }
}

fn layer_models(a: &crate::ModelArgs, lo: u32, hi: u32) -> Result<Vec<CovarianceModel>> {
    if lo == 0 || lo > hi {
        return Err(input(format!("bad layer range {lo}..={hi}")));
    }
    let family = a.family.expect("clap requires --family with --sweep");
    (lo..=hi)
        .map(|layers| {
            log::info!("building {family} model with {layers} layers");
            Ok(Hierarchy {
                family,
                layers,
                gamma: a.gamma,
                rho: a.rho,
            }
            .build_with_cap(a.cap)?)
        })
        .collect()
}

fn emit_series(run: &Run, s: &ScalingSeries, out: Option<&std::path::Path>) -> Result<()> {
    run.emit_csv(out, |w, h| Ok(s.write_csv(w, h)?))
}

fn mi(a: GaussianMi) -> Result<()> {
    let mut run = Run::new("gaussian mi", &a)?;
    if a.sweep {
        let models = layer_models(&a.model, a.min_layers, a.max_layers)?;
        let mut x = Vec::new();
        let mut y = Vec::new();
        for m in &models {
            let ell = split(None, a.ratio, m.len())?;
            x.push(m.len() as f64);
            y.push(m.bipartite_mi_exact(ell)?);
        }
        return emit_series(&run, &ScalingSeries::new(x, y)?, a.output.as_deref());
    }
    let m = load_model(&mut run, &a.model)?;
    let ell = split(a.ell, a.ratio, m.len())?;
    let value = m.bipartite_mi_exact(ell)?;
    run.emit_json(&json!({ "value": value, "ell": ell, "L": m.len() }), a.output.as_deref())
}

fn twopoint(a: GaussianTwopoint) -> Result<()> {
    let mut run = Run::new("gaussian twopoint", &a)?;
    if a.sweep {
        let models = layer_models(&a.model, a.min_layers, a.max_layers)?;
        let x = models.iter().map(|m| m.len() as f64).collect();
        let y = models
            .iter()
            .map(|m| m.antipodal_twopoint_mi())
            .collect::<Result<Vec<_>, _>>()?;
        return emit_series(&run, &ScalingSeries::new(x, y)?, a.output.as_deref());
    }
    let m = load_model(&mut run, &a.model)?;
    let (i, j) = match (a.i, a.j) {
        (Some(i), Some(j)) => (i, j),
        _ => (0, m.len() - 1),
    };
    let value = m.twopoint_mi_exact(i, j)?;
    run.emit_json(&json!({ "value": value, "i": i, "j": j, "L": m.len() }), a.output.as_deref())
}

fn sample(a: GaussianSample) -> Result<()> {
    let mut run = Run::new("gaussian sample", &a)?;
    let m = load_model(&mut run, &a.model)?;
    let rows = m.sample(a.n, a.seed)?;
    match a.format {
        RealFormat::Ngf => {
            let out = a
                .output
                .as_deref()
                .ok_or_else(|| input("--format ngf needs --output"))?;
            run.emit_binary(out, |w| Ok(write_real_rows(&rows, w)?))
        }
        RealFormat::Csv => run.emit_csv(a.output.as_deref(), |w, h| {
            for line in h {
                writeln!(w, "# {line}")?;
            }
            let header: Vec<String> = (0..m.len()).map(|i| format!("z{i}")).collect();
            writeln!(w, "{}", header.join(","))?;
            for r in &rows {
                let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
            Ok(())
        }),
    }
}

fn kl(a: GaussianKl) -> Result<()> {
    let mut run = Run::new("gaussian kl", &a)?;
    let m = load_model(&mut run, &a.model)?;
    let samples = match (&a.samples, a.n, a.seed) {
        (Some(p), _, _) => read_real_rows(run.open(p)?)?,
        (None, Some(n), Some(seed)) => m.sample(n, seed)?,
        _ => return Err(input("give --samples, or --n with --seed")),
    };
    let (q_means, q_stds) = match (&a.q_means, &a.q_stds) {
        (Some(mp), Some(sp)) => (read_real_rows(run.open(mp)?)?, read_real_rows(run.open(sp)?)?),
        _ => {
            if !(a.std_scale > 0.0) {
                return Err(input("--std-scale must be positive"));
            }
            let mut mu = Vec::with_capacity(samples.len());
            let mut sd = Vec::with_capacity(samples.len());
            for s in &samples {
                let laws = m.conditional_laws(s)?;
                mu.push(laws.iter().map(|l| l.mean + a.mean_shift * l.std).collect());
                sd.push(laws.iter().map(|l| a.std_scale * l.std).collect());
            }
            (mu, sd)
        }
    };
    let curve = m.conditional_kl_curve(&samples, &q_means, &q_stds)?;
    let avg = curve.iter().sum::<f64>() / curve.len() as f64;
    run.emit_csv(a.output.as_deref(), |w, h| {
        for line in h {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "# avg_kl: {avg}")?;
        writeln!(w, "position,value")?;
        for (i, v) in curve.iter().enumerate() {
            writeln!(w, "{i},{v}")?;
        }
        Ok(())
    })
}

fn mc(a: GaussianMc) -> Result<()> {
    let mut run = Run::new("gaussian mc", &a)?;
    let m = load_model(&mut run, &a.model)?;
    let (value, stderr) = m.mc_bipartite_mi(a.ell, a.n, a.seed)?;
    let exact = m.bipartite_mi_exact(a.ell)?;
    run.emit_json(
        &json!({ "value": value, "stderr": stderr, "exact": exact, "n_samples": a.n, "ell": a.ell, "L": m.len() }),
        a.output.as_deref(),
    )
}
