use anyhow::Result;
use miscale::entropy::{pack_pair, Arity, CountTable};
use miscale::estimators::{direct_bipartite, twopoint_mi_hat, twopoint_scan, vclub_bipartite, DirectConfig, MarginalMode};
use miscale::fit::ScalingSeries;
use miscale::logprob::{join_for_estimation, LogProbRecord, ShuffleManifest};
use serde_json::json;

use super::{load_corpus, load_records, load_table};
use crate::exit::input;
use crate::output::Run;
use crate::{CorpusArgs, EstDirect, EstTwopoint, EstVclub, EstimateCmd, ModeArg};

pub fn run(cmd: EstimateCmd) -> Result<()> {
    match cmd {
        EstimateCmd::Twopoint(a) => twopoint(a),
        EstimateCmd::BipartiteDirect(a) => direct(a),
        EstimateCmd::BipartiteVclub(a) => vclub(a),
    }
}

fn mode(m: ModeArg) -> MarginalMode {
    match m {
        ModeArg::Pooled => MarginalMode::Pooled,
        ModeArg::Coordinate => MarginalMode::Coordinate,
    }
}

fn twopoint(a: EstTwopoint) -> Result<()> {
    let mut run = Run::new("estimate twopoint", &a)?;
    if let Some(path) = &a.corpus {
        let corpus = load_corpus(
            &mut run,
            &CorpusArgs {
                corpus: path.clone(),
                vocab_bound: None,
            },
        )?;
        let mut ds = a.distances.clone();
        ds.sort_unstable();
        ds.dedup();
        let scan = twopoint_scan(&corpus, &ds, mode(a.mode))?;
        let x = scan.iter().map(|(d, _)| *d as f64).collect();
        let y = scan.iter().map(|(_, v)| *v).collect();
        let s = ScalingSeries::new(x, y)?;
        return run.emit_csv(a.output.as_deref(), |w, h| Ok(s.write_csv(w, h)?));
    }
    let pairs_path = a
        .pairs
        .as_deref()
        .ok_or_else(|| input("give --corpus with --distances, or --pairs"))?;
    let pairs = load_table(&mut run, pairs_path)?;
    let unigrams = a.unigrams.as_deref().map(|p| load_table(&mut run, p)).transpose()?;
    let value = twopoint_mi_hat(unigrams.as_ref(), &pairs, mode(a.mode))?;
    run.emit_json(&json!({ "value": value, "n_pairs": pairs.total() }), a.output.as_deref())
}

fn leading_from_records(marg: &[LogProbRecord]) -> Result<CountTable> {
    let mut t = CountTable::new(Arity::Pair);
    for r in marg {
        let [a, b] = match r.token_ids.as_slice() {
            [a, b, ..] => [*a, *b],
            _ => return Err(input(format!("record {:?} has fewer than two tokens", r.sample_id))),
        };
        let narrow = |t: u64| u32::try_from(t).map_err(|_| input(format!("token id {t} exceeds 32 bits")));
        t.increment(pack_pair(narrow(a)?, narrow(b)?));
    }
    Ok(t)
}

fn direct(a: EstDirect) -> Result<()> {
    let mut run = Run::new("estimate bipartite-direct", &a)?;
    let cond = load_records(&mut run, &a.cond)?;
    let marg = load_records(&mut run, &a.marg)?;
    let config = DirectConfig {
        correction: !a.no_correction,
        model_weight: a.model_weight,
        ngram_weight: a.ngram_weight,
    };
    let leading = match (&a.leading_pairs, config.correction) {
        (_, false) => None,
        (Some(p), true) => Some(load_table(&mut run, p)?),
        (None, true) => Some(leading_from_records(&marg)?),
    };
    let mut e = direct_bipartite(&cond, &marg, leading.as_ref(), &config)?;
    if let Some(t) = a.truth {
        e = e.with_truth(t);
    }
    run.emit_json(&e, a.output.as_deref())
}

fn vclub(a: EstVclub) -> Result<()> {
    let mut run = Run::new("estimate bipartite-vclub", &a)?;
    let cond = load_records(&mut run, &a.cond)?;
    let shuf = load_records(&mut run, &a.shuffled)?;
    if let Some(p) = &a.manifest {
        let m = ShuffleManifest::from_json(run.open(p)?)?;
        join_for_estimation(&cond, None, Some(&shuf), Some(&m))?;
    }
    let mut e = vclub_bipartite(&cond, &shuf)?;
    if let Some(t) = a.truth {
        e = e.with_truth(t);
    }
    run.emit_json(&e, a.output.as_deref())
}
