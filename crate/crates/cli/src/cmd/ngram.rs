use anyhow::{Context, Result};
use miscale::entropy::{entropy_grassberger, entropy_naive};
use miscale::ngram::{
    count_pairs_at_distance, count_segment_leading_pairs, count_unigrams, read_documents, write_binary, write_jsonl,
    TokenCorpus,
};
use serde_json::json;

use super::{load_corpus, load_records, load_table};
use crate::exit::input;
use crate::output::Run;
use crate::{Convert, CorpusKind, CountLeading, CountPairs, CountUnigrams, EntropyKind, NgramCmd, TableEntropy};

pub fn run(cmd: NgramCmd) -> Result<()> {
    match cmd {
        NgramCmd::CountUnigrams(a) => unigrams(a),
        NgramCmd::CountPairs(a) => pairs(a),
        NgramCmd::CountLeading(a) => leading(a),
        NgramCmd::Convert(a) => convert(a),
        NgramCmd::Entropy(a) => entropy(a),
    }
}

fn unigrams(a: CountUnigrams) -> Result<()> {
    let mut run = Run::new("ngram count-unigrams", &a)?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let t = count_unigrams(&corpus)?;
    log::info!("{} tokens, {} distinct", t.total(), t.distinct());
    run.emit_binary(&a.output, |w| Ok(t.write_to(w)?))
}

fn pairs(a: CountPairs) -> Result<()> {
    let mut run = Run::new("ngram count-pairs", &a)?;
    let corpus = load_corpus(&mut run, &a.corpus)?;
    let t = count_pairs_at_distance(&corpus, a.distance)?;
    log::info!("{} pairs, {} distinct", t.total(), t.distinct());
    run.emit_binary(&a.output, |w| Ok(t.write_to(w)?))
}

fn leading(a: CountLeading) -> Result<()> {
    let mut run = Run::new("ngram count-leading", &a)?;
    let segments: Vec<Vec<u32>> = if a.records {
        load_records(&mut run, &a.segments)?
            .into_iter()
            .map(|r| {
                r.token_ids
                    .iter()
                    .map(|&t| u32::try_from(t).map_err(|_| input(format!("token id {t} exceeds 32 bits"))))
                    .collect::<Result<Vec<u32>>>()
            })
            .collect::<Result<_>>()?
    } else {
        let f = run.open(&a.segments)?;
        let corpus = TokenCorpus::from_documents(read_documents(f)?)
            .with_context(|| format!("reading {}", a.segments.display()))?;
        corpus
            .documents()
            .iter()
            .map(|d| d.tokens.get(a.ell..).unwrap_or_default().to_vec())
            .collect()
    };
    let t = count_segment_leading_pairs(&segments)?;
    run.emit_binary(&a.output, |w| Ok(t.write_to(w)?))
}

fn convert(a: Convert) -> Result<()> {
    let mut run = Run::new("ngram convert", &a)?;
    let f = run.open(&a.corpus)?;
    let corpus = TokenCorpus::from_documents(read_documents(f)?)?;
    match a.to {
        CorpusKind::Jsonl => run.emit_binary(&a.output, |w| Ok(write_jsonl(&corpus, w)?)),
        CorpusKind::Binary => run.emit_binary(&a.output, |w| Ok(write_binary(&corpus, w)?)),
    }
}

fn entropy(a: TableEntropy) -> Result<()> {
    let mut run = Run::new("ngram entropy", &a)?;
    let t = load_table(&mut run, &a.table)?;
    let value = match a.estimator {
        EntropyKind::Grassberger => entropy_grassberger(&t)?,
        EntropyKind::Naive => entropy_naive(&t)?,
    };
    run.emit_json(
        &json!({ "value": value, "total": t.total(), "distinct": t.distinct() }),
        a.output.as_deref(),
    )
}
