pub mod estimate;
pub mod fit;
pub mod gaussian;
pub mod logprob;
pub mod metrics;
pub mod ngram;

use std::path::Path;

use anyhow::{Context, Result};
use miscale::entropy::CountTable;
use miscale::gaussian::{read_gcov, CovarianceModel, Hierarchy};
use miscale::logprob::{read_records, LogProbRecord};
use miscale::ngram::{read_documents, TokenCorpus};

use crate::exit::input;
use crate::output::Run;
use crate::{CorpusArgs, ModelArgs};

pub fn load_model(run: &mut Run, args: &ModelArgs) -> Result<CovarianceModel> {
    if let Some(path) = &args.model {
        let f = run.open(path)?;
        return read_gcov(f).with_context(|| format!("reading {}", path.display()));
    }
    let (Some(family), Some(layers)) = (args.family, args.layers) else {
        return Err(input("give either --model or both --family and --layers"));
    };
    let h = Hierarchy {
        family,
        layers,
        gamma: args.gamma,
        rho: args.rho,
    };
    Ok(h.build_with_cap(args.cap)?)
}

pub fn load_corpus(run: &mut Run, args: &CorpusArgs) -> Result<TokenCorpus> {
    let f = run.open(&args.corpus)?;
    let corpus = TokenCorpus::from_documents(read_documents(f)?)
        .with_context(|| format!("reading {}", args.corpus.display()))?;
    match args.vocab_bound {
        Some(b) => Ok(corpus.with_vocab_bound(b)?),
        None => Ok(corpus),
    }
}

pub fn load_records(run: &mut Run, path: &Path) -> Result<Vec<LogProbRecord>> {
    let f = run.open(path)?;
    read_records(f).with_context(|| format!("reading {}", path.display()))
}

pub fn load_table(run: &mut Run, path: &Path) -> Result<CountTable> {
    let f = run.open(path)?;
    CountTable::read_from(f).with_context(|| format!("reading {}", path.display()))
}
