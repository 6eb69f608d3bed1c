//! Moses-style n-best file format:
//! `id ||| hypothesis units ||| name= value ... ||| total`, one per line.
//! The hypothesis field keeps subword continuation markers so the units map
//! back onto the network vocabulary.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::decode::beam::{Hypothesis, NBestList};
use crate::error::{Error, Result};
use crate::model::{Vocab, EOS};

const SEP: &str = " ||| ";

pub fn write_nbest(path: &Path, lists: &[NBestList], vocab: &Vocab) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for list in lists {
        for hyp in &list.hypotheses {
            let text = vocab.decode_ids(hyp.content());
            let mut feats = String::new();
            for (name, value) in list.feature_names.iter().zip(&hyp.features) {
                feats.push_str(&format!("{name}= {value} "));
            }
            for (i, mlp) in hyp.model_logprobs.iter().enumerate() {
                feats.push_str(&format!("m{i}= {mlp} "));
            }
            writeln!(
                w,
                "{}{SEP}{}{SEP}{}{SEP}{}",
                list.sentence_id,
                text,
                feats.trim_end(),
                hyp.logprob
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read lists back, mapping units through `vocab` (unknown units map to the
/// reserved unknown id). Hypotheses regain their terminal end symbol.
pub fn read_nbest(path: &Path, vocab: &Vocab) -> Result<Vec<NBestList>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |line_no: usize, msg: &str| {
        Error::parse(
            path.display().to_string(),
            format!("line {}: {msg}", line_no + 1),
        )
    };

    let mut lists: Vec<NBestList> = Vec::new();
    for (line_no, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(SEP).collect();
        if fields.len() != 4 {
            return Err(bad(line_no, "expected 4 ||| separated fields"));
        }
        let id: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| bad(line_no, "bad sentence id"))?;
        let mut tokens = vocab.encode_line(fields[1]);
        tokens.push(EOS);
        let total: f64 = fields[3]
            .trim()
            .parse()
            .map_err(|_| bad(line_no, "bad total score"))?;

        let mut names = Vec::new();
        let mut values = Vec::new();
        let mut model_logprobs = Vec::new();
        let mut parts = fields[2].split_whitespace().peekable();
        while let Some(name) = parts.next() {
            let Some(name) = name.strip_suffix('=') else {
                return Err(bad(line_no, "feature name must end with `=`"));
            };
            let Some(value) = parts.next() else {
                return Err(bad(line_no, "feature without value"));
            };
            let value: f64 = value
                .parse()
                .map_err(|_| bad(line_no, "bad feature value"))?;
            if name.len() > 1 && name.starts_with('m') && name[1..].chars().all(|c| c.is_ascii_digit())
            {
                model_logprobs.push(value);
            } else {
                names.push(name.to_string());
                values.push(value);
            }
        }

        if lists.last().map(|l| l.sentence_id) != Some(id) {
            lists.push(NBestList {
                sentence_id: id,
                feature_names: names.clone(),
                hypotheses: Vec::new(),
            });
        }
        let list = lists.last_mut().unwrap();
        if list.feature_names != names {
            return Err(bad(line_no, "inconsistent feature names within a list"));
        }
        list.hypotheses.push(Hypothesis {
            tokens,
            logprob: total,
            model_logprobs,
            features: values,
        });
    }
    Ok(lists)
}
