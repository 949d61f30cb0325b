//! CoNLL-U dependency parses.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepToken {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    /// 0 for the root.
    pub head: usize,
    /// Relation name; UD v1 `dobj` is normalized to `obj`.
    pub deprel: String,
}

impl DepToken {
    /// Fine-grained tag: XPOS (PTB) when present, UPOS otherwise.
    pub fn tag(&self) -> &str {
        if self.xpos.is_empty() || self.xpos == "_" {
            &self.upos
        } else {
            &self.xpos
        }
    }
}

/// A validated dependency tree: ids are 1..=n, exactly one root, no cycles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepTree {
    pub pair_id: Option<String>,
    pub tokens: Vec<DepToken>,
}

fn normalize_deprel(rel: &str) -> String {
    match rel {
        "dobj" => "obj".to_string(),
        r => r.to_string(),
    }
}

impl DepTree {
    /// Builds and validates a tree from tokens in index order.
    pub fn new(pair_id: Option<String>, tokens: Vec<DepToken>) -> std::result::Result<Self, String> {
        let n = tokens.len();
        if n == 0 {
            return Err("empty sentence".into());
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.index != i + 1 {
                return Err(format!("token ids not contiguous at id {}", t.index));
            }
            if t.head > n {
                return Err(format!("head {} out of range at token {}", t.head, t.index));
            }
            if t.head == t.index {
                return Err(format!("token {} heads itself", t.index));
            }
        }
        let roots = tokens.iter().filter(|t| t.head == 0).count();
        if roots != 1 {
            return Err(format!("{roots} root tokens (expected exactly one)"));
        }
        // every token must reach the root within n steps
        for t in &tokens {
            let mut cur = t.head;
            let mut steps = 0;
            while cur != 0 {
                cur = tokens[cur - 1].head;
                steps += 1;
                if steps > n {
                    return Err(format!("cycle through token {}", t.index));
                }
            }
        }
        Ok(DepTree { pair_id, tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token by 1-based index.
    pub fn token(&self, index: usize) -> &DepToken {
        &self.tokens[index - 1]
    }

    pub fn root(&self) -> &DepToken {
        self.tokens
            .iter()
            .find(|t| t.head == 0)
            .expect("validated tree has a root")
    }

    pub fn children(&self, index: usize) -> impl Iterator<Item = &DepToken> {
        self.tokens.iter().filter(move |t| t.head == index)
    }

    /// Sorted 1-based indices of the subtree rooted at `index` (inclusive).
    pub fn subtree(&self, index: usize) -> Vec<usize> {
        let mut out = vec![index];
        let mut i = 0;
        while i < out.len() {
            let h = out[i];
            out.extend(self.tokens.iter().filter(|t| t.head == h).map(|t| t.index));
            i += 1;
        }
        out.sort_unstable();
        out
    }

    pub fn forms(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.form.as_str()).collect()
    }

    /// Reorders tokens: `order[k]` is the old 1-based index of the token
    /// placed at new position `k + 1`. Heads are remapped accordingly.
    pub fn permuted(&self, order: &[usize]) -> DepTree {
        let mut new_of_old = vec![0usize; self.len() + 1];
        for (k, &old) in order.iter().enumerate() {
            new_of_old[old] = k + 1;
        }
        let tokens = order
            .iter()
            .enumerate()
            .map(|(k, &old)| {
                let t = self.token(old);
                DepToken {
                    index: k + 1,
                    head: new_of_old[t.head],
                    ..t.clone()
                }
            })
            .collect();
        DepTree {
            pair_id: self.pair_id.clone(),
            tokens,
        }
    }

    /// Renders back to CoNLL-U (FEATS, DEPS and MISC as `_`).
    pub fn to_conllu(&self) -> String {
        let mut s = String::new();
        if let Some(id) = &self.pair_id {
            s.push_str(&format!("# pair_id = {id}\n"));
        }
        for t in &self.tokens {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t_\t{}\t{}\t_\t_\n",
                t.index, t.form, t.lemma, t.upos, t.xpos, t.head, t.deprel
            ));
        }
        s.push('\n');
        s
    }
}

/// A sentence block that failed validation. `ordinal` is 1-based over all
/// sentence blocks in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub ordinal: usize,
    pub reason: String,
}

/// Streaming reader over sentence blocks.
pub struct ConlluReader<R> {
    lines: std::io::Lines<R>,
    ordinal: usize,
    done: bool,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(reader: R) -> Self {
        ConlluReader {
            lines: reader.lines(),
            ordinal: 0,
            done: false,
        }
    }

    fn parse_block(&self, lines: &[String]) -> std::result::Result<DepTree, String> {
        let mut pair_id = None;
        let mut tokens = Vec::new();
        for line in lines {
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.split_once('=') {
                    if k.trim() == "pair_id" {
                        pair_id = Some(v.trim().to_string());
                    }
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 10 {
                return Err(format!("expected 10 columns, found {}", cols.len()));
            }
            if cols[0].contains('-') || cols[0].contains('.') {
                continue;
            }
            let index: usize = cols[0]
                .parse()
                .map_err(|_| format!("non-integer id {:?}", cols[0]))?;
            let head: usize = cols[6]
                .parse()
                .map_err(|_| format!("non-integer head {:?} at token {index}", cols[6]))?;
            tokens.push(DepToken {
                index,
                form: cols[1].to_string(),
                lemma: cols[2].to_string(),
                upos: cols[3].to_string(),
                xpos: cols[4].to_string(),
                head,
                deprel: normalize_deprel(cols[7]),
            });
        }
        DepTree::new(pair_id, tokens)
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    /// `Err` carries a rejected sentence; I/O failures end the stream with an
    /// `Err` whose ordinal is 0.
    type Item = std::result::Result<DepTree, Rejection>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut block = Vec::new();
        loop {
            match self.lines.next() {
                Some(Ok(line)) => {
                    if line.trim().is_empty() {
                        if block.is_empty() {
                            continue;
                        }
                        break;
                    }
                    block.push(line);
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(Rejection {
                        ordinal: 0,
                        reason: e.to_string(),
                    }));
                }
                None => {
                    self.done = true;
                    if block.is_empty() {
                        return None;
                    }
                    break;
                }
            }
        }
        // comment-only blocks are not sentences
        if block.iter().all(|l| l.starts_with('#')) {
            return self.next();
        }
        self.ordinal += 1;
        let ordinal = self.ordinal;
        Some(
            self.parse_block(&block)
                .map_err(|reason| Rejection { ordinal, reason }),
        )
    }
}

pub fn load_conllu(path: impl AsRef<Path>) -> Result<ConlluReader<BufReader<File>>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(ConlluReader::new(BufReader::new(f)))
}

/// Reads every sentence, separating valid trees from rejections.
pub fn read_conllu(path: impl AsRef<Path>) -> Result<(Vec<DepTree>, Vec<Rejection>)> {
    let mut trees = Vec::new();
    let mut rejected = Vec::new();
    for item in load_conllu(path)? {
        match item {
            Ok(t) => trees.push(t),
            Err(r) if r.ordinal == 0 => return Err(Error::Invalid(r.reason)),
            Err(r) => {
                log::warn!("rejecting sentence {}: {}", r.ordinal, r.reason);
                rejected.push(r);
            }
        }
    }
    Ok((trees, rejected))
}
