//! Penn Treebank S-expression trees, as distributed in the `*_parse` fields
//! of SNLI and MultiNLI.

use std::fmt;

use crate::error::{Error, Result};

/// A constituency tree. Preterminals are nodes whose only child is a leaf;
/// their label is the POS tag of that leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PtbTree {
    Leaf(String),
    Node { label: String, children: Vec<PtbTree> },
}

impl PtbTree {
    pub fn node(label: impl Into<String>, children: Vec<PtbTree>) -> Self {
        PtbTree::Node {
            label: label.into(),
            children,
        }
    }

    pub fn preterminal(tag: impl Into<String>, word: impl Into<String>) -> Self {
        PtbTree::node(tag, vec![PtbTree::Leaf(word.into())])
    }

    /// Flat tree `(FLAT (tag word) ...)` over a tagged token sequence.
    pub fn flat<'a>(tokens: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let children = tokens
            .into_iter()
            .map(|(w, t)| PtbTree::preterminal(escape_atom(t), escape_atom(w)))
            .collect();
        PtbTree::node("FLAT", children)
    }

    /// Leaves in left-to-right order, each paired with the label of its
    /// parent node.
    pub fn leaves_with_pos(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        // explicit stack: parse trees of long MNLI sentences can be deep
        let mut stack: Vec<(&PtbTree, &str)> = vec![(self, "")];
        while let Some((t, parent)) = stack.pop() {
            match t {
                PtbTree::Leaf(w) => out.push((w.clone(), parent.to_string())),
                PtbTree::Node { label, children } => {
                    for c in children.iter().rev() {
                        stack.push((c, label.as_str()));
                    }
                }
            }
        }
        out
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            PtbTree::Leaf(_) => 1,
            PtbTree::Node { children, .. } => children.iter().map(PtbTree::leaf_count).sum(),
        }
    }
}

impl Drop for PtbTree {
    // the derived drop recurses once per level
    fn drop(&mut self) {
        let mut stack = match self {
            PtbTree::Node { children, .. } => std::mem::take(children),
            PtbTree::Leaf(_) => return,
        };
        while let Some(mut t) = stack.pop() {
            if let PtbTree::Node { children, .. } = &mut t {
                stack.append(children);
            }
        }
    }
}

impl fmt::Display for PtbTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PtbTree::Leaf(w) => f.write_str(w),
            PtbTree::Node { label, children } => {
                f.write_str("(")?;
                f.write_str(label)?;
                for c in children {
                    f.write_str(" ")?;
                    c.fmt(f)?;
                }
                f.write_str(")")
            }
        }
    }
}

fn escape_atom(s: &str) -> String {
    if s.is_empty() {
        return "-NONE-".to_string();
    }
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '(' => out.push_str("-LRB-"),
            ')' => out.push_str("-RRB-"),
            c if c.is_whitespace() => out.push('_'),
            c => out.push(c),
        }
    }
    out
}

/// Parses one bracketed tree. Whitespace between tokens is free-form.
pub fn parse_ptb(input: &str) -> Result<PtbTree> {
    let mut p = Parser {
        src: input.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    if p.peek() != Some(b'(') {
        return Err(p.err("expected '('"));
    }
    let tree = p.node()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing input after tree"));
    }
    Ok(tree)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Ptb {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn atom(&mut self) -> &str {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() || b == b'(' || b == b')' {
                break;
            }
            self.pos += 1;
        }
        // split points are ASCII bytes so the slice stays valid UTF-8
        std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default()
    }

    // Iterative to survive arbitrarily deep input.
    fn node(&mut self) -> Result<PtbTree> {
        // (label, children) frames for currently open nodes
        let mut frames: Vec<(String, Vec<PtbTree>)> = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'(') => {
                    self.pos += 1;
                    self.skip_ws();
                    let label = self.atom().to_string();
                    frames.push((label, Vec::new()));
                }
                Some(b')') => {
                    let (label, children) = match frames.pop() {
                        Some(f) => f,
                        None => return Err(self.err("unexpected ')'")),
                    };
                    if children.is_empty() {
                        return Err(self.err("empty node"));
                    }
                    self.pos += 1;
                    let done = PtbTree::Node { label, children };
                    match frames.last_mut() {
                        Some((_, siblings)) => siblings.push(done),
                        None => return Ok(done),
                    }
                }
                Some(_) => {
                    let word = self.atom().to_string();
                    match frames.last_mut() {
                        Some((_, children)) => children.push(PtbTree::Leaf(word)),
                        None => return Err(self.err("leaf outside any node")),
                    }
                }
                None => return Err(self.err("unexpected end of input")),
            }
        }
    }
}
