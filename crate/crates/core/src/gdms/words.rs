use std::fmt;

use serde::{Deserialize, Serialize};

use super::Gdms;

/// A finite word over the edge alphabet, stored as edge indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Length of the longest common prefix.
    pub fn common_prefix(&self, other: &Word) -> usize {
        self.0.iter().zip(&other.0).take_while(|(a, b)| a == b).count()
    }

    pub fn display<'a>(&'a self, sys: &'a Gdms) -> impl fmt::Display + 'a {
        WordDisplay(self, sys)
    }
}

struct WordDisplay<'a>(&'a Word, &'a Gdms);

impl fmt::Display for WordDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &e) in self.0 .0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(&self.1.edges()[e].id)?;
        }
        Ok(())
    }
}

/// Depth-first enumeration of admissible words of a fixed length that
/// extend a given prefix, in lexicographic order of edge indices.
pub struct Words<'a> {
    sys: &'a Gdms,
    n: usize,
    base: usize,
    word: Vec<usize>,
    idx: Vec<usize>,
    started: bool,
    done: bool,
}

impl<'a> Words<'a> {
    /// The prefix is assumed admissible.
    pub fn new(sys: &'a Gdms, prefix: Vec<usize>, n: usize) -> Self {
        let base = prefix.len().min(n);
        let done = prefix.len() > n;
        Words {
            sys,
            n,
            base,
            idx: vec![0; prefix.len()],
            word: prefix,
            started: false,
            done,
        }
    }

    fn candidates(&self, k: usize) -> &'a [usize] {
        let sys = self.sys;
        if k == 0 {
            sys.all_edges()
        } else {
            sys.successors(self.word[k - 1])
        }
    }

    fn step(&mut self) -> bool {
        let mut choice = if self.started {
            if self.word.len() == self.base {
                return false;
            }
            self.word.pop();
            self.idx.pop().unwrap() + 1
        } else {
            self.started = true;
            if self.word.len() == self.n {
                return true;
            }
            0
        };
        loop {
            let k = self.word.len();
            let cands = self.candidates(k);
            if choice < cands.len() {
                self.word.push(cands[choice]);
                self.idx.push(choice);
                if self.word.len() == self.n {
                    return true;
                }
                choice = 0;
            } else {
                if k == self.base {
                    return false;
                }
                self.word.pop();
                choice = self.idx.pop().unwrap() + 1;
            }
        }
    }
}

impl Iterator for Words<'_> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        if self.done {
            return None;
        }
        if self.step() {
            Some(Word(self.word.clone()))
        } else {
            self.done = true;
            None
        }
    }
}
