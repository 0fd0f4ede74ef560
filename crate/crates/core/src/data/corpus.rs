//! Vocabulary files, dataset manifests and gold alignments.
//!
//! * Vocabulary: UTF-8, one symbol per line, line number (0-based) is the ID.
//! * Manifest: `id TAB symbols TAB feature-path [TAB gold-path]`, symbols
//!   separated by spaces. Relative paths resolve against the manifest's directory.
//! * Gold alignment: one line per frame, `frame TAB symbol-position`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::load_melbin;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    symbols: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::Input(format!(
                    "vocabulary entry {i} is empty or contains whitespace"
                )));
            }
            if ids.insert(s.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate vocabulary symbol {s:?}")));
            }
        }
        Ok(Vocabulary { symbols, ids })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    /// Whitespace-separated symbols to IDs; errors name the offending position.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>> {
        text.split_whitespace()
            .enumerate()
            .map(|(i, s)| {
                self.id(s)
                    .ok_or_else(|| Error::Input(format!("unknown symbol {s:?} at position {i}")))
            })
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        Self::new(text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for s in &self.symbols {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// One training or evaluation item. Frames are `T × D`.
#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub symbols: Vec<usize>,
    pub frames: Tensor,
    /// Symbol position for every frame, when known.
    pub gold: Option<Vec<usize>>,
}

impl Utterance {
    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_feasible(&self, states_per_symbol: usize) -> bool {
        !self.symbols.is_empty() && self.frames.rows() >= states_per_symbol * self.symbols.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub symbols: String,
    pub features: PathBuf,
    pub gold: Option<PathBuf>,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &str| {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    };
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(Error::Input(format!(
                "{}:{}: expected 3 or 4 tab-separated fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        out.push(ManifestEntry {
            id: fields[0].to_string(),
            symbols: fields[1].to_string(),
            features: resolve(fields[2]),
            gold: fields.get(3).map(|p| resolve(p)),
        });
    }
    Ok(out)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for e in entries {
        write!(f, "{}\t{}\t{}", e.id, e.symbols, e.features.display())?;
        if let Some(g) = &e.gold {
            write!(f, "\t{}", g.display())?;
        }
        writeln!(f)?;
    }
    Ok(())
}

pub fn read_gold(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(frame), Some(sym), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::Input(format!("gold line {}: expected 2 fields", lineno + 1)));
        };
        let parse = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| Error::Input(format!("gold line {}: {e}", lineno + 1)))
        };
        if parse(frame)? != out.len() {
            return Err(Error::Input(format!("gold line {}: frames out of order", lineno + 1)));
        }
        out.push(parse(sym)?);
    }
    Ok(out)
}

pub fn write_gold(path: impl AsRef<Path>, gold: &[usize]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for (t, s) in gold.iter().enumerate() {
        writeln!(f, "{t}\t{s}")?;
    }
    Ok(())
}

/// An utterance excluded at load time, with the reason.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejected {
    pub id: String,
    pub reason: String,
}

/// Loads every manifest entry. Items whose frame count cannot cover
/// `states_per_symbol · len(symbols)` states are rejected, not loaded.
pub fn load_corpus(
    manifest: impl AsRef<Path>,
    vocab: &Vocabulary,
    states_per_symbol: usize,
) -> Result<(Vec<Utterance>, Vec<Rejected>)> {
    let mut utts = Vec::new();
    let mut rejected = Vec::new();
    for e in read_manifest(manifest)? {
        let symbols = vocab
            .encode(&e.symbols)
            .map_err(|err| Error::Input(format!("utterance {}: {err}", e.id)))?;
        let frames = load_melbin(&e.features)?;
        if !frames.all_finite() {
            return Err(Error::Input(format!("utterance {}: non-finite feature values", e.id)));
        }
        let gold = match &e.gold {
            Some(p) => {
                let g = read_gold(p)?;
                if g.len() != frames.rows() {
                    return Err(Error::Input(format!(
                        "utterance {}: gold alignment has {} frames, features have {}",
                        e.id,
                        g.len(),
                        frames.rows()
                    )));
                }
                Some(g)
            }
            None => None,
        };
        let u = Utterance {
            id: e.id,
            symbols,
            frames,
            gold,
        };
        if u.symbols.is_empty() {
            rejected.push(Rejected {
                id: u.id,
                reason: "empty symbol sequence".into(),
            });
        } else if !u.is_feasible(states_per_symbol) {
            rejected.push(Rejected {
                reason: format!(
                    "{} frames cannot cover {} states",
                    u.frames.rows(),
                    states_per_symbol * u.symbols.len()
                ),
                id: u.id,
            });
        } else {
            utts.push(u);
        }
    }
    Ok((utts, rejected))
}
