//! Alignment text format: one line per frame,
//! `frame TAB state TAB symbol TAB sub-state`, all 0-based. Lines starting
//! with `#` are comments.

use std::io::{BufRead, Write};

use super::Alignment;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlignmentRow {
    pub frame: usize,
    pub state: usize,
    pub symbol: usize,
    pub substate: usize,
}

pub fn write_alignment(
    mut w: impl Write,
    alignment: &Alignment,
    states_per_symbol: usize,
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        for line in c.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    for (t, &s) in alignment.states().iter().enumerate() {
        writeln!(w, "{t}\t{s}\t{}\t{}", s / states_per_symbol, s % states_per_symbol)?;
    }
    Ok(())
}

pub fn read_alignment(r: impl BufRead) -> Result<Vec<AlignmentRow>> {
    let mut rows = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<usize> = line
            .split('\t')
            .map(|f| f.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Input(format!("alignment line {}: {e}", lineno + 1)))?;
        let [frame, state, symbol, substate] = fields[..] else {
            return Err(Error::Input(format!(
                "alignment line {} has {} fields, expected 4",
                lineno + 1,
                fields.len()
            )));
        };
        rows.push(AlignmentRow {
            frame,
            state,
            symbol,
            substate,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_expected_lines() {
        let a = Alignment::new(vec![0, 0, 1, 2, 3]);
        let mut buf = Vec::new();
        write_alignment(&mut buf, &a, 2, Some("checkpoint=abc")).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "# checkpoint=abc\n0\t0\t0\t0\n1\t0\t0\t0\n2\t1\t0\t1\n3\t2\t1\t0\n4\t3\t1\t1\n"
        );
        let rows = read_alignment(&buf[..]).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(
            rows[4],
            AlignmentRow {
                frame: 4,
                state: 3,
                symbol: 1,
                substate: 1
            }
        );
        assert!(read_alignment(&b"0\t1\n"[..]).is_err());
    }
}
