use std::path::Path;

use super::{Alphabet, Sequence};
use crate::{Error, Result};

/// Equal-length sequences over one alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub alphabet: Alphabet,
    pub sequences: Vec<Sequence>,
}

impl Dataset {
    pub fn sequence_length(&self) -> usize {
        self.sequences.first().map_or(0, Sequence::len)
    }
}

/// Parses one sequence per line. Blank lines are skipped; ragged lines and
/// symbols outside the alphabet are reported with their 1-based line number.
pub fn parse_dataset(text: &str, alphabet: &Alphabet) -> Result<Dataset> {
    let mut sequences = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let mut values = Vec::with_capacity(line.len());
        for (col, ch) in line.chars().enumerate() {
            let v = alphabet.index_of(ch).ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("symbol '{ch}' at column {} is not in the alphabet", col + 1),
            })?;
            values.push(v);
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("length {} differs from the first row's {w}", values.len()),
                })
            }
            _ => {}
        }
        sequences.push(Sequence::from_raw(values));
    }
    if sequences.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "dataset contains no sequences".into(),
        });
    }
    Ok(Dataset {
        alphabet: alphabet.clone(),
        sequences,
    })
}

pub fn read_dataset(path: &Path, alphabet: &Alphabet) -> Result<Dataset> {
    parse_dataset(&std::fs::read_to_string(path)?, alphabet)
}

pub fn render_dataset(sequences: &[Sequence], alphabet: &Alphabet) -> String {
    let mut out = String::new();
    for s in sequences {
        out.push_str(&alphabet.render(s.values()));
        out.push('\n');
    }
    out
}

pub fn write_dataset(path: &Path, sequences: &[Sequence], alphabet: &Alphabet) -> Result<()> {
    std::fs::write(path, render_dataset(sequences, alphabet))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_renders() {
        let a = Alphabet::default();
        let d = parse_dataset("ATGC\nCCCC\n\n", &a).unwrap();
        assert_eq!(d.sequences.len(), 2);
        assert_eq!(d.sequences[0].values(), &[0, 1, 2, 3]);
        assert_eq!(render_dataset(&d.sequences, &a), "ATGC\nCCCC\n");
    }

    #[test]
    fn reports_line_numbers() {
        let a = Alphabet::default();
        match parse_dataset("ATGC\nATG\n", &a) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_dataset("ATGC\nATGC\nATXC\n", &a) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("column 3"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_dataset("\n\n", &a).is_err());
    }
}
