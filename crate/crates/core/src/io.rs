//! Plain-text measure files.
//!
//! One atom per line, `birth death mass`, whitespace separated. Lines starting
//! with `#` and blank lines are skipped. The two-column diagram format
//! `birth death` is read with unit masses.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::measure::{PersistenceMeasure, PlanarPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Columns {
    /// `birth death mass`
    Measure,
    /// `birth death`, mass 1
    Diagram,
    /// Either, decided per line.
    Auto,
}

pub fn parse_measure(text: &str, columns: Columns) -> Result<PersistenceMeasure> {
    let mut atoms = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let expected_ok = match columns {
            Columns::Measure => fields.len() == 3,
            Columns::Diagram => fields.len() == 2,
            Columns::Auto => fields.len() == 2 || fields.len() == 3,
        };
        if !expected_ok {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} columns, found {}", column_hint(columns), fields.len()),
            });
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("not a number: {s:?}"),
            })
        };
        let birth = num(fields[0])?;
        let death = num(fields[1])?;
        let mass = if fields.len() == 3 { num(fields[2])? } else { 1.0 };
        let point = PlanarPoint::new(birth, death).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Parse {
                line: lineno,
                message: Error::InvalidMass(mass).to_string(),
            });
        }
        atoms.push((point, mass));
    }
    PersistenceMeasure::new(atoms)
}

fn column_hint(columns: Columns) -> &'static str {
    match columns {
        Columns::Measure => "3 (birth death mass)",
        Columns::Diagram => "2 (birth death)",
        Columns::Auto => "2 or 3",
    }
}

pub fn read_measure<P: AsRef<Path>>(path: P, columns: Columns) -> Result<PersistenceMeasure> {
    let text = std::fs::read_to_string(path)?;
    parse_measure(&text, columns)
}

/// Serializes in the three-column format. Floats use the shortest
/// representation that round-trips.
pub fn format_measure(mu: &PersistenceMeasure) -> String {
    let mut out = String::new();
    for atom in mu.atoms() {
        let _ = writeln!(out, "{} {} {}", atom.point.birth(), atom.point.death(), atom.mass);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_three_columns_with_comments() {
        let text = "# header\n0 2 1.5\n\n  1 3 2\n# trailing\n";
        let mu = parse_measure(text, Columns::Measure).unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atoms()[0].mass, 1.5);
        assert_eq!(mu.total_mass(), 3.5);
    }

    #[test]
    fn diagram_loader_uses_unit_mass() {
        let mu = parse_measure("0 1\n0 1\n0.5 2\n", Columns::Diagram).unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atoms()[0].mass, 2.0);
        assert!(mu.is_diagram());
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_measure("0 1 1\n0 inf 1\n", Columns::Measure) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_measure("1 0 1\n", Columns::Auto), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_measure("0 1\n", Columns::Measure), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_measure("0 1 -2\n", Columns::Measure), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_measure("0 x\n", Columns::Auto), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn format_then_parse_is_identity() {
        let mu = PersistenceMeasure::from_triples([(0.1, 0.7, 1.0 / 3.0), (-2.0, 5.5, 4.0)]).unwrap();
        let back = parse_measure(&format_measure(&mu), Columns::Measure).unwrap();
        assert_eq!(back, mu);
    }
}
