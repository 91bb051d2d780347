use std::io::Write;

use serde::Serialize;

use super::{Decision, FourthDownState};
use crate::error::{Error, Result};

/// What a grid cell reports for one `(yardline, ydstogo)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridValue {
    pub best: Decision,
    pub effect_size: Option<f64>,
    /// Only present when the grid was evaluated against an ensemble.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boot_pct: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub yardline: u8,
    pub ydstogo: u8,
    /// `None` for infeasible cells (`ydstogo > yardline`).
    pub value: Option<GridValue>,
}

/// Evaluates `cell` on every valid `(y, z)` in the given ranges, with the
/// remaining state fields taken from `template`. Pairs with `z > y` are kept
/// as empty cells so the grid is always rectangular.
pub fn boundary_grid<F>(
    template: &FourthDownState,
    yardlines: impl IntoIterator<Item = u8>,
    ydstogo: impl IntoIterator<Item = u8>,
    mut cell: F,
) -> Result<Vec<GridCell>>
where
    F: FnMut(&FourthDownState) -> Result<GridValue>,
{
    let ys: Vec<u8> = yardlines.into_iter().collect();
    let zs: Vec<u8> = ydstogo.into_iter().collect();
    if ys.is_empty() || zs.is_empty() {
        return Err(Error::InvalidInput("boundary grid needs non-empty yardline and ydstogo ranges".into()));
    }
    let mut out = Vec::with_capacity(ys.len() * zs.len());
    for &y in &ys {
        for &z in &zs {
            let value = if z > y || z == 0 || y == 0 || y > 99 {
                None
            } else {
                let state = FourthDownState { yardline: y, ydstogo: z, ..template.clone() };
                Some(cell(&state)?)
            };
            out.push(GridCell { yardline: y, ydstogo: z, value });
        }
    }
    Ok(out)
}

/// CSV with header `y,z,best,effect_size,boot_pct`; missing values are
/// empty fields.
pub fn write_grid_csv<W: Write>(cells: &[GridCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["y", "z", "best", "effect_size", "boot_pct"])?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for c in cells {
        let (best, g, pct) = match &c.value {
            Some(v) => (v.best.to_string(), fmt(v.effect_size), fmt(v.boot_pct)),
            None => (String::new(), String::new(), String::new()),
        };
        w.write_record([c.yardline.to_string(), c.ydstogo.to_string(), best, g, pct])?;
    }
    w.flush().map_err(|e| Error::io("grid csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_impossible_cells_and_writes_blanks() {
        let cells = boundary_grid(&FourthDownState::template(), 1..=3, 1..=3, |s| {
            Ok(GridValue {
                best: if s.ydstogo == 1 { Decision::Go } else { Decision::Punt },
                effect_size: (s.yardline > 1).then_some(0.25),
                boot_pct: None,
            })
        })
        .unwrap();
        assert_eq!(cells.len(), 9);
        assert!(cells.iter().find(|c| c.yardline == 1 && c.ydstogo == 3).unwrap().value.is_none());
        let mut buf = Vec::new();
        write_grid_csv(&cells, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "y,z,best,effect_size,boot_pct");
        assert_eq!(lines[1], "1,1,go,,");
        assert_eq!(lines[2], "1,2,,,");
        assert_eq!(lines[4], "2,1,go,0.25,");
    }

    #[test]
    fn full_field_has_990_cells() {
        let cells = boundary_grid(&FourthDownState::template(), 1..=99, 1..=10, |_| {
            Ok(GridValue { best: Decision::Punt, effect_size: None, boot_pct: None })
        })
        .unwrap();
        assert_eq!(cells.len(), 990);
        assert!(boundary_grid(&FourthDownState::template(), 5..5, 1..=10, |_| unreachable!()).is_err());
    }
}
