use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Shape(String),
}

/// Moment arms sampled per muscle, per swept joint, per grid angle.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentArmMap {
    pub muscles: Vec<String>,
    pub joints: Vec<String>,
    /// Per-joint sample angles, rad.
    pub q_grid: Vec<Vec<f64>>,
    /// `values[m][j][k]`, m.
    pub values: Vec<Vec<Vec<f64>>>,
    /// Posture held by the joints that are not being swept. Empty when the
    /// map came from a CSV file.
    pub fixed_posture: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    muscle: String,
    joint: String,
    q: String,
    r: String,
}

impl MomentArmMap {
    pub fn muscle_index(&self, name: &str) -> Option<usize> {
        self.muscles.iter().position(|m| m == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j == name)
    }

    pub fn column(&self, muscle: &str, joint: &str) -> Option<&[f64]> {
        Some(&self.values[self.muscle_index(muscle)?][self.joint_index(joint)?])
    }

    pub fn len(&self) -> usize {
        self.values.iter().flatten().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks finiteness and strictly increasing grids.
    pub fn check(&self) -> Result<(), MapError> {
        for (j, g) in self.q_grid.iter().enumerate() {
            if g.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(MapError::Shape(format!(
                    "grid for joint '{}' is not strictly increasing",
                    self.joints[j]
                )));
            }
        }
        for (m, per_joint) in self.values.iter().enumerate() {
            if per_joint.len() != self.joints.len() {
                return Err(MapError::Shape(format!(
                    "muscle '{}' has {} joint columns",
                    self.muscles[m],
                    per_joint.len()
                )));
            }
            for (j, col) in per_joint.iter().enumerate() {
                if col.len() != self.q_grid[j].len() {
                    return Err(MapError::Shape(format!(
                        "muscle '{}' joint '{}' has {} values for {} grid points",
                        self.muscles[m],
                        self.joints[j],
                        col.len(),
                        self.q_grid[j].len()
                    )));
                }
                if col.iter().any(|v| !v.is_finite()) {
                    return Err(MapError::Shape(format!(
                        "non-finite moment arm for '{}'",
                        self.muscles[m]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes rows `muscle,joint,q,r` in map order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MapError> {
        let mut out = csv::Writer::from_writer(w);
        for (m, name) in self.muscles.iter().enumerate() {
            for (j, joint) in self.joints.iter().enumerate() {
                for (q, r) in self.q_grid[j].iter().zip(&self.values[m][j]) {
                    out.serialize(Row {
                        muscle: name.clone(),
                        joint: joint.clone(),
                        q: format!("{q:.16e}"),
                        r: format!("{r:.16e}"),
                    })?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }

    /// Reads a `muscle,joint,q,r` table. Muscles and joints keep first-seen
    /// order; every muscle must cover the same grid for each joint.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, MapError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut muscles: Vec<String> = Vec::new();
        let mut joints: Vec<String> = Vec::new();
        let mut cells: BTreeMap<(usize, usize), Vec<(f64, f64)>> = BTreeMap::new();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let parse = |s: &str, what: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| MapError::Shape(format!("bad {what} value '{s}'")))
            };
            let q = parse(&row.q, "q")?;
            let r = parse(&row.r, "r")?;
            let m = index_of(&mut muscles, row.muscle);
            let j = index_of(&mut joints, row.joint);
            cells.entry((m, j)).or_default().push((q, r));
        }
        if cells.is_empty() {
            return Err(MapError::Shape("no rows".into()));
        }
        let mut q_grid: Vec<Option<Vec<f64>>> = vec![None; joints.len()];
        let mut values = vec![vec![Vec::new(); joints.len()]; muscles.len()];
        for m in 0..muscles.len() {
            for j in 0..joints.len() {
                let pts = cells.get(&(m, j)).ok_or_else(|| {
                    MapError::Shape(format!(
                        "muscle '{}' has no rows for joint '{}'",
                        muscles[m], joints[j]
                    ))
                })?;
                let qs: Vec<f64> = pts.iter().map(|p| p.0).collect();
                match &q_grid[j] {
                    None => q_grid[j] = Some(qs),
                    Some(g) if *g == qs => {}
                    Some(_) => {
                        return Err(MapError::Shape(format!(
                            "muscle '{}' uses a different grid for joint '{}'",
                            muscles[m], joints[j]
                        )))
                    }
                }
                values[m][j] = pts.iter().map(|p| p.1).collect();
            }
        }
        let map = MomentArmMap {
            muscles,
            joints,
            q_grid: q_grid.into_iter().map(|g| g.unwrap_or_default()).collect(),
            values,
            fixed_posture: Vec::new(),
        };
        map.check()?;
        Ok(map)
    }
}

fn index_of(list: &mut Vec<String>, name: String) -> usize {
    match list.iter().position(|n| *n == name) {
        Some(i) => i,
        None => {
            list.push(name);
            list.len() - 1
        }
    }
}
