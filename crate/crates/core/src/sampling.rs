//! Training sets: scattered state observations read from a reference
//! solution, boundary points, and a uniform residual lattice.

use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problems::{BoundaryLocation, ProblemSpec};
use crate::reference::{GridField, ReferenceSolution};

/// Which state a data point observes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataChannel {
    Controlled,
    Uncontrolled,
}

impl DataChannel {
    pub fn as_str(&self) -> &'static str {
        match self {
            DataChannel::Controlled => "y",
            DataChannel::Uncontrolled => "y_unc",
        }
    }
}

impl FromStr for DataChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "y" => Ok(DataChannel::Controlled),
            "y_unc" => Ok(DataChannel::Uncontrolled),
            other => Err(Error::Parse(format!("unknown data channel `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataPoint {
    pub x: f64,
    pub t: f64,
    pub channel: DataChannel,
    pub target: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub x: f64,
    pub t: f64,
    pub location: BoundaryLocation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingDataset {
    pub data_points: Vec<DataPoint>,
    pub boundary_points: Vec<BoundaryPoint>,
    pub residual_points: Vec<(f64, f64)>,
    pub seed: u64,
}

/// Draws the training set of `spec` from `reference`.
///
/// Data points sit on distinct interior grid nodes with `t > 0`; test 2
/// draws a second, independent set from the uncontrolled solution.
pub fn sample_dataset(reference: &ReferenceSolution, spec: &ProblemSpec, seed: u64) -> Result<TrainingDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data_points = draw_nodes(&reference.y_star, DataChannel::Controlled, spec.n_data, &mut rng)?;
    if spec.uses_uncontrolled {
        data_points.extend(draw_nodes(
            &reference.y_uncontrolled,
            DataChannel::Uncontrolled,
            spec.n_data,
            &mut rng,
        )?);
    }
    Ok(TrainingDataset {
        data_points,
        boundary_points: boundary_points(spec)?,
        residual_points: residual_lattice(spec),
        seed,
    })
}

fn draw_nodes(field: &GridField, channel: DataChannel, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<DataPoint>> {
    let g = field.grid;
    let (cols, rows) = (g.nx - 2, g.nt - 1);
    let available = cols * rows;
    if count > available {
        return Err(Error::NotEnoughNodes {
            what: "interior data nodes",
            requested: count,
            available,
        });
    }
    let mut picks = sample(rng, available, count).into_vec();
    picks.sort_unstable();
    Ok(picks
        .into_iter()
        .map(|k| {
            let (n, i) = (1 + k / cols, 1 + k % cols);
            DataPoint {
                x: g.x(i),
                t: g.t(n),
                channel,
                target: field.get(n, i),
            }
        })
        .collect())
}

/// Boundary points split evenly between `x = a` and `x = b` at
/// `t = T k / m`, `k = 1..=m`; test 3 adds terminal points at interior `x`.
pub fn boundary_points(spec: &ProblemSpec) -> Result<Vec<BoundaryPoint>> {
    let spatial = spec.n_boundary - spec.n_terminal;
    if !spatial.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "{} spatial boundary points cannot be split evenly",
            spatial
        )));
    }
    let per_side = spatial / 2;
    let d = spec.domain;
    let mut points = Vec::with_capacity(spec.n_boundary);
    for (location, x) in [(BoundaryLocation::Left, d.a), (BoundaryLocation::Right, d.b)] {
        points.extend((1..=per_side).map(|k| BoundaryPoint {
            x,
            t: d.t_final * k as f64 / per_side as f64,
            location,
        }));
    }
    let m = spec.n_terminal;
    points.extend((1..=m).map(|j| BoundaryPoint {
        x: d.a + (d.b - d.a) * j as f64 / (m + 1) as f64,
        t: d.t_final,
        location: BoundaryLocation::Terminal,
    }));
    Ok(points)
}

/// Inclusive `n_t × n_x` lattice over the closed domain, ordered by time.
pub fn residual_lattice(spec: &ProblemSpec) -> Vec<(f64, f64)> {
    let (nt, nx) = spec.residual_lattice;
    let d = spec.domain;
    let lin = |lo: f64, hi: f64, n: usize, k: usize| {
        if k + 1 == n {
            hi
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    };
    let mut points = Vec::with_capacity(nt * nx);
    for n in 0..nt {
        let t = lin(0.0, d.t_final, nt, n);
        points.extend((0..nx).map(|i| (lin(d.a, d.b, nx, i), t)));
    }
    points
}

impl TrainingDataset {
    /// CSV with columns `kind,channel,x,t,target`, preceded by a `# seed` line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# seed = {}", self.seed)?;
        writeln!(out, "kind,channel,x,t,target")?;
        for p in &self.data_points {
            writeln!(out, "data,{},{},{},{}", p.channel.as_str(), p.x, p.t, p.target)?;
        }
        for p in &self.boundary_points {
            writeln!(out, "boundary,{},{},{},0", p.location.as_str(), p.x, p.t)?;
        }
        for (x, t) in &self.residual_points {
            writeln!(out, "residual,,{x},{t},0")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut ds = TrainingDataset {
            data_points: Vec::new(),
            boundary_points: Vec::new(),
            residual_points: Vec::new(),
            seed: 0,
        };
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        };
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("seed =") {
                    ds.seed = v
                        .trim()
                        .parse()
                        .map_err(|e| Error::Parse(format!("seed: {e}")))?;
                }
                continue;
            }
            if line.is_empty() || line.starts_with("kind,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(Error::Parse(format!("dataset row `{line}` needs 5 fields")));
            }
            let (x, t) = (num(f[2])?, num(f[3])?);
            match f[0] {
                "data" => ds.data_points.push(DataPoint {
                    x,
                    t,
                    channel: f[1].parse()?,
                    target: num(f[4])?,
                }),
                "boundary" => ds.boundary_points.push(BoundaryPoint {
                    x,
                    t,
                    location: f[1].parse()?,
                }),
                "residual" => ds.residual_points.push((x, t)),
                other => return Err(Error::Parse(format!("unknown point kind `{other}`"))),
            }
        }
        Ok(ds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_problem, ProblemId};

    #[test]
    fn lattice_counts_and_bounds() {
        for id in ProblemId::ALL {
            let spec = make_problem(id);
            let pts = residual_lattice(&spec);
            assert_eq!(pts.len(), spec.n_residual);
            assert!(pts.iter().all(|&(x, t)| spec.domain.contains(x, t)));
            let mut sorted = pts.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted.dedup();
            assert_eq!(sorted.len(), pts.len());
            assert_eq!(boundary_points(&spec).unwrap().len(), spec.n_boundary);
        }
    }

    #[test]
    fn test3_boundary_includes_terminal_points() {
        let spec = make_problem(ProblemId::Test3);
        let b = boundary_points(&spec).unwrap();
        let terminal: Vec<_> = b
            .iter()
            .filter(|p| p.location == BoundaryLocation::Terminal)
            .collect();
        assert_eq!(terminal.len(), 4);
        assert!(terminal.iter().all(|p| p.t == 0.5 && p.x > -4.0 && p.x < 4.0));
        assert!(b.iter().all(|p| p.t > 0.0));
    }
}
