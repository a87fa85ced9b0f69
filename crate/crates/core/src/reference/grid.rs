use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::problems::{Domain, ProblemSpec};

/// Uniform space-time grid including both endpoints in `x` and `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub domain: Domain,
    pub nx: usize,
    pub nt: usize,
    pub dx: f64,
    pub dt: f64,
}

impl Grid {
    pub fn new(domain: Domain, nx: usize, nt: usize) -> Result<Self> {
        if nx < 5 || nt < 2 {
            return Err(Error::Config(format!(
                "grid needs nx >= 5 and nt >= 2, got nx = {nx}, nt = {nt}"
            )));
        }
        if !(domain.b > domain.a && domain.t_final > 0.0) {
            return Err(Error::Config(format!("degenerate domain {domain:?}")));
        }
        Ok(Grid {
            domain,
            nx,
            nt,
            dx: (domain.b - domain.a) / (nx - 1) as f64,
            dt: domain.t_final / (nt - 1) as f64,
        })
    }

    /// Default grid for a problem: `nx` nodes in space, and enough time
    /// levels that `dt ≤ dx`, at least 2001 for long horizons and 501 for
    /// short ones.
    pub fn for_problem(spec: &ProblemSpec, nx: usize) -> Result<Self> {
        let d = spec.domain;
        let dx = (d.b - d.a) / (nx.max(2) - 1) as f64;
        let floor = if d.t_final > 1.0 { 2001 } else { 501 };
        let by_cfl = (d.t_final / dx).ceil() as usize + 1;
        Grid::new(d, nx, floor.max(by_cfl))
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.domain.b
        } else {
            self.domain.a + i as f64 * self.dx
        }
    }

    pub fn t(&self, n: usize) -> f64 {
        if n + 1 == self.nt {
            self.domain.t_final
        } else {
            n as f64 * self.dt
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|n| self.t(n)).collect()
    }

    /// Trapezoidal quadrature weight of node `i` in space.
    pub fn wx(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.nx {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Trapezoidal quadrature weight of level `n` in time.
    pub fn wt(&self, n: usize) -> f64 {
        if n == 0 || n + 1 == self.nt {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.nt
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// What a [`GridField`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldChannel {
    State,
    Control,
    Adjoint,
}

impl FieldChannel {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldChannel::State => "y",
            FieldChannel::Control => "u",
            FieldChannel::Adjoint => "p",
        }
    }
}

/// Values on every node of a [`Grid`], stored row by row in time.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub channel: FieldChannel,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, channel: FieldChannel, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "grid field values",
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "grid field at level {}, node {}",
                k / grid.nx,
                k % grid.nx
            )));
        }
        Ok(GridField {
            grid,
            channel,
            values,
        })
    }

    pub fn zeros(grid: Grid, channel: FieldChannel) -> Self {
        GridField {
            grid,
            channel,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, channel: FieldChannel, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for n in 0..grid.nt {
            let t = grid.t(n);
            values.extend((0..grid.nx).map(|i| f(grid.x(i), t)));
        }
        GridField::new(grid, channel, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.grid.nx + i]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.grid.nx..(n + 1) * self.grid.nx]
    }

    pub fn final_row(&self) -> &[f64] {
        self.row(self.grid.nt - 1)
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridField {
            grid: self.grid,
            channel: self.channel,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoidal `L²(Ω)` norm.
    pub fn l2_norm(&self) -> f64 {
        self.weighted_dot(self).sqrt()
    }

    /// Trapezoidal `L²(Ω)` inner product.
    pub fn weighted_dot(&self, other: &GridField) -> f64 {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        let g = &self.grid;
        let mut s = 0.0;
        for n in 0..g.nt {
            let (a, b) = (self.row(n), other.row(n));
            let row: f64 = (0..g.nx).map(|i| g.wx(i) * a[i] * b[i]).sum();
            s += g.wt(n) * row;
        }
        s
    }

    /// Writes the CSV form: a header `t,x₀,…` and one row per time level.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::from("t");
        for x in self.grid.xs() {
            write!(line, ",{x}").unwrap();
        }
        writeln!(out, "{line}")?;
        for n in 0..self.grid.nt {
            line.clear();
            write!(line, "{}", self.grid.t(n)).unwrap();
            for v in self.row(n) {
                write!(line, ",{v}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Reads the CSV form written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(input: R, channel: FieldChannel) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty grid field CSV".into()))??;
        let xs = parse_row(&header, "t")?;
        let mut ts = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = parse_numbers(&line)?;
            if row.len() != xs.len() + 1 {
                return Err(Error::Parse(format!(
                    "row at t = {} has {} values, expected {}",
                    row[0],
                    row.len() - 1,
                    xs.len()
                )));
            }
            ts.push(row[0]);
            values.extend_from_slice(&row[1..]);
        }
        if xs.len() < 2 || ts.len() < 2 {
            return Err(Error::Parse("grid field CSV needs at least 2 rows and 2 columns".into()));
        }
        let domain = Domain {
            a: xs[0],
            b: xs[xs.len() - 1],
            t_final: ts[ts.len() - 1],
        };
        let grid = Grid::new(domain, xs.len(), ts.len())?;
        GridField::new(grid, channel, values)
    }
}

fn parse_numbers(line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        })
        .collect()
}

fn parse_row(line: &str, first: &str) -> Result<Vec<f64>> {
    let (head, rest) = line
        .split_once(',')
        .ok_or_else(|| Error::Parse("grid field header has no x columns".into()))?;
    if head.trim() != first {
        return Err(Error::Parse(format!("expected header to start with `{first}`")));
    }
    parse_numbers(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> Grid {
        Grid::new(
            Domain {
                a: 0.0,
                b: 1.0,
                t_final: 0.5,
            },
            11,
            6,
        )
        .unwrap()
    }

    #[test]
    fn endpoints_are_exact() {
        let g = Grid::new(
            Domain {
                a: -4.0,
                b: 4.0,
                t_final: 4.0,
            },
            201,
            2001,
        )
        .unwrap();
        assert_eq!(g.x(0), -4.0);
        assert_eq!(g.x(200), 4.0);
        assert_eq!(g.t(2000), 4.0);
        assert_eq!(g.dx, 0.04);
    }

    #[test]
    fn norm_of_constant_is_area_root() {
        let g = unit_grid();
        let f = GridField::from_fn(g, FieldChannel::State, |_, _| 2.0).unwrap();
        assert!((f.l2_norm() - (4.0f64 * 0.5).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn csv_round_trip() {
        let g = unit_grid();
        let f = GridField::from_fn(g, FieldChannel::Control, |x, t| (3.0 * x).sin() * t.exp() / 7.0)
            .unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let back = GridField::read_csv(&buf[..], FieldChannel::Control).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.grid.nx, g.nx);
        assert_eq!(back.grid.nt, g.nt);
    }

    #[test]
    fn rejects_wrong_shape_and_nan() {
        let g = unit_grid();
        assert!(GridField::new(g, FieldChannel::State, vec![0.0; 3]).is_err());
        let mut v = vec![0.0; g.len()];
        v[7] = f64::NAN;
        assert!(matches!(
            GridField::new(g, FieldChannel::State, v),
            Err(Error::NonFinite(_))
        ));
    }
}
