//! Time-varying communication graphs.
//!
//! A [`GraphSchedule`] is a periodic sequence of weighted adjacency matrices
//! `A(t)`; row `i` holds the weights agent `i` applies to messages it
//! receives. [`GraphSchedule::validate`] checks the three network
//! requirements the consensus layer relies on:
//!
//! * periodic strong connectivity: the union graph over any window of `b`
//!   consecutive steps is strongly connected,
//! * balanced communication: every `A(t)` is doubly stochastic,
//! * non-degeneracy: `a_ii(t) >= alpha` and non-zero `a_ij(t)` lie in
//!   `[alpha, 1]`.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance used when checking row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::MalformedMatrix("matrix has no rows".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n {
                return Err(Error::MalformedMatrix(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::MalformedMatrix(format!(
                    "row {i} contains non-finite entry {v}"
                )));
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    /// Every entry equal to `1/n`.
    pub fn uniform(n: usize) -> Self {
        Self {
            n,
            data: vec![1.0 / n as f64; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Matrix { n, data }
    }

    fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Matrix::from_rows(rows)
    }
}

impl From<Matrix> for Vec<Vec<f64>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
    }
}

/// Periodic schedule `t -> A(t mod period)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct GraphSchedule {
    matrices: Vec<Matrix>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    matrices: Vec<Matrix>,
}

impl TryFrom<ScheduleRepr> for GraphSchedule {
    type Error = Error;
    fn try_from(r: ScheduleRepr) -> Result<Self> {
        GraphSchedule::new(r.matrices)
    }
}

impl From<GraphSchedule> for ScheduleRepr {
    fn from(s: GraphSchedule) -> Self {
        ScheduleRepr {
            matrices: s.matrices,
        }
    }
}

impl GraphSchedule {
    pub fn new(matrices: Vec<Matrix>) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::MalformedMatrix("schedule has no matrices".into()))?;
        let n = first.dim();
        if let Some((t, m)) = matrices.iter().enumerate().find(|(_, m)| m.dim() != n) {
            return Err(Error::MalformedMatrix(format!(
                "matrix {t} is {0}x{0}, expected {n}x{n}",
                m.dim()
            )));
        }
        Ok(Self { matrices })
    }

    /// Same matrix at every step.
    pub fn constant(m: Matrix) -> Self {
        Self { matrices: vec![m] }
    }

    /// Complete graph with uniform weights `1/n`.
    pub fn complete(n: usize) -> Self {
        Self::constant(Matrix::uniform(n))
    }

    /// The four-robot schedule: a ring (weights 0.5 self, 0.25 per
    /// neighbour) at even `t`, and the pairing {0,2}, {1,3} at odd `t`.
    pub fn four_robot_alternating() -> Self {
        let ring = Matrix::from_rows(vec![
            vec![0.5, 0.25, 0.0, 0.25],
            vec![0.25, 0.5, 0.25, 0.0],
            vec![0.0, 0.25, 0.5, 0.25],
            vec![0.25, 0.0, 0.25, 0.5],
        ])
        .expect("static matrix");
        let pairs = Matrix::from_rows(vec![
            vec![0.5, 0.0, 0.5, 0.0],
            vec![0.0, 0.5, 0.0, 0.5],
            vec![0.5, 0.0, 0.5, 0.0],
            vec![0.0, 0.5, 0.0, 0.5],
        ])
        .expect("static matrix");
        Self {
            matrices: vec![ring, pairs],
        }
    }

    pub fn n_agents(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn period(&self) -> usize {
        self.matrices.len()
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.matrices
    }

    /// `A(t)`.
    pub fn at(&self, t: usize) -> &Matrix {
        &self.matrices[t % self.matrices.len()]
    }

    /// Agents `j != i` with `a_ij(t) != 0`.
    pub fn neighbors_in(&self, i: usize, t: usize) -> Result<BTreeSet<usize>> {
        let n = self.n_agents();
        if i >= n {
            return Err(Error::IndexOutOfRange {
                what: "agent",
                index: i,
                len: n,
            });
        }
        let a = self.at(t);
        Ok((0..n).filter(|&j| j != i && a.get(i, j) != 0.0).collect())
    }

    /// Checks every network assumption over one period.
    pub fn validate(&self) -> ValidationReport {
        let n = self.n_agents();
        let mut violations = Vec::new();
        let mut alpha = f64::INFINITY;

        for (t, a) in self.matrices.iter().enumerate() {
            for i in 0..n {
                let row_sum: f64 = a.row(i).iter().sum();
                if (row_sum - 1.0).abs() > STOCHASTIC_TOL {
                    violations.push(Violation::RowSum {
                        t,
                        row: i,
                        sum: row_sum,
                    });
                }
                let col_sum: f64 = (0..n).map(|k| a.get(k, i)).sum();
                if (col_sum - 1.0).abs() > STOCHASTIC_TOL {
                    violations.push(Violation::ColumnSum {
                        t,
                        column: i,
                        sum: col_sum,
                    });
                }
                for j in 0..n {
                    let v = a.get(i, j);
                    if i == j && v <= 0.0 {
                        violations.push(Violation::SelfWeight {
                            t,
                            agent: i,
                            value: v,
                        });
                    } else if !(0.0..=1.0 + STOCHASTIC_TOL).contains(&v) {
                        violations.push(Violation::WeightRange {
                            t,
                            row: i,
                            column: j,
                            value: v,
                        });
                    }
                    if v > 0.0 {
                        alpha = alpha.min(v);
                    }
                }
            }
        }

        let window = self.connectivity_window();
        if window.is_none() {
            violations.push(Violation::NotStronglyConnected);
        }
        let alpha = if alpha.is_finite() {
            alpha.min(1.0)
        } else {
            0.0
        };
        let zeta = window.map(|b| zeta(alpha, n, b));

        ValidationReport {
            ok: violations.is_empty(),
            n_agents: n,
            period: self.period(),
            alpha,
            b: window,
            zeta,
            constant_transition: self.has_constant_transition(),
            violations,
        }
    }

    /// Smallest `b` such that every window `[t, t+b-1]` yields a strongly
    /// connected union graph. `None` when even the union over a full period
    /// is not strongly connected.
    pub fn connectivity_window(&self) -> Option<usize> {
        let n = self.n_agents();
        let p = self.period();
        (1..=p).find(|&b| {
            (0..p).all(|t| {
                let mut adj = vec![vec![false; n]; n];
                for s in t..t + b {
                    let a = self.at(s);
                    for (i, row) in adj.iter_mut().enumerate() {
                        for (j, e) in row.iter_mut().enumerate() {
                            *e |= a.get(i, j) != 0.0;
                        }
                    }
                }
                strongly_connected(&adj)
            })
        })
    }

    /// Whether the products `A(t)...A(1)` stop changing after the first
    /// step, checked over two periods. Only informative.
    pub fn has_constant_transition(&self) -> bool {
        let horizon = 2 * self.period() + 1;
        let mut prod = self.at(1).clone();
        let first = prod.clone();
        for t in 2..=horizon {
            prod = self.at(t).mul(&prod);
            let same = prod
                .data
                .iter()
                .zip(&first.data)
                .all(|(a, b)| (a - b).abs() <= 1e-12);
            if !same {
                return false;
            }
        }
        true
    }
}

/// Tracking-error convergence factor `alpha^(n(n+1)b/2 - 1)`.
pub fn zeta(alpha: f64, n: usize, b: usize) -> f64 {
    let exponent = (n * (n + 1) * b) as f64 / 2.0 - 1.0;
    alpha.powf(exponent)
}

/// Strong connectivity of a directed graph given as a boolean adjacency
/// matrix: every node reaches node 0 and is reached from it.
pub fn strongly_connected(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                let edge = if forward { adj[u][v] } else { adj[v][u] };
                if edge && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    RowSum {
        t: usize,
        row: usize,
        sum: f64,
    },
    ColumnSum {
        t: usize,
        column: usize,
        sum: f64,
    },
    SelfWeight {
        t: usize,
        agent: usize,
        value: f64,
    },
    WeightRange {
        t: usize,
        row: usize,
        column: usize,
        value: f64,
    },
    NotStronglyConnected,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::RowSum { t, row, sum } => {
                write!(
                    f,
                    "balanced communication: row {row} of A({t}) sums to {sum}"
                )
            }
            Violation::ColumnSum { t, column, sum } => {
                write!(
                    f,
                    "balanced communication: column {column} of A({t}) sums to {sum}"
                )
            }
            Violation::SelfWeight { t, agent, value } => {
                write!(f, "non-degeneracy: a_{agent}{agent}({t}) = {value}")
            }
            Violation::WeightRange {
                t,
                row,
                column,
                value,
            } => {
                write!(
                    f,
                    "non-degeneracy: a_{row}{column}({t}) = {value} outside [alpha, 1]"
                )
            }
            Violation::NotStronglyConnected => {
                write!(f, "periodic strong connectivity: no window makes the union graph strongly connected")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub n_agents: usize,
    pub period: usize,
    /// Smallest positive entry over the period.
    pub alpha: f64,
    /// Smallest connectivity window.
    pub b: Option<usize>,
    pub zeta: Option<f64>,
    /// Constant state-transition products. Reported, never enforced.
    pub constant_transition: bool,
    pub violations: Vec<Violation>,
}
