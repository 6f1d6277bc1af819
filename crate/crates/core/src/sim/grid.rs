use super::config::{Domain, GridConfig};
use crate::{Error, Result};

/// Regular test grid over a box, with the strided common subset.
///
/// Points are ordered with the first coordinate varying slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<Vec<f64>>,
    agg_index: Vec<usize>,
    per_axis: usize,
    dim: usize,
}

impl Grid {
    pub fn new(domain: &Domain, cfg: &GridConfig) -> Result<Self> {
        let dim = domain.dim();
        let n = cfg.per_axis;
        if n < 2 || cfg.agg_stride == 0 || dim == 0 {
            return Err(Error::Config(
                "grid needs per_axis >= 2, agg_stride >= 1 and a non-empty domain".into(),
            ));
        }
        let total = n
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Config("grid too large".into()))?;
        let mut points = Vec::with_capacity(total);
        let mut agg_index = Vec::new();
        let mut digits = vec![0usize; dim];
        for idx in 0..total {
            let mut rest = idx;
            for k in (0..dim).rev() {
                digits[k] = rest % n;
                rest /= n;
            }
            points.push(
                digits
                    .iter()
                    .zip(domain.lower.iter().zip(&domain.upper))
                    .map(|(&i, (lo, hi))| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                    .collect(),
            );
            if digits.iter().all(|i| i % cfg.agg_stride == 0) {
                agg_index.push(idx);
            }
        }
        Ok(Self {
            points,
            agg_index,
            per_axis: n,
            dim,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Positions of the common points within [`Grid::points`].
    pub fn agg_index(&self) -> &[usize] {
        &self.agg_index
    }

    pub fn agg_points(&self) -> Vec<Vec<f64>> {
        self.agg_index
            .iter()
            .map(|&i| self.points[i].clone())
            .collect()
    }

    /// Unordered pairs of grid neighbours, diagonals included.
    pub fn neighbor_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.per_axis as isize;
        let d = self.dim;
        // offsets in {-1, 0, 1}^d whose first non-zero entry is +1
        let mut offsets = Vec::new();
        for code in 0..3usize.pow(d as u32) {
            let mut c = code;
            let off: Vec<isize> = (0..d)
                .map(|_| {
                    let v = (c % 3) as isize - 1;
                    c /= 3;
                    v
                })
                .collect();
            if off.iter().find(|&&v| v != 0) == Some(&1) {
                offsets.push(off);
            }
        }
        let mut pairs = Vec::new();
        let mut digits = vec![0isize; d];
        for idx in 0..self.points.len() {
            let mut rest = idx as isize;
            for k in (0..d).rev() {
                digits[k] = rest % n;
                rest /= n;
            }
            'off: for off in &offsets {
                let mut j = 0isize;
                for k in 0..d {
                    let v = digits[k] + off[k];
                    if v < 0 || v >= n {
                        continue 'off;
                    }
                    j = j * n + v;
                }
                pairs.push((idx, j as usize));
            }
        }
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(per_axis: usize, stride: usize) -> Grid {
        Grid::new(
            &Domain {
                lower: vec![0.0, 0.0],
                upper: vec![10.0, 10.0],
            },
            &GridConfig {
                per_axis,
                agg_stride: stride,
            },
        )
        .unwrap()
    }

    #[test]
    fn four_robot_grid_sizes() {
        let g = square(40, 2);
        assert_eq!(g.len(), 1600);
        assert_eq!(g.agg_index().len(), 400);
        assert_eq!(g.points()[0], vec![0.0, 0.0]);
        assert_eq!(g.points()[1599], vec![10.0, 10.0]);
        assert_eq!(g.points()[1], vec![0.0, 10.0 / 39.0]);
        assert!(g.agg_index().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn king_move_pairs() {
        let g = square(3, 1);
        let pairs = g.neighbor_pairs();
        // 12 axis pairs and 8 diagonal pairs on a 3x3 grid
        assert_eq!(pairs.len(), 20);
        assert!(pairs.contains(&(0, 4)));
        assert!(pairs.contains(&(2, 4)) || pairs.contains(&(4, 2)));
    }
}
