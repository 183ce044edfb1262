//! Finite-difference weights on arbitrary node sets, plus the
//! five-point derivative stencils used for curvature and Hessians.
//!
//! Near the origin the stencil reaches into ghost nodes `x_{-k} = -x_k`;
//! the caller supplies the parity of the sampled function so ghost
//! values are `±f_k`.

/// Fornberg's recursion: weights `w[m][j]` such that
/// `f^{(m)}(z) ≈ Σ_j w[m][j] f(x_j)` for `m = 0..=max_order`.
pub fn fornberg_weights(z: f64, x: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Parity of a radial function under `x ↦ -x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

const WIDTH: usize = 5;

/// Precomputed first/second derivative stencils for every node of a grid.
#[derive(Debug, Clone)]
pub struct Stencils {
    /// Signed node offsets; negative entries are parity ghosts of `|idx|`.
    idx: Vec<[isize; WIDTH]>,
    d1: Vec<[f64; WIDTH]>,
    d2: Vec<[f64; WIDTH]>,
}

impl Stencils {
    pub fn new(grid: &[f64]) -> Self {
        let n = grid.len();
        assert!(n >= WIDTH, "grid needs at least {WIDTH} nodes");
        let last = (n - 1) as isize;
        let mut idx = Vec::with_capacity(n);
        let mut d1 = Vec::with_capacity(n);
        let mut d2 = Vec::with_capacity(n);
        for i in 0..n as isize {
            let start = (i - 2).min(last - 4);
            let nodes: [isize; WIDTH] = std::array::from_fn(|k| start + k as isize);
            let xs: Vec<f64> = nodes
                .iter()
                .map(|&j| if j < 0 { -grid[(-j) as usize] } else { grid[j as usize] })
                .collect();
            let w = fornberg_weights(grid[i as usize], &xs, 2);
            idx.push(nodes);
            d1.push(std::array::from_fn(|k| w[1][k]));
            d2.push(std::array::from_fn(|k| w[2][k]));
        }
        Self { idx, d1, d2 }
    }

    #[inline]
    fn sample(f: &[f64], j: isize, parity: Parity) -> f64 {
        if j >= 0 {
            f[j as usize]
        } else {
            match parity {
                Parity::Even => f[(-j) as usize],
                Parity::Odd => -f[(-j) as usize],
            }
        }
    }

    /// First derivative in the grid coordinate at every node.
    pub fn d1(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        self.apply(&self.d1, f, parity)
    }

    /// Second derivative in the grid coordinate at every node.
    pub fn d2(&self, f: &[f64], parity: Parity) -> Vec<f64> {
        self.apply(&self.d2, f, parity)
    }

    fn apply(&self, w: &[[f64; WIDTH]], f: &[f64], parity: Parity) -> Vec<f64> {
        self.idx
            .iter()
            .zip(w)
            .map(|(nodes, ws)| {
                nodes
                    .iter()
                    .zip(ws)
                    .map(|(&j, &wk)| wk * Self::sample(f, j, parity))
                    .sum()
            })
            .collect()
    }
}
