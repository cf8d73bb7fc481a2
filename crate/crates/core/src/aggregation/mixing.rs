use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::treeopt::RoutingTree;

/// Stacked-history mixing matrices of RelaySum on a fixed tree.
///
/// Rows and columns are indexed `N·τ + i` for delay block `τ ∈ 0..=τ_max` and node `i`.
/// Block 0 of row `i` holds `1/N` at column `N·τ_ij + j`; block `τ ≥ 1` shifts
/// history down by one (`1` at `N·(τ−1) + i`).
#[derive(Debug, Clone)]
pub struct MixingMatrices {
    pub nodes: usize,
    pub tau_max: usize,
    pub model: DMatrix<f64>,
    pub gradient: DMatrix<f64>,
    /// Left eigenvector for eigenvalue 1, normalized to sum 1.
    pub pi: Vec<f64>,
    pub lambda2_abs: f64,
    /// `(1 − |λ₂|)/2`.
    pub q: f64,
    /// Smallest `m` with `‖Wᵐ − 1πᵀ‖₂ ≤ (1 − q)ᵐ`, if found within the search cap.
    pub m: Option<usize>,
    /// Effective spectral gap `q/m`.
    pub rho: Option<f64>,
}

const M_SEARCH_CAP: usize = 4096;

pub fn build_mixing_matrices(tree: &RoutingTree) -> Result<MixingMatrices> {
    let n = tree.vertices();
    let tau = tree.hop_delays();
    let tau_max = tree.tau_max();
    let size = n * (tau_max + 1);
    let inv_n = 1.0 / n as f64;

    let mut model = DMatrix::<f64>::zeros(size, size);
    let mut gradient = DMatrix::<f64>::zeros(size, size);
    for i in 0..n {
        for j in 0..n {
            model[(i, n * tau[i][j] + j)] = inv_n;
            gradient[(i, n * tau[i][j] + j)] = inv_n;
        }
    }
    for block in 1..=tau_max {
        for i in 0..n {
            model[(n * block + i, n * (block - 1) + i)] = 1.0;
        }
    }

    let pi = stationary(&model)?;
    let lambda2_abs = second_eigenvalue_modulus(&model)?;
    let q = 0.5 * (1.0 - lambda2_abs);
    let m = contraction_steps(&model, &pi, q);
    Ok(MixingMatrices {
        nodes: n,
        tau_max,
        model,
        gradient,
        pi,
        lambda2_abs,
        q,
        m,
        rho: m.map(|m| q / m as f64),
    })
}

impl MixingMatrices {
    pub fn size(&self) -> usize {
        self.model.nrows()
    }

    /// Every row is either `N` entries equal to `1/N` or a single `1`, with
    /// nothing else nonzero, so the rational row sum is exactly one.
    pub fn rows_exactly_stochastic(&self) -> bool {
        let inv_n = 1.0 / self.nodes as f64;
        self.model.row_iter().all(|row| {
            let nonzero: Vec<f64> = row.iter().copied().filter(|&x| x != 0.0).collect();
            (nonzero.len() == self.nodes && nonzero.iter().all(|&x| x == inv_n))
                || (nonzero.len() == 1 && nonzero[0] == 1.0)
        })
    }

    /// `max |πᵀW − πᵀ|`.
    pub fn stationarity_residual(&self) -> f64 {
        let pi = DMatrix::from_row_slice(1, self.size(), &self.pi);
        let diff = &pi * &self.model - &pi;
        diff.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Spread (max − min) of the block-0 entries of `π`.
    pub fn pi0_spread(&self) -> f64 {
        let block = &self.pi[..self.nodes];
        let max = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = block.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn pi0(&self) -> f64 {
        self.pi[0]
    }
}

fn stationary(w: &DMatrix<f64>) -> Result<Vec<f64>> {
    let size = w.nrows();
    // (Wᵀ − I)π = 0 has rank size−1; swap the last equation for Σπ = 1.
    let mut a = w.transpose() - DMatrix::<f64>::identity(size, size);
    for c in 0..size {
        a[(size - 1, c)] = 1.0;
    }
    let mut rhs = DMatrix::<f64>::zeros(size, 1);
    rhs[(size - 1, 0)] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numeric("stationary distribution solve failed".into()))?;
    Ok(sol.iter().copied().collect())
}

fn second_eigenvalue_modulus(w: &DMatrix<f64>) -> Result<f64> {
    if w.nrows() == 1 {
        return Ok(0.0);
    }
    let eig = w
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::Numeric("Schur decomposition did not converge".into()))?
        .complex_eigenvalues();
    let mut moduli: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    if (moduli[0] - 1.0).abs() > 1e-8 {
        return Err(Error::Numeric(format!(
            "leading eigenvalue modulus {} is not 1",
            moduli[0]
        )));
    }
    Ok(moduli[1])
}

fn contraction_steps(w: &DMatrix<f64>, pi: &[f64], q: f64) -> Option<usize> {
    let size = w.nrows();
    let ones_pi = DMatrix::from_fn(size, size, |_, c| pi[c]);
    let mut power = w.clone();
    let mut bound = 1.0 - q;
    for m in 1..=M_SEARCH_CAP {
        let gap = (&power - &ones_pi).singular_values().max();
        if gap <= bound {
            return Some(m);
        }
        power = &power * w;
        bound *= 1.0 - q;
    }
    None
}
