//! Finite-state continuous-time Markov chain driving the saturation mode.
//!
//! A chain is described by its off-diagonal transition rates `λ_ij` (per unit
//! time). The exit rate of mode `i` is `ν_i = Σ_j λ_ij` and the generator is
//! the matrix with off-diagonal `λ_ij` and diagonal `-ν_i`.
//!
//! Ergodicity is checked as irreducibility of the directed graph of strictly
//! positive rates, which is equivalent for finite chains.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("rate matrix is empty")]
    Empty,
    #[error("rate matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("rate from mode {} to mode {} is not finite", .from + 1, .to + 1)]
    NonFinite { from: usize, to: usize },
    #[error("negative rate {rate} from mode {} to mode {}", .from + 1, .to + 1)]
    NegativeRate { from: usize, to: usize, rate: f64 },
    #[error("self-transition rate {rate} on mode {}", .mode + 1)]
    SelfLoop { mode: usize, rate: f64 },
    #[error("chain is not irreducible: mode {} cannot reach mode {}", .from + 1, .to + 1)]
    NotIrreducible { from: usize, to: usize },
    #[error("steady-state linear system is singular")]
    SingularSystem,
}

/// Validated mode process. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeChain {
    rates: DMatrix<f64>,
    nu: Vec<f64>,
}

impl ModeChain {
    /// Validates a square rate matrix (`validate_chain`).
    pub fn new(rates: DMatrix<f64>) -> Result<Self, ChainError> {
        let (rows, cols) = rates.shape();
        if rows == 0 || cols == 0 {
            return Err(ChainError::Empty);
        }
        if rows != cols {
            return Err(ChainError::NotSquare { rows, cols });
        }
        let m = rows;
        for i in 0..m {
            for j in 0..m {
                let r = rates[(i, j)];
                if !r.is_finite() {
                    return Err(ChainError::NonFinite { from: i, to: j });
                }
                if r < 0.0 {
                    return Err(ChainError::NegativeRate { from: i, to: j, rate: r });
                }
            }
        }
        for i in 0..m {
            let r = rates[(i, i)];
            if r > 0.0 {
                return Err(ChainError::SelfLoop { mode: i, rate: r });
            }
        }
        check_irreducible(&rates)?;
        let nu = (0..m).map(|i| rates.row(i).sum()).collect();
        Ok(Self { rates, nu })
    }

    /// Builds a chain from row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ChainError> {
        if rows.is_empty() {
            return Err(ChainError::Empty);
        }
        let m = rows.len();
        for row in rows {
            if row.len() != m {
                return Err(ChainError::NotSquare { rows: m, cols: row.len() });
            }
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    /// Chain in which every ordered pair of distinct modes has rate `rate`.
    pub fn symmetric(m: usize, rate: f64) -> Result<Self, ChainError> {
        Self::new(DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { rate }))
    }

    pub fn m(&self) -> usize {
        self.nu.len()
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(from, to)]
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    /// Exit rate `ν_i`.
    pub fn exit_rate(&self, mode: usize) -> f64 {
        self.nu[mode]
    }

    pub fn exit_rates(&self) -> &[f64] {
        &self.nu
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m())
            .map(|i| self.rates.row(i).iter().copied().collect())
            .collect()
    }

    /// Generator matrix `Λ`.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut g = self.rates.clone();
        for i in 0..self.m() {
            g[(i, i)] = -self.nu[i];
        }
        g
    }

    /// Unique stationary distribution `p` with `pΛ = 0`, `|p|₁ = 1`.
    ///
    /// Solved densely: the last balance equation is replaced by the
    /// normalization row.
    pub fn steady_state(&self) -> Result<SteadyState, ChainError> {
        let m = self.m();
        let mut sys = self.generator().transpose();
        for j in 0..m {
            sys[(m - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(m);
        rhs[m - 1] = 1.0;
        let p = sys.lu().solve(&rhs).ok_or(ChainError::SingularSystem)?;
        if p.iter().any(|x| !x.is_finite() || *x < -1e-12) {
            return Err(ChainError::SingularSystem);
        }
        let mut p: Vec<f64> = p.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        Ok(SteadyState { p })
    }

    /// Exponential holding time in `mode`, drawn by inverse CDF.
    pub fn sample_holding_time<R: Rng + ?Sized>(&self, mode: usize, rng: &mut R) -> f64 {
        holding_time_from_uniform(self.nu[mode], rng.gen::<f64>())
    }

    /// Next mode after leaving `mode`, chosen with probability `λ_ij / ν_i`.
    pub fn sample_next_mode<R: Rng + ?Sized>(&self, mode: usize, rng: &mut R) -> usize {
        let target = rng.gen::<f64>() * self.nu[mode];
        let mut acc = 0.0;
        let mut last = mode;
        for j in 0..self.m() {
            let r = self.rates[(mode, j)];
            if r <= 0.0 {
                continue;
            }
            acc += r;
            last = j;
            if target < acc {
                return j;
            }
        }
        last
    }

    /// Simulates the mode process on `[0, horizon]` starting from `initial`.
    /// The final sojourn is truncated at the horizon.
    pub fn simulate_path<R: Rng + ?Sized>(
        &self,
        initial: usize,
        horizon: f64,
        rng: &mut R,
    ) -> ModePath {
        let horizon = horizon.max(0.0);
        let mut epochs = vec![0.0];
        let mut modes = vec![initial];
        let mut t = 0.0;
        let mut mode = initial;
        loop {
            let s = self.sample_holding_time(mode, rng);
            if t + s >= horizon {
                break;
            }
            t += s;
            mode = self.sample_next_mode(mode, rng);
            epochs.push(t);
            modes.push(mode);
        }
        ModePath {
            epochs,
            modes,
            horizon,
            mode_count: self.m(),
        }
    }
}

/// Inverse CDF of the exponential law with rate `rate` at uniform draw `u ∈ [0, 1)`.
/// A zero rate (single-mode chain) never leaves.
pub fn holding_time_from_uniform(rate: f64, u: f64) -> f64 {
    if rate <= 0.0 {
        return f64::INFINITY;
    }
    -(-u).ln_1p() / rate
}

fn check_irreducible(rates: &DMatrix<f64>) -> Result<(), ChainError> {
    let m = rates.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..m {
                let r = if forward { rates[(i, j)] } else { rates[(j, i)] };
                if r > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    if let Some(j) = reach(true).iter().position(|s| !s) {
        return Err(ChainError::NotIrreducible { from: 0, to: j });
    }
    if let Some(j) = reach(false).iter().position(|s| !s) {
        return Err(ChainError::NotIrreducible { from: j, to: 0 });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    p: Vec<f64>,
}

impl SteadyState {
    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, mode: usize) -> f64 {
        self.p[mode]
    }

    /// `Σ_i p_i x_i`.
    pub fn expectation(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        self.p.iter().zip(values).map(|(p, x)| p * x).sum()
    }
}

/// A realized mode path: `modes[z]` is occupied on `[epochs[z], epochs[z+1])`,
/// the last one until `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePath {
    pub epochs: Vec<f64>,
    pub modes: Vec<usize>,
    pub horizon: f64,
    pub mode_count: usize,
}

impl ModePath {
    /// Time spent in each mode, `M_i(horizon)`.
    pub fn occupancy_times(&self) -> Vec<f64> {
        let mut times = vec![0.0; self.mode_count];
        for (z, &mode) in self.modes.iter().enumerate() {
            let end = self.epochs.get(z + 1).copied().unwrap_or(self.horizon);
            times[mode] += end - self.epochs[z];
        }
        times
    }

    /// `M_i(horizon) / horizon`. A zero-length path is attributed entirely
    /// to its initial mode.
    pub fn occupancy_fractions(&self) -> Vec<f64> {
        if self.horizon <= 0.0 {
            let mut f = vec![0.0; self.mode_count];
            f[self.modes[0]] = 1.0;
            return f;
        }
        self.occupancy_times()
            .into_iter()
            .map(|t| t / self.horizon)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rows(r: &[&[f64]]) -> Vec<Vec<f64>> {
        r.iter().map(|x| x.to_vec()).collect()
    }

    #[test]
    fn validates_symmetric_chains() {
        let two = ModeChain::from_rows(&rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(two.exit_rates(), &[1.0, 1.0]);
        let three = ModeChain::symmetric(3, 1.0).unwrap();
        assert_eq!(three.exit_rates(), &[2.0, 2.0, 2.0]);
        let g = three.generator();
        for i in 0..3 {
            assert!(g.row(i).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_chains() {
        assert!(matches!(
            ModeChain::from_rows(&rows(&[&[0.0, 1.0], &[0.0, 0.0]])),
            Err(ChainError::NotIrreducible { .. })
        ));
        assert!(matches!(
            ModeChain::from_rows(&rows(&[&[0.0, -1.0], &[1.0, 0.0]])),
            Err(ChainError::NegativeRate { from: 0, to: 1, .. })
        ));
        assert!(matches!(
            ModeChain::from_rows(&rows(&[&[0.5, 1.0], &[1.0, 0.0]])),
            Err(ChainError::SelfLoop { mode: 0, .. })
        ));
        assert!(matches!(
            ModeChain::from_rows(&rows(&[&[0.0, 1.0]])),
            Err(ChainError::NotSquare { .. })
        ));
    }

    #[test]
    fn steady_state_examples() {
        let p = ModeChain::symmetric(2, 1.0).unwrap().steady_state().unwrap();
        assert!((p.get(0) - 0.5).abs() < 1e-12 && (p.get(1) - 0.5).abs() < 1e-12);
        let p = ModeChain::symmetric(3, 1.0).unwrap().steady_state().unwrap();
        for i in 0..3 {
            assert!((p.get(i) - 1.0 / 3.0).abs() < 1e-12);
        }
        // balance p1 * 2 = p2 * 1
        let p = ModeChain::from_rows(&rows(&[&[0.0, 2.0], &[1.0, 0.0]]))
            .unwrap()
            .steady_state()
            .unwrap();
        assert!((p.get(0) - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.get(1) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_chain_never_switches() {
        let chain = ModeChain::from_rows(&rows(&[&[0.0]])).unwrap();
        assert_eq!(chain.steady_state().unwrap().probabilities(), &[1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let path = chain.simulate_path(0, 50.0, &mut rng);
        assert_eq!(path.modes, vec![0]);
        assert_eq!(path.occupancy_fractions(), vec![1.0]);
    }

    #[test]
    fn inverse_cdf_holding_time() {
        let u = 1.0 - (-1.0f64).exp();
        assert!((holding_time_from_uniform(1.0, u) - 1.0).abs() < 1e-12);
        assert!((holding_time_from_uniform(2.0, u) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn holding_time_mean_is_inverse_rate() {
        let chain = ModeChain::symmetric(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mean = (0..n).map(|_| chain.sample_holding_time(0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn zero_horizon_path_is_initial_mode_only() {
        let chain = ModeChain::symmetric(3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let path = chain.simulate_path(2, 0.0, &mut rng);
        assert_eq!(path.modes, vec![2]);
        assert_eq!(path.epochs, vec![0.0]);
        assert_eq!(path.occupancy_fractions(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn two_mode_path_alternates() {
        let chain = ModeChain::symmetric(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let path = chain.simulate_path(0, 500.0, &mut rng);
        assert!(path.modes.len() > 100);
        for w in path.modes.windows(2) {
            assert_ne!(w[0], w[1]);
        }
        for w in path.epochs.windows(2) {
            assert!(w[0] < w[1]);
        }
        assert!(*path.epochs.last().unwrap() <= path.horizon);
    }

    #[test]
    fn occupancy_of_hand_built_path() {
        let path = ModePath {
            epochs: vec![0.0, 1.0],
            modes: vec![0, 1],
            horizon: 2.0,
            mode_count: 2,
        };
        assert_eq!(path.occupancy_fractions(), vec![0.5, 0.5]);
        let single = ModePath {
            epochs: vec![0.0],
            modes: vec![0],
            horizon: 3.0,
            mode_count: 3,
        };
        assert_eq!(single.occupancy_fractions(), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn occupancy_converges_to_steady_state() {
        let chain = ModeChain::symmetric(3, 1.0).unwrap();
        let p = chain.steady_state().unwrap();
        let mut within = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let path = chain.simulate_path(0, 1e4, &mut rng);
            let occ = path.occupancy_fractions();
            assert!((occ.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let dev = occ
                .iter()
                .zip(p.probabilities())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dev <= 0.02 {
                within += 1;
            }
        }
        assert!(within >= 95, "{within} of 100 seeds within 0.02");
    }

    #[test]
    fn identical_seeds_identical_paths() {
        let chain = ModeChain::symmetric(3, 1.0).unwrap();
        let a = chain.simulate_path(1, 100.0, &mut ChaCha8Rng::seed_from_u64(5));
        let b = chain.simulate_path(1, 100.0, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
