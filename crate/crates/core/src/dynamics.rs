//! Sequential-consumer market simulator and the mean-field flow.
//!
//! Each consumer sees the cumulative purchase counts `d`, picks a slot with
//! probability `π_i ∝ d_i^r · exp(g_i − β_i p_i)` (no-purchase: `d_{n+1}^r`),
//! and the chosen count is incremented. Counts start at one per slot, so after
//! `k` consumers `Σ d = (n+1) + k` and the implicit step size is
//! `1/((n+1) + k + 1)`.

use std::io::Write;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::format::{join_row, render};
use crate::model::{choice_probabilities, equilibrium_shares, MarketParams, Prices, Shares};
use crate::numerics::softmax_in_place;
use crate::scalar::Scalar;

/// How a consumer's choice is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// One uniform variate against the cumulative choice probabilities.
    #[default]
    Categorical,
    /// Explicit Gumbel noise on every slot, then argmax.
    Gumbel,
}

/// Purchase counts plus the generator driving the consumer stream.
///
/// The generator is ChaCha8 seeded from a `u64`; its output stream is fixed,
/// so the same seed always replays the same consumers.
#[derive(Debug, Clone)]
pub struct SimulationState {
    counts: Vec<u64>,
    consumers: u64,
    initial_total: u64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl SimulationState {
    /// Fresh state with every count (including no-purchase) at one.
    pub fn new(n_products: usize, seed: u64) -> Self {
        let counts = vec![1; n_products + 1];
        Self::build(counts, seed)
    }

    /// State with arbitrary initial counts, each at least one.
    pub fn with_initial_counts(counts: Vec<u64>, seed: u64) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::invalid("counts", "need at least one product plus no-purchase"));
        }
        if counts.iter().any(|&d| d < 1) {
            return Err(Error::invalid("counts", "every initial count must be >= 1"));
        }
        Ok(Self::build(counts, seed))
    }

    fn build(counts: Vec<u64>, seed: u64) -> Self {
        let initial_total = counts.iter().sum();
        Self {
            counts,
            consumers: 0,
            initial_total,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of consumers processed so far.
    pub fn consumers(&self) -> u64 {
        self.consumers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_products(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn total(&self) -> u64 {
        self.initial_total + self.consumers
    }

    /// Current market shares `φ^k = d / Σd`.
    pub fn shares<T: Scalar>(&self) -> Shares<T> {
        let total = T::from_u64(self.total()).expect("count fits scalar");
        Shares::from_raw(
            self.counts
                .iter()
                .map(|&d| T::from_u64(d).expect("count fits scalar") / total)
                .collect(),
        )
    }

    /// Choice probabilities `π^k` for the next consumer.
    pub fn choice_probabilities<T: Scalar>(
        &self,
        params: &MarketParams<T>,
        prices: &Prices<T>,
    ) -> Result<Shares<T>> {
        self.check(params)?;
        choice_probabilities(params, prices, &self.shares())
    }

    /// Draws the next consumer's choice from `π^k` and records it.
    pub fn step<T: Scalar>(&mut self, params: &MarketParams<T>, prices: &Prices<T>) -> Result<usize> {
        self.step_with(params, prices, SamplingMode::Categorical)
    }

    pub fn step_with<T: Scalar>(
        &mut self,
        params: &MarketParams<T>,
        prices: &Prices<T>,
        mode: SamplingMode,
    ) -> Result<usize> {
        self.check(params)?;
        let mut kernel = Kernel::new(params, prices)?;
        let i = kernel.draw(self, mode);
        self.record(i);
        Ok(i)
    }

    fn record(&mut self, i: usize) {
        self.counts[i] += 1;
        self.consumers += 1;
    }

    fn check<T: Scalar>(&self, params: &MarketParams<T>) -> Result<()> {
        if self.counts.len() != params.n() + 1 {
            return Err(Error::DimensionMismatch {
                name: "simulation counts",
                expected: params.n() + 1,
                actual: self.counts.len(),
            });
        }
        Ok(())
    }
}

/// Samples a choice by adding i.i.d. standard Gumbel noise to each slot's
/// deterministic utility `g_i + r ln d_i − β_i p_i` and taking the argmax
/// (lowest index on ties). The state's counts are left untouched.
pub fn gumbel_choice<T: Scalar>(
    state: &mut SimulationState,
    params: &MarketParams<T>,
    prices: &Prices<T>,
) -> Result<usize> {
    state.check(params)?;
    let mut kernel = Kernel::new(params, prices)?;
    Ok(kernel.draw(state, SamplingMode::Gumbel))
}

// Per-run precomputation: base utilities and a scratch buffer.
struct Kernel<T> {
    base: Vec<T>,
    r: T,
    buf: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    fn new(params: &MarketParams<T>, prices: &Prices<T>) -> Result<Self> {
        params.check_prices(prices)?;
        let mut base: Vec<T> = params
            .g()
            .iter()
            .zip(params.beta())
            .zip(prices.as_slice())
            .map(|((&g, &b), &p)| g - b * p)
            .collect();
        base.push(T::zero());
        let buf = vec![T::zero(); base.len()];
        Ok(Self {
            base,
            r: params.r(),
            buf,
        })
    }

    fn scores(&mut self, counts: &[u64]) {
        for ((s, &b), &d) in self.buf.iter_mut().zip(&self.base).zip(counts) {
            *s = self.r * T::from_u64(d).expect("count fits scalar").ln() + b;
        }
    }

    fn draw(&mut self, state: &mut SimulationState, mode: SamplingMode) -> usize {
        self.scores(&state.counts);
        match mode {
            SamplingMode::Categorical => {
                softmax_in_place(&mut self.buf);
                let u = T::lit(state.rng.random::<f64>());
                let mut acc = T::zero();
                let mut last_positive = 0;
                for (i, &p) in self.buf.iter().enumerate() {
                    if p > T::zero() {
                        last_positive = i;
                    }
                    acc += p;
                    if u < acc {
                        return i;
                    }
                }
                last_positive
            }
            SamplingMode::Gumbel => {
                let mut best = 0;
                let mut best_score = T::neg_infinity();
                for i in 0..self.buf.len() {
                    let u: f64 = state.rng.sample(Open01);
                    let xi = T::lit(-(-u.ln()).ln());
                    let s = self.buf[i] + xi;
                    if s > best_score {
                        best_score = s;
                        best = i;
                    }
                }
                best
            }
        }
    }
}

/// Options for [`run_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub consumers: u64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub mode: SamplingMode,
    /// Starting counts; defaults to one per slot.
    pub initial_counts: Option<Vec<u64>>,
}

impl RunOptions {
    pub fn new(consumers: u64, seed: u64, checkpoint_every: u64) -> Self {
        Self {
            consumers,
            seed,
            checkpoint_every,
            mode: SamplingMode::Categorical,
            initial_counts: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub k: u64,
    pub shares: Shares<T>,
    pub l1_to_equilibrium: T,
}

#[derive(Debug, Clone)]
pub struct SimulationTrace<T> {
    pub checkpoints: Vec<Checkpoint<T>>,
    pub equilibrium: Shares<T>,
    pub final_state: SimulationState,
}

impl<T: Scalar> SimulationTrace<T> {
    pub fn final_shares(&self) -> Shares<T> {
        self.final_state.shares()
    }

    pub fn final_l1(&self) -> T {
        self.final_shares().l1_distance(&self.equilibrium)
    }
}

/// Simulates `consumers` arrivals from a fresh state, checkpointing every
/// `checkpoint_every` consumers and at the final one.
pub fn run<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
    consumers: u64,
    seed: u64,
    checkpoint_every: u64,
) -> Result<SimulationTrace<T>> {
    run_with(params, prices, &RunOptions::new(consumers, seed, checkpoint_every))
}

pub fn run_with<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
    opts: &RunOptions,
) -> Result<SimulationTrace<T>> {
    if opts.consumers < 1 {
        return Err(Error::invalid("consumers", "must be at least 1"));
    }
    if opts.checkpoint_every < 1 {
        return Err(Error::invalid("checkpoint_every", "must be at least 1"));
    }
    let mut state = match &opts.initial_counts {
        Some(c) => SimulationState::with_initial_counts(c.clone(), opts.seed)?,
        None => SimulationState::new(params.n(), opts.seed),
    };
    state.check(params)?;
    let equilibrium = equilibrium_shares(params, prices)?;
    let mut kernel = Kernel::new(params, prices)?;
    let mut checkpoints = Vec::new();
    for k in 1..=opts.consumers {
        let i = kernel.draw(&mut state, opts.mode);
        state.record(i);
        if k % opts.checkpoint_every == 0 || k == opts.consumers {
            let shares: Shares<T> = state.shares();
            let l1 = shares.l1_distance(&equilibrium);
            checkpoints.push(Checkpoint {
                k,
                shares,
                l1_to_equilibrium: l1,
            });
        }
    }
    Ok(SimulationTrace {
        checkpoints,
        equilibrium,
        final_state: state,
    })
}

/// Explicit Euler on `φ' = π(φ) − φ`, renormalized onto the simplex after
/// each step.
pub fn integrate_mean_field<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
    phi0: &Shares<T>,
    step_size: T,
    steps: usize,
) -> Result<Shares<T>> {
    params.check_shares(phi0)?;
    if phi0.as_slice().iter().any(|&v| v <= T::zero()) {
        return Err(Error::invalid(
            "phi0",
            "initial shares must be strictly inside the simplex",
        ));
    }
    if !(step_size > T::zero() && step_size <= T::one()) {
        return Err(Error::invalid("step_size", "must lie in (0, 1]"));
    }
    let mut phi = phi0.clone();
    for _ in 0..steps {
        let pi = choice_probabilities(params, prices, &phi)?;
        let mut next: Vec<T> = phi
            .as_slice()
            .iter()
            .zip(pi.as_slice())
            .map(|(&f, &p)| f + step_size * (p - f))
            .collect();
        let total: T = next.iter().copied().sum();
        for v in next.iter_mut() {
            *v /= total;
        }
        phi = Shares::from_raw(next);
    }
    Ok(phi)
}

/// Writes `k,phi_1,...,phi_n,phi_nopurchase,l1_to_eq`, one row per checkpoint.
pub fn write_trace_csv<T: Scalar, W: Write>(
    trace: &SimulationTrace<T>,
    mut out: W,
    digits: usize,
) -> Result<()> {
    let n = trace.equilibrium.len() - 1;
    let mut header: Vec<String> = vec!["k".into()];
    header.extend((1..=n).map(|i| format!("phi_{i}")));
    header.push("phi_nopurchase".into());
    header.push("l1_to_eq".into());
    writeln!(out, "{}", header.join(","))?;
    for cp in &trace.checkpoints {
        let cells = std::iter::once(cp.k.to_string())
            .chain(cp.shares.as_slice().iter().map(|&v| render(v, digits)))
            .chain(std::iter::once(render(cp.l1_to_equilibrium, digits)));
        writeln!(out, "{}", join_row(cells))?;
    }
    Ok(())
}
