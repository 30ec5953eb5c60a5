//! Market parameters, choice probabilities and long-run market shares.
//!
//! The no-purchase option is never stored in a parameter or price vector. It
//! appears only as the trailing slot of a [`Shares`] vector, with intrinsic
//! utility and price both zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{lse, softmax_in_place};
use crate::scalar::Scalar;

/// Intrinsic utilities `g`, price sensitivities `beta` and network strength
/// `r` of an `n`-product market.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams<T> {
    g: Vec<T>,
    beta: Vec<T>,
    r: T,
}

impl<T: Scalar> MarketParams<T> {
    pub fn new(g: Vec<T>, beta: Vec<T>, r: T) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::invalid("g", "at least one product is required"));
        }
        if beta.len() != g.len() {
            return Err(Error::DimensionMismatch {
                name: "beta",
                expected: g.len(),
                actual: beta.len(),
            });
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("g[{i}]"), "must be finite"));
        }
        if let Some(i) = beta.iter().position(|b| !(b.is_finite() && *b > T::zero())) {
            return Err(Error::invalid(
                format!("beta[{i}]"),
                format!("must be finite and > 0, got {}", beta[i]),
            ));
        }
        check_r(r)?;
        Ok(Self { g, beta, r })
    }

    pub fn with_uniform_beta(g: Vec<T>, beta: T, r: T) -> Result<Self> {
        let n = g.len();
        Self::new(g, vec![beta; n], r)
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn g(&self) -> &[T] {
        &self.g
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn r(&self) -> T {
        self.r
    }

    /// Same market with a different network strength.
    pub fn with_r(&self, r: T) -> Result<Self> {
        check_r(r)?;
        Ok(Self {
            r,
            ..self.clone()
        })
    }

    pub fn with_g(&self, g: Vec<T>) -> Result<Self> {
        Self::new(g, self.beta.clone(), self.r)
    }

    /// The common sensitivity if every product shares it exactly.
    pub fn uniform_beta(&self) -> Option<T> {
        let b0 = self.beta[0];
        self.beta.iter().all(|&b| b == b0).then_some(b0)
    }

    pub fn uniform_g(&self) -> Option<T> {
        let g0 = self.g[0];
        self.g.iter().all(|&g| g == g0).then_some(g0)
    }

    /// `1 − r`.
    pub fn damping(&self) -> T {
        T::one() - self.r
    }

    /// `ln c_i = g_i / (1 − r)`.
    pub fn log_c(&self) -> Vec<T> {
        let d = self.damping();
        self.g.iter().map(|&g| g / d).collect()
    }

    /// `(g_i − β_i p_i)/(1 − r)` for each product.
    pub fn log_attraction(&self, prices: &Prices<T>) -> Result<Vec<T>> {
        self.check_prices(prices)?;
        let d = self.damping();
        Ok(self
            .g
            .iter()
            .zip(&self.beta)
            .zip(prices.as_slice())
            .map(|((&g, &b), &p)| (g - b * p) / d)
            .collect())
    }

    pub(crate) fn check_prices(&self, prices: &Prices<T>) -> Result<()> {
        if prices.len() != self.n() {
            return Err(Error::DimensionMismatch {
                name: "prices",
                expected: self.n(),
                actual: prices.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_shares(&self, shares: &Shares<T>) -> Result<()> {
        if shares.len() != self.n() + 1 {
            return Err(Error::DimensionMismatch {
                name: "shares",
                expected: self.n() + 1,
                actual: shares.len(),
            });
        }
        Ok(())
    }

    pub fn to_document(&self) -> MarketDocument {
        MarketDocument {
            g: self.g.iter().map(|v| v.as_f64()).collect(),
            beta: BetaSpec::PerProduct(self.beta.iter().map(|v| v.as_f64()).collect()),
            r: self.r.as_f64(),
        }
    }

    pub fn from_document(doc: &MarketDocument) -> Result<Self> {
        let g: Vec<T> = doc.g.iter().map(|&v| T::lit(v)).collect();
        let beta = match &doc.beta {
            BetaSpec::Common(b) => vec![T::lit(*b); g.len()],
            BetaSpec::PerProduct(bs) => bs.iter().map(|&v| T::lit(v)).collect(),
        };
        Self::new(g, beta, T::lit(doc.r))
    }

    /// Parses `{"g": [...], "beta": [...] | number, "r": number}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MarketDocument = serde_json::from_str(text)
            .map_err(|e| Error::invalid("market document", e.to_string()))?;
        Self::from_document(&doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_document()).expect("market document serializes")
    }
}

fn check_r<T: Scalar>(r: T) -> Result<()> {
    if !(r > T::zero() && r < T::one()) {
        return Err(Error::invalid(
            "r",
            format!("network strength must lie in the open interval (0, 1), got {r}"),
        ));
    }
    Ok(())
}

/// Serialized form of [`MarketParams`]. A scalar `beta` applies to every
/// product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketDocument {
    pub g: Vec<f64>,
    pub beta: BetaSpec,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BetaSpec {
    Common(f64),
    PerProduct(Vec<f64>),
}

/// Seller prices `p_1..p_n`. The no-purchase price is implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Prices<T>(Vec<T>);

impl<T: Scalar> Prices<T> {
    pub fn new(p: Vec<T>) -> Result<Self> {
        if let Some(i) = p.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::invalid(
                format!("prices[{i}]"),
                format!("must be finite and >= 0, got {}", p[i]),
            ));
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize, p: T) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    /// Copy with product `i` repriced.
    pub fn with_price(&self, i: usize, p: T) -> Result<Self> {
        let mut v = self.0.clone();
        v[i] = p;
        Self::new(v)
    }
}

/// Normalized prices `z_i = β_i p_i / (1 − r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPrices<T>(Vec<T>);

impl<T: Scalar> NormalizedPrices<T> {
    pub fn new(z: Vec<T>) -> Result<Self> {
        if let Some(i) = z.iter().position(|v| !(v.is_finite() && *v >= T::zero())) {
            return Err(Error::invalid(
                format!("z[{i}]"),
                format!("must be finite and >= 0, got {}", z[i]),
            ));
        }
        Ok(Self(z))
    }

    pub fn from_prices(params: &MarketParams<T>, prices: &Prices<T>) -> Result<Self> {
        params.check_prices(prices)?;
        let d = params.damping();
        Ok(Self(
            prices
                .as_slice()
                .iter()
                .zip(params.beta())
                .map(|(&p, &b)| b * p / d)
                .collect(),
        ))
    }

    pub fn to_prices(&self, params: &MarketParams<T>) -> Result<Prices<T>> {
        if self.len() != params.n() {
            return Err(Error::DimensionMismatch {
                name: "z",
                expected: params.n(),
                actual: self.len(),
            });
        }
        let d = params.damping();
        Prices::new(
            self.0
                .iter()
                .zip(params.beta())
                .map(|(&z, &b)| d * z / b)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A point on the (n+1)-simplex; the last slot is the no-purchase option.
#[derive(Debug, Clone, PartialEq)]
pub struct Shares<T>(Vec<T>);

impl<T: Scalar> Shares<T> {
    pub fn new(phi: Vec<T>) -> Result<Self> {
        if phi.len() < 2 {
            return Err(Error::invalid(
                "shares",
                "need at least one product plus the no-purchase slot",
            ));
        }
        if let Some(i) = phi
            .iter()
            .position(|v| !(v.is_finite() && *v >= T::zero() && *v <= T::one()))
        {
            return Err(Error::invalid(
                format!("shares[{i}]"),
                format!("must lie in [0, 1], got {}", phi[i]),
            ));
        }
        let total: T = phi.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(T::SIMPLEX_TOLERANCE) {
            return Err(Error::invalid(
                "shares",
                format!("must sum to 1, got {total}"),
            ));
        }
        Ok(Self(phi))
    }

    /// Uniform point over `n` products and the no-purchase option.
    pub fn uniform(n: usize) -> Self {
        let v = T::one() / T::from_usize(n + 1).expect("count fits scalar");
        Self(vec![v; n + 1])
    }

    pub(crate) fn from_raw(phi: Vec<T>) -> Self {
        Self(phi)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Total slot count, `n + 1`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn products(&self) -> &[T] {
        &self.0[..self.0.len() - 1]
    }

    pub fn no_purchase(&self) -> T {
        self.0[self.0.len() - 1]
    }

    pub fn get(&self, i: usize) -> T {
        self.0[i]
    }

    pub fn l1_distance(&self, other: &Shares<T>) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a - b).abs())
            .sum()
    }
}

/// Probability that the next consumer picks each slot given current shares.
///
/// `π_i ∝ φ_i^r · exp(g_i − β_i p_i)`, with the no-purchase slot weighted by
/// `φ_{n+1}^r`. A zero share gets probability zero.
pub fn choice_probabilities<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
    shares: &Shares<T>,
) -> Result<Shares<T>> {
    params.check_prices(prices)?;
    params.check_shares(shares)?;
    let r = params.r();
    let mut logw: Vec<T> = Vec::with_capacity(params.n() + 1);
    for i in 0..params.n() {
        let base = params.g()[i] - params.beta()[i] * prices.as_slice()[i];
        logw.push(r * shares.get(i).ln() + base);
    }
    logw.push(r * shares.no_purchase().ln());
    if logw.iter().any(|w| w.is_nan() || *w == T::infinity()) {
        return Err(Error::NonFinite("choice weights"));
    }
    if logw.iter().all(|w| *w == T::neg_infinity()) {
        return Err(Error::NonFinite("choice weights (all shares zero)"));
    }
    softmax_in_place(&mut logw);
    Ok(Shares(logw))
}

/// Long-run shares `φ*_i ∝ exp((g_i − β_i p_i)/(1 − r))`, with weight 1 on
/// the no-purchase option.
pub fn equilibrium_shares<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
) -> Result<Shares<T>> {
    let mut a = params.log_attraction(prices)?;
    a.push(T::zero());
    softmax_in_place(&mut a);
    Ok(Shares(a))
}

/// Expected revenue `w_i = p_i φ*_i` per seller and the total `R(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Revenues<T> {
    pub per_seller: Vec<T>,
    pub total: T,
}

pub fn seller_revenues<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
) -> Result<Revenues<T>> {
    let shares = equilibrium_shares(params, prices)?;
    let per_seller: Vec<T> = prices
        .as_slice()
        .iter()
        .zip(shares.products())
        .map(|(&p, &s)| p * s)
        .collect();
    let total = per_seller.iter().copied().sum();
    Ok(Revenues { per_seller, total })
}

/// `R(p) = Σ p_i φ*_i`.
pub fn total_revenue<T: Scalar>(params: &MarketParams<T>, prices: &Prices<T>) -> Result<T> {
    Ok(seller_revenues(params, prices)?.total)
}

/// Deterministic consumer utilities once purchase counts sit at their
/// long-run level after `horizon` consumers.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsumerUtilities<T> {
    /// `v_1..v_n` followed by the no-purchase utility.
    pub values: Vec<T>,
    /// Product with the largest utility among `1..n`; lowest index wins ties.
    pub best: usize,
    /// Like `best` but with the no-purchase slot (index `n`) included.
    pub best_overall: usize,
}

/// `v_i = g_i + r ln(φ*_i (k+1)) − β_i p_i`, i.e. utility net of the Gumbel
/// term with `d_i = φ*_i (k+1)`.
pub fn expected_consumer_utility<T: Scalar>(
    params: &MarketParams<T>,
    prices: &Prices<T>,
    horizon: u64,
) -> Result<ConsumerUtilities<T>> {
    if horizon < 1 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    let shares = equilibrium_shares(params, prices)?;
    let ln_k1 = T::from_u64(horizon + 1)
        .ok_or_else(|| Error::invalid("horizon", "too large for scalar type"))?
        .ln();
    let r = params.r();
    let mut log_shares = params.log_attraction(prices)?;
    log_shares.push(T::zero());
    let norm = lse(&log_shares);
    let mut values = Vec::with_capacity(params.n() + 1);
    for i in 0..params.n() {
        let ln_phi = log_shares[i] - norm;
        values.push(params.g()[i] + r * (ln_phi + ln_k1) - params.beta()[i] * prices.as_slice()[i]);
    }
    values.push(r * (-norm + ln_k1));
    debug_assert_eq!(values.len(), shares.len());
    let best = argmax_first(&values[..params.n()]);
    let best_overall = argmax_first(&values);
    Ok(ConsumerUtilities {
        values,
        best,
        best_overall,
    })
}

pub(crate) fn argmax_first<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
