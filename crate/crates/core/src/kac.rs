//! The Kac ring: `N` sites on a circle, a ball on each, a fixed set of
//! marked sites. Every step all balls move one site forward and flip colour
//! when they leave a marked site:
//!
//! ```text
//! eta_n(t) = xi_{n-1} * eta_{n-1}(t-1)      (indices mod N)
//! ```
//!
//! Colours and markers are stored as bits (`1` = black, `1` = marked), so a
//! step is `colors = rotate_up(colors ^ markers)`.

use serde::{Deserialize, Serialize};

use crate::csv::{self, CsvTable};
use crate::error::{Error, Result};
use crate::logprob::Bound;
use crate::rng::RngStream;

/// Largest ring accepted by the exhaustive oracle.
pub const BRUTE_FORCE_MAX_SITES: usize = 20;

/// Fixed-length ring of bits packed into `u64` words.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitRing {
    len: usize,
    words: Vec<u64>,
}

impl BitRing {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut r = Self { len, words: vec![u64::MAX; len.div_ceil(64)] };
        r.clear_tail();
        r
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for b in bits {
            if len % 64 == 0 {
                words.push(0);
            }
            if b {
                words[len / 64] |= 1 << (len % 64);
            }
            len += 1;
        }
        Self { len, words }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    fn xor_assign(&mut self, other: &BitRing) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// `new[n] = old[n - 1]`, cyclically.
    fn rotate_up(&mut self) {
        if self.len == 0 {
            return;
        }
        let top = self.get(self.len - 1);
        let mut carry = 0u64;
        for w in &mut self.words {
            let next = *w >> 63;
            *w = (*w << 1) | carry;
            carry = next;
        }
        self.clear_tail();
        self.set(0, top);
    }

    /// `new[n] = old[n + 1]`, cyclically.
    fn rotate_down(&mut self) {
        if self.len == 0 {
            return;
        }
        let bottom = self.get(0);
        let mut carry = 0u64;
        for w in self.words.iter_mut().rev() {
            let next = *w & 1;
            *w = (*w >> 1) | (carry << 63);
            carry = next;
        }
        self.set(self.len - 1, bottom);
    }
}

/// Marked sites of a ring; `xi_n = -1` where the bit is set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Markers(BitRing);

impl Markers {
    /// From the `xi_n` values; each entry must be `+1` or `-1`.
    pub fn from_signs(xi: &[i8]) -> Result<Self> {
        if xi.is_empty() {
            return Err(Error::param("markers", "ring needs at least one site"));
        }
        if let Some(v) = xi.iter().find(|v| **v != 1 && **v != -1) {
            return Err(Error::param("markers", format!("entries must be +1 or -1, got {v}")));
        }
        Ok(Self(BitRing::from_bools(xi.iter().map(|&v| v == -1))))
    }

    pub fn from_bits(marked: BitRing) -> Result<Self> {
        if marked.is_empty() {
            return Err(Error::param("markers", "ring needs at least one site"));
        }
        Ok(Self(marked))
    }

    pub fn unmarked(n: usize) -> Self {
        Self(BitRing::zeros(n))
    }

    pub fn all_marked(n: usize) -> Self {
        Self(BitRing::ones(n))
    }

    pub fn n_sites(&self) -> usize {
        self.0.len()
    }

    /// Number of marked sites `m`.
    pub fn count(&self) -> usize {
        self.0.count_ones()
    }

    pub fn is_marked(&self, n: usize) -> bool {
        self.0.get(n)
    }

    pub fn bits(&self) -> &BitRing {
        &self.0
    }

    pub fn signs(&self) -> Vec<i8> {
        self.0.iter().map(|b| if b { -1 } else { 1 }).collect()
    }
}

/// `(Delta, Delta / N)` with `Delta = N_white - N_black`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KacObservable {
    pub delta: i64,
    pub delta_bar: f64,
}

/// Markers, ball colours and the elapsed number of steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KacConfiguration {
    markers: Markers,
    black: BitRing,
    time: u64,
}

impl KacConfiguration {
    /// All balls white at `t = 0`.
    pub fn all_white(markers: Markers) -> Self {
        let black = BitRing::zeros(markers.n_sites());
        Self { markers, black, time: 0 }
    }

    /// Arbitrary colours, `eta_n = +1` for white and `-1` for black.
    pub fn with_colors(markers: Markers, eta: &[i8], time: u64) -> Result<Self> {
        if eta.len() != markers.n_sites() {
            return Err(Error::Dimension { expected: markers.n_sites(), got: eta.len() });
        }
        if let Some(v) = eta.iter().find(|v| **v != 1 && **v != -1) {
            return Err(Error::param("colors", format!("entries must be +1 or -1, got {v}")));
        }
        let black = BitRing::from_bools(eta.iter().map(|&v| v == -1));
        Ok(Self { markers, black, time })
    }

    pub fn n_sites(&self) -> usize {
        self.markers.n_sites()
    }

    pub fn markers(&self) -> &Markers {
        &self.markers
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn colors(&self) -> Vec<i8> {
        self.black.iter().map(|b| if b { -1 } else { 1 }).collect()
    }

    pub fn delta(&self) -> i64 {
        self.n_sites() as i64 - 2 * self.black.count_ones() as i64
    }

    pub fn observable(&self) -> KacObservable {
        let delta = self.delta();
        KacObservable { delta, delta_bar: delta as f64 / self.n_sites() as f64 }
    }

    /// Advance in place by one step.
    pub fn advance(&mut self) {
        self.black.xor_assign(self.markers.bits());
        self.black.rotate_up();
        self.time += 1;
    }

    /// Undo one step in place: `eta_n = xi_n * eta_{n+1}`.
    pub fn retreat(&mut self) {
        self.black.rotate_down();
        self.black.xor_assign(self.markers.bits());
        self.time = self.time.saturating_sub(1);
    }

    pub fn step(&self) -> Self {
        let mut next = self.clone();
        next.advance();
        next
    }

    pub fn inverse_step(&self) -> Self {
        let mut prev = self.clone();
        prev.retreat();
        prev
    }
}

/// `Delta(t)` for all `t` in `0..=t_max`, iterating the dynamics from `config`.
pub fn trace(config: &KacConfiguration, t_max: u64) -> Vec<KacObservable> {
    let mut c = config.clone();
    let mut out = Vec::with_capacity(t_max as usize + 1);
    out.push(c.observable());
    for _ in 0..t_max {
        c.advance();
        out.push(c.observable());
    }
    out
}

/// Trace CSV `t,delta,delta_bar`, starting at the configuration's own time.
pub fn trace_csv(start_time: u64, trace: &[KacObservable]) -> String {
    let mut table = CsvTable::new(&["t", "delta", "delta_bar"]);
    for (i, o) in trace.iter().enumerate() {
        table.row([(start_time + i as u64).to_string(), o.delta.to_string(), csv::num(o.delta_bar)]);
    }
    table.finish()
}

/// `X_{n,t} = xi_{n-1} ... xi_{n-t}` for every site, from marked-site prefix
/// counts: the window wraps `t / N` full turns plus a partial arc.
fn window_products(markers: &Markers, t: u64) -> Vec<i64> {
    let n = markers.n_sites();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for i in 0..n {
        prefix.push(prefix[i] + usize::from(markers.is_marked(i)));
    }
    let m = prefix[n];
    let turns = (t / n as u64) as usize;
    let arc = (t % n as u64) as usize;
    (0..n)
        .map(|site| {
            let in_arc = if site >= arc {
                prefix[site] - prefix[site - arc]
            } else {
                prefix[site] + (m - prefix[n + site - arc])
            };
            if (turns * m + in_arc).is_multiple_of(2) {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// `Delta(t) = sum_n X_{n,t}` from an all-white start, in `O(N)`.
pub fn delta_closed_form(markers: &Markers, t: u64) -> i64 {
    window_products(markers, t).iter().sum()
}

/// I.i.d. markers with `P(xi_n = -1) = mu`.
pub fn sample_markers(n: usize, mu: f64, rng: &mut RngStream) -> Result<Markers> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::param("mu", format!("must lie in (0,1], got {mu}")));
    }
    Markers::from_bits(BitRing::from_bools((0..n).map(|_| rng.bernoulli(mu))))
}

/// `E(Delta(t) / N) = (1 - 2 mu)^t`, valid for `t <= N`.
pub fn expected_delta_bar(mu: f64, t: u64, n: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::param("mu", format!("must lie in [0,1], got {mu}")));
    }
    if t > n as u64 {
        return Err(Error::param("t", format!("formula holds only for t <= N = {n}, got {t}")));
    }
    Ok((1.0 - 2.0 * mu).powi(t as i32))
}

/// Exact mean and variance of `Delta(t) / N` over all marker sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KacMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Exhaustive enumeration of all `2^N` marker sequences, each weighted by
/// `mu^m (1 - mu)^(N - m)` and evolved step by step on a single machine word.
pub fn brute_force_expectation(n: usize, mu: f64, t: u64) -> Result<KacMoments> {
    if n == 0 || n > BRUTE_FORCE_MAX_SITES {
        return Err(Error::param("n", format!("enumeration needs 1 <= N <= {BRUTE_FORCE_MAX_SITES}, got {n}")));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::param("mu", format!("must lie in [0,1], got {mu}")));
    }
    let full: u32 = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let weights: Vec<f64> = (0..=n).map(|m| mu.powi(m as i32) * (1.0 - mu).powi((n - m) as i32)).collect();
    let (mut s1, mut s2) = (0.0, 0.0);
    for marks in 0..=full {
        let w = weights[marks.count_ones() as usize];
        if w == 0.0 {
            continue;
        }
        let mut black: u32 = 0;
        for _ in 0..t {
            let moved = black ^ marks;
            black = ((moved << 1) | (moved >> (n - 1))) & full;
        }
        let delta_bar = (n as f64 - 2.0 * black.count_ones() as f64) / n as f64;
        s1 += w * delta_bar;
        s2 += w * delta_bar * delta_bar;
    }
    Ok(KacMoments { mean: s1, variance: (s2 - s1 * s1).max(0.0) })
}

/// Time scales and probability bounds of the sub-exponential concentration
/// result for the ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem3 {
    pub epsilon: f64,
    pub alpha: f64,
    pub mu: f64,
    /// `N_eps = (4 / eps)^(1 / (1 - alpha))`.
    pub n_epsilon: f64,
    /// Real solution of `|1 - 2 mu|^t0 = eps / 4`; `None` when `|1 - 2 mu| = 1`.
    pub t0_exact: Option<f64>,
}

pub fn theorem3_quantities(epsilon: f64, alpha: f64, mu: f64) -> Result<Theorem3> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", format!("must be > 0, got {epsilon}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("must lie in (0,1), got {alpha}")));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::param("mu", format!("must lie in [0,1], got {mu}")));
    }
    let n_epsilon = (4.0 / epsilon).powf(1.0 / (1.0 - alpha));
    let rate = (1.0 - 2.0 * mu).abs();
    let t0_exact = if rate >= 1.0 {
        None
    } else if rate == 0.0 || epsilon >= 4.0 {
        Some(if rate == 0.0 { 1.0 } else { 0.0 })
    } else {
        Some(((epsilon / 4.0).ln() / rate.ln()).max(0.0))
    };
    Ok(Theorem3 { epsilon, alpha, mu, n_epsilon, t0_exact })
}

impl Theorem3 {
    /// First integer time of the equilibrium window.
    pub fn t0(&self) -> Option<u64> {
        self.t0_exact.map(|t| t.ceil() as u64)
    }

    /// `t_N = N^alpha / 2`.
    pub fn t_n(&self, n: usize) -> f64 {
        0.5 * (n as f64).powf(self.alpha)
    }

    fn half_eps_sq2(&self) -> f64 {
        2.0 * (self.epsilon / 2.0).powi(2)
    }

    /// `2 exp(2 (eps/2)^2) exp(-2 (eps/2)^2 N^(1-alpha))` for one time.
    pub fn per_time_bound(&self, n: usize) -> Bound {
        let c = self.half_eps_sq2();
        Bound::from_ln(std::f64::consts::LN_2 + c - c * (n as f64).powf(1.0 - self.alpha))
    }

    /// Union of the per-time bound over `t_N` instants.
    pub fn sequence_bound(&self, n: usize) -> Bound {
        self.per_time_bound(n).times(self.t_n(n))
    }

    /// Whether `N` is large enough for the result to apply.
    pub fn applies_to(&self, n: usize) -> bool {
        n as f64 > self.n_epsilon
    }
}

/// Split of `Delta(t)` into `t` interleaved sums of `k` independent terms
/// plus a short remainder, `N = k t + remainder_count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaDecomposition {
    pub delta0: i64,
    pub remainder: i64,
    pub k: usize,
    pub remainder_count: usize,
}

pub fn delta0_decomposition(markers: &Markers, t: u64) -> Result<DeltaDecomposition> {
    let n = markers.n_sites();
    if t == 0 || t > n as u64 {
        return Err(Error::param("t", format!("must satisfy 1 <= t <= N = {n}, got {t}")));
    }
    let t = t as usize;
    let (k, remainder_count) = (n / t, n % t);
    let x = window_products(markers, t as u64);
    // S_{i,t} = sum_j X_{i + j t}: together they cover the first k t sites
    let delta0 = x[..k * t].iter().sum();
    let remainder = x[k * t..].iter().sum();
    Ok(DeltaDecomposition { delta0, remainder, k, remainder_count })
}
