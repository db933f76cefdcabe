//! Network model: scenarios, discrete alphabets, SINR and instantaneous
//! utilities.
//!
//! A [`Scenario`] describes `K` transmitter/receiver pairs operating over
//! `B` bands. The channel gain of the link from transmitter `i` to receiver
//! `j` on band `b` is `g[i][j][b]`; the SINR seen by receiver `i` on band
//! `b` is
//!
//! ```text
//! SINR_i^b = g[i][i][b] a_i^b / (noise + sum_{j != i} g[j][i][b] a_j^b)
//! ```
//!
//! Two topologies are supported: a general interference network (all
//! `K² B` links are independent fading processes) and a multiple-access
//! channel (all transmitters reach one common receiver, so only `K B`
//! links exist and `g[i][j][b]` does not depend on `j`).
//!
//! Instantaneous utilities are either energy efficiency in bit/J,
//!
//! ```text
//! u_i = R0 * sum_b psi(SINR_i^b) / (sum_b a_i^b + P0)
//! ```
//!
//! with `psi` a net-rate model (packet success `(1-e^-x)^M`, outage
//! complement `e^{-c/x}` or Shannon `log2(1+x)`), or the Shannon rate
//! `sum_b log2(1 + SINR_i^b)` in bit/s/Hz.

use thiserror::Error;

/// Errors raised while validating model inputs.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("scenario invalid: {0}")]
    InvalidScenario(String),
    #[error("utility spec invalid: {0}")]
    InvalidUtility(String),
    #[error("state alphabet invalid: {0}")]
    InvalidStates(String),
    #[error("transmitter {tx} and receiver {rx} are coincident (zero distance)")]
    CoincidentNodes { tx: usize, rx: usize },
    #[error("small-cell layout invalid: {0}")]
    InvalidLayout(String),
}

/// How transmitters and receivers are paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// `K` transmitter/receiver pairs, `K² B` independent links.
    Interference,
    /// One common receiver, `K B` independent links (`g[i][j] == g[i]`).
    MultipleAccess,
}

/// Full description of a network instance.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub topology: Topology,
    /// Transmitter count `K >= 1`.
    pub k: usize,
    /// Band count `B >= 1`.
    pub bands: usize,
    /// Per-band power cap (W).
    pub p_max: f64,
    /// Total power budget across bands (W), `p_max <= p_total`.
    pub p_total: f64,
    /// Receiver noise power (W).
    pub noise: f64,
    /// Static power consumed while radiating zero (W).
    pub p0: f64,
    /// Raw data rate scaling the net-rate model (bit/s).
    pub r0: f64,
    /// Mean link gains, linear scale. Interference topology: `K*K*B`
    /// entries in `(tx, rx, band)` order; multiple access: `K*B` entries in
    /// `(tx, band)` order.
    pub gain_means: Vec<f64>,
    /// Admissible per-band power values (W), sorted ascending.
    pub power_levels: Vec<f64>,
}

/// Validated, immutable network description.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: ScenarioConfig,
}

impl Scenario {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, ModelError> {
        let err = |m: String| Err(ModelError::InvalidScenario(m));
        if cfg.k < 1 {
            return err("need at least one transmitter".into());
        }
        if cfg.bands < 1 {
            return err("need at least one band".into());
        }
        if !(cfg.p_max > 0.0) {
            return err(format!("p_max must be positive, got {}", cfg.p_max));
        }
        if cfg.p_total < cfg.p_max {
            return err(format!(
                "p_total {} smaller than p_max {}",
                cfg.p_total, cfg.p_max
            ));
        }
        if !(cfg.noise > 0.0) {
            return err(format!("noise must be positive, got {}", cfg.noise));
        }
        if cfg.p0 < 0.0 || cfg.r0 < 0.0 {
            return err("p0 and r0 must be nonnegative".into());
        }
        let n_links = match cfg.topology {
            Topology::Interference => cfg.k * cfg.k * cfg.bands,
            Topology::MultipleAccess => cfg.k * cfg.bands,
        };
        if cfg.gain_means.len() != n_links {
            return err(format!(
                "expected {} gain means, got {}",
                n_links,
                cfg.gain_means.len()
            ));
        }
        if cfg.gain_means.iter().any(|&g| !(g > 0.0)) {
            return err("all gain means must be positive".into());
        }
        if cfg.power_levels.is_empty() {
            return err("power_levels must be nonempty".into());
        }
        if cfg.power_levels.windows(2).any(|w| w[0] >= w[1]) {
            return err("power_levels must be strictly ascending".into());
        }
        if cfg.power_levels[0] < 0.0 {
            return err("power levels must be nonnegative".into());
        }
        let tol = 1e-9 * cfg.p_max;
        if *cfg.power_levels.last().unwrap() > cfg.p_max + tol {
            return err("largest power level exceeds p_max".into());
        }
        Ok(Self { cfg })
    }

    pub fn topology(&self) -> Topology {
        self.cfg.topology
    }
    pub fn k(&self) -> usize {
        self.cfg.k
    }
    pub fn bands(&self) -> usize {
        self.cfg.bands
    }
    pub fn p_max(&self) -> f64 {
        self.cfg.p_max
    }
    pub fn p_total(&self) -> f64 {
        self.cfg.p_total
    }
    pub fn noise(&self) -> f64 {
        self.cfg.noise
    }
    pub fn p0(&self) -> f64 {
        self.cfg.p0
    }
    pub fn r0(&self) -> f64 {
        self.cfg.r0
    }
    pub fn power_levels(&self) -> &[f64] {
        &self.cfg.power_levels
    }

    /// Number of independent fading links in the global channel state.
    pub fn n_links(&self) -> usize {
        self.cfg.gain_means.len()
    }

    /// Index of the link from transmitter `tx` to receiver `rx` on band `b`
    /// within a global state vector.
    #[inline]
    pub fn link_index(&self, tx: usize, rx: usize, b: usize) -> usize {
        debug_assert!(tx < self.cfg.k && rx < self.cfg.k && b < self.cfg.bands);
        match self.cfg.topology {
            Topology::Interference => (tx * self.cfg.k + rx) * self.cfg.bands + b,
            Topology::MultipleAccess => tx * self.cfg.bands + b,
        }
    }

    pub fn gain_mean(&self, tx: usize, rx: usize, b: usize) -> f64 {
        self.cfg.gain_means[self.link_index(tx, rx, b)]
    }

    pub fn link_means(&self) -> &[f64] {
        &self.cfg.gain_means
    }

    /// Returns a copy with every link mean replaced by `value`.
    pub fn with_uniform_gain_mean(&self, value: f64) -> Result<Scenario, ModelError> {
        let mut cfg = self.cfg.clone();
        cfg.gain_means.iter_mut().for_each(|g| *g = value);
        Scenario::new(cfg)
    }
}

/// Uniformly spaced power grid `{0, p_max/(n-1), ..., p_max}`.
pub fn uniform_power_grid(n_levels: usize, p_max: f64) -> Vec<f64> {
    assert!(n_levels >= 1, "need at least one power level");
    if n_levels == 1 {
        return vec![p_max];
    }
    (0..n_levels)
        .map(|i| p_max * i as f64 / (n_levels - 1) as f64)
        .collect()
}

/// Gain-mean matrix for a symmetric interference network: every direct link
/// has mean `direct`, every cross link mean `cross`, identical across bands.
pub fn symmetric_gain_means(k: usize, bands: usize, direct: f64, cross: f64) -> Vec<f64> {
    let mut g = vec![0.0; k * k * bands];
    for tx in 0..k {
        for rx in 0..k {
            for b in 0..bands {
                g[(tx * k + rx) * bands + b] = if tx == rx { direct } else { cross };
            }
        }
    }
    g
}

// ---------------------------------------------------------------------------
// Small-cell path-loss layout
// ---------------------------------------------------------------------------

/// Square small-cell deployment: base stations at the centers of a
/// `side x side` grid of cells, mobile stations at explicit coordinates.
///
/// Coordinates are "normalized": one grid cell is `d0 x d0` units wide, and
/// real positions are obtained by scaling with `isd_m / d0_m`. Link gain
/// means follow the inverse-square path loss `E[g] = (d0 / d)^2`, so a link
/// of length `d0` has unit mean gain.
#[derive(Debug, Clone)]
pub struct SmallCellLayout {
    /// Inter-site distance in meters.
    pub isd_m: f64,
    /// Path-loss normalization distance in meters (5 m in the reference
    /// deployment).
    pub d0_m: f64,
    /// Normalized mobile-station coordinates, one per cell.
    pub ms_coords: Vec<(f64, f64)>,
    /// Normalized base-station coordinates; if `None`, the count must be a
    /// perfect square and stations sit at grid-cell centers, row-major from
    /// the bottom-left cell.
    pub sbs_coords: Option<Vec<(f64, f64)>>,
}

/// Gain-mean matrix (`K*K`, single band) for a small-cell layout.
pub fn smallcell_gain_means(layout: &SmallCellLayout) -> Result<Vec<f64>, ModelError> {
    let k = layout.ms_coords.len();
    if k == 0 {
        return Err(ModelError::InvalidLayout("no mobile stations".into()));
    }
    if !(layout.isd_m > 0.0) || !(layout.d0_m > 0.0) {
        return Err(ModelError::InvalidLayout(
            "isd_m and d0_m must be positive".into(),
        ));
    }
    let sbs: Vec<(f64, f64)> = match &layout.sbs_coords {
        Some(c) => {
            if c.len() != k {
                return Err(ModelError::InvalidLayout(format!(
                    "{} base stations for {} mobile stations",
                    c.len(),
                    k
                )));
            }
            c.clone()
        }
        None => {
            let side = (k as f64).sqrt().round() as usize;
            if side * side != k {
                return Err(ModelError::InvalidLayout(format!(
                    "{k} cells is not a perfect square; supply sbs_coords"
                )));
            }
            // Cell size in normalized units equals d0: the grid spans
            // side*d0 per axis and scaling by isd/d0 makes cells isd wide.
            (0..k)
                .map(|i| {
                    let (row, col) = (i / side, i % side);
                    (
                        layout.d0_m * (col as f64 + 0.5),
                        layout.d0_m * (row as f64 + 0.5),
                    )
                })
                .collect()
        }
    };
    let scale = layout.isd_m / layout.d0_m;
    let mut means = vec![0.0; k * k];
    for tx in 0..k {
        for rx in 0..k {
            let (xs, ys) = sbs[tx];
            let (xm, ym) = layout.ms_coords[rx];
            let d = scale * ((xs - xm).powi(2) + (ys - ym).powi(2)).sqrt();
            if d <= 0.0 {
                return Err(ModelError::CoincidentNodes { tx, rx });
            }
            means[tx * k + rx] = (layout.d0_m / d).powi(2);
        }
    }
    Ok(means)
}

/// Builds a full single-band interference `Scenario` from a small-cell
/// layout plus radio parameters.
#[allow(clippy::too_many_arguments)]
pub fn smallcell_scenario(
    layout: &SmallCellLayout,
    p_max: f64,
    p_total: f64,
    noise: f64,
    p0: f64,
    r0: f64,
    power_levels: Vec<f64>,
) -> Result<Scenario, ModelError> {
    let gain_means = smallcell_gain_means(layout)?;
    Scenario::new(ScenarioConfig {
        topology: Topology::Interference,
        k: layout.ms_coords.len(),
        bands: 1,
        p_max,
        p_total,
        noise,
        p0,
        r0,
        gain_means,
        power_levels,
    })
}

// ---------------------------------------------------------------------------
// Action alphabet
// ---------------------------------------------------------------------------

/// Finite set of admissible `B`-dimensional power vectors for one
/// transmitter. Enumeration is deterministic: a mixed-radix counter over
/// band power levels (band 0 most significant), keeping vectors whose total
/// power fits the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionAlphabet {
    bands: usize,
    actions: Vec<Vec<f64>>,
    totals: Vec<f64>,
}

impl ActionAlphabet {
    pub fn enumerate(scenario: &Scenario) -> Self {
        let b = scenario.bands();
        let levels = scenario.power_levels();
        let tol = 1e-9 * scenario.p_max().max(1.0);
        let mut actions = Vec::new();
        let mut digits = vec![0usize; b];
        loop {
            let v: Vec<f64> = digits.iter().map(|&d| levels[d]).collect();
            let total: f64 = v.iter().sum();
            if total <= scenario.p_total() + tol {
                actions.push(v);
            }
            // increment mixed-radix counter, band 0 most significant
            let mut pos = b;
            while pos > 0 {
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < levels.len() {
                    break;
                }
                digits[pos] = 0;
                if pos == 0 {
                    let totals = actions.iter().map(|a| a.iter().sum()).collect();
                    return Self {
                        bands: b,
                        actions,
                        totals,
                    };
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }
    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
    pub fn bands(&self) -> usize {
        self.bands
    }
    #[inline]
    pub fn action(&self, idx: usize) -> &[f64] {
        &self.actions[idx]
    }
    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }
    #[inline]
    pub fn total_power(&self, idx: usize) -> f64 {
        self.totals[idx]
    }

    /// Index of the "full power" action: largest total power, ties broken
    /// toward the latest enumerated vector (all power on band 0).
    pub fn full_power_index(&self) -> usize {
        let mut best = 0;
        for (i, &t) in self.totals.iter().enumerate() {
            if t >= self.totals[best] {
                best = i;
            }
        }
        best
    }
}

// ---------------------------------------------------------------------------
// State alphabet
// ---------------------------------------------------------------------------

/// Product alphabet of discrete per-link gain values: one global state is a
/// choice of one cell per link. State `idx` decodes into per-link digits by
/// a mixed-radix expansion with link 0 most significant.
#[derive(Debug, Clone)]
pub struct StateAlphabet {
    radices: Vec<usize>,
    strides: Vec<usize>,
    link_values: Vec<Vec<f64>>,
    link_probs: Vec<Vec<f64>>,
    probs: Vec<f64>,
    gains: Vec<f64>, // n_states x n_links, row-major
}

impl StateAlphabet {
    /// Builds the product alphabet of independent per-link marginals.
    pub fn product(
        link_values: Vec<Vec<f64>>,
        link_probs: Vec<Vec<f64>>,
    ) -> Result<Self, ModelError> {
        if link_values.is_empty() || link_values.len() != link_probs.len() {
            return Err(ModelError::InvalidStates(
                "need matching nonempty per-link values and probabilities".into(),
            ));
        }
        let mut n_states = 1usize;
        for (v, p) in link_values.iter().zip(&link_probs) {
            if v.is_empty() || v.len() != p.len() {
                return Err(ModelError::InvalidStates(
                    "per-link values/probs must be nonempty and equal-length".into(),
                ));
            }
            if p.iter().any(|&x| x < 0.0) {
                return Err(ModelError::InvalidStates("negative probability".into()));
            }
            let s: f64 = p.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(ModelError::InvalidStates(format!(
                    "link marginal sums to {s}, expected 1"
                )));
            }
            n_states = n_states.checked_mul(v.len()).ok_or_else(|| {
                ModelError::InvalidStates("state space overflows usize".into())
            })?;
        }
        let n_links = link_values.len();
        let radices: Vec<usize> = link_values.iter().map(|v| v.len()).collect();
        let mut strides = vec![1usize; n_links];
        for l in (0..n_links.saturating_sub(1)).rev() {
            strides[l] = strides[l + 1] * radices[l + 1];
        }
        let mut probs = vec![0.0; n_states];
        let mut gains = vec![0.0; n_states * n_links];
        for idx in 0..n_states {
            let mut p = 1.0;
            for l in 0..n_links {
                let d = (idx / strides[l]) % radices[l];
                p *= link_probs[l][d];
                gains[idx * n_links + l] = link_values[l][d];
            }
            probs[idx] = p;
        }
        Ok(Self {
            radices,
            strides,
            link_values,
            link_probs,
            probs,
            gains,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
    pub fn n_links(&self) -> usize {
        self.radices.len()
    }
    pub fn radices(&self) -> &[usize] {
        &self.radices
    }
    #[inline]
    pub fn prob(&self, idx: usize) -> f64 {
        self.probs[idx]
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
    /// Gain vector (one entry per link) of state `idx`.
    #[inline]
    pub fn gains(&self, idx: usize) -> &[f64] {
        let n = self.n_links();
        &self.gains[idx * n..(idx + 1) * n]
    }
    /// Cell index of `link` within state `idx`.
    #[inline]
    pub fn digit(&self, idx: usize, link: usize) -> usize {
        (idx / self.strides[link]) % self.radices[link]
    }
    pub fn link_values(&self, link: usize) -> &[f64] {
        &self.link_values[link]
    }
    pub fn link_probs(&self, link: usize) -> &[f64] {
        &self.link_probs[link]
    }
}

// ---------------------------------------------------------------------------
// Utilities
// ---------------------------------------------------------------------------

/// Net data-rate model `psi(SINR)`, normalized to `[0, 1]` rates for the
/// first two variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NetRate {
    /// Packet success rate `(1 - e^{-x})^M` for packets of `M` symbols.
    PacketSuccess { m: u32 },
    /// Outage complement `e^{-c/x}`; `c` relates to the spectral efficiency.
    Outage { c: f64 },
    /// Shannon spectral efficiency `log2(1 + x)`.
    Shannon,
}

impl NetRate {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(x >= 0.0, "SINR must be nonnegative");
        match *self {
            NetRate::PacketSuccess { m } => (1.0 - (-x).exp()).powi(m as i32),
            NetRate::Outage { c } => {
                if x <= 0.0 {
                    0.0
                } else {
                    (-c / x).exp()
                }
            }
            NetRate::Shannon => (1.0 + x).log2(),
        }
    }

    /// First derivative, used by the target-SINR baseline.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            NetRate::PacketSuccess { m } => {
                let e = (-x).exp();
                m as f64 * (1.0 - e).powi(m as i32 - 1) * e
            }
            NetRate::Outage { c } => {
                if x <= 0.0 {
                    0.0
                } else {
                    (c / (x * x)) * (-c / x).exp()
                }
            }
            NetRate::Shannon => 1.0 / ((1.0 + x) * std::f64::consts::LN_2),
        }
    }
}

/// Which long-term performance metric each transmitter accrues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityKind {
    /// `R0 * sum_b psi(SINR_i^b) / (sum_b a_i^b + P0)` in bit/J.
    EnergyEfficiency,
    /// `sum_b log2(1 + SINR_i^b)` in bit/s/Hz.
    ShannonRate,
}

/// Instantaneous utility family plus the scalarization weights.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySpec {
    pub kind: UtilityKind,
    pub psi: NetRate,
    /// Point in the unit simplex; `weights[i]` scales transmitter `i`'s
    /// utility in the weighted objective.
    pub weights: Vec<f64>,
}

impl UtilitySpec {
    pub fn new(kind: UtilityKind, psi: NetRate, weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.is_empty() || weights.iter().any(|&w| w < 0.0) {
            return Err(ModelError::InvalidUtility(
                "weights must be nonnegative and nonempty".into(),
            ));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(ModelError::InvalidUtility(format!(
                "weights sum to {s}, expected 1"
            )));
        }
        match psi {
            NetRate::PacketSuccess { m } if m < 1 => {
                return Err(ModelError::InvalidUtility("packet length m must be >= 1".into()))
            }
            NetRate::Outage { c } if !(c > 0.0) => {
                return Err(ModelError::InvalidUtility("outage constant c must be > 0".into()))
            }
            _ => {}
        }
        Ok(Self { kind, psi, weights })
    }

    /// Uniform weights `1/K`.
    pub fn sum_objective(kind: UtilityKind, psi: NetRate, k: usize) -> Self {
        Self::new(kind, psi, vec![1.0 / k as f64; k]).expect("uniform weights are valid")
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, ModelError> {
        Self::new(self.kind, self.psi, weights)
    }
}

/// SINR of transmitter `i` on band `b` given per-link `gains` and the `K`
/// transmit power vectors. Zero own power yields exactly zero.
///
/// Panics if an index is out of range.
#[inline]
pub fn sinr(scenario: &Scenario, gains: &[f64], powers: &[&[f64]], i: usize, b: usize) -> f64 {
    assert!(i < scenario.k(), "transmitter index {i} out of range");
    assert!(b < scenario.bands(), "band index {b} out of range");
    let own = powers[i][b];
    if own == 0.0 {
        return 0.0;
    }
    let mut interference = 0.0;
    for j in 0..scenario.k() {
        if j != i {
            interference += gains[scenario.link_index(j, i, b)] * powers[j][b];
        }
    }
    gains[scenario.link_index(i, i, b)] * own / (scenario.noise() + interference)
}

/// Instantaneous utility of transmitter `i` for one channel realization.
///
/// Energy efficiency with zero radiated power and `P0 = 0` returns 0 (no
/// transmission, no reward).
pub fn instantaneous_utility(
    spec: &UtilitySpec,
    scenario: &Scenario,
    gains: &[f64],
    powers: &[&[f64]],
    i: usize,
) -> f64 {
    match spec.kind {
        UtilityKind::EnergyEfficiency => {
            let spent: f64 = powers[i].iter().sum::<f64>() + scenario.p0();
            if spent == 0.0 {
                return 0.0;
            }
            let mut rate = 0.0;
            for b in 0..scenario.bands() {
                rate += spec.psi.eval(sinr(scenario, gains, powers, i, b));
            }
            scenario.r0() * rate / spent
        }
        UtilityKind::ShannonRate => {
            let mut rate = 0.0;
            for b in 0..scenario.bands() {
                rate += (1.0 + sinr(scenario, gains, powers, i, b)).log2();
            }
            rate
        }
    }
}

/// Weighted instantaneous utility `sum_i weights[i] * u_i`.
pub fn weighted_utility(
    spec: &UtilitySpec,
    scenario: &Scenario,
    gains: &[f64],
    powers: &[&[f64]],
) -> f64 {
    let mut w = 0.0;
    for i in 0..scenario.k() {
        let li = spec.weights[i];
        if li != 0.0 {
            w += li * instantaneous_utility(spec, scenario, gains, powers, i);
        }
    }
    w
}

/// Writes every transmitter's instantaneous utility into `out`.
pub fn utilities_into(
    spec: &UtilitySpec,
    scenario: &Scenario,
    gains: &[f64],
    powers: &[&[f64]],
    out: &mut [f64],
) {
    for i in 0..scenario.k() {
        out[i] = instantaneous_utility(spec, scenario, gains, powers, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    fn two_user_scenario() -> Scenario {
        Scenario::new(ScenarioConfig {
            topology: Topology::Interference,
            k: 2,
            bands: 1,
            p_max: 0.1,
            p_total: 0.1,
            noise: 0.01,
            p0: 0.0,
            r0: 1e6,
            gain_means: symmetric_gain_means(2, 1, 1.0, 0.5),
            power_levels: uniform_power_grid(3, 0.1),
        })
        .unwrap()
    }

    // ------------------------------------------------------------- scenario

    #[test]
    fn scenario_rejects_bad_inputs() {
        let mut cfg = ScenarioConfig {
            topology: Topology::Interference,
            k: 2,
            bands: 1,
            p_max: 0.1,
            p_total: 0.05, // smaller than p_max
            noise: 0.01,
            p0: 0.0,
            r0: 1e6,
            gain_means: symmetric_gain_means(2, 1, 1.0, 0.5),
            power_levels: uniform_power_grid(3, 0.1),
        };
        assert!(Scenario::new(cfg.clone()).is_err());
        cfg.p_total = 0.1;
        cfg.gain_means[0] = 0.0;
        assert!(Scenario::new(cfg.clone()).is_err());
        cfg.gain_means[0] = 1.0;
        cfg.power_levels = vec![0.0, 0.05, 0.05];
        assert!(Scenario::new(cfg.clone()).is_err());
        cfg.power_levels = uniform_power_grid(3, 0.1);
        assert!(Scenario::new(cfg).is_ok());
    }

    #[test]
    fn mac_topology_shares_links_across_receivers() {
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::MultipleAccess,
            k: 3,
            bands: 2,
            p_max: 1.0,
            p_total: 1.0,
            noise: 0.1,
            p0: 0.0,
            r0: 1.0,
            gain_means: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            power_levels: vec![0.0, 1.0],
        })
        .unwrap();
        assert_eq!(sc.n_links(), 6);
        assert_eq!(sc.link_index(1, 0, 1), sc.link_index(1, 2, 1));
        assert_eq!(sc.gain_mean(2, 0, 0), 5.0);
    }

    // ----------------------------------------------------------------- sinr

    #[test]
    fn sinr_single_user_direct_substitution() {
        let sc = two_user_scenario();
        // g11=1, a1=0.1, sigma2=0.01, interferer silent -> 10
        let gains = [1.0, 0.5, 0.5, 1.0]; // (1->1),(1->2),(2->1),(2->2)
        let a1 = [0.1];
        let a2 = [0.0];
        let powers: Vec<&[f64]> = vec![&a1, &a2];
        assert!(approx(sinr(&sc, &gains, &powers, 0, 0), 10.0, 1e-12));
    }

    #[test]
    fn sinr_zero_power_is_zero() {
        let sc = two_user_scenario();
        let gains = [1.0, 0.5, 0.5, 1.0];
        let a = [0.0];
        let b = [0.1];
        let powers: Vec<&[f64]> = vec![&a, &b];
        assert_eq!(sinr(&sc, &gains, &powers, 0, 0), 0.0);
    }

    #[test]
    fn sinr_with_interferer() {
        let sc = two_user_scenario();
        // g11=1, a1=0.1, g21=0.5, a2=0.05, sigma2=0.01 -> 0.1/0.035
        let gains = [1.0, 0.5, 0.5, 1.0];
        let a1 = [0.1];
        let a2 = [0.05];
        let powers: Vec<&[f64]> = vec![&a1, &a2];
        assert!(approx(sinr(&sc, &gains, &powers, 0, 0), 0.1 / 0.035, 1e-12));
    }

    #[test]
    fn sinr_monotone_in_powers_small_exhaustive() {
        let sc = two_user_scenario();
        let gains = [1.3, 0.4, 0.7, 0.9];
        let levels = sc.power_levels().to_vec();
        for &own in &levels {
            for &other in &levels {
                let a1 = [own];
                let a2 = [other];
                let p: Vec<&[f64]> = vec![&a1, &a2];
                let base = sinr(&sc, &gains, &p, 0, 0);
                // increasing own power never decreases SINR
                for &own_up in levels.iter().filter(|&&l| l > own) {
                    let a1u = [own_up];
                    let pu: Vec<&[f64]> = vec![&a1u, &a2];
                    assert!(sinr(&sc, &gains, &pu, 0, 0) >= base);
                }
                // increasing interferer power never increases SINR
                for &other_up in levels.iter().filter(|&&l| l > other) {
                    let a2u = [other_up];
                    let pu: Vec<&[f64]> = vec![&a1, &a2u];
                    assert!(sinr(&sc, &gains, &pu, 0, 0) <= base);
                }
            }
        }
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn sinr_index_out_of_range_panics() {
        let sc = two_user_scenario();
        let gains = [1.0, 0.5, 0.5, 1.0];
        let a = [0.1];
        let powers: Vec<&[f64]> = vec![&a, &a];
        sinr(&sc, &gains, &powers, 2, 0);
    }

    // ------------------------------------------------------------ utilities

    #[test]
    fn ee_utility_outage_direct_substitution() {
        // psi=e^{-1/x}, P0=0, R0=1e6, B=1, SINR=10, a=0.1 -> 1e6 e^{-0.1}/0.1
        let sc = two_user_scenario();
        let spec = UtilitySpec::new(
            UtilityKind::EnergyEfficiency,
            NetRate::Outage { c: 1.0 },
            vec![0.5, 0.5],
        )
        .unwrap();
        let gains = [1.0, 0.5, 0.5, 1.0];
        let a1 = [0.1];
        let a2 = [0.0];
        let powers: Vec<&[f64]> = vec![&a1, &a2];
        let u = instantaneous_utility(&spec, &sc, &gains, &powers, 0);
        assert!(approx(u, 1e6 * (-0.1f64).exp() / 0.1, 1e-12));
    }

    #[test]
    fn shannon_rate_unit_sinr_is_one_bit() {
        let sc = two_user_scenario();
        let spec = UtilitySpec::new(UtilityKind::ShannonRate, NetRate::Shannon, vec![0.5, 0.5])
            .unwrap();
        // choose gains/powers so SINR = 1: g=1, a=0.1... need sigma+I = 0.1
        let gains = [1.0, 0.5, 1.8, 1.0]; // g21=1.8 => I = 1.8*0.05 = 0.09, +0.01 = 0.1
        let a1 = [0.1];
        let a2 = [0.05];
        let powers: Vec<&[f64]> = vec![&a1, &a2];
        assert!(approx(sinr(&sc, &gains, &powers, 0, 0), 1.0, 1e-12));
        assert!(approx(
            instantaneous_utility(&spec, &sc, &gains, &powers, 0),
            1.0,
            1e-12
        ));
    }

    #[test]
    fn packet_success_matches_high_precision_evaluation() {
        // Independent oracle: evaluate (1-e^{-x})^M via exp(M ln(1-e^{-x})).
        let sc = two_user_scenario();
        let spec = UtilitySpec::new(
            UtilityKind::EnergyEfficiency,
            NetRate::PacketSuccess { m: 100 },
            vec![0.5, 0.5],
        )
        .unwrap();
        let x: f64 = 6.48;
        let gains = [x * 0.1, 0.5, 0.5, 1.0]; // single user at a=0.1, sigma2=0.01 -> SINR = x
        let a1 = [0.1];
        let a2 = [0.0];
        let powers: Vec<&[f64]> = vec![&a1, &a2];
        assert!(approx(sinr(&sc, &gains, &powers, 0, 0), x, 1e-12));
        let oracle = (100.0 * (1.0 - (-x).exp()).ln()).exp() * 1e6 / 0.1;
        let u = instantaneous_utility(&spec, &sc, &gains, &powers, 0);
        assert!(approx(u, oracle, 1e-10), "u={u} oracle={oracle}");
    }

    #[test]
    fn ee_with_zero_power_and_zero_p0_is_zero() {
        let sc = two_user_scenario();
        let spec = UtilitySpec::new(
            UtilityKind::EnergyEfficiency,
            NetRate::Outage { c: 1.0 },
            vec![0.5, 0.5],
        )
        .unwrap();
        let gains = [1.0, 0.5, 0.5, 1.0];
        let z = [0.0];
        let powers: Vec<&[f64]> = vec![&z, &z];
        assert_eq!(instantaneous_utility(&spec, &sc, &gains, &powers, 0), 0.0);
    }

    #[test]
    fn ee_with_log_psi_and_positive_p0_finite_everywhere() {
        let mut cfg = ScenarioConfig {
            topology: Topology::Interference,
            k: 2,
            bands: 1,
            p_max: 0.1,
            p_total: 0.1,
            noise: 0.01,
            p0: 0.01,
            r0: 1e6,
            gain_means: symmetric_gain_means(2, 1, 1.0, 0.5),
            power_levels: uniform_power_grid(4, 0.1),
        };
        cfg.p0 = 0.01;
        let sc = Scenario::new(cfg).unwrap();
        let spec = UtilitySpec::new(
            UtilityKind::EnergyEfficiency,
            NetRate::Shannon,
            vec![0.5, 0.5],
        )
        .unwrap();
        let gains = [1.0, 0.5, 0.5, 1.0];
        let alphabet = ActionAlphabet::enumerate(&sc);
        for ai in 0..alphabet.len() {
            for aj in 0..alphabet.len() {
                let powers: Vec<&[f64]> = vec![alphabet.action(ai), alphabet.action(aj)];
                for i in 0..2 {
                    assert!(instantaneous_utility(&spec, &sc, &gains, &powers, i).is_finite());
                }
            }
        }
    }

    // ------------------------------------------------------ weighted utility

    #[test]
    fn weighted_utility_simplex_vertex_equals_single_user() {
        let sc = two_user_scenario();
        let spec = UtilitySpec::new(
            UtilityKind::EnergyEfficiency,
            NetRate::Outage { c: 1.0 },
            vec![1.0, 0.0],
        )
        .unwrap();
        let gains = [1.0, 0.5, 0.6, 0.9];
        let a1 = [0.1];
        let a2 = [0.05];
        let powers: Vec<&[f64]> = vec![&a1, &a2];
        let w = weighted_utility(&spec, &sc, &gains, &powers);
        let u1 = instantaneous_utility(&spec, &sc, &gains, &powers, 0);
        assert_eq!(w, u1);
    }

    #[test]
    fn weighted_utility_symmetric_case() {
        let sc = two_user_scenario();
        let spec = UtilitySpec::new(
            UtilityKind::EnergyEfficiency,
            NetRate::Outage { c: 1.0 },
            vec![0.5, 0.5],
        )
        .unwrap();
        let gains = [1.0, 0.5, 0.5, 1.0]; // fully symmetric
        let a = [0.05];
        let powers: Vec<&[f64]> = vec![&a, &a];
        let u1 = instantaneous_utility(&spec, &sc, &gains, &powers, 0);
        let u2 = instantaneous_utility(&spec, &sc, &gains, &powers, 1);
        assert!(approx(u1, u2, 1e-12));
        assert!(approx(weighted_utility(&spec, &sc, &gains, &powers), u1, 1e-12));
    }

    #[test]
    fn weighted_utility_mac_silent_second_user() {
        // lambda=(0.3,0.7) on the two-user MAC with both gains 1 and only
        // transmitter 1 active at p_max: w = 0.3 log2(1+SNR).
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::MultipleAccess,
            k: 2,
            bands: 1,
            p_max: 1.0,
            p_total: 1.0,
            noise: 0.01,
            p0: 0.0,
            r0: 1.0,
            gain_means: vec![1.0, 1.0],
            power_levels: vec![0.0, 1.0],
        })
        .unwrap();
        let spec =
            UtilitySpec::new(UtilityKind::ShannonRate, NetRate::Shannon, vec![0.3, 0.7]).unwrap();
        let gains = [1.0, 1.0];
        let a1 = [1.0];
        let a2 = [0.0];
        let powers: Vec<&[f64]> = vec![&a1, &a2];
        let snr: f64 = 1.0 / 0.01;
        assert!(approx(
            weighted_utility(&spec, &sc, &gains, &powers),
            0.3 * (1.0 + snr).log2(),
            1e-12
        ));
    }

    #[test]
    fn weighted_utility_linear_in_weights() {
        let sc = two_user_scenario();
        let gains = [1.2, 0.3, 0.8, 0.7];
        let a1 = [0.1];
        let a2 = [0.05];
        let powers: Vec<&[f64]> = vec![&a1, &a2];
        let l1 = vec![0.2, 0.8];
        let l2 = vec![0.9, 0.1];
        let alpha = 0.37;
        let mix: Vec<f64> = l1
            .iter()
            .zip(&l2)
            .map(|(a, b)| alpha * a + (1.0 - alpha) * b)
            .collect();
        let mk = |w: Vec<f64>| {
            UtilitySpec::new(UtilityKind::EnergyEfficiency, NetRate::Outage { c: 1.0 }, w).unwrap()
        };
        let wa = weighted_utility(&mk(l1), &sc, &gains, &powers);
        let wb = weighted_utility(&mk(l2), &sc, &gains, &powers);
        let wm = weighted_utility(&mk(mix), &sc, &gains, &powers);
        assert!(approx(wm, alpha * wa + (1.0 - alpha) * wb, 1e-12));
    }

    // ------------------------------------------------------------ smallcell

    #[test]
    fn smallcell_listed_coordinates_geometry() {
        // First mobile station of the nine-cell deployment at (3.8, 3.2);
        // first base station at the center of the bottom-left cell (2.5, 2.5).
        let ms: Vec<(f64, f64)> = vec![
            (3.8, 3.2),
            (7.9, 1.4),
            (10.2, 0.7),
            (2.3, 5.9),
            (6.6, 5.9),
            (14.1, 9.3),
            (1.8, 10.6),
            (7.1, 14.6),
            (12.5, 10.7),
        ];
        let layout = SmallCellLayout {
            isd_m: 25.0,
            d0_m: 5.0,
            ms_coords: ms,
            sbs_coords: None,
        };
        let means = smallcell_gain_means(&layout).unwrap();
        let scale = 25.0 / 5.0;
        let d11 = scale * ((3.8f64 - 2.5).powi(2) + (3.2f64 - 2.5).powi(2)).sqrt();
        assert!(approx(means[0], (5.0 / d11).powi(2), 1e-12));
    }

    #[test]
    fn smallcell_unit_gain_at_normalization_distance() {
        // A link of physical length d0 has unit mean gain.
        let layout = SmallCellLayout {
            isd_m: 5.0, // scale 1: normalized units are meters
            d0_m: 5.0,
            ms_coords: vec![(7.5, 2.5)], // 5 m to the right of SBS at (2.5,2.5)
            sbs_coords: Some(vec![(2.5, 2.5)]),
        };
        let means = smallcell_gain_means(&layout).unwrap();
        assert!(approx(means[0], 1.0, 1e-12));
    }

    #[test]
    fn smallcell_inverse_square_scaling() {
        let ms = vec![(3.8, 3.2), (7.9, 1.4), (10.2, 0.7), (2.3, 5.9)];
        let near = SmallCellLayout {
            isd_m: 10.0,
            d0_m: 5.0,
            ms_coords: ms.clone(),
            sbs_coords: None,
        };
        let far = SmallCellLayout {
            isd_m: 20.0, // doubles every distance
            d0_m: 5.0,
            ms_coords: ms,
            sbs_coords: None,
        };
        let gn = smallcell_gain_means(&near).unwrap();
        let gf = smallcell_gain_means(&far).unwrap();
        for (a, b) in gn.iter().zip(&gf) {
            assert!(approx(*a, 4.0 * b, 1e-12));
        }
    }

    #[test]
    fn smallcell_coincident_nodes_rejected() {
        let layout = SmallCellLayout {
            isd_m: 10.0,
            d0_m: 5.0,
            ms_coords: vec![(2.5, 2.5)],
            sbs_coords: Some(vec![(2.5, 2.5)]),
        };
        assert!(matches!(
            smallcell_gain_means(&layout),
            Err(ModelError::CoincidentNodes { .. })
        ));
    }

    // -------------------------------------------------------------- actions

    #[test]
    fn action_enumeration_single_band_is_power_grid() {
        let sc = two_user_scenario();
        let alphabet = ActionAlphabet::enumerate(&sc);
        assert_eq!(alphabet.len(), 3);
        assert_eq!(alphabet.action(2), &[0.1]);
        assert_eq!(alphabet.full_power_index(), 2);
    }

    #[test]
    fn action_enumeration_respects_total_budget() {
        let sc = Scenario::new(ScenarioConfig {
            topology: Topology::MultipleAccess,
            k: 2,
            bands: 2,
            p_max: 1.0,
            p_total: 1.0,
            noise: 0.1,
            p0: 0.0,
            r0: 1.0,
            gain_means: vec![1.0; 4],
            power_levels: vec![0.0, 0.5, 1.0],
        })
        .unwrap();
        let alphabet = ActionAlphabet::enumerate(&sc);
        // pairs with sum <= 1: (0,0)(0,.5)(0,1)(.5,0)(.5,.5)(1,0)
        assert_eq!(alphabet.len(), 6);
        for idx in 0..alphabet.len() {
            assert!(alphabet.total_power(idx) <= sc.p_total() + 1e-12);
        }
        // full power = largest total, latest enumerated = (1.0, 0.0)
        assert_eq!(alphabet.action(alphabet.full_power_index()), &[1.0, 0.0]);
    }

    // --------------------------------------------------------------- states

    #[test]
    fn state_alphabet_product_probabilities() {
        let states = StateAlphabet::product(
            vec![vec![0.3, 1.0], vec![0.5, 2.0, 4.0]],
            vec![vec![0.5, 0.5], vec![0.2, 0.3, 0.5]],
        )
        .unwrap();
        assert_eq!(states.len(), 6);
        let total: f64 = states.probs().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // link 0 most significant: state 4 -> digits (1, 1)
        assert_eq!(states.digit(4, 0), 1);
        assert_eq!(states.digit(4, 1), 1);
        assert_eq!(states.gains(4), &[1.0, 2.0]);
        assert!((states.prob(4) - 0.5 * 0.3).abs() < 1e-15);
    }
}
