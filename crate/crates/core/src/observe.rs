//! Gain quantization and observation structures.
//!
//! The channel-state alphabet is produced by a maximum-entropy scalar
//! quantizer: cell boundaries sit at the quantiles of the continuous gain
//! law, so every cell is equiprobable, and each cell is represented by its
//! conditional mean gain. For Rayleigh fading the modulus of the channel
//! coefficient is Rayleigh, hence the gain `g = |h|²` is exponential;
//! quantizing the modulus at its quantiles and quantizing the gain at its
//! quantiles produce the same cells, so everything here works directly on
//! the gain law.
//!
//! An [`ObservationModel`] describes, per transmitter, which links are seen
//! and how: exactly (the cell index of the true gain) or through additive
//! Gaussian estimation noise whose variance is calibrated by bisection to a
//! target estimation SNR
//!
//! ```text
//! ESNR = E[g²] / E[(ĝ - g)²]
//! ```
//!
//! where `ĝ` is the cell representative of the quantized noisy estimate, so
//! the reported ESNR includes quantization distortion. Noisy estimates below
//! the support are truncated into the lowest cell.

use crate::model::{ModelError, Scenario, StateAlphabet, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObserveError {
    #[error("quantizer needs at least one cell")]
    EmptyQuantizer,
    #[error("gain law has no invertible CDF: {0}")]
    NonInvertibleCdf(String),
    #[error(
        "target ESNR {target_db:.2} dB unattainable: quantization alone caps it at {ceiling_db:.2} dB"
    )]
    EsnrUnattainable { target_db: f64, ceiling_db: f64 },
    #[error("noisy observation requires a quantized (continuous-law) link, link {0} is discrete")]
    DiscreteLinkNoisy(usize),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

// ---------------------------------------------------------------------------
// Continuous gain laws
// ---------------------------------------------------------------------------

/// Continuous law of one link's channel gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainLaw {
    /// `g = |h|²` with `h` complex Gaussian: exponential with the given mean.
    Exponential { mean: f64 },
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// Degenerate point mass (zero-variance surrogate for a fixed channel).
    Constant { value: f64 },
}

impl GainLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            GainLaw::Exponential { mean } => mean,
            GainLaw::Uniform { lo, hi } => 0.5 * (lo + hi),
            GainLaw::Constant { value } => value,
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            GainLaw::Exponential { mean } => 2.0 * mean * mean,
            GainLaw::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
            GainLaw::Constant { value } => value * value,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            GainLaw::Exponential { mean } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-x / mean).exp()
                }
            }
            GainLaw::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            GainLaw::Constant { value } => {
                if x < value {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Inverse CDF; errors for laws without one.
    pub fn quantile(&self, p: f64) -> Result<f64, ObserveError> {
        debug_assert!((0.0..=1.0).contains(&p));
        match *self {
            GainLaw::Exponential { mean } => {
                if !(mean > 0.0) {
                    return Err(ObserveError::NonInvertibleCdf(
                        "exponential mean must be positive".into(),
                    ));
                }
                Ok(-mean * (1.0 - p).ln())
            }
            GainLaw::Uniform { lo, hi } => {
                if !(hi > lo) {
                    return Err(ObserveError::NonInvertibleCdf(
                        "uniform needs hi > lo".into(),
                    ));
                }
                Ok(lo + p * (hi - lo))
            }
            GainLaw::Constant { .. } => Err(ObserveError::NonInvertibleCdf(
                "point mass has a step CDF".into(),
            )),
        }
    }

    /// `E[X | lo <= X < hi]`; `hi` may be infinite.
    pub fn conditional_mean(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            GainLaw::Exponential { mean } => {
                let a = lo.max(0.0);
                let ea = (-a / mean).exp();
                if hi.is_infinite() {
                    // memoryless tail
                    return a + mean;
                }
                let eb = (-hi / mean).exp();
                ((a + mean) * ea - (hi + mean) * eb) / (ea - eb)
            }
            GainLaw::Uniform { lo: l, hi: h } => {
                let a = lo.max(l);
                let b = hi.min(h);
                0.5 * (a + b)
            }
            GainLaw::Constant { value } => value,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            GainLaw::Exponential { mean } => {
                let u: f64 = rng.gen::<f64>();
                -mean * (1.0 - u).ln()
            }
            GainLaw::Uniform { lo, hi } => lo + rng.gen::<f64>() * (hi - lo),
            GainLaw::Constant { value } => value,
        }
    }

    /// Samples from the law conditioned on `[lo, hi)` by inverse CDF on a
    /// sub-interval of the uniform range.
    pub fn sample_conditional<R: Rng>(&self, lo: f64, hi: f64, rng: &mut R) -> f64 {
        let (plo, phi) = (self.cdf(lo), if hi.is_infinite() { 1.0 } else { self.cdf(hi) });
        let u = plo + rng.gen::<f64>() * (phi - plo);
        // u < 1 almost surely; quantile is safe for the supported laws
        self.quantile(u.min(1.0 - 1e-16)).unwrap_or(lo)
    }
}

// ---------------------------------------------------------------------------
// Maximum-entropy quantizer
// ---------------------------------------------------------------------------

/// Equiprobable scalar quantizer over a continuous gain law.
#[derive(Debug, Clone)]
pub struct GainQuantizer {
    law: GainLaw,
    boundaries: Vec<f64>,
    representatives: Vec<f64>,
    cell_probs: Vec<f64>,
}

/// Builds the maximum-entropy (equiprobable) quantizer with `n_cells` cells:
/// boundaries at the `k/N` quantiles, representatives at conditional means.
pub fn max_entropy_quantize(law: GainLaw, n_cells: usize) -> Result<GainQuantizer, ObserveError> {
    if n_cells < 1 {
        return Err(ObserveError::EmptyQuantizer);
    }
    if n_cells == 1 {
        return Ok(GainQuantizer {
            law,
            boundaries: Vec::new(),
            representatives: vec![law.mean()],
            cell_probs: vec![1.0],
        });
    }
    let mut boundaries = Vec::with_capacity(n_cells - 1);
    for k in 1..n_cells {
        boundaries.push(law.quantile(k as f64 / n_cells as f64)?);
    }
    let mut representatives = Vec::with_capacity(n_cells);
    let support_lo = match law {
        GainLaw::Uniform { lo, .. } => lo,
        _ => 0.0,
    };
    let support_hi = match law {
        GainLaw::Uniform { hi, .. } => hi,
        _ => f64::INFINITY,
    };
    for k in 0..n_cells {
        let lo = if k == 0 { support_lo } else { boundaries[k - 1] };
        let hi = if k == n_cells - 1 {
            support_hi
        } else {
            boundaries[k]
        };
        representatives.push(law.conditional_mean(lo, hi));
    }
    Ok(GainQuantizer {
        law,
        boundaries,
        representatives,
        cell_probs: vec![1.0 / n_cells as f64; n_cells],
    })
}

impl GainQuantizer {
    pub fn n_cells(&self) -> usize {
        self.representatives.len()
    }
    pub fn law(&self) -> GainLaw {
        self.law
    }
    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }
    pub fn representatives(&self) -> &[f64] {
        &self.representatives
    }
    pub fn cell_probs(&self) -> &[f64] {
        &self.cell_probs
    }

    /// Cell index of a gain value; values below the support fall into the
    /// lowest cell.
    #[inline]
    pub fn cell_of(&self, g: f64) -> usize {
        // boundaries are ascending; partition_point = count of b <= g
        self.boundaries.partition_point(|&b| b <= g)
    }

    /// `[lo, hi)` range of cell `k` (ends at the support limits).
    pub fn cell_range(&self, k: usize) -> (f64, f64) {
        let n = self.n_cells();
        let support_lo = match self.law {
            GainLaw::Uniform { lo, .. } => lo,
            _ => 0.0,
        };
        let lo = if k == 0 { support_lo } else { self.boundaries[k - 1] };
        let hi = if k == n - 1 {
            match self.law {
                GainLaw::Uniform { hi, .. } => hi,
                _ => f64::INFINITY,
            }
        } else {
            self.boundaries[k]
        };
        (lo, hi)
    }
}

// ---------------------------------------------------------------------------
// Channel model: per-link discrete laws
// ---------------------------------------------------------------------------

/// Discrete model of one fading link.
#[derive(Debug, Clone)]
pub enum LinkModel {
    /// A continuous law seen through a maximum-entropy quantizer.
    Quantized { law: GainLaw, quantizer: GainQuantizer },
    /// An inherently discrete gain law (values with probabilities).
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl LinkModel {
    pub fn n_cells(&self) -> usize {
        match self {
            LinkModel::Quantized { quantizer, .. } => quantizer.n_cells(),
            LinkModel::Discrete { values, .. } => values.len(),
        }
    }
    pub fn values(&self) -> &[f64] {
        match self {
            LinkModel::Quantized { quantizer, .. } => quantizer.representatives(),
            LinkModel::Discrete { values, .. } => values,
        }
    }
    pub fn probs(&self) -> &[f64] {
        match self {
            LinkModel::Quantized { quantizer, .. } => quantizer.cell_probs(),
            LinkModel::Discrete { probs, .. } => probs,
        }
    }
}

/// All links of a scenario discretized, plus the induced product state
/// alphabet. Link order matches [`Scenario::link_index`].
#[derive(Debug, Clone)]
pub struct ChannelModel {
    links: Vec<LinkModel>,
    states: StateAlphabet,
}

impl ChannelModel {
    /// Quantizes every link's exponential gain law (mean from the scenario)
    /// with `cells` maximum-entropy cells.
    pub fn quantized(scenario: &Scenario, cells: usize) -> Result<Self, ObserveError> {
        let mut links = Vec::with_capacity(scenario.n_links());
        for &mean in scenario.link_means() {
            let law = GainLaw::Exponential { mean };
            let quantizer = max_entropy_quantize(law, cells)?;
            links.push(LinkModel::Quantized { law, quantizer });
        }
        Self::from_links(links)
    }

    /// Applies the same explicit discrete marginal (`values`, `probs`) to
    /// every link. Used for scenarios whose channel really is discrete.
    pub fn discrete_iid(
        scenario: &Scenario,
        values: Vec<f64>,
        probs: Vec<f64>,
    ) -> Result<Self, ObserveError> {
        let links = (0..scenario.n_links())
            .map(|_| LinkModel::Discrete {
                values: values.clone(),
                probs: probs.clone(),
            })
            .collect();
        Self::from_links(links)
    }

    pub fn from_links(links: Vec<LinkModel>) -> Result<Self, ObserveError> {
        let values: Vec<Vec<f64>> = links.iter().map(|l| l.values().to_vec()).collect();
        let probs: Vec<Vec<f64>> = links.iter().map(|l| l.probs().to_vec()).collect();
        let states = StateAlphabet::product(values, probs)?;
        Ok(Self { links, states })
    }

    pub fn states(&self) -> &StateAlphabet {
        &self.states
    }
    pub fn n_links(&self) -> usize {
        self.links.len()
    }
    pub fn link(&self, l: usize) -> &LinkModel {
        &self.links[l]
    }

    /// Draws one block: continuous per-link gains plus their cell indices.
    pub fn sample_block<R: Rng>(&self, rng: &mut R, gains: &mut [f64], cells: &mut [usize]) {
        for (l, link) in self.links.iter().enumerate() {
            match link {
                LinkModel::Quantized { law, quantizer } => {
                    let g = law.sample(rng);
                    gains[l] = g;
                    cells[l] = quantizer.cell_of(g);
                }
                LinkModel::Discrete { values, probs } => {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut idx = probs.len() - 1;
                    for (k, &p) in probs.iter().enumerate() {
                        acc += p;
                        if u < acc {
                            idx = k;
                            break;
                        }
                    }
                    gains[l] = values[idx];
                    cells[l] = idx;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Observation structures
// ---------------------------------------------------------------------------

/// Which part of the global channel state each transmitter sees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CsiStructure {
    /// Every link gain: `s_i = a0`.
    Global,
    /// All direct gains `(g_11, ..., g_KK)`.
    Direct,
    /// Gains arriving at the own receiver: `(g_1i, ..., g_Ki)`.
    Local,
    /// Own direct gains only: `s_i = (g_ii^1, ..., g_ii^B)`.
    Individual,
    /// Own direct gains through additive Gaussian estimation noise at the
    /// given target ESNR (dB). `f64::INFINITY` means noiseless.
    NoisyIndividual { esnr_db: f64 },
    /// No channel knowledge at all: `|S_i| = 1`.
    Constant,
}

/// How one observed link is perceived.
#[derive(Debug, Clone)]
pub enum LinkObsKind {
    /// The true cell index is observed.
    Exact,
    /// Cell of the noisy estimate; `confusion[obs * n + true]` is
    /// `P(observed cell | true cell)` and `sigma` is the calibrated noise
    /// standard deviation used when simulating on continuous channels.
    Noisy { confusion: Vec<f64>, sigma: f64 },
}

/// One observed link of one transmitter.
#[derive(Debug, Clone)]
pub struct ObsLink {
    pub link: usize,
    pub n_cells: usize,
    pub kind: LinkObsKind,
}

/// Per-transmitter observation: an ordered list of observed links. The
/// observation index is the mixed-radix word of the per-link observed cells
/// (first listed link most significant).
#[derive(Debug, Clone)]
pub struct TxObservation {
    links: Vec<ObsLink>,
    n_obs: usize,
}

impl TxObservation {
    fn new(links: Vec<ObsLink>) -> Self {
        let n_obs = links.iter().map(|l| l.n_cells).product::<usize>().max(1);
        Self { links, n_obs }
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }
    pub fn links(&self) -> &[ObsLink] {
        &self.links
    }

    pub fn is_deterministic(&self) -> bool {
        self.links
            .iter()
            .all(|l| matches!(l.kind, LinkObsKind::Exact))
    }

    /// Observation index produced by a deterministic structure for the state
    /// with the given per-link digit lookup.
    #[inline]
    pub fn project(&self, state: &StateAlphabet, a0: usize) -> usize {
        let mut s = 0usize;
        for l in &self.links {
            s = s * l.n_cells + state.digit(a0, l.link);
        }
        s
    }

    /// `P(s | a0)` for this transmitter.
    pub fn prob(&self, state: &StateAlphabet, s: usize, a0: usize) -> f64 {
        let mut rem = s;
        // decode mixed-radix from least significant (last listed link)
        let mut p = 1.0;
        for l in self.links.iter().rev() {
            let obs_digit = rem % l.n_cells;
            rem /= l.n_cells;
            let true_digit = state.digit(a0, l.link);
            p *= match &l.kind {
                LinkObsKind::Exact => {
                    if obs_digit == true_digit {
                        1.0
                    } else {
                        0.0
                    }
                }
                LinkObsKind::Noisy { confusion, .. } => {
                    confusion[obs_digit * l.n_cells + true_digit]
                }
            };
            if p == 0.0 {
                return 0.0;
            }
        }
        p
    }

    /// Draws one observation index from `P(·|a0)`.
    pub fn sample_obs<R: Rng>(&self, state: &StateAlphabet, a0: usize, rng: &mut R) -> usize {
        let mut s = 0usize;
        for l in &self.links {
            let true_digit = state.digit(a0, l.link);
            let obs = match &l.kind {
                LinkObsKind::Exact => true_digit,
                LinkObsKind::Noisy { confusion, .. } => {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut picked = l.n_cells - 1;
                    for obs in 0..l.n_cells {
                        acc += confusion[obs * l.n_cells + true_digit];
                        if u < acc {
                            picked = obs;
                            break;
                        }
                    }
                    picked
                }
            };
            s = s * l.n_cells + obs;
        }
        s
    }

    /// Calls `f(s, P(s|a0))` for every observation with nonzero probability.
    pub fn for_each_obs<F: FnMut(usize, f64)>(&self, state: &StateAlphabet, a0: usize, mut f: F) {
        fn recurse<F: FnMut(usize, f64)>(
            links: &[ObsLink],
            state: &StateAlphabet,
            a0: usize,
            prefix: usize,
            weight: f64,
            f: &mut F,
        ) {
            match links.first() {
                None => f(prefix, weight),
                Some(l) => {
                    let true_digit = state.digit(a0, l.link);
                    match &l.kind {
                        LinkObsKind::Exact => recurse(
                            &links[1..],
                            state,
                            a0,
                            prefix * l.n_cells + true_digit,
                            weight,
                            f,
                        ),
                        LinkObsKind::Noisy { confusion, .. } => {
                            for obs in 0..l.n_cells {
                                let p = confusion[obs * l.n_cells + true_digit];
                                if p > 0.0 {
                                    recurse(
                                        &links[1..],
                                        state,
                                        a0,
                                        prefix * l.n_cells + obs,
                                        weight * p,
                                        f,
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
        recurse(&self.links, state, a0, 0, 1.0, &mut f);
    }
}

/// Observation structure of the whole team.
#[derive(Debug, Clone)]
pub struct ObservationModel {
    structure: CsiStructure,
    per_tx: Vec<TxObservation>,
}

impl ObservationModel {
    pub fn structure(&self) -> CsiStructure {
        self.structure
    }
    pub fn k(&self) -> usize {
        self.per_tx.len()
    }
    pub fn tx(&self, i: usize) -> &TxObservation {
        &self.per_tx[i]
    }
    pub fn n_obs(&self, i: usize) -> usize {
        self.per_tx[i].n_obs()
    }
    pub fn obs_sizes(&self) -> Vec<usize> {
        self.per_tx.iter().map(|t| t.n_obs()).collect()
    }
    pub fn is_deterministic(&self) -> bool {
        self.per_tx.iter().all(|t| t.is_deterministic())
    }

    /// Dense `|S_i| x |A0|` column-stochastic table, for tests and small
    /// alphabets.
    pub fn dense_table(&self, i: usize, state: &StateAlphabet) -> Vec<Vec<f64>> {
        let tx = &self.per_tx[i];
        let mut t = vec![vec![0.0; state.len()]; tx.n_obs()];
        for a0 in 0..state.len() {
            tx.for_each_obs(state, a0, |s, p| t[s][a0] += p);
        }
        t
    }
}

/// Builds the deterministic observation structure named by `structure`.
///
/// `NoisyIndividual` is rejected here; use [`build_noisy_individual`], which
/// calibrates the noise.
pub fn build_observation(
    structure: CsiStructure,
    scenario: &Scenario,
    channel: &ChannelModel,
) -> Result<ObservationModel, ObserveError> {
    if let CsiStructure::NoisyIndividual { .. } = structure {
        return Err(ObserveError::Invalid(
            "noisy individual CSI requires calibration; call build_noisy_individual".into(),
        ));
    }
    let k = scenario.k();
    let b = scenario.bands();
    let exact = |link: usize| ObsLink {
        link,
        n_cells: channel.link(link).n_cells(),
        kind: LinkObsKind::Exact,
    };
    let per_tx = (0..k)
        .map(|i| {
            let links: Vec<ObsLink> = match structure {
                CsiStructure::Global => (0..channel.n_links()).map(exact).collect(),
                CsiStructure::Direct => (0..k)
                    .flat_map(|j| (0..b).map(move |band| (j, band)))
                    .map(|(j, band)| exact(scenario.link_index(j, j, band)))
                    .collect(),
                CsiStructure::Local => match scenario.topology() {
                    // all gains arriving at receiver i
                    Topology::Interference => (0..k)
                        .flat_map(|j| (0..b).map(move |band| (j, band)))
                        .map(|(j, band)| exact(scenario.link_index(j, i, band)))
                        .collect(),
                    // the common receiver hears every link
                    Topology::MultipleAccess => (0..channel.n_links()).map(exact).collect(),
                },
                CsiStructure::Individual => (0..b)
                    .map(|band| exact(scenario.link_index(i, i, band)))
                    .collect(),
                CsiStructure::Constant => Vec::new(),
                CsiStructure::NoisyIndividual { .. } => unreachable!(),
            };
            // deduplicate links observed twice (MAC direct/local overlap)
            let mut seen = Vec::new();
            let links = links
                .into_iter()
                .filter(|l| {
                    if seen.contains(&l.link) {
                        false
                    } else {
                        seen.push(l.link);
                        true
                    }
                })
                .collect();
            TxObservation::new(links)
        })
        .collect();
    Ok(ObservationModel { structure, per_tx })
}

/// Measured ESNR (linear) of quantized noisy estimates: fresh Monte Carlo
/// estimate of `E[g²] / E[(rep(quantize(g + sigma·z)) - g)²]`.
pub fn measure_esnr(
    law: GainLaw,
    quantizer: &GainQuantizer,
    sigma: f64,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut err2 = 0.0;
    for _ in 0..n_samples {
        let g = law.sample(&mut rng);
        let z: f64 = rng.sample(StandardNormal);
        let rep = quantizer.representatives()[quantizer.cell_of(g + sigma * z)];
        err2 += (rep - g) * (rep - g);
    }
    law.second_moment() / (err2 / n_samples as f64)
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// ESNR measurement with draws held fixed across sigma values, so the
/// calibration bisection sees a deterministic monotone function.
struct EsnrProbe {
    gains: Vec<f64>,
    noise: Vec<f64>,
    second_moment: f64,
}

impl EsnrProbe {
    fn new(law: GainLaw, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let gains: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        Self {
            gains,
            noise,
            second_moment: law.second_moment(),
        }
    }

    fn esnr_db(&self, quantizer: &GainQuantizer, sigma: f64) -> f64 {
        let mut err2 = 0.0;
        for (&g, &z) in self.gains.iter().zip(&self.noise) {
            let rep = quantizer.representatives()[quantizer.cell_of(g + sigma * z)];
            err2 += (rep - g) * (rep - g);
        }
        db(self.second_moment / (err2 / self.gains.len() as f64))
    }
}

/// Noise standard deviation whose realized ESNR matches `esnr_db` within
/// 0.02 dB, found by bisection on common random numbers. Errors when the
/// target is above the zero-noise (quantization-only) ceiling.
pub fn calibrate_esnr_sigma(
    law: GainLaw,
    quantizer: &GainQuantizer,
    esnr_db: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, ObserveError> {
    let probe = EsnrProbe::new(law, n_samples, seed);
    let ceiling = probe.esnr_db(quantizer, 0.0);
    if esnr_db >= ceiling {
        return Err(ObserveError::EsnrUnattainable {
            target_db: esnr_db,
            ceiling_db: ceiling,
        });
    }
    // bracket: grow sigma until the measured ESNR falls below the target
    let mut lo = 0.0;
    let mut hi = law.mean().max(1e-12);
    for _ in 0..64 {
        if probe.esnr_db(quantizer, hi) < esnr_db {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let e = probe.esnr_db(quantizer, mid);
        if (e - esnr_db).abs() <= 0.02 {
            return Ok(mid);
        }
        if e > esnr_db {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Builds the noisy-individual observation structure: each transmitter sees
/// its own direct gains through AWGN at the target ESNR, quantized on the
/// link's quantizer. `esnr_db = +inf` degenerates to exact individual CSI.
///
/// The per-cell confusion columns are Monte Carlo estimates with
/// `mc_samples` draws per true cell.
pub fn build_noisy_individual(
    scenario: &Scenario,
    channel: &ChannelModel,
    esnr_db: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<ObservationModel, ObserveError> {
    let structure = CsiStructure::NoisyIndividual { esnr_db };
    if esnr_db.is_infinite() && esnr_db > 0.0 {
        let exact = build_observation(CsiStructure::Individual, scenario, channel)?;
        return Ok(ObservationModel {
            structure,
            per_tx: exact.per_tx,
        });
    }
    let k = scenario.k();
    let b = scenario.bands();
    let mut per_tx = Vec::with_capacity(k);
    for i in 0..k {
        let mut links = Vec::with_capacity(b);
        for band in 0..b {
            let link = scenario.link_index(i, i, band);
            let (law, quantizer) = match channel.link(link) {
                LinkModel::Quantized { law, quantizer } => (*law, quantizer),
                LinkModel::Discrete { .. } => {
                    return Err(ObserveError::DiscreteLinkNoisy(link))
                }
            };
            let cal_seed = seed ^ (0x9e3779b97f4a7c15u64.wrapping_mul(link as u64 + 1));
            let sigma =
                calibrate_esnr_sigma(law, quantizer, esnr_db, mc_samples.max(100_000), cal_seed)?;
            let n = quantizer.n_cells();
            let mut confusion = vec![0.0f64; n * n];
            let mut rng = ChaCha12Rng::seed_from_u64(cal_seed.wrapping_add(1));
            for true_cell in 0..n {
                let (lo, hi) = quantizer.cell_range(true_cell);
                let mut counts = vec![0usize; n];
                for _ in 0..mc_samples {
                    let g = law.sample_conditional(lo, hi, &mut rng);
                    let z: f64 = rng.sample(StandardNormal);
                    counts[quantizer.cell_of(g + sigma * z)] += 1;
                }
                for (obs, &c) in counts.iter().enumerate() {
                    confusion[obs * n + true_cell] = c as f64 / mc_samples as f64;
                }
            }
            links.push(ObsLink {
                link,
                n_cells: n,
                kind: LinkObsKind::Noisy { confusion, sigma },
            });
        }
        per_tx.push(TxObservation::new(links));
    }
    Ok(ObservationModel { structure, per_tx })
}
