//! Named matrices and sequence families used across tests and the CLI.
//!
//! Builders come in two flavors: typed constructors ([`cesaro`],
//! [`telescoping`], [`spiky_family`], …) and a small string grammar
//! ([`builtin_matrix`], [`builtin_family`]) so that every builder is
//! addressable as `name(args)` from a command line or a config file.
//!
//! Matrix builders attach truthful metadata (nonnegativity, row support,
//! rank-one structure) and spot-check it by sampling at construction.
//! Truncated counterexample matrices carry their truncation parameter `K`
//! in both the name and the [`NamedMatrix::truncation`] field so reports
//! can state it. Family builders validate declared memberships against
//! the target ideal before handing out sequences: a support or spike set
//! that is not a member of the ideal is rejected, not silently accepted.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ideal::{split_top_level, IdealSpec, MemberStatus, SequenceView, SetDescriptor};
use crate::matrix::BlockMatrix;

// =====================================================================
// Errors
// =====================================================================

#[derive(Debug, Clone, thiserror::Error)]
pub enum FamilyError {
    #[error("unknown builder name {0:?}")]
    UnknownName(String),
    #[error("bad parameters in {spec:?}: {reason}")]
    BadParams { spec: String, reason: String },
    #[error("invalid family {name:?}: {reason}")]
    InvalidFamily { name: String, reason: String },
}

// =====================================================================
// Named matrices
// =====================================================================

/// A matrix builder output: the matrix plus its identity for reports.
#[derive(Clone)]
pub struct NamedMatrix {
    /// Canonical grammar name, parameters included (e.g. `"euler(0.5)"`).
    pub name: String,
    pub matrix: BlockMatrix,
    /// One-line behavioral description for reports.
    pub note: String,
    /// Truncation parameter `K` for desk-scale versions of
    /// infinite-dimensional constructions; reports must mention it.
    pub truncation: Option<u64>,
}

impl std::fmt::Debug for NamedMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NamedMatrix")
            .field("name", &self.name)
            .field("truncation", &self.truncation)
            .finish_non_exhaustive()
    }
}

/// Sample a small index grid and panic if declared metadata is untruthful.
/// Builders in this module are the only callers; a violation is a bug in
/// the builder, not a data condition.
fn spot_check(named: &NamedMatrix) {
    let probes: &[u64] = &[0, 1, 2, 3, 5, 8, 13, 21];
    for &n in probes {
        for &k in probes {
            let b = named.matrix.block(n, k);
            if named.matrix.nonnegative() {
                assert!(
                    b.iter().all(|&x| x >= 0.0),
                    "{}: negative entry at ({n}, {k}) despite nonnegative flag",
                    named.name
                );
            }
        }
        if let Some(end) = named.matrix.row_support_end(n) {
            for off in [0u64, 2] {
                let b = named.matrix.block(n, end + off);
                assert!(
                    b.iter().all(|&x| x == 0.0),
                    "{}: nonzero entry at ({n}, {}) beyond declared row support",
                    named.name,
                    end + off
                );
            }
        }
    }
}

/// Arithmetic means: row `n` averages the first `n + 1` terms.
pub fn cesaro() -> NamedMatrix {
    let named = NamedMatrix {
        name: "cesaro".into(),
        matrix: BlockMatrix::scalar(|n, k| if k <= n { 1.0 / (n + 1) as f64 } else { 0.0 })
            .with_nonnegative(true)
            .with_row_support_end(|n| n + 1),
        note: "arithmetic means: row n averages the first n+1 terms".into(),
        truncation: None,
    };
    spot_check(&named);
    named
}

/// Binomial means with parameter `q ∈ (0, 1]`: row `n` weights term `k`
/// by the Binomial(n, q) mass at `k`. Row sums are exactly 1.
pub fn euler(q: f64) -> Result<NamedMatrix, FamilyError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(FamilyError::BadParams {
            spec: format!("euler({q})"),
            reason: "parameter must lie in (0, 1]".into(),
        });
    }
    let entry = move |n: u64, k: u64| -> f64 {
        if k > n {
            return 0.0;
        }
        if q == 1.0 {
            return if k == n { 1.0 } else { 0.0 };
        }
        // Binomial mass through log-gamma: stable far beyond the range
        // where the binomial coefficient overflows.
        let (nf, kf) = (n as f64, k as f64);
        let ln_choose =
            libm::lgamma(nf + 1.0) - libm::lgamma(kf + 1.0) - libm::lgamma(nf - kf + 1.0);
        (ln_choose + kf * q.ln() + (nf - kf) * (1.0 - q).ln()).exp()
    };
    let named = NamedMatrix {
        name: format!("euler({q})"),
        matrix: BlockMatrix::scalar(entry)
            .with_nonnegative(true)
            .with_row_support_end(|n| n + 1),
        note: format!("binomial means: row n carries the Binomial(n, {q}) weights"),
        truncation: None,
    };
    spot_check(&named);
    Ok(named)
}

/// Weighted means with cyclically repeating positive weights: entry
/// `(n, k)` is `p_k / (p_0 + … + p_n)`, where `p` repeats `weights`.
pub fn riesz(weights: &[f64]) -> Result<NamedMatrix, FamilyError> {
    if weights.is_empty() || weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(FamilyError::BadParams {
            spec: format!("riesz({weights:?})"),
            reason: "needs at least one strictly positive finite weight".into(),
        });
    }
    let cycle: Vec<f64> = weights.to_vec();
    // Prefix sums of one cycle make every partial sum O(1).
    let mut prefix = vec![0.0f64; cycle.len() + 1];
    for (i, &w) in cycle.iter().enumerate() {
        prefix[i + 1] = prefix[i] + w;
    }
    let cycle_sum = prefix[cycle.len()];
    let len = cycle.len() as u64;
    let weight_at = move |k: u64| cycle[(k % len) as usize];
    let partial = move |count: u64| -> f64 {
        // Sum of the first `count` weights.
        (count / len) as f64 * cycle_sum + prefix[(count % len) as usize]
    };
    let name = format!(
        "riesz({})",
        weights.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(",")
    );
    let named = NamedMatrix {
        name,
        matrix: BlockMatrix::scalar(move |n, k| {
            if k <= n {
                weight_at(k) / partial(n + 1)
            } else {
                0.0
            }
        })
        .with_nonnegative(true)
        .with_row_support_end(|n| n + 1),
        note: "weighted means with cyclically repeating positive weights".into(),
        truncation: None,
    };
    spot_check(&named);
    Ok(named)
}

/// Constant diagonal blocks: row `n` applies `t` to the `n`-th term and
/// ignores every other term.
pub fn diagonal(t: DMatrix<f64>) -> NamedMatrix {
    let (m, d) = (t.nrows(), t.ncols());
    let nonneg = t.iter().all(|&x| x >= 0.0);
    let t_entry = t.clone();
    let t_base = t.clone();
    let named = NamedMatrix {
        name: format!("diagonal({})", format_matrix(&t)),
        matrix: BlockMatrix::new(m, d, move |n, k| {
            if n == k {
                t_entry.clone()
            } else {
                DMatrix::zeros(m, d)
            }
        })
        .with_nonnegative(nonneg)
        .with_row_support_end(|n| n + 1)
        .with_rank_one(|n, k| if n == k { 1.0 } else { 0.0 }, t_base),
        note: "diagonal operator blocks: row n applies the fixed operator to the n-th term"
            .into(),
        truncation: None,
    };
    spot_check(&named);
    named
}

/// Truncated tail projections on ℝ^{K+1}: block `(n, 0)` projects onto
/// coordinates above `n` (rows `n ≥ K` and columns `k ≥ 1` vanish).
///
/// Every nonzero block is an orthogonal projection with operator norm 1,
/// yet each fixed vector's images vanish as `n` grows — the gap between
/// column-norm vanishing and pointwise column vanishing at desk scale.
/// The truncation is honest about its parent: no tail certificate and no
/// row-support declaration, so transforms report uncertified remainders.
pub fn tail_projection(k_trunc: u64) -> Result<NamedMatrix, FamilyError> {
    if k_trunc == 0 {
        return Err(FamilyError::BadParams {
            spec: format!("tail_projection({k_trunc})"),
            reason: "truncation must be at least 1".into(),
        });
    }
    let dim = usize::try_from(k_trunc + 1).expect("truncation fits usize");
    let named = NamedMatrix {
        name: format!("tail_projection({k_trunc})"),
        matrix: BlockMatrix::new(dim, dim, move |n, k| {
            let mut b = DMatrix::zeros(dim, dim);
            if k == 0 && n < k_trunc {
                for i in (n as usize + 1)..dim {
                    b[(i, i)] = 1.0;
                }
            }
            b
        })
        .with_nonnegative(true),
        note: format!(
            "tail projections on R^(K+1), K = {k_trunc}: block (n, 0) projects onto \
             coordinates above n, so operator norms stay 1 while each fixed vector's \
             image vanishes"
        ),
        truncation: Some(k_trunc),
    };
    spot_check(&named);
    Ok(named)
}

/// Identity plus telescoping corrections on ℝ^{K+1}: block `(n, n)` gets
/// the identity; for `n ≤ K`, block `(n, 0)` adds the projection onto
/// coordinates above `n` and block `(n, k)` for `1 ≤ k ≤ K − n` subtracts
/// the projection onto coordinate `n + k`.
///
/// Row sums collapse exactly to the identity for every `n`, and every
/// column is eventually zero — yet the row-0 image of the coordinate
/// family `x_k = e_k` is `e_0 − e_1 − … − e_K`, with one-norm `K + 1`:
/// boundedness of the classical-limit profile does not survive bounded
/// inputs as `K` grows. Like [`tail_projection`], no tail certificate is
/// declared.
pub fn telescoping(k_trunc: u64) -> Result<NamedMatrix, FamilyError> {
    if k_trunc == 0 {
        return Err(FamilyError::BadParams {
            spec: format!("telescoping({k_trunc})"),
            reason: "truncation must be at least 1".into(),
        });
    }
    let dim = usize::try_from(k_trunc + 1).expect("truncation fits usize");
    let named = NamedMatrix {
        name: format!("telescoping({k_trunc})"),
        matrix: BlockMatrix::new(dim, dim, move |n, k| {
            let mut b = DMatrix::zeros(dim, dim);
            if n == k {
                for i in 0..dim {
                    b[(i, i)] += 1.0;
                }
            }
            if n <= k_trunc {
                if k == 0 {
                    for i in (n as usize + 1)..dim {
                        b[(i, i)] += 1.0;
                    }
                } else if k <= k_trunc - n {
                    let j = (n + k) as usize;
                    b[(j, j)] -= 1.0;
                }
            }
            b
        })
        .with_row_support_end(move |n| {
            if n <= k_trunc {
                n.max(k_trunc - n) + 1
            } else {
                n + 1
            }
        }),
        note: format!(
            "identity plus telescoping corrections on R^(K+1), K = {k_trunc}: row sums \
             are exactly the identity, yet the row-0 image of the coordinate family has \
             one-norm K+1"
        ),
        truncation: Some(k_trunc),
    };
    spot_check(&named);
    Ok(named)
}

/// Coefficient profile for [`rank_one_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankOneCoeff {
    /// Arithmetic-mean coefficients `1/(n+1)` for `k ≤ n`.
    Mean,
    /// Sign-alternating means `(−1)^k/(n+1)` for `k ≤ n`.
    AlternatingMean,
}

/// Every block is a scalar coefficient times the fixed nonzero base
/// operator; the rank-one structure is declared so specialized checkers
/// can use it.
pub fn rank_one_matrix(coeff: RankOneCoeff, base: DMatrix<f64>) -> Result<NamedMatrix, FamilyError> {
    if base.iter().all(|&x| x == 0.0) {
        return Err(FamilyError::BadParams {
            spec: "rank_one".into(),
            reason: "base operator must be nonzero".into(),
        });
    }
    let (m, d) = (base.nrows(), base.ncols());
    let rule = move |n: u64, k: u64| -> f64 {
        if k > n {
            return 0.0;
        }
        let c = 1.0 / (n + 1) as f64;
        match coeff {
            RankOneCoeff::Mean => c,
            RankOneCoeff::AlternatingMean => {
                if k % 2 == 0 {
                    c
                } else {
                    -c
                }
            }
        }
    };
    let nonneg = coeff == RankOneCoeff::Mean && base.iter().all(|&x| x >= 0.0);
    let base_entry = base.clone();
    let profile = match coeff {
        RankOneCoeff::Mean => "mean",
        RankOneCoeff::AlternatingMean => "alternating",
    };
    let named = NamedMatrix {
        name: format!("rank_one({profile};{})", format_matrix(&base)),
        matrix: BlockMatrix::new(m, d, move |n, k| &base_entry * rule(n, k))
            .with_nonnegative(nonneg)
            .with_row_support_end(|n| n + 1)
            .with_rank_one(rule, base),
        note: "rank-one blocks: a scalar coefficient profile times a fixed base operator"
            .into(),
        truncation: None,
    };
    spot_check(&named);
    Ok(named)
}

/// Row profile for [`random_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RandomProfile {
    /// Lower-triangular rows of random convex weights (row sums exactly 1).
    Triangular,
    /// Disjoint moving column blocks: row `n` occupies its own block of
    /// 1–4 columns with random signs and absolute row sum
    /// `eta0 · (1 + 1/(n+1))`, so row group norms converge to `eta0` from
    /// above while every column and every initial segment dies out.
    MovingBlock { eta0: f64 },
}

/// Deterministic per-entry uniform in `[0, 1)` from a seeded stream.
fn unit_uniform(seed: u64, n: u64, k: u64) -> f64 {
    let mix = seed
        ^ n.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ k.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    ChaCha8Rng::seed_from_u64(mix).gen::<f64>()
}

/// Cycle of moving-block widths and the closed-form block start.
const BLOCK_WIDTHS: [u64; 4] = [1, 2, 3, 4];
fn moving_block_span(n: u64) -> (u64, u64) {
    const PREFIX: [u64; 4] = [0, 1, 3, 6];
    let cycle_total: u64 = 10;
    let start = cycle_total * (n / 4) + PREFIX[(n % 4) as usize];
    (start, BLOCK_WIDTHS[(n % 4) as usize])
}

/// Seeded random matrices with exactly reproducible entries.
pub fn random_matrix(seed: u64, profile: RandomProfile) -> NamedMatrix {
    match profile {
        RandomProfile::Triangular => {
            // Per-row normalizers are cached so entries are O(1) after the
            // first touch of a row.
            let norms: Arc<Mutex<HashMap<u64, f64>>> = Arc::new(Mutex::new(HashMap::new()));
            let named = NamedMatrix {
                name: format!("random({seed})"),
                matrix: BlockMatrix::scalar(move |n, k| {
                    if k > n {
                        return 0.0;
                    }
                    let total = *norms
                        .lock()
                        .expect("row-normalizer cache poisoned")
                        .entry(n)
                        .or_insert_with(|| {
                            crate::kahan::sum((0..=n).map(|j| 1.0 + unit_uniform(seed, n, j)))
                        });
                    (1.0 + unit_uniform(seed, n, k)) / total
                })
                .with_nonnegative(true)
                .with_row_support_end(|n| n + 1),
                note: "seeded lower-triangular rows of random convex weights".into(),
                truncation: None,
            };
            spot_check(&named);
            named
        }
        RandomProfile::MovingBlock { eta0 } => {
            assert!(eta0 > 0.0 && eta0.is_finite(), "moving-block level must be positive");
            let named = NamedMatrix {
                name: format!("random({seed},moving,{eta0})"),
                matrix: BlockMatrix::scalar(move |n, k| {
                    let (start, width) = moving_block_span(n);
                    if k < start || k >= start + width {
                        return 0.0;
                    }
                    let magnitude = eta0 * (1.0 + 1.0 / (n + 1) as f64) / width as f64;
                    if unit_uniform(seed, n, k) < 0.5 {
                        magnitude
                    } else {
                        -magnitude
                    }
                })
                .with_row_support_end(|n| {
                    let (start, width) = moving_block_span(n);
                    start + width
                }),
                note: format!(
                    "seeded moving-block rows: disjoint column supports with absolute \
                     row sums {eta0}·(1 + 1/(n+1))"
                ),
                truncation: None,
            };
            spot_check(&named);
            named
        }
    }
}

/// Sign-alternating arithmetic means: entry `(n, k)` is `(−1)^k/(n+1)`
/// for `k ≤ n`. Row signed sums vanish while absolute row sums stay 1 —
/// a bounded matrix whose absolute and signed behavior split.
pub fn alternating_mean() -> NamedMatrix {
    let named = NamedMatrix {
        name: "alternating_mean".into(),
        matrix: BlockMatrix::scalar(|n, k| {
            if k > n {
                0.0
            } else if k % 2 == 0 {
                1.0 / (n + 1) as f64
            } else {
                -1.0 / (n + 1) as f64
            }
        })
        .with_row_support_end(|n| n + 1),
        note: "sign-alternating arithmetic means: signed row sums vanish, absolute row \
               sums stay 1"
            .into(),
        truncation: None,
    };
    spot_check(&named);
    named
}

// =====================================================================
// Named sequence families
// =====================================================================

/// One sequence of a family, with its declared limit under the family's
/// ideal (`None` declares that no limit exists).
#[derive(Clone)]
pub struct FamilyMember {
    pub label: String,
    pub x: SequenceView,
    pub declared_limit: Option<Vec<f64>>,
}

/// A named batch of sequences sharing a construction and an ideal.
#[derive(Clone)]
pub struct NamedFamily {
    pub name: String,
    pub note: String,
    /// The ideal the declared limits and memberships refer to.
    pub ideal: IdealSpec,
    pub members: Vec<FamilyMember>,
}

impl std::fmt::Debug for NamedFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NamedFamily")
            .field("name", &self.name)
            .field("ideal", &self.ideal.name())
            .field("members", &self.members.len())
            .finish_non_exhaustive()
    }
}

/// Decay rate for [`convergent_family`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    /// `1/(n+1)`.
    Harmonic,
    /// `1/ln(n+2)` — slow decay that stresses horizon choices.
    Log,
    /// `r^n` for `0 < r < 1`.
    Geometric(f64),
}

impl Rate {
    fn value(self, n: u64) -> f64 {
        match self {
            Rate::Harmonic => 1.0 / (n + 1) as f64,
            Rate::Log => 1.0 / ((n + 2) as f64).ln(),
            Rate::Geometric(r) => r.powi(n.min(1 << 20) as i32),
        }
    }

    fn label(self) -> String {
        match self {
            Rate::Harmonic => "harmonic".into(),
            Rate::Log => "log".into(),
            Rate::Geometric(r) => format!("geometric:{r}"),
        }
    }
}

/// Norm-convergent sequences approaching `eta` at the given rate: a
/// monotone approach and a sign-staggered approach. Convergence in norm
/// makes the declared limit valid for every admissible ideal.
pub fn convergent_family(eta: DVector<f64>, rate: Rate, ideal: &IdealSpec) -> NamedFamily {
    let d = eta.len();
    let limit: Vec<f64> = eta.iter().cloned().collect();
    let eta_a = eta.clone();
    let eta_b = eta.clone();
    let members = vec![
        FamilyMember {
            label: "monotone-approach".into(),
            x: SequenceView::vector_fn(d, move |n| {
                DVector::from_iterator(d, eta_a.iter().map(|&e| e + rate.value(n)))
            })
            .with_bounded(true),
            declared_limit: Some(limit.clone()),
        },
        FamilyMember {
            label: "staggered-approach".into(),
            x: SequenceView::vector_fn(d, move |n| {
                DVector::from_iterator(
                    d,
                    eta_b.iter().enumerate().map(|(j, &e)| {
                        let sign = if (n + j as u64) % 2 == 0 { 1.0 } else { -1.0 };
                        e + sign * rate.value(n)
                    }),
                )
            })
            .with_bounded(true),
            declared_limit: Some(limit.clone()),
        },
    ];
    let name = format!(
        "convergent({};{})",
        limit.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
        rate.label()
    );
    NamedFamily {
        name,
        note: "norm-convergent sequences; the declared limit holds under every admissible \
               ideal"
            .into(),
        ideal: ideal.clone(),
        members,
    }
}

/// Validate that a descriptor is a member of the ideal, for family
/// declarations that depend on it.
fn require_member(
    family: &str,
    role: &str,
    s: &SetDescriptor,
    ideal: &IdealSpec,
) -> Result<(), FamilyError> {
    let membership = ideal.member(s);
    match membership.status {
        MemberStatus::In => Ok(()),
        MemberStatus::NotIn | MemberStatus::UnknownAtHorizon => Err(FamilyError::InvalidFamily {
            name: family.to_string(),
            reason: format!(
                "{role} {s} is not a verified member of the {} ideal ({})",
                ideal.name(),
                membership.reason
            ),
        }),
    }
}

/// Bounded sequences equal to `base` off a spike set and to `spike` on
/// it. The spike set must belong to the ideal, making `base` the
/// declared ideal limit even though the sequence never norm-converges.
pub fn spiky_family(
    base: f64,
    spike: f64,
    spike_set: SetDescriptor,
    ideal: &IdealSpec,
) -> Result<NamedFamily, FamilyError> {
    let name = format!("spiky_density({base},{spike},{spike_set})");
    require_member(&name, "spike set", &spike_set, ideal)?;
    let set = spike_set.clone();
    let members = vec![FamilyMember {
        label: "spiked".into(),
        x: SequenceView::scalar_fn(move |n| if set.contains(n) { spike } else { base })
            .with_bounded(true),
        declared_limit: Some(vec![base]),
    }];
    Ok(NamedFamily {
        name,
        note: "bounded sequences with ideal-small spike sets; the base value is the \
               declared ideal limit"
            .into(),
        ideal: ideal.clone(),
        members,
    })
}

/// Value pattern for [`c00_family`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C00Values {
    /// `±1` alternating along the support enumeration.
    Alternating,
    /// Constant `1` on the support.
    Ones,
}

/// Sequences supported on an ideal-member set (zero elsewhere), with unit
/// values on the support. Declared ideal limit 0.
pub fn c00_family(
    support: SetDescriptor,
    values: C00Values,
    ideal: &IdealSpec,
) -> Result<NamedFamily, FamilyError> {
    let pattern = match values {
        C00Values::Alternating => "alternating",
        C00Values::Ones => "ones",
    };
    let name = format!("c00_supported({support},{pattern})");
    require_member(&name, "support", &support, ideal)?;
    let set = support.clone();
    let x = SequenceView::scalar_fn(move |n| {
        if !set.contains(n) {
            return 0.0;
        }
        match values {
            C00Values::Ones => 1.0,
            C00Values::Alternating => {
                if n % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    })
    .with_bounded(true)
    .with_support(support.clone());
    Ok(NamedFamily {
        name,
        note: "unit values on an ideal-member support, zero elsewhere; declared ideal \
               limit 0"
            .into(),
        ideal: ideal.clone(),
        members: vec![FamilyMember {
            label: "supported".into(),
            x,
            declared_limit: Some(vec![0.0]),
        }],
    })
}

/// Bounded sequences with no ideal limit: the alternating sign sequence
/// oscillates on two sets that are both ideal-positive for every ideal
/// built here.
pub fn bounded_divergent_family(ideal: &IdealSpec) -> NamedFamily {
    NamedFamily {
        name: "bounded_divergent".into(),
        note: "bounded oscillation between two values on ideal-positive sets; no declared \
               limit"
            .into(),
        ideal: ideal.clone(),
        members: vec![FamilyMember {
            label: "alternating-signs".into(),
            x: SequenceView::scalar_fn(|n| if n % 2 == 0 { 1.0 } else { -1.0 })
                .with_bounded(true),
            declared_limit: None,
        }],
    }
}

/// Ideal-convergent but unbounded: the sequence blows up (value `n`)
/// along a set inside the ideal and approaches `eta` off it.
pub fn unbounded_family(
    eta: f64,
    blowup: SetDescriptor,
    ideal: &IdealSpec,
) -> Result<NamedFamily, FamilyError> {
    let name = format!("unbounded_ideal_convergent({eta},{blowup})");
    require_member(&name, "blow-up set", &blowup, ideal)?;
    let set = blowup.clone();
    let x = SequenceView::scalar_fn(move |n| {
        if set.contains(n) {
            n as f64
        } else {
            eta + 1.0 / (n + 1) as f64
        }
    })
    .with_bounded(false);
    Ok(NamedFamily {
        name,
        note: "ideal-convergent yet unbounded: blow-up confined to an ideal-member set"
            .into(),
        ideal: ideal.clone(),
        members: vec![FamilyMember {
            label: "blowup-on-small-set".into(),
            x,
            declared_limit: Some(vec![eta]),
        }],
    })
}

// =====================================================================
// String grammar
// =====================================================================

/// Split `name(args)` into the name and the raw argument text.
fn parse_call(spec: &str) -> Result<(&str, &str), FamilyError> {
    let spec = spec.trim();
    match spec.find('(') {
        None => Ok((spec, "")),
        Some(open) => {
            if !spec.ends_with(')') {
                return Err(FamilyError::BadParams {
                    spec: spec.to_string(),
                    reason: "unbalanced parentheses".into(),
                });
            }
            Ok((&spec[..open], &spec[open + 1..spec.len() - 1]))
        }
    }
}

fn parse_f64(spec: &str, token: &str) -> Result<f64, FamilyError> {
    token.trim().parse::<f64>().map_err(|_| FamilyError::BadParams {
        spec: spec.to_string(),
        reason: format!("expected a number, got {token:?}"),
    })
}

fn parse_u64(spec: &str, token: &str) -> Result<u64, FamilyError> {
    token.trim().parse::<u64>().map_err(|_| FamilyError::BadParams {
        spec: spec.to_string(),
        reason: format!("expected a nonnegative integer, got {token:?}"),
    })
}

fn parse_descriptor(spec: &str, token: &str) -> Result<SetDescriptor, FamilyError> {
    token.trim().parse::<SetDescriptor>().map_err(|e| FamilyError::BadParams {
        spec: spec.to_string(),
        reason: format!("bad index-set descriptor {token:?}: {e}"),
    })
}

/// Parse a matrix literal `a,b;c,d` (rows split by `;`, entries by `,`).
fn parse_matrix_literal(spec: &str, text: &str) -> Result<DMatrix<f64>, FamilyError> {
    let rows: Vec<&str> = text.split(';').collect();
    let mut entries: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for row in &rows {
        let mut parsed = Vec::new();
        for tok in row.split(',') {
            parsed.push(parse_f64(spec, tok)?);
        }
        entries.push(parsed);
    }
    let m = entries.len();
    let d = entries[0].len();
    if m == 0 || d == 0 || entries.iter().any(|r| r.len() != d) {
        return Err(FamilyError::BadParams {
            spec: spec.to_string(),
            reason: "matrix literal rows must be nonempty and equally long".into(),
        });
    }
    Ok(DMatrix::from_fn(m, d, |i, j| entries[i][j]))
}

fn format_matrix(t: &DMatrix<f64>) -> String {
    (0..t.nrows())
        .map(|i| {
            (0..t.ncols())
                .map(|j| t[(i, j)].to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Build a named matrix from its grammar form.
///
/// Recognized: `cesaro`, `euler(q)`, `riesz(w1,…)`, `diagonal(a,b;c,d)`,
/// `tail_projection(K)`, `telescoping(K)`, `rank_one(mean|alternating[;rows])`,
/// `random(seed[,moving[,eta0]])`, `alternating_mean`.
pub fn builtin_matrix(spec: &str) -> Result<NamedMatrix, FamilyError> {
    let (name, raw) = parse_call(spec)?;
    let args: Vec<&str> = if raw.trim().is_empty() {
        Vec::new()
    } else {
        split_top_level(raw, ',').into_iter().map(str::trim).collect()
    };
    match name {
        "cesaro" => Ok(cesaro()),
        "euler" => {
            if args.len() != 1 {
                return Err(bad(spec, "expected euler(q)"));
            }
            euler(parse_f64(spec, args[0])?)
        }
        "riesz" => {
            if args.is_empty() {
                return Err(bad(spec, "expected riesz(w1,…)"));
            }
            let weights: Result<Vec<f64>, _> =
                args.iter().map(|a| parse_f64(spec, a)).collect();
            riesz(&weights?)
        }
        "diagonal" => {
            if raw.trim().is_empty() {
                return Err(bad(spec, "expected diagonal(a,b;c,d)"));
            }
            Ok(diagonal(parse_matrix_literal(spec, raw)?))
        }
        "tail_projection" => {
            if args.len() != 1 {
                return Err(bad(spec, "expected tail_projection(K)"));
            }
            tail_projection(parse_u64(spec, args[0])?)
        }
        "telescoping" => {
            if args.len() != 1 {
                return Err(bad(spec, "expected telescoping(K)"));
            }
            telescoping(parse_u64(spec, args[0])?)
        }
        "rank_one" => {
            let parts: Vec<&str> = raw.split(';').map(str::trim).collect();
            let coeff = match parts.first().copied() {
                Some("mean") => RankOneCoeff::Mean,
                Some("alternating") => RankOneCoeff::AlternatingMean,
                _ => return Err(bad(spec, "expected rank_one(mean|alternating[;rows])")),
            };
            let base = if parts.len() > 1 {
                parse_matrix_literal(spec, &parts[1..].join(";"))?
            } else {
                DMatrix::identity(2, 2)
            };
            rank_one_matrix(coeff, base)
        }
        "random" => {
            if args.is_empty() || args.len() > 3 {
                return Err(bad(spec, "expected random(seed[,moving[,eta0]])"));
            }
            let seed = parse_u64(spec, args[0])?;
            match args.get(1).copied() {
                None => Ok(random_matrix(seed, RandomProfile::Triangular)),
                Some("moving") => {
                    let eta0 = match args.get(2) {
                        Some(tok) => parse_f64(spec, tok)?,
                        None => 1.0,
                    };
                    if !(eta0 > 0.0 && eta0.is_finite()) {
                        return Err(bad(spec, "moving-block level must be positive"));
                    }
                    Ok(random_matrix(seed, RandomProfile::MovingBlock { eta0 }))
                }
                Some(other) => Err(bad(spec, &format!("unknown random profile {other:?}"))),
            }
        }
        "alternating_mean" => Ok(alternating_mean()),
        other => Err(FamilyError::UnknownName(other.to_string())),
    }
}

/// Build a named sequence family from its grammar form, validated against
/// the given ideal.
///
/// Recognized: `convergent(e1,…[,harmonic|log|geometric:r])`,
/// `spiky_density(base,spike,set)`, `c00_supported(set,alternating|ones)`,
/// `bounded_divergent`, `unbounded_ideal_convergent(eta,set)`.
pub fn builtin_family(spec: &str, ideal: &IdealSpec) -> Result<NamedFamily, FamilyError> {
    let (name, raw) = parse_call(spec)?;
    let args: Vec<&str> = if raw.trim().is_empty() {
        Vec::new()
    } else {
        split_top_level(raw, ',').into_iter().map(str::trim).collect()
    };
    match name {
        "convergent" => {
            if args.is_empty() {
                return Err(bad(spec, "expected convergent(e1,…[,rate])"));
            }
            let (coords, rate) = match *args.last().expect("nonempty") {
                "harmonic" => (&args[..args.len() - 1], Rate::Harmonic),
                "log" => (&args[..args.len() - 1], Rate::Log),
                tok if tok.starts_with("geometric:") => {
                    let r = parse_f64(spec, &tok["geometric:".len()..])?;
                    if !(r > 0.0 && r < 1.0) {
                        return Err(bad(spec, "geometric rate must lie in (0, 1)"));
                    }
                    (&args[..args.len() - 1], Rate::Geometric(r))
                }
                _ => (&args[..], Rate::Harmonic),
            };
            if coords.is_empty() {
                return Err(bad(spec, "expected at least one limit coordinate"));
            }
            let eta: Result<Vec<f64>, _> = coords.iter().map(|a| parse_f64(spec, a)).collect();
            Ok(convergent_family(DVector::from_vec(eta?), rate, ideal))
        }
        "spiky_density" => {
            if args.len() != 3 {
                return Err(bad(spec, "expected spiky_density(base,spike,set)"));
            }
            spiky_family(
                parse_f64(spec, args[0])?,
                parse_f64(spec, args[1])?,
                parse_descriptor(spec, args[2])?,
                ideal,
            )
        }
        "c00_supported" => {
            if args.len() != 2 {
                return Err(bad(spec, "expected c00_supported(set,alternating|ones)"));
            }
            let values = match args[1] {
                "alternating" => C00Values::Alternating,
                "ones" => C00Values::Ones,
                other => return Err(bad(spec, &format!("unknown value pattern {other:?}"))),
            };
            c00_family(parse_descriptor(spec, args[0])?, values, ideal)
        }
        "bounded_divergent" => Ok(bounded_divergent_family(ideal)),
        "unbounded_ideal_convergent" => {
            if args.len() != 2 {
                return Err(bad(spec, "expected unbounded_ideal_convergent(eta,set)"));
            }
            unbounded_family(
                parse_f64(spec, args[0])?,
                parse_descriptor(spec, args[1])?,
                ideal,
            )
        }
        other => Err(FamilyError::UnknownName(other.to_string())),
    }
}

fn bad(spec: &str, reason: &str) -> FamilyError {
    FamilyError::BadParams {
        spec: spec.to_string(),
        reason: reason.to_string(),
    }
}

// =====================================================================
// Tests
// =====================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideal::{ideal_lim, LimitStatus};
    use crate::matrix::{op_norm_block, row_abs_sum, row_operator_sum, transform, NormContext};
    use approx::assert_abs_diff_eq;

    #[test]
    fn cesaro_rows_are_uniform_averages() {
        let a = cesaro();
        assert_abs_diff_eq!(a.matrix.block(4, 2)[(0, 0)], 0.2, epsilon = 1e-15);
        assert_eq!(a.matrix.block(4, 5)[(0, 0)], 0.0);
        for n in [0u64, 7, 100] {
            assert_abs_diff_eq!(row_operator_sum(&a.matrix, n, 200)[(0, 0)], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn euler_rows_are_binomial_masses() {
        let a = euler(0.5).unwrap();
        // Binomial(2, 1/2) at 1 = 0.5.
        assert_abs_diff_eq!(a.matrix.block(2, 1)[(0, 0)], 0.5, epsilon = 1e-12);
        for n in [0u64, 7, 40, 500] {
            assert_abs_diff_eq!(row_operator_sum(&a.matrix, n, 600)[(0, 0)], 1.0, epsilon = 1e-9);
        }
        assert!(euler(1.5).is_err());
        assert!(euler(0.0).is_err());
    }

    #[test]
    fn riesz_weights_repeat_cyclically() {
        let a = riesz(&[1.0, 2.0, 3.0]).unwrap();
        // Weights 1,2,3,1,2 sum to 9 at row 4; weight of column 2 is 3.
        assert_abs_diff_eq!(a.matrix.block(4, 2)[(0, 0)], 3.0 / 9.0, epsilon = 1e-14);
        for n in [0u64, 10, 101] {
            assert_abs_diff_eq!(row_operator_sum(&a.matrix, n, 200)[(0, 0)], 1.0, epsilon = 1e-12);
        }
        assert!(riesz(&[]).is_err());
        assert!(riesz(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn diagonal_rows_sum_to_the_operator() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let a = diagonal(t.clone());
        for n in [0u64, 5, 33] {
            assert_eq!(row_operator_sum(&a.matrix, n, 100), t);
        }
        assert!(a.matrix.rank_one().is_some());
    }

    #[test]
    fn tail_projection_blocks_have_unit_norm_but_vanish_pointwise() {
        let k_trunc = 8;
        let a = tail_projection(k_trunc).unwrap();
        assert_eq!(a.truncation, Some(k_trunc));
        let ctx = NormContext::one_norm();
        for n in 0..k_trunc {
            assert_abs_diff_eq!(
                op_norm_block(&a.matrix.block(n, 0), ctx).unwrap(),
                1.0,
                epsilon = 1e-15
            );
        }
        // Rows at and beyond the truncation vanish, as do columns k ≥ 1.
        assert!(a.matrix.block(k_trunc, 0).iter().all(|&x| x == 0.0));
        assert!(a.matrix.block(3, 1).iter().all(|&x| x == 0.0));
        // Pointwise vanishing on a fixed vector: the image norm decreases
        // to zero as the projection window empties.
        let x = DVector::from_element(9, 1.0);
        let norms: Vec<f64> = (0..k_trunc)
            .map(|n| (a.matrix.block(n, 0) * &x).iter().map(|v| v.abs()).sum::<f64>())
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert_abs_diff_eq!(norms[(k_trunc - 1) as usize], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn telescoping_rows_collapse_to_the_identity() {
        let k_trunc = 8;
        let a = telescoping(k_trunc).unwrap();
        let dim = (k_trunc + 1) as usize;
        let id = DMatrix::<f64>::identity(dim, dim);
        for n in [0u64, 3, 8, 12] {
            assert_eq!(row_operator_sum(&a.matrix, n, 16), id);
        }
        // The coordinate family maps at row 0 to e_0 − e_1 − … − e_K.
        let x = SequenceView::vector_fn(dim, move |k| {
            let mut v = DVector::zeros(dim);
            v[(k % (k_trunc + 1)) as usize] = 1.0;
            v
        })
        .with_bounded(true);
        let out = transform(&a.matrix, &x, 0, 16, 1e-9).unwrap();
        assert_abs_diff_eq!(out.value[0], 1.0, epsilon = 1e-15);
        for j in 1..dim {
            assert_abs_diff_eq!(out.value[j], -1.0, epsilon = 1e-15);
        }
        let one_norm: f64 = out.value.iter().map(|v| v.abs()).sum();
        assert_abs_diff_eq!(one_norm, (k_trunc + 1) as f64, epsilon = 1e-12);
        // The declared row support covers the whole window, so the
        // evaluated transform is certified with no remainder.
        assert!(out.certified);
        assert_eq!(out.remainder, 0.0);
    }

    #[test]
    fn moving_block_rows_have_declared_mass_on_disjoint_supports() {
        let eta0 = 2.0;
        let a = random_matrix(7, RandomProfile::MovingBlock { eta0 });
        let mut prev_end = 0u64;
        for n in 0..40 {
            let (start, width) = moving_block_span(n);
            assert!(start >= prev_end);
            prev_end = start + width;
            let mass = row_abs_sum(&a.matrix, n, 400);
            assert_abs_diff_eq!(mass, eta0 * (1.0 + 1.0 / (n + 1) as f64), epsilon = 1e-12);
            if start > 0 {
                assert_eq!(a.matrix.block(n, start - 1)[(0, 0)], 0.0);
            }
        }
    }

    #[test]
    fn triangular_random_rows_are_convex_weights() {
        let a = random_matrix(42, RandomProfile::Triangular);
        for n in [0u64, 5, 33] {
            let sum = row_operator_sum(&a.matrix, n, 50)[(0, 0)];
            assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        }
        let b = random_matrix(42, RandomProfile::Triangular);
        assert_eq!(a.matrix.block(9, 4), b.matrix.block(9, 4));
    }

    #[test]
    fn alternating_mean_signed_and_absolute_sums_split() {
        let a = alternating_mean();
        assert_abs_diff_eq!(a.matrix.block(3, 2)[(0, 0)], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(a.matrix.block(3, 1)[(0, 0)], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(row_operator_sum(&a.matrix, 4, 10)[(0, 0)], 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(row_abs_sum(&a.matrix, 4, 10), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_one_blocks_scale_the_base() {
        let a = rank_one_matrix(RankOneCoeff::Mean, DMatrix::identity(2, 2)).unwrap();
        let ro = a.matrix.rank_one().unwrap();
        assert_abs_diff_eq!((ro.coeff)(2, 1), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(a.matrix.block(2, 1), DMatrix::identity(2, 2) / 3.0);
        assert!(rank_one_matrix(RankOneCoeff::Mean, DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn matrix_grammar_round_trips() {
        for spec in [
            "cesaro",
            "euler(0.5)",
            "riesz(1,2,3)",
            "diagonal(1,0;0,2)",
            "tail_projection(64)",
            "telescoping(16)",
            "rank_one(mean)",
            "rank_one(alternating;1,0;0,2)",
            "random(42)",
            "random(42,moving,2)",
            "alternating_mean",
        ] {
            let named = builtin_matrix(spec).unwrap();
            assert!(!named.name.is_empty(), "{spec}");
        }
        assert!(matches!(
            builtin_matrix("abel"),
            Err(FamilyError::UnknownName(_))
        ));
        assert!(matches!(
            builtin_matrix("euler(2)"),
            Err(FamilyError::BadParams { .. })
        ));
    }

    #[test]
    fn declared_family_limits_agree_with_measured_ideal_limits() {
        let fin = IdealSpec::fin();
        let family = convergent_family(DVector::from_vec(vec![5.0]), Rate::Harmonic, &fin);
        for member in &family.members {
            let report = ideal_lim(&fin, &member.x, 4096, 1e-2).unwrap();
            assert!(matches!(report.status, LimitStatus::Converged { .. }));
            let declared = member.declared_limit.as_ref().unwrap();
            assert_abs_diff_eq!(report.estimate[0], declared[0], epsilon = 1e-2);
        }

        let density = IdealSpec::density();
        let spiky = spiky_family(
            5.0,
            100.0,
            SetDescriptor::NamedSparse(crate::ideal::SparseFamily::Squares),
            &density,
        )
        .unwrap();
        let report = ideal_lim(&density, &spiky.members[0].x, 1 << 14, 1e-6).unwrap();
        assert!(matches!(report.status, LimitStatus::Converged { .. }));
        assert_abs_diff_eq!(report.estimate[0], 5.0, epsilon = 1e-9);
    }

    #[test]
    fn spike_sets_are_validated_against_the_ideal() {
        let fin = IdealSpec::fin();
        let err = spiky_family(
            5.0,
            100.0,
            SetDescriptor::NamedSparse(crate::ideal::SparseFamily::Squares),
            &fin,
        );
        // Squares are infinite, hence not finite-ideal members.
        assert!(matches!(err, Err(FamilyError::InvalidFamily { .. })));
    }

    #[test]
    fn c00_support_membership_checked_and_values_placed() {
        let density = IdealSpec::density();
        let fam = c00_family(
            SetDescriptor::NamedSparse(crate::ideal::SparseFamily::PairingRow(2)),
            C00Values::Alternating,
            &density,
        )
        .unwrap();
        let x = &fam.members[0].x;
        // Pairing row 2 starts at value 7 (odd index → −1).
        assert_abs_diff_eq!(x.scalar(7), -1.0, epsilon = 1e-15);
        assert_eq!(x.scalar(8), 0.0);
        assert!(x.support.is_some());
    }

    #[test]
    fn unbounded_family_blows_up_only_inside_the_ideal() {
        let density = IdealSpec::density();
        let fam = unbounded_family(
            3.0,
            SetDescriptor::NamedSparse(crate::ideal::SparseFamily::Squares),
            &density,
        )
        .unwrap();
        let x = &fam.members[0].x;
        assert_abs_diff_eq!(x.scalar(49), 49.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x.scalar(50), 3.0 + 1.0 / 51.0, epsilon = 1e-15);
        assert_eq!(x.bounded, Some(false));
        // The off-blowup values approach 3 harmonically, so the
        // exceptional set at tolerance 1e-2 is a short prefix plus the
        // squares — density-small.
        let report = ideal_lim(&density, x, 1 << 14, 1e-2).unwrap();
        assert!(matches!(report.status, LimitStatus::Converged { .. }));
        assert_abs_diff_eq!(report.estimate[0], 3.0, epsilon = 1e-2);
    }

    #[test]
    fn family_grammar_round_trips() {
        let density = IdealSpec::density();
        for spec in [
            "convergent(5)",
            "convergent(1,2,log)",
            "convergent(0,geometric:0.5)",
            "spiky_density(5,100,squares)",
            "c00_supported(pairrow(2),alternating)",
            "bounded_divergent",
            "unbounded_ideal_convergent(3,squares)",
        ] {
            let fam = builtin_family(spec, &density).unwrap();
            assert!(!fam.members.is_empty(), "{spec}");
        }
        assert!(matches!(
            builtin_family("mystery", &density),
            Err(FamilyError::UnknownName(_))
        ));
        // Infinite spike set against the finite ideal: rejected.
        assert!(matches!(
            builtin_family("spiky_density(5,100,squares)", &IdealSpec::fin()),
            Err(FamilyError::InvalidFamily { .. })
        ));
        // Unparseable descriptor: rejected at parse time.
        assert!(matches!(
            builtin_family("spiky_density(5,100,wat)", &density),
            Err(FamilyError::BadParams { .. })
        ));
    }
}
