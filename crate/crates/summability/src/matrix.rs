//! Matrices of operator blocks, group norms, and transforms.
//!
//! A [`BlockMatrix`] is a doubly indexed family `A_{n,k}` of linear
//! operators `ℝ^d → ℝ^m`, given by a pure entry rule and evaluated lazily
//! (with an optional thread-safe memo for expensive rules). Rows are the
//! `n` direction, columns the `k` direction.
//!
//! The central quantity is the *group norm*
//!
//! ```text
//! ‖A_{n,E}‖ = sup { ‖Σ_{k∈F} A_{n,k} x_k‖ : F ⊆ E finite, x_k in the unit ball }
//! ```
//!
//! computed here over a finite column window with one of four methods:
//!
//! 1. `ScalarSum` — for 1×1 blocks the group norm is exactly the absolute
//!    sum of the entries.
//! 2. `PositiveUnit` — for nonnegative blocks with the sup-norm unit ball
//!    on the domain, the supremum is attained at the all-ones vector, so
//!    one matrix–vector pass is exact.
//! 3. `ExtremePointExhaustive` — the supremum of a convex function over a
//!    product of balls is attained at a tuple of extreme points; for the
//!    supported balls the extreme points are finite (±eⱼ for the 1-norm
//!    ball, sign vectors for the sup-norm ball), so a capped enumeration
//!    is exact. Subset choices `F ⊊ E` are dominated because 0 lies in
//!    every ball, so enumerating full-length tuples suffices.
//! 4. `Sandwich` — certified lower/upper bounds from the total absolute
//!    entry mass when enumeration is infeasible. The upper bound is the
//!    total mass; the provable lower constant depends on the setting
//!    (`total/d` for nonnegative blocks on the 1-norm ball, `total/(d·m)`
//!    for signed blocks; `total/m` for signed blocks on the sup-norm
//!    ball). Bounds are always valid; `exact` is set only when lower and
//!    upper agree.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::ideal::{SequenceView, SetDescriptor};
use crate::kahan::{KahanSum, KahanVector};

// =====================================================================
// Norm contexts
// =====================================================================

/// Unit ball used on the domain ℝ^d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DomainNorm {
    /// 1-norm ball; extreme points are ±eⱼ.
    OneNorm,
    /// Sup-norm ball `[−1, 1]^d`, whose top element is the all-ones order
    /// unit; extreme points are the sign vectors.
    SupNormWithUnit,
}

/// Norm used on the codomain ℝ^m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CoNorm {
    OneNorm,
    SupNorm,
}

/// Domain/codomain norm pair for group-norm evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NormContext {
    pub domain: DomainNorm,
    pub codomain: CoNorm,
}

impl NormContext {
    /// 1-norm on both sides (the geometry in which the operator norm of a
    /// block is its maximum column absolute sum).
    pub fn one_norm() -> Self {
        NormContext {
            domain: DomainNorm::OneNorm,
            codomain: CoNorm::OneNorm,
        }
    }

    /// Sup-norm unit ball on the domain, 1-norm on the codomain: the
    /// setting in which nonnegative blocks have a one-pass exact group
    /// norm.
    pub fn positive_unit() -> Self {
        NormContext {
            domain: DomainNorm::SupNormWithUnit,
            codomain: CoNorm::OneNorm,
        }
    }
}

/// Codomain norm of a vector.
pub fn vector_conorm(v: &DVector<f64>, co: CoNorm) -> f64 {
    match co {
        CoNorm::OneNorm => crate::kahan::sum(v.iter().map(|x| x.abs())),
        CoNorm::SupNorm => v.iter().fold(0.0f64, |acc, x| acc.max(x.abs())),
    }
}

// =====================================================================
// Block matrices
// =====================================================================

type EntryRule = Arc<dyn Fn(u64, u64) -> DMatrix<f64> + Send + Sync>;
type ScalarRule = Arc<dyn Fn(u64, u64) -> f64 + Send + Sync>;
type SupportRule = Arc<dyn Fn(u64) -> u64 + Send + Sync>;
type TailBoundRule = Arc<dyn Fn(u64, u64) -> f64 + Send + Sync>;
type CoeffRule = Arc<dyn Fn(u64, u64) -> f64 + Send + Sync>;

/// Declared rank-one structure: every block equals `coeff(n, k) · base`.
#[derive(Clone)]
pub struct RankOneStructure {
    pub coeff: CoeffRule,
    pub base: DMatrix<f64>,
}

/// A lazily evaluated matrix of operator blocks `ℝ^d → ℝ^m`.
///
/// Metadata (`nonnegative`, row support, tail bounds, rank-one structure)
/// is *declared* by the builder; the builders in [`crate::zoo`] spot-check
/// declarations by sampling. Operations trust the declarations and say so
/// in their contracts.
#[derive(Clone)]
pub struct BlockMatrix {
    rows_dim: usize,
    cols_dim: usize,
    entry: EntryRule,
    scalar_rule: Option<ScalarRule>,
    nonnegative: bool,
    row_support_end: Option<SupportRule>,
    tail_bound: Option<TailBoundRule>,
    rank_one: Option<RankOneStructure>,
    memo: Option<Arc<Mutex<HashMap<(u64, u64), DMatrix<f64>>>>>,
    memo_capacity: usize,
}

impl fmt::Debug for BlockMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockMatrix")
            .field("codomain_dim", &self.rows_dim)
            .field("domain_dim", &self.cols_dim)
            .field("nonnegative", &self.nonnegative)
            .field("has_row_support", &self.row_support_end.is_some())
            .field("has_tail_bound", &self.tail_bound.is_some())
            .field("rank_one", &self.rank_one.is_some())
            .finish_non_exhaustive()
    }
}

impl BlockMatrix {
    /// New matrix with blocks of shape `m × d` (codomain × domain) given
    /// by `entry(n, k)`. The rule must be pure.
    pub fn new<F>(m: usize, d: usize, entry: F) -> Self
    where
        F: Fn(u64, u64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        BlockMatrix {
            rows_dim: m,
            cols_dim: d,
            entry: Arc::new(entry),
            scalar_rule: None,
            nonnegative: false,
            row_support_end: None,
            tail_bound: None,
            rank_one: None,
            memo: None,
            memo_capacity: 0,
        }
    }

    /// Scalar matrix (1×1 blocks) from a scalar entry rule. The rule is
    /// also retained in scalar form so hot loops can read entries without
    /// allocating one-element blocks.
    pub fn scalar<F>(entry: F) -> Self
    where
        F: Fn(u64, u64) -> f64 + Send + Sync + 'static,
    {
        let rule: ScalarRule = Arc::new(entry);
        let boxed = Arc::clone(&rule);
        let mut a = BlockMatrix::new(1, 1, move |n, k| DMatrix::from_element(1, 1, boxed(n, k)));
        a.scalar_rule = Some(rule);
        a
    }

    /// Declare that every entry of every block is ≥ 0.
    pub fn with_nonnegative(mut self, nonnegative: bool) -> Self {
        self.nonnegative = nonnegative;
        self
    }

    /// Declare that row `n` has no nonzero blocks at columns `k ≥ end(n)`.
    pub fn with_row_support_end<F>(mut self, end: F) -> Self
    where
        F: Fn(u64) -> u64 + Send + Sync + 'static,
    {
        self.row_support_end = Some(Arc::new(end));
        self
    }

    /// Declare a tail certificate: `bound(n, k)` is an upper bound on the
    /// total absolute entry mass `Σ_{k' ≥ k} ΣΣ |a_{n,k'}(i,j)|` of the
    /// infinite tail, hence on every group norm of that tail.
    pub fn with_tail_bound<F>(mut self, bound: F) -> Self
    where
        F: Fn(u64, u64) -> f64 + Send + Sync + 'static,
    {
        self.tail_bound = Some(Arc::new(bound));
        self
    }

    /// Declare that every block is `coeff(n, k) · base`.
    pub fn with_rank_one<F>(mut self, coeff: F, base: DMatrix<f64>) -> Self
    where
        F: Fn(u64, u64) -> f64 + Send + Sync + 'static,
    {
        assert_eq!(base.nrows(), self.rows_dim, "rank-one base shape mismatch");
        assert_eq!(base.ncols(), self.cols_dim, "rank-one base shape mismatch");
        self.rank_one = Some(RankOneStructure {
            coeff: Arc::new(coeff),
            base,
        });
        self
    }

    /// Cache blocks behind a mutex, up to `capacity` entries. Worthwhile
    /// when the entry rule is expensive (e.g. transported double-sequence
    /// kernels); cheap rules are faster without it.
    pub fn with_memo(mut self, capacity: usize) -> Self {
        self.memo = Some(Arc::new(Mutex::new(HashMap::new())));
        self.memo_capacity = capacity;
        self
    }

    /// `(m, d)`: codomain and domain dimensions of the blocks.
    pub fn dims(&self) -> (usize, usize) {
        (self.rows_dim, self.cols_dim)
    }

    /// Declared nonnegativity.
    pub fn nonnegative(&self) -> bool {
        self.nonnegative
    }

    /// Declared row support bound, if any.
    pub fn row_support_end(&self, n: u64) -> Option<u64> {
        self.row_support_end.as_ref().map(|f| f(n))
    }

    /// Declared tail certificate value, if any.
    pub fn tail_bound(&self, n: u64, k: u64) -> Option<f64> {
        self.tail_bound.as_ref().map(|f| f(n, k))
    }

    /// Declared rank-one structure, if any.
    pub fn rank_one(&self) -> Option<&RankOneStructure> {
        self.rank_one.as_ref()
    }

    /// Entry at `(n, k)` as a bare scalar when the matrix was built from a
    /// scalar rule; `None` for genuinely block-valued matrices.
    pub fn scalar_entry(&self, n: u64, k: u64) -> Option<f64> {
        self.scalar_rule.as_ref().map(|f| f(n, k))
    }

    /// Whether entries can be read through the allocation-free scalar rule.
    pub fn is_scalar(&self) -> bool {
        self.scalar_rule.is_some()
    }

    /// Block at `(n, k)`, memoized when a cache was requested. Panics if
    /// the entry rule returns a block of the wrong shape (a broken rule is
    /// a programming error, not a data condition).
    pub fn block(&self, n: u64, k: u64) -> DMatrix<f64> {
        if let Some(memo) = &self.memo {
            if let Some(hit) = memo.lock().expect("memo poisoned").get(&(n, k)) {
                return hit.clone();
            }
        }
        let b = (self.entry)(n, k);
        assert_eq!(
            (b.nrows(), b.ncols()),
            (self.rows_dim, self.cols_dim),
            "entry rule returned a block of the wrong shape at ({n}, {k})"
        );
        if let Some(memo) = &self.memo {
            let mut guard = memo.lock().expect("memo poisoned");
            if guard.len() < self.memo_capacity {
                guard.insert((n, k), b.clone());
            }
        }
        b
    }

    /// Column window end for evaluating row `n` at a given horizon: the
    /// horizon, extended to the declared row support so that declared
    /// finite rows are always summed in full.
    pub fn eval_end(&self, n: u64, horizon: u64) -> u64 {
        match self.row_support_end(n) {
            Some(0) => horizon,
            Some(end) => horizon.max(end - 1),
            None => horizon,
        }
    }
}

// =====================================================================
// Errors
// =====================================================================

#[derive(Debug, Clone, thiserror::Error)]
pub enum MatrixError {
    #[error("norm context {domain:?}/{codomain:?} is not supported by this operation")]
    UnsupportedNormContext { domain: DomainNorm, codomain: CoNorm },
    #[error("no columns to evaluate for row {n} (window is empty below the horizon)")]
    EmptyEvaluation { n: u64 },
    #[error("exhaustive enumeration needs {bits} selector bits, above the cap of {cap}")]
    ExhaustiveTooLarge { bits: u64, cap: u64 },
    #[error("sequence dimension {got} does not match the matrix domain dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

// =====================================================================
// Operator norm of a single block
// =====================================================================

/// Operator norm of one block in the 1-norm/1-norm geometry, where it is
/// exactly the maximum column absolute sum. Other contexts are refused.
pub fn op_norm_block(block: &DMatrix<f64>, ctx: NormContext) -> Result<f64, MatrixError> {
    if ctx.domain != DomainNorm::OneNorm || ctx.codomain != CoNorm::OneNorm {
        return Err(MatrixError::UnsupportedNormContext {
            domain: ctx.domain,
            codomain: ctx.codomain,
        });
    }
    let mut best = 0.0f64;
    for j in 0..block.ncols() {
        let col_sum = crate::kahan::sum(block.column(j).iter().map(|x| x.abs()));
        best = best.max(col_sum);
    }
    Ok(best)
}

// =====================================================================
// Group norms
// =====================================================================

/// Evaluation strategy selector for [`group_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GroupNormMode {
    /// Exact method when one applies within the enumeration cap, else
    /// certified bounds.
    Auto,
    /// Demand exhaustive enumeration; errors above the cap.
    Exhaustive,
    /// Certified bounds only, never enumerate.
    BoundsOnly,
}

/// Method that produced a [`GroupNormBound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormMethod {
    ScalarSum,
    PositiveUnit,
    ExtremePointExhaustive,
    Sandwich,
}

/// Certified group-norm bounds over an evaluated column window.
#[derive(Debug, Clone, Serialize)]
pub struct GroupNormBound {
    pub lower: f64,
    pub upper: f64,
    /// True when `lower == upper` is the exact value for the evaluated
    /// window.
    pub exact: bool,
    pub method: NormMethod,
}

/// Selector bits allowed for exhaustive enumeration: the state count
/// `(choices per column)^(columns)` is capped at 2²⁴.
const EXHAUSTIVE_BIT_CAP: u64 = 24;

/// Group norm of row `n` over the columns of `e` within the horizon.
///
/// Columns are `e`'s members up to the evaluation end (the horizon,
/// extended to the row's declared support so declared-finite rows are
/// summed in full). An empty window is an error: a caller asking for the
/// norm of nothing almost always has a horizon bug.
pub fn group_norm(
    a: &BlockMatrix,
    n: u64,
    e: &SetDescriptor,
    horizon: u64,
    ctx: NormContext,
    mode: GroupNormMode,
) -> Result<GroupNormBound, MatrixError> {
    let end = a.eval_end(n, horizon);
    let columns = e.members_upto(end);
    if columns.is_empty() {
        return Err(MatrixError::EmptyEvaluation { n });
    }
    group_norm_over_columns(a, n, &columns, ctx, mode)
}

/// Group norm over an explicit column list (shared with the witness
/// machinery, which works with materialized disjoint blocks).
pub(crate) fn group_norm_over_columns(
    a: &BlockMatrix,
    n: u64,
    columns: &[u64],
    ctx: NormContext,
    mode: GroupNormMode,
) -> Result<GroupNormBound, MatrixError> {
    let (m, d) = a.dims();
    if columns.is_empty() {
        return Err(MatrixError::EmptyEvaluation { n });
    }
    // Zero blocks contribute nothing to any method; drop them early.
    let blocks: Vec<DMatrix<f64>> = columns.iter().map(|&k| a.block(n, k)).collect();
    let live: Vec<&DMatrix<f64>> = blocks.iter().filter(|b| b.iter().any(|&x| x != 0.0)).collect();
    if live.is_empty() {
        return Ok(GroupNormBound {
            lower: 0.0,
            upper: 0.0,
            exact: true,
            method: NormMethod::ScalarSum,
        });
    }

    // 1×1 blocks: the group norm is exactly the absolute entry sum.
    if m == 1 && d == 1 {
        let total = crate::kahan::sum(live.iter().map(|b| b[(0, 0)].abs()));
        return Ok(GroupNormBound {
            lower: total,
            upper: total,
            exact: true,
            method: NormMethod::ScalarSum,
        });
    }

    // Nonnegative blocks with the sup-norm unit ball: the supremum is
    // attained at x_k = 𝟙 for every k, because each codomain component of
    // Σ A_k x_k is monotone in every x coordinate and both codomain norms
    // are monotone on the nonnegative orthant.
    if a.nonnegative() && ctx.domain == DomainNorm::SupNormWithUnit && mode != GroupNormMode::Exhaustive {
        let mut acc = KahanVector::zeros(m);
        let ones = DVector::from_element(d, 1.0);
        for b in &live {
            acc.add(&(*b * &ones));
        }
        let value = vector_conorm(&acc.total(), ctx.codomain);
        return Ok(GroupNormBound {
            lower: value,
            upper: value,
            exact: true,
            method: NormMethod::PositiveUnit,
        });
    }

    // Exhaustive extreme-point enumeration within the cap.
    let bits_per_column: u64 = match ctx.domain {
        DomainNorm::OneNorm => (2 * d as u64).next_power_of_two().trailing_zeros() as u64,
        DomainNorm::SupNormWithUnit => d as u64,
    };
    let total_bits = bits_per_column * live.len() as u64;
    let feasible = total_bits <= EXHAUSTIVE_BIT_CAP;
    if mode == GroupNormMode::Exhaustive && !feasible {
        return Err(MatrixError::ExhaustiveTooLarge {
            bits: total_bits,
            cap: EXHAUSTIVE_BIT_CAP,
        });
    }
    if feasible && mode != GroupNormMode::BoundsOnly {
        let value = exhaustive_extreme_points(&live, m, d, ctx);
        return Ok(GroupNormBound {
            lower: value,
            upper: value,
            exact: true,
            method: NormMethod::ExtremePointExhaustive,
        });
    }

    // Certified sandwich bounds from the total absolute entry mass.
    let total = crate::kahan::sum(
        live.iter()
            .flat_map(|b| b.iter().map(|x| x.abs())),
    );
    let divisor = match (ctx.domain, a.nonnegative()) {
        (DomainNorm::OneNorm, true) => d as f64,
        (DomainNorm::OneNorm, false) => {
            if m == 1 {
                d as f64
            } else {
                (d * m) as f64
            }
        }
        (DomainNorm::SupNormWithUnit, true) => 1.0,
        (DomainNorm::SupNormWithUnit, false) => m as f64,
    };
    let lower = total / divisor;
    Ok(GroupNormBound {
        lower,
        upper: total,
        exact: lower == total,
        method: NormMethod::Sandwich,
    })
}

/// Exact supremum of `‖Σ_k A_k x_k‖` over extreme tuples.
///
/// The running sum is kept with per-component compensation so the
/// incremental odometer updates do not drift over millions of steps.
fn exhaustive_extreme_points(
    blocks: &[&DMatrix<f64>],
    m: usize,
    d: usize,
    ctx: NormContext,
) -> f64 {
    // Candidate images of each block at its domain extreme points.
    let candidates: Vec<Vec<DVector<f64>>> = blocks
        .iter()
        .map(|b| match ctx.domain {
            DomainNorm::OneNorm => {
                let mut imgs = Vec::with_capacity(2 * d);
                for j in 0..d {
                    let col: DVector<f64> = b.column(j).into();
                    imgs.push(col.clone());
                    imgs.push(-col);
                }
                imgs
            }
            DomainNorm::SupNormWithUnit => {
                let mut imgs = Vec::with_capacity(1 << d);
                for mask in 0u32..(1u32 << d) {
                    let sign = DVector::from_iterator(
                        d,
                        (0..d).map(|j| if mask & (1 << j) != 0 { 1.0 } else { -1.0 }),
                    );
                    imgs.push(*b * sign);
                }
                imgs
            }
        })
        .collect();

    let counts: Vec<usize> = candidates.iter().map(|c| c.len()).collect();
    let mut digits = vec![0usize; blocks.len()];
    let mut sums = vec![0.0f64; m];
    let mut comps = vec![0.0f64; m];
    let add = |sums: &mut [f64], comps: &mut [f64], img: &DVector<f64>, sign: f64| {
        for i in 0..m {
            let term = sign * img[i];
            let y = term - comps[i];
            let t = sums[i] + y;
            comps[i] = (t - sums[i]) - y;
            sums[i] = t;
        }
    };
    for (c, &digit) in digits.iter().enumerate() {
        add(&mut sums, &mut comps, &candidates[c][digit], 1.0);
    }
    let eval = |sums: &[f64]| -> f64 {
        match ctx.codomain {
            CoNorm::OneNorm => sums.iter().map(|x| x.abs()).sum(),
            CoNorm::SupNorm => sums.iter().fold(0.0f64, |acc, x| acc.max(x.abs())),
        }
    };
    let mut best = eval(&sums);
    loop {
        // Odometer increment with incremental sum updates.
        let mut pos = 0usize;
        loop {
            if pos == digits.len() {
                return best;
            }
            let old = digits[pos];
            add(&mut sums, &mut comps, &candidates[pos][old], -1.0);
            if old + 1 < counts[pos] {
                digits[pos] = old + 1;
                add(&mut sums, &mut comps, &candidates[pos][old + 1], 1.0);
                break;
            }
            digits[pos] = 0;
            add(&mut sums, &mut comps, &candidates[pos][0], 1.0);
            pos += 1;
        }
        best = best.max(eval(&sums));
    }
}

// =====================================================================
// Tail norms
// =====================================================================

/// Group norm of the row tail `A_{n, ≥ k_from}` within the horizon.
///
/// The evaluated window is `[k_from, eval_end]`. When the matrix declares
/// a tail certificate (or the declared row support ends inside the
/// window), the `upper` field is extended to cover the full infinite
/// tail; otherwise the bound refers to the evaluated window only.
pub fn tail_norm(
    a: &BlockMatrix,
    n: u64,
    k_from: u64,
    horizon: u64,
    ctx: NormContext,
    mode: GroupNormMode,
) -> Result<GroupNormBound, MatrixError> {
    let end = a.eval_end(n, horizon);
    if k_from > end {
        return Err(MatrixError::EmptyEvaluation { n });
    }
    let window = SetDescriptor::Range { lo: k_from, hi: end };
    let mut bound = group_norm(a, n, &window, horizon, ctx, mode)?;
    let support_covered = a
        .row_support_end(n)
        .map(|se| se <= end + 1)
        .unwrap_or(false);
    if !support_covered {
        if let Some(extra) = a.tail_bound(n, end + 1) {
            bound.upper += extra.max(0.0);
            if extra > 0.0 {
                bound.exact = false;
            }
        }
    }
    Ok(bound)
}

// =====================================================================
// Transforms and row sums
// =====================================================================

/// Result of applying one row of a matrix to a sequence.
#[derive(Debug, Clone, Serialize)]
pub struct TransformResult {
    /// The partial transform `Σ_{k ≤ columns} A_{n,k} x_k`.
    pub value: Vec<f64>,
    /// Upper bound on the norm of the omitted tail, when certifiable.
    pub remainder: f64,
    /// True when the remainder genuinely bounds the infinite tail: the
    /// declared row support was covered, or a tail certificate was
    /// combined with a declared-bounded sequence.
    pub certified: bool,
    /// Last column included in the sum.
    pub columns: u64,
}

impl TransformResult {
    /// The transform value as a vector.
    pub fn vector(&self) -> DVector<f64> {
        DVector::from_vec(self.value.clone())
    }
}

/// Apply row `n` to the sequence: `Σ_k A_{n,k} x_k` over the evaluation
/// window, with remainder accounting.
///
/// When a tail certificate is present and the certified remainder exceeds
/// `tail_tol`, the window is extended (doubling) until the bound drops
/// below `tail_tol` or a hard cap is reached. Without any certificate or
/// support declaration the result is flagged uncertified.
pub fn transform(
    a: &BlockMatrix,
    x: &SequenceView,
    n: u64,
    horizon: u64,
    tail_tol: f64,
) -> Result<TransformResult, MatrixError> {
    let (m, d) = a.dims();
    if x.dim() != d {
        return Err(MatrixError::DimensionMismatch {
            expected: d,
            got: x.dim(),
        });
    }
    const HARD_CAP: u64 = 1 << 22;
    let mut end = a.eval_end(n, horizon);
    let mut acc = KahanVector::zeros(m);
    let mut sup_x = 0.0f64;
    let mut next_k = 0u64;
    let support_end = a.row_support_end(n);
    loop {
        for k in next_k..=end {
            if let Some(se) = support_end {
                if k >= se {
                    break;
                }
            }
            let xk = x.value(k);
            // The 1-norm dominates both supported domain norms, so using
            // it for sup_x keeps every tail certificate conservative.
            let domain_norm = crate::kahan::sum(xk.iter().map(|v| v.abs()));
            sup_x = sup_x.max(domain_norm);
            let b = a.block(n, k);
            let img = b * xk;
            acc.add(&img);
        }
        next_k = end + 1;

        let support_covered = support_end.map(|se| se <= end + 1).unwrap_or(false);
        if support_covered {
            return Ok(TransformResult {
                value: acc.total().iter().cloned().collect(),
                remainder: 0.0,
                certified: true,
                columns: end,
            });
        }
        match a.tail_bound(n, end + 1) {
            Some(bound) => {
                let remainder = bound.max(0.0) * sup_x.max(1.0);
                if remainder <= tail_tol || end >= HARD_CAP {
                    let certified = x.bounded == Some(true);
                    return Ok(TransformResult {
                        value: acc.total().iter().cloned().collect(),
                        remainder,
                        certified,
                        columns: end,
                    });
                }
                end = (end * 2).min(HARD_CAP);
            }
            None => {
                return Ok(TransformResult {
                    value: acc.total().iter().cloned().collect(),
                    remainder: f64::INFINITY,
                    certified: false,
                    columns: end,
                });
            }
        }
    }
}

/// Entrywise row sum `Σ_k A_{n,k}` over the evaluation window.
pub fn row_operator_sum(a: &BlockMatrix, n: u64, horizon: u64) -> DMatrix<f64> {
    let (m, d) = a.dims();
    let end = a.eval_end(n, horizon);
    let mut sums = DMatrix::<f64>::zeros(m, d);
    let mut comps = DMatrix::<f64>::zeros(m, d);
    let support_end = a.row_support_end(n);
    for k in 0..=end {
        if let Some(se) = support_end {
            if k >= se {
                break;
            }
        }
        let b = a.block(n, k);
        for i in 0..m {
            for j in 0..d {
                let term = b[(i, j)];
                let y = term - comps[(i, j)];
                let t = sums[(i, j)] + y;
                comps[(i, j)] = (t - sums[(i, j)]) - y;
                sums[(i, j)] = t;
            }
        }
    }
    sums
}

/// Total absolute entry mass of a row over the evaluation window:
/// `Σ_k ΣΣ |a_{n,k}(i,j)|`.
pub fn row_abs_sum(a: &BlockMatrix, n: u64, horizon: u64) -> f64 {
    let end = a.eval_end(n, horizon);
    let support_end = a.row_support_end(n);
    let mut acc = KahanSum::new();
    for k in 0..=end {
        if let Some(se) = support_end {
            if k >= se {
                break;
            }
        }
        let b = a.block(n, k);
        for v in b.iter() {
            acc.add(v.abs());
        }
    }
    acc.total()
}

// =====================================================================
// Tests
// =====================================================================
