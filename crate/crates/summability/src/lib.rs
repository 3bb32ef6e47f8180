//! Numerical workbench for ideal convergence and the regularity of matrices
//! of linear operators between finite-dimensional normed spaces.

pub mod conditions;
pub mod ideal;
pub mod kahan;
pub mod matrix;
pub mod pringsheim;
pub mod witness;
pub mod zoo;

pub use conditions::{
    check_b, check_f, check_m, check_r, check_s, check_t, empirical_regularity, regular_verdict,
    row_diagnostics, BehavioralSummary, CheckParams, ConditionError, ConditionVerdict, Evidence,
    RegularityMode, RegularityOutcome, RegularityReport, RowDiagnostic, VerdictStatus,
};
pub use ideal::{
    density_prefix, ideal_lim, ideal_limsup, nu2, pairing_value, tall_partition, IdealError,
    IdealKind, IdealLimitReport, IdealSpec, LimitStatus, MemberStatus, Membership, SequenceView,
    SetDescriptor, SparseFamily,
};
pub use matrix::{
    group_norm, op_norm_block, row_abs_sum, row_operator_sum, tail_norm, transform, BlockMatrix,
    CoNorm, DomainNorm, GroupNormBound, GroupNormMode, MatrixError, NormContext, NormMethod,
    TransformResult,
};
pub use pringsheim::{
    build_h, p_lim, rh_check, transport, transport_inv, DoubleSequence, PairingBijection,
};
pub use witness::{
    divergence_witness, sign_oracle_max, sign_pattern_witness, sliding_hump,
    sliding_hump_unbounded, DivergenceWitness, HumpStage, SignPatternReport, Witness,
    WitnessError,
};
pub use zoo::{builtin_family, builtin_matrix, FamilyError, NamedFamily, NamedMatrix};
