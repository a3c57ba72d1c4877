//! Game-theoretic views of gradient and relevance propagation on small
//! feed-forward nets, with exact Hellinger comparisons of the resulting
//! trajectory laws.
//!
//! * [`net`]: network schema, validation and the forward pass.
//! * [`decomp`]: non-negative activation-pair decompositions.
//! * [`stopping`]: the Stopping Game, whose occupation measure is the gradient.
//! * [`routing`]: the Routing Game, whose occupation measure is αβ-LRP-ε.
//! * [`attention`]: relevance routing through a single softmax head.
//! * [`adf`]: Gaussian moment propagation for risk-sensitive routing.
//! * [`mp`], [`game`], [`hellinger`]: layered Markov processes and the
//!   Bhattacharyya/Hellinger dynamic programmes between them.
//! * [`oracle`]: exhaustive enumeration, parity path sums and finite differences.
//! * [`harness`]: randomisation sweeps and network generation.
//! * [`check`]: the seeded property suite.

pub mod adf;
pub mod attention;
pub mod check;
pub mod decomp;
pub mod error;
pub mod game;
pub mod harness;
pub mod hellinger;
pub mod mp;
pub mod net;
pub mod oracle;
pub mod routing;
pub mod special;
pub mod stopping;

pub use adf::{adf_forward, MomentField};
pub use attention::AttentionBlock;
pub use check::{run_checks, CheckConfig, CheckReport, PropertyRow, Suite};
pub use decomp::{decompose_forward, DecompKind, DecompState};
pub use error::{Error, Result};
pub use game::{GameGraph, Occupation};
pub use harness::{
    cascade_randomize, cemetery_floor, gen_net, input_noise_sweep, randomization_sweep, CemeteryFloor, GameKind,
    GenOptions, SweepResult, SweepRow,
};
pub use hellinger::{
    conditioned_survival, hellinger_backward, hellinger_forward, perm_invariant_hellinger, HellingerResult, PermResult,
    SurvivalResult,
};
pub use mp::{Label, LayeredMp, Tag};
pub use net::{forward, Activation, Layer, Matrix, NetSpec, Trace};
pub use routing::{lrp_direct, rg_attribution, Gate, RgAttribution, RgConfig, SeedMass};
pub use stopping::{build_sg, sg_gradient, SgKernel, SgPolicy};
