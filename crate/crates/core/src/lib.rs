//! A laboratory for query complexity of training parameterized circuits.
//!
//! The family under study is `f_a(x) = prod_j h(x_j - a_j)` on the n-torus,
//! indexed by hidden grid shifts `a ∈ {0, 1/3, 2/3}^n`. One exact evaluation
//! of `f_a` at a random point identifies `a`; single-shot ±1 samples carry
//! exponentially little information about it. The modules implement the
//! family, both query models, the plateau game, training harnesses and the
//! information-theoretic measurements used to check these claims.

pub mod circuit;
pub mod error;
pub mod experiment;
pub mod game;
pub mod oracle;
pub mod info;
pub mod torus;
pub mod training;

pub use circuit::{f_eval, h_eval, single_qubit_sim, tensor_sim, ExpectationFn, ShiftedProductFunction};
pub use error::{LabError, Result};
pub use game::{bounds, in_plateau, play_game, BoundsRow, CdfRow, GameRecord, PlateauRegion, StrategyKind};
pub use oracle::{clamp_to_plateau, coupled_sample, eval_query, sample_query, ClampedFunction, Outcome, RandomStack, Transcript};
pub use torus::{bohr_dist, hamming_d, round_to_grid, GridShift, TorusPoint};
pub use info::{omnipotent_identify, posterior_update, transcript_mi, Identification, Posterior};
pub use training::{divergence_experiment, exit_time_experiment, run_trainer, TrainerKind, TrainerResult};
