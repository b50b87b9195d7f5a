//! Preference-conditioned learned cluster selection: state features, a soft
//! decision tree actor, a vector critic and multi-preference PPO.

mod agent;
mod ddt;
mod policy_file;
mod ppo;
mod reward;
mod state;
mod train;
mod value;
#[cfg(test)]
mod tests;

pub use agent::{select_action, ActionMode, Thermos};
pub use ddt::{mask_invalid, softmax, Ddt, DdtTrace, MASK_LOGIT};
pub use policy_file::{PolicyFile, POLICY_FILE_VERSION};
pub use ppo::{advantage, clip_grad_norm, policy_loss, value_loss, Adam, PolicySample, Transition};
pub use reward::{JobRewards, Recorder, RewardNormalizer};
pub use state::{build_state, policy_input, Preference, StateScales, OBJECTIVES, POLICY_INPUTS, STATE_FEATURES};
pub use train::{
    curve_csv_string, smooth, targets_and_advantages, train, value_loss_series, write_curve_csv, CurveRow,
    PpoConfig, TrainEnv, Trained,
};
pub use value::ValueNet;
