"""Dual-frequency action-chunk control on a simulated interception task.

A flow-matching chunk policy is trained with temporally misaligned
conditioning (slow intent embedding, fresh fused fast state) so that at run
time a cheap single-step query can refresh the executed chunk every few
control steps, while a batch-and-execute controller replans only once per
chunk. The scheduler simulates both under a wall-clock latency model and the
harness reproduces the comparison grid.
"""

from .dataset import (ChunkingConfig, batch_iter, build_sample,
                      sample_latency_stage, segment_length)
from .env import (EnvConfig, WorldState, clip_action, env_advance_free,
                  env_reset, env_step, rasterize)
from .errors import (AnalysisError, ConfigurationError, GenerationError,
                     ProtocolError, SegmentOverrunError, TrainingError,
                     UnsupportedParameterError)
from .flow import (PolicyBundle, PolicyTrainConfig, cfm_loss_value,
                   euler_single_step, load_policy_bundle, make_flow_sample,
                   multi_step_solve, save_policy_bundle, train_policy)
from .harness import (MODES, ControllerMode, EvalCell, ResultsTable,
                      ablation_suite, eval_oracle_rate, eval_success_rate,
                      hyperparam_sweep, lifespan_sweep,
                      load_experiment_config, protocol_compare,
                      train_controller, wilson_interval)
from .intent import IntentEmbedding, encode_intent
from .motion import (MotionConfig, MotionPredictor, diff_frames, fuse_state,
                     load_motion, motion_velocity_rmse, save_motion,
                     train_motion)
from .nets import (MlpNetwork, adam_init, adam_step, load_mlp_text,
                   mlp_backward, mlp_fingerprint, mlp_forward, mlp_init,
                   save_mlp_text)
from .oracle import (Episode, generate_dataset, load_dataset, oracle_action,
                     run_oracle_episode)
from .sampling import (beta_time_from_uniform, make_rng, sample_beta_time,
                       sample_gaussian_chunk, spawn_rng)
from .scheduler import (LatencyModel, RolloutTrace, baseline_hz, check_trace,
                        effective_hz_from_trace, lifespan_micro_per_macro,
                        read_trace, run_baseline_rollout, run_tidal_rollout,
                        tidal_effective_hz, tidal_peak_hz, write_trace)

__version__ = "0.1.0"
