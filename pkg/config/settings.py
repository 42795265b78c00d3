"""Central hard-coded configuration for the prosody modification toolkit.

These constants are intentionally NOT driven by environment variables so that every run is
reproducible from its recorded config + seed. Adjust values here when tuning behavior, or
pass flat ``key=value`` overrides on the command line for a single run.
"""

# Audio
SAMPLE_RATE: int = 16000            # Every pipeline buffer is 16 kHz mono
PCM_FULL_SCALE: int = 32767         # Symmetric clamp for written codes (see services/signal_io.py)
PCM_READ_SCALE: float = 32768.0     # Read scaling: code / 32768

# Emotion classes (fixed order everywhere: manifests, heads, confusion matrices)
EMOTIONS: tuple[str, ...] = ("neutral", "angry", "happy", "sad", "fearful")
NUM_EMOTIONS: int = len(EMOTIONS)
SIMPLEX_TOL: float = 1e-6

# Synthetic corpus archetypes: f0 Hz, f0 slope (fraction per second), rate factor, gain factor
ARCHETYPES: dict[str, dict[str, float]] = {
	"neutral": {"f0_base": 140.0, "f0_slope": 0.00, "rate_factor": 1.00, "gain_factor": 1.00, "vibrato_hz": 0.0, "vibrato_depth": 0.0},
	"angry":   {"f0_base": 190.0, "f0_slope": 0.10, "rate_factor": 1.30, "gain_factor": 1.40, "vibrato_hz": 0.0, "vibrato_depth": 0.0},
	"happy":   {"f0_base": 175.0, "f0_slope": 0.20, "rate_factor": 1.15, "gain_factor": 1.15, "vibrato_hz": 0.0, "vibrato_depth": 0.0},
	"sad":     {"f0_base": 110.0, "f0_slope": -0.10, "rate_factor": 0.80, "gain_factor": 0.70, "vibrato_hz": 0.0, "vibrato_depth": 0.0},
	"fearful": {"f0_base": 200.0, "f0_slope": 0.00, "rate_factor": 1.05, "gain_factor": 0.90, "vibrato_hz": 6.0, "vibrato_depth": 20.0},
}
UTTERANCE_SECONDS: float = 3.0
CUE_FRACTION: float = 0.3
LABEL_NOISE_SCALE: float = 0.1
SILENCE_SECONDS: float = 0.1        # Leading/trailing near-silence around the voiced region
CARRIER_AMPLITUDE: float = 0.25     # Neutral peak amplitude before archetype gain
SYLLABLE_RATE_HZ: float = 4.0       # Amplitude-envelope pulses per second at rate_factor 1.0
NUM_HARMONICS: int = 6
NOISE_FLOOR: float = 0.002          # Std of additive noise (keeps silences non-degenerate)
ARCHETYPE_MIN_REL_DIFF: float = 0.10

# WSOLA engine
WSOLA_WINDOW: int = 512             # 32 ms, longer than one period of a 75 Hz voice
WSOLA_HOP: int = 256                # window / 2 -> periodic Hann is COLA
WSOLA_SEARCH: int = 128
OLA_DENOM_FLOOR: float = 1e-8
CROSSFADE_SECONDS: float = 0.010    # Gain ramps / splice crossfades at span boundaries
RESAMPLE_RATIO_RANGE: tuple[float, float] = (0.25, 4.0)

# Pitch oracle
F0_MIN_HZ: float = 75.0
F0_MAX_HZ: float = 400.0
VOICING_THRESHOLD: float = 0.3

# Salience predictor
FEATURE_HOP: int = 320              # 20 ms at 16 kHz; product of extractor strides
EXTRACTOR_KERNEL: int = 8
EXTRACTOR_STRIDES: tuple[int, ...] = (4, 4, 4, 5)
EXTRACTOR_CHANNELS: tuple[int, ...] = (32, 32, 64, 64)
MASK_GRU_HIDDEN: int = 64
PREDICTOR_KERNEL: int = 3
PREDICTOR_CHANNELS: int = 64
MARKOV_P_STAY: float = 0.93
MARKOV_P_INIT: float = 0.01
SPARSITY_TARGET: float = 0.01
POSTERIOR_CLAMP: float = 1e-6
LAMBDA_PRIOR: float = 1.0
LAMBDA_SPARSE: float = 0.1
KL_REDUCTION: str = "sum"           # "sum" keeps KL totals; "mean" divides them by the frame count
GUMBEL_TEMPERATURE_START: float = 1.0
GUMBEL_TEMPERATURE_END: float = 0.3
ENERGY_GATE_DB: float = -40.0
SALIENCE_LR: float = 1e-3
SALIENCE_EPOCHS: int = 30
MASK_THRESHOLD: float = 0.5         # Deterministic mask used for rewards and conversion

# Segment extraction
SEGMENT_MIN_FRAMES: int = 3
SEGMENT_MERGE_GAP: int = 2          # Runs separated by fewer zero frames than this are merged

# RL agent
DURATION_GRID: tuple[float, ...] = tuple(round(0.25 + 0.15 * i, 2) for i in range(12))
PITCH_GRID: tuple[float, ...] = tuple(round(0.50 + 0.10 * i, 2) for i in range(11))
GAIN_GRID: tuple[float, ...] = DURATION_GRID
AGENT_CHANNELS: tuple[int, ...] = (16, 32, 32, 32)
AGENT_ATTENTION_DIM: int = 32
AGENT_LR: float = 1e-3
ENTROPY_COEF: float = 0.01
VALUE_COEF: float = 0.5
AGENT_STEPS: int = 5000
REWARD_WINDOW: int = 200            # Moving-average window for the reward learning curve
AGENT_LOG_EVERY: int = 100

# Adam
ADAM_BETA1: float = 0.9
ADAM_BETA2: float = 0.999
ADAM_EPS: float = 1e-8

# Corpus splits
VAL_FRACTION: float = 0.1
TEST_FRACTION: float = 0.1

# Named random sub-streams derived from one master seed
SEED_STREAMS: tuple[str, ...] = ("corpus", "split", "init", "gumbel", "action", "eval", "shuffle", "target")
EVAL_SEED: int = 1234

# Model files
MODEL_MAGIC: bytes = b"PRSM"
MODEL_FORMAT_VERSION: int = 1

# Bandit self-check
BANDIT_REWARDS: tuple[float, ...] = (1.0, 0.0, -1.0)
BANDIT_SAMPLES: int = 10_000
BANDIT_TRAIN_STEPS: int = 2000
BANDIT_LR: float = 0.05
BANDIT_REPLICATES: int = 3           # Independent estimator replicates; a majority must sit within 2 SE
