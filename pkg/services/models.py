from __future__ import annotations

from typing import Dict, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import settings
from utils.validator import is_simplex

__all__ = [
    "AudioBuffer",
    "Archetype",
    "SyntheticSpec",
    "CorpusEntry",
    "WsolaParams",
    "TimeStretchMap",
    "SegmentEdit",
    "MarkovPrior",
    "SalienceConfig",
    "ActionGrid",
    "AgentConfig",
    "RunConfig",
    "AgentState",
    "one_hot",
]


class AudioBuffer(BaseModel):
    """Mono waveform in [-1, 1] with its sample rate."""
    samples: np.ndarray
    sample_rate: int = Field(settings.SAMPLE_RATE, gt=0)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @field_validator("samples", mode="before")
    @classmethod
    def as_float_vector(cls, v) -> np.ndarray:
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples contain NaN or Inf")
        return arr

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return len(self) / float(self.sample_rate)

    def with_samples(self, samples: np.ndarray) -> "AudioBuffer":
        return AudioBuffer(samples=samples, sample_rate=self.sample_rate)

    def clipped(self) -> tuple["AudioBuffer", int]:
        """Saturate to [-1, 1]; returns the buffer and the number of clipped samples."""
        over = int(np.count_nonzero(np.abs(self.samples) > 1.0))
        if not over:
            return self, 0
        return self.with_samples(np.clip(self.samples, -1.0, 1.0)), over


class Archetype(BaseModel):
    f0_base: float = Field(..., gt=0.0)
    f0_slope: float = 0.0
    rate_factor: float = Field(..., gt=0.0)
    gain_factor: float = Field(..., gt=0.0)
    vibrato_hz: float = Field(0.0, ge=0.0)
    vibrato_depth: float = Field(0.0, ge=0.0)

    model_config = {"frozen": True}

    def _vector(self) -> tuple[float, ...]:
        return (self.f0_base, self.f0_slope, self.rate_factor, self.gain_factor, self.vibrato_hz, self.vibrato_depth)


def _default_archetypes() -> Dict[str, Archetype]:
    return {name: Archetype(**params) for name, params in settings.ARCHETYPES.items()}


class SyntheticSpec(BaseModel):
    archetypes: Dict[str, Archetype] = Field(default_factory=_default_archetypes)
    utterance_seconds: float = Field(settings.UTTERANCE_SECONDS, gt=0.0)
    cue_fraction: float = Field(settings.CUE_FRACTION, gt=0.0, lt=1.0)
    label_noise_scale: float = Field(settings.LABEL_NOISE_SCALE, ge=0.0, lt=1.0)
    silence_seconds: float = Field(settings.SILENCE_SECONDS, ge=0.0)
    sample_rate: int = Field(settings.SAMPLE_RATE, gt=0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_archetypes(self) -> "SyntheticSpec":
        missing = [e for e in settings.EMOTIONS if e not in self.archetypes]
        if missing:
            raise ValueError(f"archetypes missing for: {', '.join(missing)}")
        names = list(settings.EMOTIONS)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                if not _archetypes_distinct(self.archetypes[a], self.archetypes[b]):
                    raise ValueError(f"archetypes '{a}' and '{b}' differ by less than 10% in every parameter")
        voiced = self.utterance_seconds - 2 * self.silence_seconds
        if self.cue_fraction * self.utterance_seconds > voiced:
            raise ValueError("cue span does not fit inside the voiced region")
        return self


def _archetypes_distinct(a: Archetype, b: Archetype) -> bool:
    for x, y in zip(a._vector(), b._vector()):
        scale = max(abs(x), abs(y))
        if scale == 0.0:
            continue
        if abs(x - y) / scale >= settings.ARCHETYPE_MIN_REL_DIFF:
            return True
    return False


class CorpusEntry(BaseModel):
    id: str
    audio_path: str
    saliency: Tuple[float, float, float, float, float]
    cue_span: Optional[Tuple[int, int]] = None

    model_config = {"frozen": True}

    @field_validator("saliency")
    @classmethod
    def on_simplex(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not is_simplex(np.asarray(v)):
            raise ValueError(f"saliency must be nonnegative and sum to 1 (got sum {sum(v):.8f})")
        return v

    @property
    def label(self) -> int:
        return int(np.argmax(self.saliency))


class WsolaParams(BaseModel):
    window_len: int = Field(settings.WSOLA_WINDOW, ge=2)
    hop: int = Field(settings.WSOLA_HOP, ge=1)
    search_radius: int = Field(settings.WSOLA_SEARCH, ge=0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_geometry(self) -> "WsolaParams":
        if self.window_len % 2:
            raise ValueError("window_len must be even")
        if self.hop * 2 != self.window_len:
            raise ValueError("hop must equal window_len / 2 (overlap factor 0.5)")
        if self.search_radius >= self.hop:
            raise ValueError("search_radius must be smaller than hop")
        return self

    @classmethod
    def for_window(cls, window_len: int, search_radius: Optional[int] = None) -> "WsolaParams":
        hop = window_len // 2
        radius = min(settings.WSOLA_SEARCH, hop - 1) if search_radius is None else search_radius
        return cls(window_len=window_len, hop=hop, search_radius=radius)


class TimeStretchMap(BaseModel):
    """Monotone piecewise-linear map from input sample time to output sample time."""
    breakpoints: Tuple[Tuple[float, float], ...]

    model_config = {"frozen": True}

    @field_validator("breakpoints")
    @classmethod
    def strictly_increasing(cls, v):
        if len(v) < 2:
            raise ValueError("a time-stretch map needs at least two breakpoints")
        if tuple(float(c) for c in v[0]) != (0.0, 0.0):
            raise ValueError("first breakpoint must be (0, 0)")
        for (x0, y0), (x1, y1) in zip(v[:-1], v[1:]):
            if not (x1 > x0 and y1 > y0):
                raise ValueError("breakpoints must be strictly increasing in both coordinates")
        return v

    @property
    def input_length(self) -> int:
        return int(round(self.breakpoints[-1][0]))

    @property
    def output_length(self) -> int:
        return int(round(self.breakpoints[-1][1]))

    @classmethod
    def uniform(cls, input_length: int, factor: float) -> "TimeStretchMap":
        return cls(breakpoints=((0.0, 0.0), (float(input_length), float(round(factor * input_length)))))

    @classmethod
    def piecewise(cls, input_length: int, spans: list[tuple[int, int, float]]) -> "TimeStretchMap":
        """Build a map with factor ``f`` inside each ``(start, end, f)`` span and 1.0 elsewhere."""
        points = [(0.0, 0.0)]
        x_prev, y_prev = 0.0, 0.0
        for start, end, factor in sorted(spans):
            if start > x_prev:
                y_prev += start - x_prev
                x_prev = float(start)
                points.append((x_prev, y_prev))
            y_prev += (end - start) * factor
            x_prev = float(end)
            points.append((x_prev, y_prev))
        if input_length > x_prev:
            y_prev += input_length - x_prev
            points.append((float(input_length), y_prev))
        return cls(breakpoints=tuple(points))


class SegmentEdit(BaseModel):
    start: int = Field(..., ge=0)
    end: int = Field(..., gt=0)
    duration_factor: float = Field(1.0, gt=0.0)
    pitch_factor: float = Field(1.0, gt=0.0)
    gain: float = Field(1.0, gt=0.0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def span_order(self) -> "SegmentEdit":
        if self.end <= self.start:
            raise ValueError("segment end must be after start")
        return self

    @property
    def is_identity(self) -> bool:
        return self.duration_factor == 1.0 and self.pitch_factor == 1.0 and self.gain == 1.0


class MarkovPrior(BaseModel):
    p_stay: float = Field(settings.MARKOV_P_STAY, gt=0.0, lt=1.0)
    p_init: float = Field(settings.MARKOV_P_INIT, gt=0.0, lt=1.0)

    model_config = {"frozen": True}

    def log_transition(self) -> np.ndarray:
        """log P(M_t = j | M_{t-1} = i) as a 2x2 matrix indexed [i, j]."""
        p = self.p_stay
        return np.log(np.array([[p, 1.0 - p], [1.0 - p, p]], dtype=np.float64))

    def run_survival(self, k: int) -> float:
        """Probability that an active run lasts at least ``k`` more frames."""
        return float(self.p_stay ** k)


class SalienceConfig(BaseModel):
    lambda_prior: float = Field(settings.LAMBDA_PRIOR, ge=0.0)
    lambda_sparse: float = Field(settings.LAMBDA_SPARSE, ge=0.0)
    sparsity_target: float = Field(settings.SPARSITY_TARGET, gt=0.0, lt=1.0)
    kl_reduction: Literal["mean", "sum"] = settings.KL_REDUCTION
    temperature_start: float = Field(settings.GUMBEL_TEMPERATURE_START, gt=0.0)
    temperature_end: float = Field(settings.GUMBEL_TEMPERATURE_END, gt=0.0)
    energy_gate_db: float = settings.ENERGY_GATE_DB
    p_stay: float = Field(settings.MARKOV_P_STAY, gt=0.0, lt=1.0)
    p_init: float = Field(settings.MARKOV_P_INIT, gt=0.0, lt=1.0)
    epochs: int = Field(settings.SALIENCE_EPOCHS, ge=1)
    lr: float = Field(settings.SALIENCE_LR, gt=0.0)
    extractor_channels: Tuple[int, ...] = settings.EXTRACTOR_CHANNELS
    extractor_kernel: int = Field(settings.EXTRACTOR_KERNEL, ge=1)
    extractor_strides: Tuple[int, ...] = settings.EXTRACTOR_STRIDES
    gru_hidden: int = Field(settings.MASK_GRU_HIDDEN, ge=1)
    predictor_channels: int = Field(settings.PREDICTOR_CHANNELS, ge=1)
    predictor_kernel: int = Field(settings.PREDICTOR_KERNEL, ge=1)
    val_fraction: float = Field(settings.VAL_FRACTION, ge=0.0, lt=1.0)
    test_fraction: float = Field(settings.TEST_FRACTION, ge=0.0, lt=1.0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_extractor(self) -> "SalienceConfig":
        if len(self.extractor_channels) != len(self.extractor_strides):
            raise ValueError("extractor_channels and extractor_strides must have equal length")
        return self

    @property
    def prior(self) -> MarkovPrior:
        return MarkovPrior(p_stay=self.p_stay, p_init=self.p_init)

    @property
    def hop(self) -> int:
        return int(np.prod(self.extractor_strides))

    def temperature_at(self, step: int, total_steps: int) -> float:
        """Linear anneal from temperature_start to temperature_end over training."""
        if total_steps <= 1:
            return self.temperature_end
        frac = min(1.0, max(0.0, step / float(total_steps - 1)))
        return self.temperature_start + frac * (self.temperature_end - self.temperature_start)


class ActionGrid(BaseModel):
    duration: Tuple[float, ...] = settings.DURATION_GRID
    pitch: Tuple[float, ...] = settings.PITCH_GRID
    gain: Tuple[float, ...] = settings.GAIN_GRID

    model_config = {"frozen": True}

    @field_validator("duration", "pitch", "gain")
    @classmethod
    def non_empty_positive(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v or any(x <= 0.0 for x in v):
            raise ValueError("factor grids must be non-empty and positive")
        return v

    def heads(self) -> dict[str, Tuple[float, ...]]:
        return {"duration": self.duration, "pitch": self.pitch, "gain": self.gain}

    def identity_index(self, head: str) -> int:
        grid = self.heads()[head]
        return int(np.argmin(np.abs(np.asarray(grid) - 1.0)))


class AgentConfig(BaseModel):
    steps: int = Field(settings.AGENT_STEPS, ge=1)
    lr: float = Field(settings.AGENT_LR, gt=0.0)
    entropy_coef: float = Field(settings.ENTROPY_COEF, ge=0.0)
    value_coef: float = Field(settings.VALUE_COEF, ge=0.0)
    duration_only: bool = False
    reward_window: int = Field(settings.REWARD_WINDOW, ge=1)
    log_every: int = Field(settings.AGENT_LOG_EVERY, ge=1)
    channels: Tuple[int, ...] = settings.AGENT_CHANNELS
    kernel: int = Field(settings.EXTRACTOR_KERNEL, ge=1)
    strides: Tuple[int, ...] = settings.EXTRACTOR_STRIDES
    attention_dim: int = Field(settings.AGENT_ATTENTION_DIM, ge=1)
    grid: ActionGrid = Field(default_factory=ActionGrid)
    window_len: int = Field(settings.WSOLA_WINDOW, ge=2)
    search_radius: int = Field(settings.WSOLA_SEARCH, ge=0)

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def check_conv(self) -> "AgentConfig":
        if len(self.channels) != len(self.strides):
            raise ValueError("channels and strides must have equal length")
        return self

    @property
    def wsola(self) -> WsolaParams:
        return WsolaParams(window_len=self.window_len, hop=self.window_len // 2, search_radius=self.search_radius)


class RunConfig(BaseModel):
    """Fully resolved invocation record written to ``<out_dir>/config.json``."""
    subcommand: str
    paths: Dict[str, str] = Field(default_factory=dict)
    seed: int = 0
    overrides: Dict[str, str] = Field(default_factory=dict)
    verbosity: str = "INFO"
    resolved: Dict[str, object] = Field(default_factory=dict)
    checksums: Dict[str, str] = Field(default_factory=dict)

    model_config = {"frozen": True}


def one_hot(index: int, size: int = settings.NUM_EMOTIONS) -> np.ndarray:
    if not 0 <= index < size:
        raise ValueError(f"class index {index} outside [0, {size})")
    v = np.zeros(size, dtype=np.float64)
    v[index] = 1.0
    return v


class AgentState(BaseModel):
    """Utterance, the one selected salient span, and the target emotion index."""
    audio: AudioBuffer
    span: Tuple[int, int]
    target: int = Field(..., ge=0, lt=settings.NUM_EMOTIONS)

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def span_inside(self) -> "AgentState":
        start, end = self.span
        if not 0 <= start < end <= len(self.audio):
            raise ValueError(f"span {self.span} outside signal of {len(self.audio)} samples")
        return self

    def segment_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.audio), dtype=np.float64)
        mask[self.span[0]:self.span[1]] = 1.0
        return mask

    @property
    def target_code(self) -> np.ndarray:
        return one_hot(self.target)
