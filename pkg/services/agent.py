"""Actor-critic prosody agent.

The policy reads the waveform and a per-sample indicator of the selected span as two input
channels, encodes them with a strided conv stack and one self-attention block, max-pools
over time, appends the target one-hot, and emits one categorical head per factor type plus
a scalar critic. Episodes are single steps: sample factors, edit the span, score the result.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple, Union

import numpy as np

from config.settings import NUM_EMOTIONS
from services.editing import apply_edits
from services.models import ActionGrid, AgentConfig, AgentState, AudioBuffer, SalienceConfig, SegmentEdit
from services.salience import predict_scores
from utils import autograd as ag
from utils import layers
from utils.autograd import Tape, Tensor, backward
from utils.errors import InvalidSpecError
from utils.optim import ParamStore, adam_step
from utils.serialization import load_params, save_params
from utils.seeding import substream

logger = logging.getLogger(__name__)

HEADS: Tuple[str, ...] = ("duration", "pitch", "gain")

__all__ = [
    "HEADS",
    "PolicyOutput",
    "UpdateStats",
    "action_grid_default",
    "active_heads",
    "init_agent",
    "policy_forward",
    "sample_action",
    "greedy_action",
    "action_factors",
    "edit_for_action",
    "apply_action",
    "compute_reward",
    "actor_critic_update",
    "save_agent",
    "load_agent",
]


@dataclass(frozen=True)
class PolicyOutput:
    probs: Dict[str, Tensor]
    log_probs: Dict[str, Tensor]
    value: Tensor

    def distribution(self, head: str) -> np.ndarray:
        return self.probs[head].data.copy()


@dataclass(frozen=True)
class UpdateStats:
    actor_loss: float
    critic_loss: float
    value: float
    advantage: float
    entropy: float
    tape_ops: Tuple[str, ...]


def action_grid_default() -> ActionGrid:
    return ActionGrid()


def active_heads(cfg: AgentConfig) -> Tuple[str, ...]:
    return ("duration",) if cfg.duration_only else HEADS


def init_agent(cfg: AgentConfig, seed: int) -> ParamStore:
    rng = substream(seed, "init", 1)
    store = ParamStore()
    layers.init_conv_stack(store, "encoder", 2, cfg.channels, cfg.kernel, rng)
    width = cfg.channels[-1]
    layers.init_attention(store, "attn", width, cfg.attention_dim, rng)
    for head, grid in cfg.grid.heads().items():
        layers.init_linear(store, f"head.{head}", width + NUM_EMOTIONS, len(grid), rng)
    layers.init_linear(store, "critic", width + NUM_EMOTIONS, 1, rng)
    logger.info(f"[agent] initialized params={store.num_values()} seed={seed}")
    return store


def policy_forward(
    model: Union[ParamStore, Mapping[str, Tensor]],
    state: AgentState,
    cfg: AgentConfig,
) -> PolicyOutput:
    p = model.constants() if isinstance(model, ParamStore) else model
    x = np.stack([state.audio.samples, state.segment_mask()], axis=1)
    x = layers.pad_to_frames(x, cfg.kernel, cfg.strides)
    h = layers.conv_stack(p, "encoder", Tensor(x), cfg.strides)
    h = layers.self_attention(p, "attn", h)
    pooled = ag.maxpool_time(h)
    z = ag.concat([pooled, Tensor(state.target_code)], axis=0)

    probs, log_probs = {}, {}
    for head in HEADS:
        logits = layers.linear(p, f"head.{head}", z)
        probs[head] = ag.softmax(logits)
        log_probs[head] = ag.log_softmax(logits)
    value = ag.reshape(layers.linear(p, "critic", z), ())
    return PolicyOutput(probs=probs, log_probs=log_probs, value=value)


def _fixed_indices(cfg: AgentConfig) -> Dict[str, int]:
    if not cfg.duration_only:
        return {}
    return {h: cfg.grid.identity_index(h) for h in HEADS if h != "duration"}


def sample_action(out: PolicyOutput, rng: np.random.Generator, cfg: Optional[AgentConfig] = None) -> Dict[str, int]:
    """Independent categorical draw per head (inverse CDF on one uniform per head)."""
    fixed = _fixed_indices(cfg) if cfg is not None else {}
    action = {}
    for head in HEADS:
        u = rng.random()
        if head in fixed:
            action[head] = fixed[head]
            continue
        cdf = np.cumsum(out.probs[head].data)
        action[head] = int(min(np.searchsorted(cdf, u, side="right"), cdf.shape[0] - 1))
    return action


def greedy_action(out: PolicyOutput, cfg: Optional[AgentConfig] = None) -> Dict[str, int]:
    fixed = _fixed_indices(cfg) if cfg is not None else {}
    return {h: fixed.get(h, int(np.argmax(out.probs[h].data))) for h in HEADS}


def action_factors(action: Mapping[str, int], cfg: AgentConfig) -> Dict[str, float]:
    """Grid values for an action; always exact grid members."""
    grids = cfg.grid.heads()
    return {h: grids[h][action[h]] for h in HEADS}


def edit_for_action(span: Tuple[int, int], action: Mapping[str, int], cfg: AgentConfig) -> SegmentEdit:
    f = action_factors(action, cfg)
    return SegmentEdit(
        start=span[0],
        end=span[1],
        duration_factor=f["duration"],
        pitch_factor=f["pitch"],
        gain=f["gain"],
    )


def compute_reward(
    salience: ParamStore,
    salience_cfg: SalienceConfig,
    original: AudioBuffer,
    modified: AudioBuffer,
    target: int,
    before: Optional[float] = None,
) -> float:
    """Increase of the target-class score, both scored with the thresholded mask.

    ``before`` may carry the already computed score of ``original``.
    """
    if before is None:
        before = float(predict_scores(salience, original, salience_cfg)[0][target])
    after = float(predict_scores(salience, modified, salience_cfg)[0][target])
    return after - before


def apply_action(state: AgentState, action: Mapping[str, int], cfg: AgentConfig) -> AudioBuffer:
    """Environment step: edit the selected span (no gradients)."""
    return apply_edits(state.audio, [edit_for_action(state.span, action, cfg)], cfg.wsola)


def actor_critic_update(
    store: ParamStore,
    state: AgentState,
    action: Mapping[str, int],
    reward: float,
    cfg: AgentConfig,
) -> UpdateStats:
    """One on-policy step: advantage-weighted log-likelihood, entropy bonus, squared critic error."""
    heads = active_heads(cfg)
    with Tape() as tape:
        params = store.watch(tape)
        out = policy_forward(params, state, cfg)
        advantage = float(reward) - out.value.item()

        log_prob = None
        entropy = None
        for head in heads:
            lp = out.log_probs[head][action[head]]
            ent = ag.neg(ag.sum(ag.mul(out.probs[head], out.log_probs[head])))
            log_prob = lp if log_prob is None else ag.add(log_prob, lp)
            entropy = ent if entropy is None else ag.add(entropy, ent)

        actor = ag.sub(ag.scale(log_prob, -advantage), ag.scale(entropy, cfg.entropy_coef))
        err = ag.sub(float(reward), out.value)
        critic = ag.mul(err, err)
        total = ag.add(actor, ag.scale(critic, cfg.value_coef))
    grads = backward(tape, total)
    adam_step(store, grads, cfg.lr)
    return UpdateStats(
        actor_loss=actor.item(),
        critic_loss=critic.item(),
        value=out.value.item(),
        advantage=advantage,
        entropy=entropy.item(),
        tape_ops=tuple(sorted(set(tape.op_names()))),
    )


def save_agent(path: str, store: ParamStore, cfg: AgentConfig, extra: Optional[dict] = None) -> None:
    save_params(path, store, name="agent", meta={"config": cfg.model_dump(), **(extra or {})})


def load_agent(path: str) -> Tuple[ParamStore, AgentConfig]:
    store, name, meta = load_params(path)
    if name != "agent":
        raise InvalidSpecError(f"{path}: expected an agent model, found '{name}'")
    return store, AgentConfig.model_validate(meta.get("config", {}))
