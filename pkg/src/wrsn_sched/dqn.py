import logging
import math
from typing import Dict, List, Mapping, Optional, Sequence

import attr
import numpy as np

from wrsn_sched.config import SchedConfig
from wrsn_sched.embed import EmbeddingParams, embed_graph, encode, q_backward, q_for, q_value
from wrsn_sched.envs import ChargingEnv, ScheduleState, make_env, rollout
from wrsn_sched.errors import ConfigError, TrainingDivergedError, TrainingError
from wrsn_sched.instances import ProblemInstance, Variant

log = logging.getLogger(__name__)


@attr.s(frozen=True)
class Transition:
    """Snapshot s_l, action v_l, scaled n-step return and the successor s_{l+n}."""

    state = attr.ib(type=ScheduleState)
    action = attr.ib(type=int)
    reward = attr.ib(type=float)
    next_state = attr.ib(type=ScheduleState)
    terminal = attr.ib(type=bool)
    steps = attr.ib(default=1, type=int)


class ReplayBuffer:
    """Fixed capacity ring of transitions, the oldest entry is overwritten first."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ConfigError(f"replay capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.buffer: List[Transition] = []
        self.position = 0

    def push(self, transition: Transition) -> None:
        if len(self.buffer) < self.capacity:
            self.buffer.append(transition)
        else:
            self.buffer[self.position] = transition
        self.position = (self.position + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Transition]:
        picks = rng.choice(len(self.buffer), size=min(batch_size, len(self.buffer)), replace=False)
        return [self.buffer[i] for i in picks]

    def __len__(self) -> int:
        return len(self.buffer)


@attr.s
class TrainConfig:
    episodes = attr.ib(default=100, type=int)
    gamma = attr.ib(default=None, type=Optional[float])
    epsilon_start = attr.ib(default=1.0, type=float)
    epsilon_end = attr.ib(default=0.05, type=float)
    epsilon_decay = attr.ib(default=0.8, type=float)
    n_step = attr.ib(default=1, type=int)
    batch_size = attr.ib(default=32, type=int)
    learning_rate = attr.ib(default=1e-3, type=float)
    capacity = attr.ib(default=10000, type=int)
    warmup = attr.ib(default=500, type=int)
    seed = attr.ib(default=0, type=int)
    p = attr.ib(default=64, type=int)
    rounds = attr.ib(default=4, type=int)
    dt = attr.ib(default=None, type=Optional[float])
    p2_reward = attr.ib(default="energy", type=str)
    log_every = attr.ib(default=10, type=int)
    eval_every = attr.ib(default=0, type=int)

    @classmethod
    def from_config(cls, config: SchedConfig, seed: Optional[int] = None) -> "TrainConfig":
        return cls(
            episodes=config.episodes,
            gamma=config.gamma,
            n_step=config.n_step,
            batch_size=config.batch_size,
            learning_rate=config.learning_rate,
            capacity=config.capacity,
            warmup=config.warmup,
            seed=config.seed if seed is None else seed,
            p=config.p,
            rounds=config.rounds,
            dt=config.dt if config.variant_enum is Variant.P1_MOBILE_PATH else None,
            p2_reward=config.p2_reward,
            log_every=config.log_every,
            eval_every=config.eval_every,
        )

    def validate(self) -> None:
        if self.episodes < 1:
            raise ConfigError("training needs at least one episode")
        if self.gamma is not None and not 0 <= self.gamma <= 1:
            raise ConfigError(f"gamma {self.gamma} outside [0, 1]")
        if self.n_step < 1:
            raise ConfigError("n_step must be >= 1")
        if not 1 <= self.batch_size <= self.capacity:
            raise ConfigError(f"batch size {self.batch_size} must lie in [1, capacity={self.capacity}]")
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ConfigError("epsilon schedule must satisfy 0 <= end <= start <= 1")
        if not 0 < self.epsilon_decay <= 1:
            raise ConfigError("epsilon decay fraction must lie in (0, 1]")
        if self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")
        if self.p2_reward not in ("energy", "prize"):
            raise ConfigError(f"p2_reward must be energy or prize, got {self.p2_reward!r}")

    def gamma_for(self, variant: Variant) -> float:
        if self.gamma is not None:
            return self.gamma
        return 0.99 if variant is Variant.P3_KCOVERAGE else 1.0

    def epsilon_at(self, episode: int) -> float:
        """Linear annealing over the first epsilon_decay share of the episodes."""
        span = max(1.0, self.epsilon_decay * self.episodes)
        frac = min(1.0, episode / span)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


@attr.s
class TrainingLogEntry:
    episode = attr.ib(type=int)
    objective = attr.ib(type=float)
    epsilon = attr.ib(type=float)
    loss_mean = attr.ib(default=math.nan, type=float)
    eval_objective = attr.ib(default=None, type=Optional[float])


@attr.s
class TrainingResult:
    params = attr.ib(type=EmbeddingParams)
    log = attr.ib(factory=list, type=List[TrainingLogEntry])


def select_action(
    actions: Sequence[int],
    q_values: Mapping[int, float],
    epsilon: float,
    rng: Optional[np.random.Generator] = None,
) -> Optional[int]:
    """Epsilon-greedy choice; None when there is nothing left to choose."""
    if not actions:
        return None
    ordered = sorted(actions)
    if epsilon > 0:
        if rng is None:
            raise TrainingError("exploration needs a random generator")
        if rng.random() < epsilon:
            return ordered[int(rng.integers(len(ordered)))]
    best = ordered[0]
    for v in ordered[1:]:
        if q_values[v] > q_values[best]:
            best = v
    return best


def td_target(reward: float, successor_q: Sequence[float], gamma: float, steps: int = 1, terminal: bool = False) -> float:
    if terminal or not len(successor_q):
        return reward
    return reward + gamma ** steps * max(successor_q)


def n_step_target(
    transition: Transition, params: EmbeddingParams, gamma: float, env: Optional[ChargingEnv] = None
) -> float:
    if transition.terminal:
        return transition.reward
    env = env or make_env(transition.next_state.instance, transition.next_state.dt)
    actions = env.actions(transition.next_state)
    if not actions:
        return transition.reward
    successor = q_for(encode(transition.next_state), params, actions)
    return td_target(transition.reward, list(successor.values()), gamma, transition.steps)


def sgd_step(
    params: EmbeddingParams,
    batch: Sequence[Transition],
    gamma: float,
    learning_rate: float,
    env_kwargs: Optional[Dict] = None,
) -> float:
    """One step on sum (y - Q(s, v))^2 / batch, returns the loss before the step."""
    grads = params.zeros_like()
    losses = []
    for transition in batch:
        env = make_env(transition.next_state.instance, transition.next_state.dt, **(env_kwargs or {}))
        target = n_step_target(transition, params, gamma, env)
        view = encode(transition.state)
        embedding = embed_graph(view, params)
        index = view.index(transition.action)
        diff = q_value(embedding, index, params) - target
        losses.append(diff * diff)
        for name, grad in q_backward(view, embedding, index, params, 2.0 * diff / len(batch)).items():
            grads[name] += grad
    loss = float(np.mean(losses))
    if not math.isfinite(loss) or not all(np.isfinite(grad).all() for grad in grads.values()):
        raise TrainingDivergedError(f"non-finite loss {loss} on a batch of {len(batch)}")
    params.apply(grads, learning_rate)
    return loss


class DqnTrainer:
    """Epsilon-greedy rollouts feeding an experience replay memory, one SGD step per environment step."""

    def __init__(self, config: Optional[TrainConfig] = None) -> None:
        self.config = config or TrainConfig()
        self.config.validate()
        self.log = logging.getLogger(self.__class__.__name__)

    def _env(self, instance: ProblemInstance) -> ChargingEnv:
        return make_env(instance, self.config.dt, **self._env_kwargs(instance.variant))

    def _env_kwargs(self, variant: Variant) -> Dict:
        return {"reward_mode": self.config.p2_reward} if variant is Variant.P2_FULLY_CHARGING else {}

    def train(self, instances: Sequence[ProblemInstance], params: Optional[EmbeddingParams] = None) -> TrainingResult:
        if not instances:
            raise TrainingError("training needs at least one instance")
        variants = {instance.variant for instance in instances}
        if len(variants) != 1:
            raise TrainingError(f"training instances mix variants {sorted(v.value for v in variants)}")
        variant = variants.pop()
        config = self.config
        gamma = config.gamma_for(variant)
        env_kwargs = self._env_kwargs(variant)
        rng = np.random.default_rng(config.seed)
        params = params or EmbeddingParams.init(config.p, rounds=config.rounds, rng=rng)
        memory = ReplayBuffer(config.capacity)
        result = TrainingResult(params)

        self.log.info(
            f"Training on {len(instances)} {variant.value} instances for {config.episodes} episodes, gamma={gamma}"
        )
        for episode in range(config.episodes):
            instance = instances[episode % len(instances)]
            env = self._env(instance)
            epsilon = config.epsilon_at(episode)
            state, losses = self._episode(env, params, memory, epsilon, gamma, rng, env_kwargs)
            entry = TrainingLogEntry(
                episode=episode,
                objective=env.objective(state),
                epsilon=epsilon,
                loss_mean=float(np.mean(losses)) if losses else math.nan,
            )
            if config.eval_every and (episode + 1) % config.eval_every == 0:
                entry.eval_objective = env.objective(greedy_rollout(instance, params, config.dt, **env_kwargs))
            result.log.append(entry)
            if config.log_every and (episode + 1) % config.log_every == 0:
                self.log.info(
                    f"episode {episode + 1}/{config.episodes}: objective {entry.objective:.3f}, "
                    f"epsilon {epsilon:.3f}, loss {entry.loss_mean:.6f}, memory {len(memory)}"
                )
        return result

    def _episode(
        self,
        env: ChargingEnv,
        params: EmbeddingParams,
        memory: ReplayBuffer,
        epsilon: float,
        gamma: float,
        rng: np.random.Generator,
        env_kwargs: Dict,
    ):
        config = self.config
        scale = env.reward_scale
        state = env.reset()
        history = []
        losses = []
        terminal = env.is_terminal(state)
        while not terminal:
            actions = env.actions(state)
            q_values = q_for(encode(state), params, actions) if epsilon < 1 else {}
            vertex = select_action(actions, q_values, epsilon, rng)
            if vertex is None:
                break
            outcome = env.step(state, vertex)
            if not math.isfinite(outcome.reward):
                self.log.debug(f"vertex {vertex} has no feasible position, episode stops")
                break
            history.append((state, vertex, outcome.reward / scale))
            state = outcome.next_state
            terminal = outcome.terminal
            if len(history) >= config.n_step:
                self._store(memory, history, len(history) - config.n_step, state, terminal, gamma)
            if len(memory) >= max(config.warmup, config.batch_size):
                batch = memory.sample(config.batch_size, rng)
                losses.append(sgd_step(params, batch, gamma, config.learning_rate, env_kwargs))
        if terminal:
            for start in range(max(0, len(history) - config.n_step + 1), len(history)):
                self._store(memory, history, start, state, True, gamma)
        return state, losses

    @staticmethod
    def _store(memory: ReplayBuffer, history, start: int, successor: ScheduleState, terminal: bool, gamma: float):
        window = history[start:]
        ret = sum(gamma ** i * reward for i, (_, _, reward) in enumerate(window))
        first_state, action, _ = window[0]
        memory.push(Transition(first_state, action, ret, successor, terminal, len(window)))


def train(instances: Sequence[ProblemInstance], config: Optional[TrainConfig] = None) -> TrainingResult:
    return DqnTrainer(config).train(instances)


def greedy_rollout(
    instance: ProblemInstance, params: EmbeddingParams, dt: Optional[float] = None, **env_kwargs
) -> ScheduleState:
    env = make_env(instance, dt, **env_kwargs)

    def choose(state: ScheduleState, actions: Sequence[int]) -> Optional[int]:
        return select_action(actions, q_for(encode(state), params, actions), 0.0)

    state, _ = rollout(env, choose)
    return state
