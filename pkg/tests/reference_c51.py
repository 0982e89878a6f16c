"""A plain single-network categorical DQN used as the reduction oracle.

Written against the low-level primitives only (network, Adam step,
projection, seeded streams) with its own loop: greedy on the expected value,
uniform replay, target net copied every ``target_update_period`` steps.
"""
import numpy as np

from sentinel.approx import OptimizerState, ValueNetwork, train_step
from sentinel.ensemble import stream_rng
from sentinel.retdist import project_batch


class ReferenceC51:
    def __init__(self, cfg, state_dim, n_actions):
        self.cfg = cfg
        self.net = ValueNetwork(state_dim, n_actions, cfg.support, cfg.hidden, cfg.activation,
                                rng=stream_rng(cfg.seed, "init", 0))
        self.target = self.net.copy()
        self.opt = OptimizerState.for_network(self.net, lr=cfg.lr)
        self.explore = stream_rng(cfg.seed, "explore")
        self.sample = stream_rng(cfg.seed, "sample")
        self.n_actions = n_actions
        self.data = []
        self.steps = 0
        self.losses = []

    def q(self, net, states):
        return (net.probs(states) * self.cfg.support.atoms).sum(axis=-1)

    def act(self, state):
        if self.explore.random() < self.cfg.epsilon(self.steps):
            return int(self.explore.integers(self.n_actions))
        return int(np.argmax(self.q(self.net, state)[0]))

    def run(self, env, steps):
        obs = env.reset()
        actions = []
        for t in range(1, steps + 1):
            a = self.act(obs)
            out = env.step(a)
            self.data.append((obs, a, out.reward, out.next_state, out.terminal))
            actions.append(a)
            self.steps += 1
            obs = env.reset() if out.terminal else out.next_state
            if t % self.cfg.value_update_period == 0 and len(self.data) >= self.cfg.batch_size:
                self.learn()
            if t % self.cfg.target_update_period == 0:
                self.target = self.net.copy()
        return actions

    def learn(self):
        pick = self.sample.integers(len(self.data), size=self.cfg.batch_size)
        s, a, r, s2, done = (np.array(col) for col in zip(*(self.data[i] for i in pick)))
        p_next = self.target.probs(s2)
        best = np.argmax((p_next * self.cfg.support.atoms).sum(axis=-1), axis=-1)
        targets = project_batch(p_next[np.arange(len(pick)), best], r, self.cfg.gamma, done, self.cfg.support)
        self.losses.append(train_step(self.net, self.opt, s, a, targets))
