"""The four studies: mixture CVaR estimation, toy convergence, CartPole lambda
sweep and highway risk comparison. Every job is a pure function of
``(config, condition, seed)`` so jobs can fan out over a process pool and
still produce identical rows."""
from __future__ import annotations

import sys
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ..ensemble import AgentConfig, SentinelAgent
from ..envs import make_env, true_return_distributions, value_bounds
from ..envs.three_state import one_hot
from ..retdist import wasserstein1
from ..risk import (
    RiskMeasureSpec, component_cvars, cvar_empirical, cvar_weighted, mixture_cvar_oracle,
    sample_mixture_prior,
)
from .config import ExperimentConfig
from .io import write_outputs


def mean_std(values) -> dict:
    """Mean and population standard deviation (ddof 0) across seeds or draws."""
    x = np.asarray(values, dtype=float)
    return {"mean": float(x.mean()), "std": float(x.std()), "n": int(x.size)}


def agent_config(cfg: ExperimentConfig, seed: int, computed: dict, fixed: dict) -> AgentConfig:
    """Experiment-computed defaults, then user overrides, then per-condition settings."""
    return AgentConfig.from_dict({**computed, **cfg.agent, **fixed, "seed": seed})


def train(agent: SentinelAgent, env, steps: int, on_step) -> None:
    for t in range(1, steps + 1):
        _, out = agent.act_and_record(env)
        agent.training_step(t)
        on_step(t, out)


def _label(x) -> str:
    return f"{float(x):g}"


# -- mixture CVaR study -------------------------------------------------------------------

def fig2_job(cfg: ExperimentConfig, condition, seed: int):
    p = cfg.params
    rows = []
    for draw in range(cfg.scaled_steps):
        draw_seed = int(np.random.default_rng([seed, draw]).integers(2 ** 63))
        model = sample_mixture_prior(p["n_components"], draw_seed)
        for alpha in p["alphas"]:
            root = float(np.sqrt(alpha))
            est = {
                "oracle": mixture_cvar_oracle(model, alpha, p["oracle_samples"], rng_seed=draw_seed + 1),
                "additive": float(model.weights @ component_cvars(model, alpha)),
                # both levels at sqrt(alpha) so the joint tail has mass alpha
                "composite": float(cvar_weighted(component_cvars(model, root), model.weights, root)),
                "composite_literal": float(cvar_weighted(component_cvars(model, alpha), model.weights, alpha)),
            }
            # reported as risk (negated left-tail CVaR of returns)
            for name, value in est.items():
                rows.append((cfg.experiment, seed, draw, f"alpha={_label(alpha)}/{name}", -value))
    return rows, {}


def fig2_summary(cfg, rows, extras):
    by = defaultdict(list)
    for _, seed, step, metric, value in rows:
        by[metric].append((seed, step, value))
    out = {}
    for alpha in cfg.params["alphas"]:
        key = f"alpha={_label(alpha)}"
        vals = {name: np.array([v for *_, v in sorted(by[f"{key}/{name}"])])
                for name in ("oracle", "additive", "composite", "composite_literal")}
        err = {name: float(np.abs(vals[name] - vals["oracle"]).mean())
               for name in ("additive", "composite", "composite_literal")}
        out[key] = {
            "alpha": alpha,
            **{f"mean_{n}": float(v.mean()) for n, v in vals.items()},
            **{f"mean_abs_err_{n}": e for n, e in err.items()},
            "additive_underestimates": bool(vals["additive"].mean() < vals["oracle"].mean()),
            "composite_closer": bool(err["composite"] < err["additive"]),
        }
    return {"per_alpha": out, "n_draws": len(cfg.seed_list) * cfg.scaled_steps,
            "orientation": "risk = -CVaR_alpha(returns); larger is riskier"}


# -- toy convergence ------------------------------------------------------------------------

def toy_job(cfg: ExperimentConfig, condition, seed: int):
    steps = cfg.scaled_steps
    snapshots = sorted({int(round(s * cfg.scale)) for s in cfg.params["snapshots"]} | {0, steps})
    snapshots = [s for s in snapshots if s <= steps]
    lo, hi = cfg.params["envelope"]
    acfg = agent_config(cfg, seed, {"k": 4, "eps_decay_steps": max(1, steps // 10)},
                        {"u_a": RiskMeasureSpec.neutral(), "u_e": RiskMeasureSpec.neutral()})
    env = make_env("three-state", seed, **cfg.env)
    agent = SentinelAgent(acfg, env.state_dim, env.n_actions)
    support = acfg.support
    truth = true_return_distributions(support, env.spec)
    s0 = one_hot(0)
    inside = (support.atoms >= lo - 1e-9) & (support.atoms <= hi + 1e-9)
    rows, files = [], {}

    def snapshot(t):
        marg = agent.marginal(s0)
        for a, dist in enumerate(marg):
            rows.append((cfg.experiment, seed, t, f"w1/a{a}", wasserstein1(dist, truth[a])))
            rows.append((cfg.experiment, seed, t, f"envelope_mass/a{a}", float(dist.masses[inside].sum())))
        weights = agent.weights_at(agent.member_probs(s0))[0]
        for a in range(env.n_actions):
            for i in range(acfg.k):
                rows.append((cfg.experiment, seed, t, f"ftrl_weight/a{a}/m{i}", float(weights[i, a])))
        files[f"snapshots/seed{seed}/step{t}.json"] = {
            "step": t, "marginal": [d.to_json() for d in marg], "truth": [d.to_json() for d in truth]}

    if 0 in snapshots:
        snapshot(0)
    train(agent, env, steps, lambda t, out: snapshot(t) if t in snapshots else None)
    return rows, files


def toy_summary(cfg, rows, extras):
    by = defaultdict(dict)
    for _, seed, step, metric, value in rows:
        by[metric][(seed, step)] = value
    steps = sorted({s for _, _, s, _, _ in rows})
    first, last = steps[0], steps[-1]
    out = {"snapshots": steps}
    for a in (0, 1):
        w = by[f"w1/a{a}"]
        per_seed = [w[(s, last)] / w[(s, first)] for s in cfg.seed_list]
        out[f"a{a}"] = {
            "w1": {str(t): mean_std([w[(s, t)] for s in cfg.seed_list]) for t in steps},
            "final_over_initial": mean_std(per_seed),
            "final_envelope_mass": mean_std([by[f"envelope_mass/a{a}"][(s, last)] for s in cfg.seed_list]),
        }
    return out


# -- CartPole lambda sweep ---------------------------------------------------------------------

def cartpole_job(cfg: ExperimentConfig, lam, seed: int):
    steps = cfg.scaled_steps
    gamma = cfg.agent.get("gamma", AgentConfig.gamma)
    lo, hi = value_bounds(gamma)
    acfg = agent_config(cfg, seed, {"support": {"v_min": lo, "v_max": hi, "n_atoms": 51},
                                    "eps_decay_steps": max(1, steps // 10)}, {"lam": lam})
    env = make_env("cartpole", seed, **cfg.env)
    agent = SentinelAgent(acfg, env.state_dim, env.n_actions)
    every = cfg.params["log_every"]
    tag = f"lambda={_label(lam)}"
    rows = []
    state = {"falls": 0, "ret": 0.0}

    def on_step(t, out):
        state["ret"] += out.reward
        if out.terminal:
            state["falls"] += int(out.info["fall"])
            rows.append((cfg.experiment, seed, t, f"{tag}/episode_return", state["ret"]))
            state["ret"] = 0.0
        if t % every == 0 or t == steps:
            rows.append((cfg.experiment, seed, t, f"{tag}/cumulative_falls", state["falls"]))

    train(agent, env, steps, on_step)
    return rows, {}


def _final(rows, metric_suffix):
    """Last value per (condition tag, seed) of metrics ending in ``metric_suffix``."""
    last = {}
    for _, seed, step, metric, value in rows:
        if metric.endswith(metric_suffix):
            tag = metric[: -len(metric_suffix) - 1]
            if (tag, seed) not in last or step >= last[(tag, seed)][0]:
                last[(tag, seed)] = (step, value)
    return {k: v for k, (_, v) in last.items()}


def cartpole_summary(cfg, rows, extras):
    final = _final(rows, "cumulative_falls")
    per = {}
    for lam in cfg.params["lambdas"]:
        tag = f"lambda={_label(lam)}"
        per[tag] = {"lambda": lam, "final_falls": mean_std([final[(tag, s)] for s in cfg.seed_list])}
    means = {tag: v["final_falls"]["mean"] for tag, v in per.items()}
    out = {"per_lambda": per, "seeds": cfg.seeds,
           "note": f"mean +- std over {cfg.seeds} seeds; low statistical power at this seed count"}
    if "lambda=1" in means and "lambda=4.6" in means:
        worst = max(means.values())
        out["lambda1_beats_4.6"] = bool(means["lambda=1"] <= means["lambda=4.6"])
        out["lambda1_not_worst"] = bool(means["lambda=1"] < worst or len(set(means.values())) == 1)
    return out


# -- highway risk comparison ------------------------------------------------------------------

def variant_settings(name: str, alpha: float) -> dict:
    cvar = RiskMeasureSpec.cvar(alpha)
    neutral = RiskMeasureSpec.neutral()
    table = {
        "rn-K1": {"k": 1, "u_a": neutral, "u_e": neutral},
        "rn-K4": {"k": 4, "u_a": neutral, "u_e": neutral},
        "additive-K4": {"k": 4, "u_a": cvar, "u_e": neutral},
        "composite-K4": {"k": 4, "u_a": cvar, "u_e": cvar},
    }
    if name not in table:
        raise ValueError(f"unknown highway variant {name!r}; choose from {sorted(table)}")
    return table[name]


def highway_job(cfg: ExperimentConfig, variant, seed: int):
    steps = cfg.scaled_steps
    env = make_env("highway-lite", seed, **cfg.env)
    hc = env.config
    gamma = cfg.agent.get("gamma", AgentConfig.gamma)
    v_max = hc.max_step_reward() * (1.0 - gamma ** hc.max_steps) / (1.0 - gamma)
    acfg = agent_config(cfg, seed, {"support": {"v_min": -hc.w_crash, "v_max": v_max, "n_atoms": 51},
                                    "eps_decay_steps": max(1, steps // 10)},
                        variant_settings(variant, cfg.params["alpha"]))
    agent = SentinelAgent(acfg, env.state_dim, env.n_actions)
    every = cfg.params["log_every"]
    rows = []
    state = {"crashes": 0, "ret": 0.0, "disc": 1.0}

    def on_step(t, out):
        state["ret"] += state["disc"] * out.reward
        state["disc"] *= acfg.gamma
        state["crashes"] += int(out.info["crash"])
        if out.terminal:
            rows.append((cfg.experiment, seed, t, f"{variant}/episode_return", state["ret"]))
            state["ret"], state["disc"] = 0.0, 1.0
        if t % every == 0 or t == steps:
            rows.append((cfg.experiment, seed, t, f"{variant}/cumulative_crashes", state["crashes"]))

    train(agent, env, steps, on_step)
    return rows, {}


def highway_summary(cfg, rows, extras):
    alpha = cfg.params["alpha"]
    returns = defaultdict(list)
    for _, seed, step, metric, value in sorted(rows, key=lambda r: (r[1], r[2])):
        if metric.endswith("/episode_return"):
            returns[(metric.split("/")[0], seed)].append(value)
    crashes = _final(rows, "cumulative_crashes")
    per = {}
    for v in cfg.params["variants"]:
        rets = [returns.get((v, s), [0.0]) for s in cfg.seed_list]
        per[v] = {
            "value": mean_std([np.mean(r) for r in rets]),
            f"cvar{_label(alpha)}_return": mean_std([cvar_empirical(r, alpha).cvar for r in rets]),
            "crashes": mean_std([crashes[(v, s)] for s in cfg.seed_list]),
            "episodes": mean_std([len(returns.get((v, s), [])) for s in cfg.seed_list]),
        }
    out = {"per_variant": per, "seeds": cfg.seeds,
           "columns": "value = mean discounted episode return; crashes = cumulative ego crashes"}
    if "composite-K4" in per and "rn-K4" in per:
        c, r = per["composite-K4"], per["rn-K4"]
        out["composite_fewer_crashes"] = bool(c["crashes"]["mean"] <= r["crashes"]["mean"])
        out["composite_smaller_value_std"] = bool(c["value"]["std"] <= r["value"]["std"])
    return out


# -- dispatch ------------------------------------------------------------------------------

EXPERIMENT_FUNCS = {
    "fig2-composite-vs-additive": (fig2_job, fig2_summary, lambda cfg: [None]),
    "toy-convergence": (toy_job, toy_summary, lambda cfg: [None]),
    "cartpole-lambda-sweep": (cartpole_job, cartpole_summary, lambda cfg: list(cfg.params["lambdas"])),
    "highway-risk": (highway_job, highway_summary, lambda cfg: list(cfg.params["variants"])),
}


def _run_job(args):
    job, cfg, condition, seed = args
    return job(cfg, condition, seed)


def run_experiment(cfg: ExperimentConfig, out_dir=None, verbose: bool = False) -> dict:
    """Run every (condition, seed) job, write outputs, return the summary."""
    job, summarize, conditions = EXPERIMENT_FUNCS[cfg.experiment]
    tasks = [(job, cfg, c, s) for c in conditions(cfg) for s in cfg.seed_list]
    start = time.perf_counter()
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_job, tasks))
    else:
        results = []
        for task in tasks:
            results.append(_run_job(task))
            if verbose:
                print(f"[{cfg.experiment}] condition={task[2]} seed={task[3]} done "
                      f"({time.perf_counter() - start:.0f}s)", file=sys.stderr)
    rows = [r for res, _ in results for r in res]
    files = {name: obj for _, extra in results for name, obj in extra.items()}
    summary = {"experiment": cfg.experiment, "steps": cfg.scaled_steps, **summarize(cfg, rows, files)}
    write_outputs(out_dir or cfg.out, rows, summary, cfg.to_dict(), files)
    return summary
