"""Scratch: calibrate CroSim defaults so the required orderings have headroom.

Evaluates idealized proxy policies by Monte Carlo:
  random                 uniform actions
  click_greedy           fixed action, per-position CTR argmax (marginal)
  pos_instant            per-position instant-value greedy, own context only
  page_instant           per-position instant-value greedy, all contexts
  joint_instant          joint instant-value argmax (sees cannibalization; chases clickbait)
  joint_aware            joint instant argmax excluding clickbait (long-horizon proxy)
Ordering needed: random < pos_instant < page_instant < joint_instant < joint_aware.
"""
import itertools
import time

import numpy as np

from coopmarl.envs import default_cro_spec, make_env
from coopmarl.envs.cro_sim import _sigmoid


def instant_value(env, i, a, segment, ctx_eff, dup, suppressed):
    p_click = _sigmoid(env.click_logit(i, a, segment, ctx_eff, dup))
    if env.is_clickbait[i][a]:
        buy_value = 0.0
    else:
        p_buy = env.buy_probability(i, a, segment, suppressed)
        buy_value = p_buy * env.price[i][a] * (1.0 + env.margin[i][a])
    return p_click * (env.weights.beta + buy_value)


def greedy_per_position(env, segment, ctx, suppressed, own_ctx_only):
    action = []
    eff_all = env._ctx_effective(np.asarray(ctx, dtype=float))
    for i in range(env.agent_count):
        eff = ctx[i] if own_ctx_only else eff_all[i]
        vals = [instant_value(env, i, a, segment, eff, 0, suppressed)
                for a in range(env.spec.action_sizes[i])]
        action.append(int(np.argmax(vals)))
    return tuple(action)


def greedy_joint(env, segment, ctx, suppressed, streak, exclude_clickbait):
    eff = env._ctx_effective(np.asarray(ctx, dtype=float))
    best, best_v = None, -1e18
    ranges = [range(n) for n in env.spec.action_sizes]
    for joint in itertools.product(*ranges):
        if exclude_clickbait and any(env.is_clickbait[i][a] for i, a in enumerate(joint)):
            continue
        dup = env._dup_counts(joint)
        v = 0.0
        p_noclick = 1.0
        for i, a in enumerate(joint):
            v += instant_value(env, i, a, segment, eff[i], dup[i], suppressed)
            p_noclick *= 1.0 - _sigmoid(env.click_logit(i, a, segment, eff[i], dup[i]))
        # expected abandonment penalty this step (gamma_ab = -1)
        v -= p_noclick * env.abandon_probability(streak + 1) + (1 - p_noclick) * env.abandon_probability(0)
        if v > best_v:
            best, best_v = joint, v
    return best


def run_policy(env, policy, episodes, seed0):
    totals = []
    rng = np.random.default_rng(seed0)
    for ep in range(episodes):
        env.reset(int(rng.integers(2**31)))
        total, done = 0.0, False
        while not done:
            a = policy(env)
            res = env.step(a)
            total += res.reward
            done = res.terminal
        totals.append(total)
    t = np.array(totals)
    return t.mean(), t.std() / np.sqrt(len(t))


def main(sizes=(8, 12, 6), episodes=2500, **params):
    spec = default_cro_spec(action_sizes=sizes, **params)
    env = make_env(spec)
    cg = env.click_greedy_action()
    print(f"sizes={sizes} click_greedy={cg} clickbait_at_top={env.is_clickbait[0][cg[0]]}")

    rng = np.random.default_rng(0)
    policies = {
        "random": lambda e: tuple(int(rng.integers(n)) for n in e.spec.action_sizes),
        "click_greedy": lambda e: cg,
        "pos_instant": lambda e: greedy_per_position(e, e._segment, e._ctx, e._suppressed, True),
        "page_instant": lambda e: greedy_per_position(e, e._segment, e._ctx, e._suppressed, False),
        "joint_instant": lambda e: greedy_joint(e, e._segment, e._ctx, e._suppressed, e._streak, False),
        "joint_aware": lambda e: greedy_joint(e, e._segment, e._ctx, e._suppressed, e._streak, True),
    }
    for name, pol in policies.items():
        n_ep = episodes if "joint" not in name else max(400, episodes // 4)
        t0 = time.time()
        mean, se = run_policy(env, pol, n_ep, seed0=123)
        print(f"{name:14s} {mean:8.3f} +- {se:5.3f}   ({time.time()-t0:.1f}s, {n_ep} ep)")


if __name__ == "__main__":
    main()
