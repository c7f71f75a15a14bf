"""Whole-page content-ranking session simulator.

One episode is a customer session of up to `horizon` impressions. At each
impression the N position agents each pick one content from their catalog;
the page is shown, clicks and (sparse) purchases are drawn, and a single
shared reward is emitted:

    r_t = revenue_t + profit_t + alpha * long_term_t + beta * clicks_t
          + gamma_ab * abandonments_t

The simulator is engineered so that three distinct optimization gaps exist:

  * Cross-position action interaction: contents carry categories, and
    showing the same category at two positions applies a click-logit
    penalty to both. Picking per-position favorites can collide; joint
    action choice matters.
  * Cross-position context: each impression draws one context scalar per
    position (visible in that position's local observation) and every
    position's click response depends on a mix of its own and the other
    positions' contexts. A per-position model that cannot see the other
    positions' observations predicts its own reward strictly worse.
  * Delayed cost: a clickbait content (index 0 at the top position) has the
    page's highest click probability but, once clicked, purchase
    probabilities for the rest of the session are multiplied by
    `suppress_factor`. Chasing instant reward walks into it; discounting
    future reward avoids it.

Clicks also matter beyond their beta-weight: a click-less impression
increments an abandonment streak that raises the session's hazard of ending
with a gamma_ab penalty, and the terminal step pays a long-term bonus of
`long_term_scale * total_session_clicks`.

All world tables (per-content click/purchase appeal, categories, prices,
margins, context sensitivities) are generated deterministically from
`world_seed`, with a few fixed overrides that pin the story above in place
regardless of catalog size. Session randomness comes from the seed passed
to reset().
"""

from __future__ import annotations

import math

import numpy as np

from .base import (
    CroComponents,
    EnvSpec,
    JointObservation,
    RewardWeights,
    StepResult,
    compose_reward,
    resolve_params,
    terminal_observation,
    validate_action,
)

PARAM_DEFAULTS = {
    "segments": 4,             # customer segments, drawn uniformly at reset
    "categories": 4,           # content category count
    "world_seed": 7,           # seeds the content-table generation only
    "position_bias_step": 0.4, # click-logit drop per position below the top
    "click_mu": -0.9,          # mean click logit of ordinary contents
    "click_sigma": 0.55,
    "affinity_sigma": 0.6,     # segment x category click-affinity spread
    "cannibalization": 1.6,    # click-logit penalty per same-category co-occurrence
    "ctx_sigma": 0.9,          # per-content context sensitivity spread
    "ctx_cross": 0.8,          # weight of other positions' contexts in the mix
    "clickbait_click_logit": 3.0,
    "suppress_factor": 0.08,   # purchase multiplier after a clickbait click
    "buy_mu": -1.8,            # mean purchase logit given a click
    "buy_sigma": 0.5,
    "buy_affinity_sigma": 0.35,
    "top_buy_shift": -3.0,     # purchase-logit shift at the top position
    "price_mu": 0.5,           # log-space price location
    "price_sigma": 0.35,
    "margin_lo": 0.15,
    "margin_hi": 0.45,
    "abandon_base": -2.6,      # abandonment logit at streak 0
    "abandon_slope": 1.1,      # logit increase per click-less impression
    "long_term_scale": 0.1,    # terminal bonus per session click
    "alpha": 0.5,
    "beta": 0.1,
    "gamma_ab": -1.0,
}


def default_cro_spec(action_sizes=(8, 12, 6), horizon: int = 12,
                     discount: float = 0.99, **params) -> EnvSpec:
    """Spec for the standard 3-position page (top / middle / bottom)."""
    return EnvSpec(
        kind="cro_sim",
        action_sizes=tuple(int(n) for n in action_sizes),
        discount=discount,
        horizon=horizon,
        params=resolve_params(PARAM_DEFAULTS, params, "cro_sim"),
    )


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


class CroSim:
    """Session simulator over N ranking positions with a shared reward."""

    def __init__(self, spec: EnvSpec):
        if spec.kind != "cro_sim":
            raise ValueError(f"spec kind {spec.kind!r} is not cro_sim")
        self.spec = spec
        p = resolve_params(PARAM_DEFAULTS, spec.params, "cro_sim")
        self.p = p
        self.segments = int(p["segments"])
        self.categories = int(p["categories"])
        self.weights = RewardWeights(alpha=p["alpha"], beta=p["beta"], gamma_ab=p["gamma_ab"])
        self._build_world()
        self._rng = None
        self._done = True

    # -- world construction ------------------------------------------------

    def _build_world(self):
        """Deterministic content tables from world_seed; see module docstring."""
        p = self.p
        rng = np.random.default_rng(int(p["world_seed"]))
        n = self.spec.action_sizes
        npos = len(n)
        segs, cats = self.segments, self.categories

        self.category = [rng.integers(0, cats, size=n[i]) for i in range(npos)]
        self.click_quality = [
            rng.normal(p["click_mu"], p["click_sigma"], size=n[i]) for i in range(npos)
        ]
        self.click_affinity = rng.normal(0.0, p["affinity_sigma"], size=(segs, cats))
        self.ctx_sens = [rng.normal(0.0, p["ctx_sigma"], size=n[i]) for i in range(npos)]
        self.buy_quality = [rng.normal(0.0, p["buy_sigma"], size=n[i]) for i in range(npos)]
        self.buy_affinity = rng.normal(0.0, p["buy_affinity_sigma"], size=(segs, cats))
        self.price = [np.exp(rng.normal(p["price_mu"], p["price_sigma"], size=n[i]))
                      for i in range(npos)]
        self.margin = [rng.uniform(p["margin_lo"], p["margin_hi"], size=n[i])
                       for i in range(npos)]
        self.position_bias = -p["position_bias_step"] * np.arange(npos)
        self.is_clickbait = [np.zeros(n[i], dtype=bool) for i in range(npos)]

        # Pinned structure, independent of the random draws above:
        # clickbait at the top slot, a same-category pair of individually
        # strong contents at top/middle, and clean alternatives next to them.
        if n[0] >= 1:
            self.is_clickbait[0][0] = True
            self.click_quality[0][0] = p["clickbait_click_logit"]
            self.buy_quality[0][0] = -8.0
            self.category[0][0] = cats - 1
            self.ctx_sens[0][0] = 0.0
        if n[0] >= 2:
            self.click_quality[0][1] = 0.55
            self.buy_quality[0][1] = 0.8
            self.category[0][1] = 0
        if npos >= 2 and n[1] >= 2:
            self.click_quality[1][1] = 0.75
            self.buy_quality[1][1] = 0.9
            self.category[1][1] = 0
        if n[0] >= 3:
            self.click_quality[0][2] = 0.35
            self.buy_quality[0][2] = 0.6
            self.category[0][2] = 1
        if npos >= 2 and n[1] >= 3:
            self.click_quality[1][2] = 0.55
            self.buy_quality[1][2] = 0.7
            self.category[1][2] = 2

    # -- observation layout -------------------------------------------------

    @property
    def agent_count(self) -> int:
        return self.spec.agent_count

    @property
    def global_width(self) -> int:
        # segment one-hot, t/T, streak, suppression flag, terminal flag
        return self.segments + 4

    @property
    def local_widths(self) -> list[int]:
        # segment one-hot, own context, suppression flag, t/T
        return [self.segments + 3] * self.agent_count

    def terminal_observation(self) -> JointObservation:
        return terminal_observation(self.global_width, self.local_widths)

    def _observation(self) -> JointObservation:
        frac = self._t / self.spec.horizon
        g = np.zeros(self.global_width, dtype=np.float32)
        g[self._segment] = 1.0
        g[self.segments] = frac
        g[self.segments + 1] = min(self._streak, 5) / 5.0
        g[self.segments + 2] = 1.0 if self._suppressed else 0.0
        locals_ = []
        for i in range(self.agent_count):
            o = np.zeros(self.segments + 3, dtype=np.float32)
            o[self._segment] = 1.0
            o[self.segments] = self._ctx[i]
            o[self.segments + 1] = 1.0 if self._suppressed else 0.0
            o[self.segments + 2] = frac
            locals_.append(o)
        return JointObservation(g, locals_)

    # -- click model ---------------------------------------------------------

    def click_logit(self, i: int, a: int, segment: int, ctx_eff: float, dup: int) -> float:
        return (
            self.click_quality[i][a]
            + self.click_affinity[segment, self.category[i][a]]
            + self.position_bias[i]
            + self.ctx_sens[i][a] * ctx_eff
            - self.p["cannibalization"] * dup
        )

    def _ctx_effective(self, ctx: np.ndarray) -> np.ndarray:
        total = ctx.sum()
        return ctx + self.p["ctx_cross"] * (total - ctx)

    def _dup_counts(self, action) -> list[int]:
        cats = [self.category[i][a] for i, a in enumerate(action)]
        return [sum(1 for j, c in enumerate(cats) if j != i and c == cats[i])
                for i in range(len(cats))]

    def click_probabilities(self, action, segment: int, ctx: np.ndarray) -> np.ndarray:
        """Per-position click probability for a page in a given state."""
        act = validate_action(self.spec, action)
        eff = self._ctx_effective(np.asarray(ctx, dtype=float))
        dup = self._dup_counts(act)
        return np.array([
            _sigmoid(self.click_logit(i, a, segment, eff[i], dup[i]))
            for i, a in enumerate(act)
        ])

    def buy_probability(self, i: int, a: int, segment: int, suppressed: bool) -> float:
        base = _sigmoid(
            self.p["buy_mu"]
            + (self.p["top_buy_shift"] if i == 0 else 0.0)
            + self.buy_quality[i][a]
            + self.buy_affinity[segment, self.category[i][a]]
        )
        return base * self.p["suppress_factor"] if suppressed else base

    def abandon_probability(self, streak: int) -> float:
        return _sigmoid(self.p["abandon_base"] + self.p["abandon_slope"] * streak)

    def click_greedy_action(self) -> tuple[int, ...]:
        """Fixed joint action a position-level CTR optimizer would pick.

        Per position: the content with the highest segment-averaged click
        probability at neutral context, ignoring cross-position effects.
        """
        action = []
        for i in range(self.agent_count):
            best, best_p = 0, -1.0
            for a in range(self.spec.action_sizes[i]):
                avg = np.mean([
                    _sigmoid(self.click_logit(i, a, s, 0.0, 0))
                    for s in range(self.segments)
                ])
                if avg > best_p:
                    best, best_p = a, float(avg)
            action.append(best)
        return tuple(action)

    # -- episode dynamics ----------------------------------------------------

    def reset(self, seed: int | None = None) -> JointObservation:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        elif self._rng is None:
            raise ValueError("first reset() needs a seed")
        self._segment = int(self._rng.integers(self.segments))
        self._t = 0
        self._streak = 0
        self._suppressed = False
        self._total_clicks = 0
        self._ctx = self._rng.normal(0.0, 1.0, size=self.agent_count)
        self._done = False
        return self._observation()

    def step(self, action) -> StepResult:
        if self._done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        act = validate_action(self.spec, action)
        comp = CroComponents()

        p_click = self.click_probabilities(act, self._segment, self._ctx)
        clicked = self._rng.random(self.agent_count) < p_click

        # Purchases use the suppression state from before this impression;
        # a clickbait click starts suppressing at the next purchase check.
        clickbait_hit = False
        for i, a in enumerate(act):
            if not clicked[i]:
                continue
            if self.is_clickbait[i][a]:
                clickbait_hit = True
                continue
            p_buy = self.buy_probability(i, a, self._segment, self._suppressed)
            if self._rng.random() < p_buy:
                comp.revenue += float(self.price[i][a])
                comp.profit += float(self.margin[i][a] * self.price[i][a])
        if clickbait_hit:
            self._suppressed = True

        n_clicks = int(clicked.sum())
        comp.clicks = float(n_clicks)
        self._total_clicks += n_clicks
        self._streak = 0 if n_clicks > 0 else self._streak + 1

        self._t += 1
        if self._t >= self.spec.horizon:
            self._done = True
        elif self._rng.random() < self.abandon_probability(self._streak):
            self._done = True
            comp.abandonments = 1.0
        if self._done:
            comp.long_term = self.p["long_term_scale"] * self._total_clicks
        else:
            self._ctx = self._rng.normal(0.0, 1.0, size=self.agent_count)

        obs = self.terminal_observation() if self._done else self._observation()
        return StepResult(
            observation=obs,
            reward=compose_reward(comp, self.weights),
            terminal=self._done,
            components=comp,
        )
