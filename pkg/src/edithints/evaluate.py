"""Evaluation harnesses.

Two questions are supported.  How well does a prediction scheme anticipate
where capable students move next (leave-one-trace-out RMSE in the
corrected embedding, against the actual next state and the final state)?
And how well do generated hints reproduce human tutor hints (quality
ratings, exact-match fraction, raw edit distance to the nearest tutor
hint, hintable fraction)?

Prediction errors are measured in the corrected embedding (queries enter
through the Nystrom extension); tutor-hint distances use raw edit
distances.  Folds are independent; reports keep per-fold values so
significance tests can be run externally.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .editdist import CostModel, UNIT_COSTS, apply_edit, distance, serialize_edit
from .policies import FitError, GprModel, KernelParams, fit_model
from .states import CanonConfig, EMPTY_CANON, serialize_state
from .traces import Dataset, Trace, build_pairs, goal_filter

PREDICTION_SCHEMES = (
    "do_nothing",
    "successor_of_closest",
    "closest_correct",
    "gaussian_process",
    "nwr",
    "nn",
)

_WEIGHT_SCHEME = {"gaussian_process": "gpr", "nwr": "nwr", "nn": "nn"}


@dataclass(frozen=True)
class EvalReport:
    """Cross-validation or hint-quality results.

    RQ1 reports fill the per-trace RMSE fields; RQ2 reports fill the
    quality fields.  ``folds_skipped`` names held-out traces whose fold
    could not be fitted.
    """

    kind: str  # "rmse" | "quality"
    per_trace: tuple = ()  # rmse: (trace_id, rmse_next, rmse_final, n_states)
    mean_next: float = None
    std_next: float = None
    mean_final: float = None
    std_final: float = None
    folds_skipped: tuple = ()
    per_state: tuple = ()  # quality: (trace_id, step, hinted, quality, dist)
    median_quality: float = None
    mean_quality: float = None
    std_quality: float = None
    fraction_positive: float = None
    rmse_to_tutor: float = None
    hintable_fraction: float = None

    def to_dict(self) -> dict:
        if self.kind == "rmse":
            return {
                "kind": self.kind,
                "mean_next": self.mean_next,
                "std_next": self.std_next,
                "mean_final": self.mean_final,
                "std_final": self.std_final,
                "folds_skipped": list(self.folds_skipped),
                "per_trace": [
                    {
                        "trace": t,
                        "rmse_next": rn,
                        "rmse_final": rf,
                        "states": n,
                    }
                    for t, rn, rf, n in self.per_trace
                ],
            }
        return {
            "kind": self.kind,
            "median_quality": self.median_quality,
            "mean_quality": self.mean_quality,
            "std_quality": self.std_quality,
            "fraction_positive": self.fraction_positive,
            "rmse_to_tutor": self.rmse_to_tutor,
            "hintable_fraction": self.hintable_fraction,
            "per_state": [
                {
                    "trace": t,
                    "step": s,
                    "hinted": h,
                    "quality": q,
                    "distance_to_tutor": d,
                }
                for t, s, h, q, d in self.per_state
            ],
        }

    def csv_rows(self):
        if self.kind == "rmse":
            yield ("trace", "rmse_next", "rmse_final", "states")
            for t, rn, rf, n in self.per_trace:
                yield (t, repr(rn), repr(rf), n)
        else:
            yield ("trace", "step", "hinted", "quality", "distance_to_tutor")
            for t, s, h, q, d in self.per_state:
                yield (t, s, int(h), repr(q), "" if d is None else repr(d))


def prepared_traces(dataset: Dataset, cost: CostModel = UNIT_COSTS):
    """Goal-filtered successful traces, the common preprocessing for
    fitting and evaluation."""
    metric = lambda a, b: distance(a, b, cost)
    return tuple(goal_filter(t, metric) for t in dataset.successful_traces())


def _closest_correct(model: GprModel, raw: np.ndarray) -> int:
    ends = model.pairs.end_indices
    best = min(float(raw[i]) for i in ends)
    tied = [i for i in ends if float(raw[i]) <= best + 1e-9]
    return min(tied, key=lambda i: (model.pairs.trace_ids[model.pairs.trace_of[i]], i))


def _predict_coords(model: GprModel, scheme: str, raw: np.ndarray, coords) -> np.ndarray:
    """Predicted next-state coordinates for one query under a scheme."""
    if scheme == "do_nothing":
        return coords
    if scheme == "successor_of_closest":
        nearest = int(np.flatnonzero(raw <= float(np.min(raw)) + 1e-9)[0])
        successor = model.pairs.pair_of[nearest][1]
        return model.space.coordinates[successor]
    if scheme == "closest_correct":
        return model.space.coordinates[_closest_correct(model, raw)]
    gamma = model.weights(raw, _WEIGHT_SCHEME[scheme])
    move = np.zeros_like(coords)
    for i, (xi, yi) in enumerate(model.pairs.pair_of):
        if gamma[i] != 0.0 and xi != yi:
            move += gamma[i] * (model.space.coordinates[yi] - model.space.coordinates[xi])
    return coords + move


class _DistanceCache:
    """Pairwise raw distances over the union of all trace states, computed
    once; folds and queries reuse submatrices and rows."""

    def __init__(self, traces, cost: CostModel):
        self.cost = cost
        self.states = []
        self.index = {}
        self.trace_slices = []
        for trace in traces:
            ids = []
            for s in trace.states:
                key = serialize_state(s)
                if key not in self.index:
                    self.index[key] = len(self.states)
                    self.states.append(s)
                ids.append(self.index[key])
            self.trace_slices.append(ids)
        n = len(self.states)
        self.matrix = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                d = distance(self.states[i], self.states[j], cost)
                self.matrix[i, j] = self.matrix[j, i] = d


def loo_rmse_multi(
    dataset: Dataset,
    schemes,
    params: KernelParams = KernelParams(),
    cost: CostModel = UNIT_COSTS,
    canon: CanonConfig = EMPTY_CANON,
    mode: str = "clip",
) -> dict:
    """Leave-one-trace-out RMSE for several prediction schemes at once.

    The fold models (distance submatrices, embeddings, kernel systems) are
    fitted once per fold and shared across schemes.  Returns a mapping
    scheme name -> :class:`EvalReport`.
    """
    schemes = tuple(schemes)
    for scheme in schemes:
        if scheme not in PREDICTION_SCHEMES:
            raise ValueError(
                f"unknown scheme {scheme!r}; expected one of {PREDICTION_SCHEMES}"
            )
    traces = prepared_traces(dataset, cost)
    if len(traces) < 2:
        raise FitError("leave-one-out needs at least two successful traces")
    cache = _DistanceCache(traces, cost)

    per_trace = {scheme: [] for scheme in schemes}
    skipped = []
    for held in range(len(traces)):
        train = [t for k, t in enumerate(traces) if k != held]
        train_ids = [gid for k, ids in enumerate(cache.trace_slices) if k != held for gid in ids]
        try:
            pairs = build_pairs(train)
            sub = cache.matrix[np.ix_(train_ids, train_ids)]
            model = GprModel(dataset.kind, pairs, cost, canon, params, mode, dist_raw=sub)
        except (FitError, ValueError) as exc:
            skipped.append((traces[held].id, str(exc)))
            continue
        held_ids = cache.trace_slices[held]
        raw_rows = [cache.matrix[gid][train_ids] for gid in held_ids]
        coords = [model.embed_query(row).coords for row in raw_rows]
        n = len(held_ids)
        for scheme in schemes:
            errs_next = []
            errs_final = []
            for t in range(n):
                pred = _predict_coords(model, scheme, raw_rows[t], coords[t])
                target_next = coords[t + 1] if t + 1 < n else coords[t]
                errs_next.append(float(np.sum((pred - target_next) ** 2)))
                errs_final.append(float(np.sum((pred - coords[-1]) ** 2)))
            per_trace[scheme].append(
                (
                    traces[held].id,
                    math.sqrt(sum(errs_next) / n),
                    math.sqrt(sum(errs_final) / n),
                    n,
                )
            )

    reports = {}
    for scheme in schemes:
        rows = per_trace[scheme]
        if not rows:
            raise FitError("every fold was unfittable")
        nexts = np.array([r[1] for r in rows])
        finals = np.array([r[2] for r in rows])
        reports[scheme] = EvalReport(
            kind="rmse",
            per_trace=tuple(rows),
            mean_next=float(nexts.mean()),
            std_next=float(nexts.std()),
            mean_final=float(finals.mean()),
            std_final=float(finals.std()),
            folds_skipped=tuple(skipped),
        )
    return reports


def loo_rmse(
    dataset: Dataset,
    scheme: str,
    params: KernelParams = KernelParams(),
    cost: CostModel = UNIT_COSTS,
    canon: CanonConfig = EMPTY_CANON,
    mode: str = "clip",
) -> EvalReport:
    """Leave-one-trace-out next-step and final-step RMSE of one prediction
    scheme.

    Per fold, the model is fitted on all other traces; every state of the
    held-out trace is embedded as a query and the squared corrected
    distance between the predicted point and (a) the actual next state,
    (b) the trace's final state is averaged over the trace before taking
    the root.  The report carries the per-fold values and their mean and
    population standard deviation.
    """
    return loo_rmse_multi(dataset, (scheme,), params, cost, canon, mode)[scheme]


def hint_quality(
    dataset: Dataset,
    policy_fn,
    cost: CostModel = UNIT_COSTS,
    canon: CanonConfig = EMPTY_CANON,
    params: KernelParams = KernelParams(),
    mode: str = "clip",
) -> EvalReport:
    """Score a policy against tutor hints.

    The model trains on all successful traces; every tutor-annotated state
    is queried.  A hint matching any tutor edit for that state (serialized
    equality) earns the mean rating of the matching tutor entries,
    anything else earns zero.  The RMSE column is the raw edit distance
    between the hinted state and the nearest tutor-hinted state, over the
    states where a hint was produced.

    ``policy_fn(model, state)`` must return a
    :class:`~edithints.policies.HintResult`.
    """
    if not dataset.tutor_hints:
        raise ValueError("dataset has no tutor hints")
    model = fit_model(dataset, cost, canon, params, mode)

    grouped = {}
    for hint in dataset.tutor_hints:
        grouped.setdefault((hint.trace_id, hint.step), []).append(hint)

    per_state = []
    qualities = []
    sq_dists = []
    hinted_count = 0
    for (trace_id, step) in sorted(grouped):
        entries = grouped[(trace_id, step)]
        state = entries[0].state
        result = policy_fn(model, state)
        hinted = result.edit is not None
        quality = 0.0
        dist_to_tutor = None
        if hinted:
            hinted_count += 1
            key = serialize_edit(result.edit)
            matching = [e.quality for e in entries if serialize_edit(e.edit) == key]
            if matching:
                quality = float(np.mean(matching))
            hinted_state = apply_edit(state, result.edit)
            dists = []
            for entry in entries:
                try:
                    tutor_state = apply_edit(state, entry.edit)
                except Exception:
                    continue  # tutor edit not applicable to the canonic form
                dists.append(distance(hinted_state, tutor_state, cost))
            if dists:
                dist_to_tutor = float(min(dists))
                sq_dists.append(dist_to_tutor**2)
        qualities.append(quality)
        per_state.append((trace_id, step, hinted, quality, dist_to_tutor))

    q = np.array(qualities)
    return EvalReport(
        kind="quality",
        per_state=tuple(per_state),
        median_quality=float(np.median(q)),
        mean_quality=float(q.mean()),
        std_quality=float(q.std()),
        fraction_positive=float((q > 0).mean()),
        rmse_to_tutor=math.sqrt(sum(sq_dists) / len(sq_dists)) if sq_dists else None,
        hintable_fraction=hinted_count / len(per_state),
    )


def _log_uniform(rng: random.Random, lo: float, hi: float) -> float:
    if lo == hi:
        return lo
    if not (lo > 0 and hi > lo):
        raise ValueError(f"range ({lo}, {hi}) must be positive and increasing")
    return math.exp(rng.uniform(math.log(lo), math.log(hi)))


def hyper_search(
    dataset: Dataset,
    psi_range,
    noise_range,
    repeats: int = 10,
    seed: int = 0,
    cost: CostModel = UNIT_COSTS,
    canon: CanonConfig = EMPTY_CANON,
    mode: str = "clip",
) -> KernelParams:
    """Random hyper-parameter search: sample both parameters log-uniformly
    and keep the sample with the lowest mean next-step RMSE of the
    Gaussian-process scheme under leave-one-out cross-validation.
    Deterministic for a fixed seed; ties keep the earlier sample."""
    rng = random.Random(seed)
    best = None
    for _ in range(repeats):
        params = KernelParams(
            length_scale=_log_uniform(rng, *psi_range),
            noise_std=_log_uniform(rng, *noise_range),
        )
        report = loo_rmse(dataset, "gaussian_process", params, cost, canon, mode)
        score = report.mean_next
        if best is None or score < best[0]:
            best = (score, params)
    return best[1]


def synthetic_corpus(
    seed: int,
    n_traces: int = 20,
    base_solution="abcdefghijkl",
    goal_variants: bool = True,
    min_missing: int = 4,
    max_missing: int = 9,
    max_stride: int = 3,
) -> Dataset:
    """Seeded corpus of noisy goal-directed sequence traces.

    Mimics an open-ended task: each trace heads for its own small variation
    of a base solution (``goal_variants``), starts at a random corruption
    of that goal (symbols dropped, some substituted), and walks to it by
    applying, at each step, a random applicable edit of the current
    shortest edit script.  Only every ``1..max_stride``-th state is
    recorded, like students whose states are saved sparsely.  Every
    recorded state is strictly closer to the goal than the previous one,
    so the traces are goal-directed but take varied paths through a mostly
    unrepeated state space.
    """
    from .editdist import seq_distance

    rng = random.Random(seed)
    base = tuple(base_solution)
    alphabet = sorted(set(base))
    traces = []
    for t in range(n_traces):
        goal = base
        if goal_variants:
            for _ in range(rng.randint(1, 2)):
                pos = rng.randrange(len(goal))
                other = rng.choice([s for s in alphabet if s != goal[pos]])
                goal = goal[:pos] + (other,) + goal[pos + 1 :]
        k = rng.randint(min_missing, min(max_missing, len(goal) - 1))
        drop = set(rng.sample(range(len(goal)), k))
        state = tuple(s for i, s in enumerate(goal) if i not in drop)
        for _ in range(rng.randint(0, 2)):
            if not state:
                break
            pos = rng.randrange(len(state))
            wrong = rng.choice([s for s in alphabet if s != state[pos]])
            state = state[:pos] + (wrong,) + state[pos + 1 :]
        states = [state]
        guard = 0
        while state != goal:
            guard += 1
            if guard > 20 * len(goal):
                raise AssertionError("corpus walk failed to reach the goal")
            stride = rng.randint(1, max_stride)
            for _ in range(stride):
                if state == goal:
                    break
                d_here, script = seq_distance(state, goal)
                options = list(script.edits)
                rng.shuffle(options)
                for edit in options:
                    try:
                        nxt = apply_edit(state, edit)
                    except Exception:
                        continue
                    if seq_distance(nxt, goal)[0] < d_here:
                        state = nxt
                        break
                else:
                    state = script.apply(state)
            states.append(state)
        traces.append(Trace(f"trace{t:02d}", tuple(states), True))
    return Dataset("sequence", tuple(traces))
