import hashlib
import logging
from functools import lru_cache
from pathlib import Path

import billiard
import pandas as pd
from celery import current_app, group, shared_task
from django.conf import settings
from django.utils.text import slugify

from .backtest import (
    ArmSpec,
    BacktestConfig,
    frame_to_records,
    records_to_frame,
    run_arm_backtest,
    run_eclectic_backtest,
    terminal_wealth,
)
from .bandit import BanditConfig
from .choices import MarginalFamily, ObjectiveTag
from .data import compute_returns, load_price_csv
from .objectives import ObjectiveKind

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


# =====================================================
# CONFIG -> DOMAIN OBJECTS
# =====================================================


def expand_objectives(label: str, quantile_levels, classical_bl=False) -> list:
    if label in (ObjectiveTag.MIN_VAR, ObjectiveTag.MIN_ES):
        return [ObjectiveKind(ObjectiveTag(label), alpha, classical_bl) for alpha in quantile_levels]
    return [ObjectiveKind.parse(label, classical_bl=classical_bl)]


def build_arms(config: dict) -> list:
    objectives = config["objectives"]
    arms = []
    for arm in config["backtest"]["arms"]:
        for kind in expand_objectives(arm["objective"], objectives["quantile_levels"], objectives["classical_bl"]):
            arms.append(ArmSpec(arm["model"], kind, float(arm["v"])))
    return arms


def build_bandits(config: dict) -> list:
    section = config["bandit"]
    return [
        BanditConfig(sim, act, float(gamma), policy, section["blend_window_steps"], section["leaky_relu"])
        for sim in section["similarities"]
        for act in section["activations"]
        for gamma in section["decays"]
        for policy in section["policies"]
    ]


def build_backtest_config(config: dict, seeds=None) -> BacktestConfig:
    backtest = config["backtest"]
    return BacktestConfig(
        rebalance_step_days=config["data"]["step"],
        fit_window_steps=backtest["fit_window_steps"],
        blend_window_steps=config["bandit"]["blend_window_steps"],
        c=config["objectives"]["transaction_cost"],
        m=config["optimizer"]["box_multiplier"],
        n_scenarios=config["scenarios"]["n"],
        seeds=tuple(seeds if seeds is not None else backtest["seeds"]),
        arms=tuple(build_arms(config)),
        bandits=tuple(build_bandits(config)),
        marginal_families=tuple(MarginalFamily(f) for f in config["marginals"]["families"]),
        include_joe=config["copula"]["include_joe"],
    )


@lru_cache(maxsize=4)
def _cached_returns(prices: str, step: int, mtime_ns: int):
    return compute_returns(load_price_csv(prices), step)


def load_returns(prices, step: int):
    return _cached_returns(str(prices), int(step), Path(prices).stat().st_mtime_ns)


def job_file(out_dir, kind, label, seed) -> Path:
    digest = hashlib.sha1(label.encode("utf-8")).hexdigest()[:8]
    path = Path(out_dir) / kind / f"{slugify(label)}-{digest}-s{seed}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _summary(job_key, label, seed, path, records) -> dict:
    return {
        "job_key": job_key,
        "label": label,
        "seed": seed,
        "csv_path": str(path),
        "steps": len(records),
        "terminal_wealth": terminal_wealth(records),
        "flagged_steps": sum(1 for rec in records if rec.flags),
    }


# =====================================================
# TASKS
# =====================================================


@shared_task(
    bind=True,
    autoretry_for=(OSError,),
    retry_backoff=True,
    retry_kwargs={"max_retries": 5},
)
def run_arm_path(self, payload: dict) -> dict:
    """One fixed arm on one seed; writes the path CSV and returns its summary."""
    config = payload["config"]
    seed = int(payload["seed"])
    cfg = build_backtest_config(config, seeds=[seed])
    panel = load_returns(payload["prices"], config["data"]["step"])
    objectives = config["objectives"]
    arm = ArmSpec(
        payload["arm"]["model"],
        ObjectiveKind.parse(payload["arm"]["objective"], classical_bl=objectives["classical_bl"]),
        float(payload["arm"]["v"]),
    )
    records = run_arm_backtest(cfg, arm, panel, seed)

    path = job_file(payload["out_dir"], "paths", arm.label, seed)
    labels = {"arm": arm.label, "seed": seed, **arm.labels}
    records_to_frame(records, panel.assets, labels).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info("arm %s seed %d: %d steps -> %s", arm.label, seed, len(records), path)
    return _summary(f"{arm.label}|seed={seed}", arm.label, seed, path, records)


@shared_task(
    bind=True,
    autoretry_for=(OSError,),
    retry_backoff=True,
    retry_kwargs={"max_retries": 5},
)
def run_eclectic_path(self, payload: dict) -> dict:
    """One bandit configuration on one seed, blending previously written arm paths."""
    config = payload["config"]
    seed = int(payload["seed"])
    cfg = build_backtest_config(config, seeds=[seed])
    panel = load_returns(payload["prices"], config["data"]["step"])
    bandit = BanditConfig(**payload["bandit"])

    arm_records = {}
    for csv_path in payload["arm_csvs"]:
        frame = pd.read_csv(csv_path)
        arm_records[str(frame["arm"].iloc[0])] = frame_to_records(frame)
    records = run_eclectic_backtest(cfg, panel, bandit, arm_records=arm_records, seed=seed)

    path = job_file(payload["out_dir"], "blend", bandit.label, seed)
    labels = {"config": bandit.label, "seed": seed, **bandit.labels}
    records_to_frame(records, panel.assets, labels).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info("bandit %s seed %d: %d steps -> %s", bandit.label, seed, len(records), path)
    return _summary(f"{bandit.label}|seed={seed}", bandit.label, seed, path, records)


# =====================================================
# DISPATCH
# =====================================================


def _run_local(job):
    name, payload = job
    return current_app.tasks[name](payload)


def dispatch(task, payloads, jobs=1) -> list:
    """Run `task` over `payloads` and return the results sorted by job key.

    Eager settings run in-process, or on a billiard pool when jobs > 1;
    otherwise the payloads go to the broker as a Celery group.
    """
    payloads = list(payloads)
    if not payloads:
        return []
    if not settings.CELERY_TASK_ALWAYS_EAGER:
        results = group(task.s(p) for p in payloads).apply_async().get()
    elif jobs > 1:
        pool = billiard.Pool(processes=min(jobs, len(payloads)))
        try:
            results = pool.map(_run_local, [(task.name, p) for p in payloads])
        finally:
            pool.close()
            pool.join()
    else:
        results = [task(p) for p in payloads]
    return sorted(results, key=lambda r: r["job_key"])
