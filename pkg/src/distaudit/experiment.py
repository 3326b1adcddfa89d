"""Multi-trial experiment runner shared by the ``audit`` and ``run`` commands."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import analysis, audit, sobol, tdk
from .cloudsim import ScenarioConfig, build_scenario
from .config import Document, Section, load_file


@dataclass(frozen=True)
class ProtocolConfig:
    protocol: int = 1
    subtpas: int = 20
    threshold: int | None = None
    stop_policy: str = "run-to-completion"
    sample_pct: float = 20.0
    tdk_ones: int = 3
    overlap_pct: float = 0.0
    overlap_mode: str = "distributed"
    near_range: int = 0
    mode: str = "sequential"
    degree: int = 10
    sequence: str = "sobol"

    @property
    def m(self) -> int:
        return self.threshold if self.threshold is not None else self.subtpas

    def threshold_config(self) -> audit.ThresholdConfig:
        return audit.ThresholdConfig(self.subtpas, self.m, self.stop_policy)


def sample_length(blocks: int, sample_pct: float) -> int:
    return max(1, int(math.floor(sample_pct * blocks / 100 + 1e-9)))


def run_trial(scn: ScenarioConfig, pc: ProtocolConfig, trial: int, seed: int) -> audit.AuditOutcome:
    """One trial: fresh errors, a fresh Sobol key and fresh TDKs, all drawn
    from ``(seed, trial)``."""
    scenario = build_scenario(scn, trial)
    rng = np.random.default_rng([seed, trial])
    n = scn.blocks
    seq_len = n if pc.protocol == 4 else sample_length(n, pc.sample_pct)
    key = sobol.random_key(rng, pc.degree, n, seq_len)
    seq = analysis.random_sequence(rng, n, seq_len) if pc.sequence == "random" else None
    th = pc.threshold_config()
    if pc.protocol == 1:
        out = audit.run_protocol1(scenario, key, th, pc.mode, sequence=seq)
    elif pc.protocol in (2, 3):
        keys = tdk.generate_nonoverlapping(pc.subtpas, pc.tdk_ones, seq_len, rng)
        if pc.overlap_pct:
            keys = tdk.generate_overlapping(keys, pc.overlap_pct, rng, pc.overlap_mode)
        if pc.protocol == 2:
            out = audit.run_protocol2(scenario, key, keys, th, pc.mode, sequence=seq)
        else:
            out = audit.run_protocol3(scenario, key, keys, th, pc.near_range, pc.mode, sequence=seq)
    else:
        out = audit.run_protocol4(scenario, key, th, pc.sample_pct, pc.tdk_ones,
                                  seed=int(rng.integers(1 << 62)), mode=pc.mode, sequence=seq)
    out.trial = trial
    return out


def run_trials(scn: ScenarioConfig, pc: ProtocolConfig, trials: int, seed: int) -> list[audit.AuditOutcome]:
    return [run_trial(scn, pc, t, seed) for t in range(1, trials + 1)]


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    protocol: ProtocolConfig
    trials: int
    seed: int
    report: str
    summary: str
    fit: str
    base_dir: str = "."

    def resolve(self, path: str, out_dir: str | None = None) -> str:
        return os.path.join(out_dir if out_dir is not None else self.base_dir, path)


def protocol_from_section(sec: Section) -> ProtocolConfig:
    sec.check_keys({"id", "subtpas", "threshold", "stop_policy", "sample_pct", "tdk_ones", "overlap_pct",
                    "overlap_mode", "near_range", "mode"})
    subtpas = sec.get("subtpas", int, 20, lo=1)
    pc = ProtocolConfig(
        protocol=sec.get("id", int, 1, choices={1, 2, 3, 4}),
        subtpas=subtpas,
        threshold=sec.get("threshold", int, None, lo=1, hi=subtpas),
        stop_policy=sec.get("stop_policy", str, "run-to-completion", choices=set(audit.STOP_POLICIES)),
        sample_pct=sec.get("sample_pct", float, 20.0, lo=0.0, hi=100.0),
        tdk_ones=sec.get("tdk_ones", int, 3, lo=1),
        overlap_pct=sec.get("overlap_pct", float, 0.0, lo=0.0, hi=100.0),
        overlap_mode=sec.get("overlap_mode", str, "distributed", choices=set(tdk.OVERLAP_MODES)),
        near_range=sec.get("near_range", int, 0, lo=0),
        mode=sec.get("mode", str, "sequential", choices={"sequential", "concurrent"}),
    )
    if pc.sample_pct <= 0:
        raise sec.error("sample_pct", "must be positive")
    return pc


def experiment_from_document(doc: Document) -> ExperimentConfig:
    root = Section(doc, doc.data)
    root.check_keys({"scenario", "protocol", "sobol", "trials", "seed", "output"})
    scn = ScenarioConfig.from_section(root.section("scenario", required=True))
    pc = protocol_from_section(root.section("protocol"))
    sob = root.section("sobol")
    sob.check_keys({"degree", "sequence"})
    pc = replace(pc, degree=sob.get("degree", int, 10, lo=1, hi=20),
                 sequence=sob.get("sequence", str, "sobol", choices={"sobol", "random"}))
    trials = root.get("trials", int, required=True)
    if trials < 1:
        raise root.error("trials", f"must be >= 1, got {trials}")
    out = root.section("output")
    out.check_keys({"report", "summary", "fit"})
    base = os.path.dirname(os.path.abspath(doc.path)) if doc.path else "."
    return ExperimentConfig(scn, pc, trials, root.get("seed", int, 0),
                            out.get("report", str, "report.csv"), out.get("summary", str, "summary.csv"),
                            out.get("fit", str, "fit.json"), base)


def load_experiment(path: str) -> ExperimentConfig:
    return experiment_from_document(load_file(path))


def load_scenario(path: str) -> ScenarioConfig:
    doc = load_file(path)
    return ScenarioConfig.from_section(Section(doc, doc.data))
