# Copyright (C) 2024 Intel Corporation
# SPDX-License-Identifier: Apache-2.0
"""Run orchestration: solve one configuration, write the iteration CSV, summary JSON and plot script."""

import csv
import json
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import shortuuid

from ..common.base_statistics import collect_all_statistics, reset_all_statistics
from ..common.constants import ExitCode
from ..common.exceptions import EdftError
from ..common.logger import logger
from ..gradients.gradients import ks_stationarity_residual
from ..model.model import build_model
from ..optimizer.optimizer import minimize
from ..proto.config_protocol import RunConfig
from ..proto.records import IterationRecord, RunSummary
from ..scf.scf_baseline import run_scf
from ..telemetry.edft_telemetry import edft_telemetry
from .config import with_algorithm

OPTIMIZER_COLUMNS = [
    "n",
    "F_ry",
    "F_ha",
    "grad_psi_half_norm",
    "grad_eta_sf_norm",
    "error",
    "t_psi",
    "t_eta",
    "beta",
    "zeta",
    "restarted",
    "mu",
]
SCF_COLUMNS = ["n", "F_ry", "F_ha", "grad_psi_half_norm", "grad_eta_sf_norm", "error", "density_residual", "mu"]

PLOT_TEMPLATE = '''#!/usr/bin/env python
"""Convergence curves of {title}."""

import csv

import matplotlib.pyplot as plt

RUNS = {runs!r}
COLUMNS = [("error", "error"), ("grad_psi_half_norm", "||grad_Psi F / 2||"), ("grad_eta_sf_norm", "||grad_eta F||_sF")]


def load(path):
    with open(path) as file:
        return list(csv.DictReader(file))


def main():
    figure, axes = plt.subplots(1, 4, figsize=(20, 4))
    for label, path in RUNS.items():
        rows = load(path)
        energies = [float(row["F_ha"]) for row in rows]
        best = min(energies)
        axes[0].semilogy([int(r["n"]) for r in rows], [max(e - best, 1e-16) for e in energies], label=label)
        for axis, (column, title) in zip(axes[1:], COLUMNS):
            points = [(int(r["n"]), float(r[column])) for r in rows if r[column] not in ("", "nan")]
            axis.semilogy([p[0] for p in points], [p[1] for p in points], label=label)
            axis.set_title(title)
    axes[0].set_title("F - min F (hartree)")
    for axis in axes:
        axis.set_xlabel("iteration")
        axis.legend()
    figure.tight_layout()
    figure.savefig({png!r})


if __name__ == "__main__":
    main()
'''


@dataclass
class RunOutcome:
    summary: RunSummary
    csv_path: str
    summary_path: str
    plot_path: str

    @property
    def exit_code(self) -> int:
        return self.summary.exit_code


def run_id_for(config: RunConfig) -> str:
    """Deterministic identifier of a (configuration, seed) pair."""
    canonical = json.dumps(config.model_dump(mode="json", exclude={"output"}), sort_keys=True)
    return shortuuid.uuid(name=canonical)


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(value)
    return "%.16e" % value


def _row(record: IterationRecord, columns: Sequence[str]) -> List[str]:
    values = record.model_dump()
    values["F_ha"] = record.free_energy
    values["F_ry"] = record.free_energy_ry
    return [_format(values[column]) for column in columns]


def write_iterations(path: str, records: Sequence[IterationRecord], scf: bool = False):
    columns = SCF_COLUMNS if scf else OPTIMIZER_COLUMNS
    with open(path, "w", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(columns)
        for record in records:
            writer.writerow(_row(record, columns))


def write_plot_script(path: str, title: str, runs: Dict[str, str], png: str):
    with open(path, "w") as file:
        file.write(PLOT_TEMPLATE.format(title=title, runs=runs, png=png))


def _prefix(config: RunConfig) -> str:
    return config.output.prefix or f"{config.name}-{config.algorithm.name}"


@edft_telemetry
def run(config: RunConfig) -> RunOutcome:
    """Solve one configuration with its algorithm and write the run artifacts."""
    reset_all_statistics()
    model = build_model(config)
    algorithm = config.algorithm
    logger.info(f"run {config.name}: algorithm={algorithm.name} seed={config.seed}")
    if algorithm.is_scf:
        result = run_scf(model, algorithm.scf, seed=config.seed)
    else:
        result = minimize(model, algorithm.optimizer, seed=config.seed, init=config.init)

    evaluation = result.evaluation
    last = result.records[-1]
    summary = RunSummary(
        run_id=run_id_for(config),
        name=config.name,
        algorithm=algorithm.name,
        seed=config.seed,
        converged=result.converged,
        iterations=result.iterations,
        energies=evaluation.energies,
        total_ha=evaluation.energies.total,
        total_ry=evaluation.energies.total_ry,
        mu=evaluation.occ.mu,
        occupations=[np.asarray(f, dtype=float).tolist() for f in evaluation.occ.occupations],
        eigenvalues=[np.real(np.diag(e)).tolist() for e in result.eta],
        error=last.error,
        density_residual=last.density_residual,
        ks_residual=_ks_residual(model, result),
        exit_code=int(result.exit_code),
        statistics=collect_all_statistics(),
    )

    os.makedirs(config.output.dir, exist_ok=True)
    prefix = os.path.join(config.output.dir, _prefix(config))
    csv_path, summary_path, plot_path = f"{prefix}.csv", f"{prefix}.json", f"{prefix}_plot.py"
    write_iterations(csv_path, result.records, scf=algorithm.is_scf)
    with open(summary_path, "w") as file:
        file.write(summary.model_dump_json(indent=2))
    write_plot_script(plot_path, config.name, {algorithm.name: csv_path}, f"{prefix}.png")
    logger.info(f"run {config.name}: wrote {csv_path}, {summary_path}, {plot_path}")
    return RunOutcome(summary=summary, csv_path=csv_path, summary_path=summary_path, plot_path=plot_path)


def _ks_residual(model, result) -> Optional[float]:
    try:
        return ks_stationarity_residual(model, result.psi, result.eta, result.evaluation)
    except EdftError as error:
        logger.debug(f"KS residual unavailable: {error}")
        return None


@edft_telemetry
def compare(config: RunConfig, algorithms: Sequence[str]) -> List[RunOutcome]:
    """Run the same configuration with several algorithms and write a combined JSON and plot script."""
    outcomes = []
    for name in algorithms:
        variant = with_algorithm(config, name)
        variant = variant.model_copy(update={"output": variant.output.model_copy(update={"prefix": None})})
        outcomes.append(run(variant))
    prefix = os.path.join(config.output.dir, f"{config.name}-compare")
    combined = {o.summary.algorithm: json.loads(o.summary.model_dump_json()) for o in outcomes}
    with open(f"{prefix}.json", "w") as file:
        json.dump(combined, file, indent=2, sort_keys=True)
    runs = {o.summary.algorithm: o.csv_path for o in outcomes}
    write_plot_script(f"{prefix}_plot.py", f"{config.name} comparison", runs, f"{prefix}.png")
    worst = max((o.exit_code for o in outcomes), default=int(ExitCode.OK))
    counts = ", ".join(f"{o.summary.algorithm}={o.summary.iterations}" for o in outcomes)
    logger.info(f"compare {config.name}: iterations {counts}")
    if worst:
        logger.warning(f"compare {config.name}: at least one run did not converge")
    return outcomes
