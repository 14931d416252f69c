"""Batch front end: ``qutrit-aklt --config run.ini --out results/``.

A config is an INI file with an ``[experiment]`` section naming one of the
experiment families, plus optional ``[model]``, ``[noise]``, ``[sweep]`` and
``[compile]`` sections.  Every run writes its data files and a
``summary.json`` into the output directory; identical config and seed give
byte-identical files.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .aklt import HamiltonianSpec, ground_state_ed
from .berry import ENCODINGS, berry_phase_exact, berry_phase_hadamard
from .compile import aklt_ladder_target, compile_isometry
from .noise import NoiseParams
from .sweep import fidelity_sweep, obc_hellinger, rows_to_csv

log = logging.getLogger("qutrit_aklt")

EXPERIMENTS = ("obc_fidelity", "pbc_states", "berry_exact", "berry_noisy", "noise_sweep", "dd_sweep",
               "compile_report")

def _ints(s: str) -> list[int]:
    return [int(x) for x in re.split(r"[,\s]+", s.strip()) if x]


def _floats(s: str) -> list[float]:
    return [float(x) for x in re.split(r"[,\s]+", s.strip()) if x]


def _strs(s: str) -> list[str]:
    return [x for x in re.split(r"[,\s]+", s.strip()) if x]


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# section -> key -> (parser, default); a default of None marks a required key
SCHEMA: dict[str, dict[str, tuple[Callable, Any]]] = {
    "experiment": {"name": (str, None), "seed": (int, 0), "encoding": (str, "qutrit"),
                   "encodings": (_strs, ["qutrit", "qubit"])},
    "model": {"n": (_ints, [2]), "N": (int, 4), "thetas": (_floats, []), "n_thetas": (int, 13),
              "epsilon": (float, 1e-8), "backend": (str, "ed")},
    "noise": {f.name: (float, f.default) for f in dataclasses.fields(NoiseParams)},
    "sweep": {"noise_rates": (_floats, [1.0]), "dd_strengths": (_floats, [0.0]), "shots": (int, 0),
              "max_bond": (int, 64)},
    "compile": {"max_cnots": (int, 4), "restarts": (int, 8), "tol": (float, 1e-8), "decompose": (_bool, True)},
}


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    values: dict[str, dict[str, Any]]
    out: Path

    def get(self, section: str, key: str):
        return self.values[section][key]

    def noise(self) -> NoiseParams:
        return NoiseParams(**self.values["noise"])


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return i
            continue
        if cur == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return None


def _where(text, section, key=None) -> str:
    line = _line_of(text, section, key)
    loc = f"[{section}]" + (f" {key}" if key else "")
    return f"line {line}: {loc}" if line else loc


def parse_config(text: str, out: Path | str = ".", seed: int | None = None) -> ExperimentConfig:
    """Parse and validate config text; raises ConfigError with line/field context."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case sensitive (N vs n)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from exc
    values: dict[str, dict[str, Any]] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        given = cp[section] if cp.has_section(section) else {}
        for key in given:
            if key not in keys:
                raise ConfigError(f"{_where(text, section, key)}: unknown key")
        for key, (conv, default) in keys.items():
            if key in given:
                try:
                    values[section][key] = conv(given[key])
                except ValueError as exc:
                    raise ConfigError(f"{_where(text, section, key)}: {exc}") from exc
            elif default is None:
                raise ConfigError(f"{_where(text, section)}: missing required key {key!r}")
            else:
                values[section][key] = default
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{_where(text, section)}: unknown section")
    name = values["experiment"]["name"]
    if name not in EXPERIMENTS:
        raise ConfigError(f"{_where(text, 'experiment', 'name')}: unknown experiment {name!r}")
    if seed is not None:
        values["experiment"]["seed"] = seed
    for enc in [values["experiment"]["encoding"], *values["experiment"]["encodings"]]:
        if enc not in ENCODINGS:
            raise ConfigError(f"{_where(text, 'experiment')}: unknown encoding {enc!r}")
    for section, key in (("model", "n"), ("experiment", "encodings"), ("sweep", "noise_rates"),
                         ("sweep", "dd_strengths")):
        if not values[section][key]:
            raise ConfigError(f"{_where(text, section, key)}: empty range")
    try:
        NoiseParams(**values["noise"])
    except ValueError as exc:
        raise ConfigError(f"{_where(text, 'noise')}: {exc}") from exc
    return ExperimentConfig(name, values["experiment"]["seed"], values, Path(out))


# experiments ---------------------------------------------------------------------


def _write(path: Path, text: str) -> None:
    path.write_text(text)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def run_obc_fidelity(cfg: ExperimentConfig, threads: int) -> dict:
    params = cfg.noise()
    lines = ["n,b_left,b_right,encoding,noise_rate,hellinger,postselect_prob"]
    worst: dict[str, float] = {}
    for enc in cfg.get("experiment", "encodings"):
        for n in cfg.get("model", "n"):
            for bl in (0, 1):
                for br in (0, 1):
                    h, p = obc_hellinger(n, bl, br, params, enc, cfg.get("sweep", "max_bond"))
                    lines.append(f"{n},{bl},{br},{enc},{params.noise_rate!r},{_fmt(h)},{_fmt(p)}")
                    worst[enc] = min(worst.get(enc, 1.0), h)
    _write(cfg.out / "obc_fidelity.csv", "\n".join(lines) + "\n")
    return {"min_hellinger": worst, "files": ["obc_fidelity.csv"]}


def _thetas(cfg: ExperimentConfig) -> list[float]:
    th = cfg.get("model", "thetas")
    if th:
        return th
    k = cfg.get("model", "n_thetas")
    if k < 1:
        raise ConfigError("[model] n_thetas: must be positive")
    return [float(x) for x in np.linspace(0, 2 * np.pi, k)]


def run_pbc_states(cfg: ExperimentConfig, threads: int) -> dict:
    ns = cfg.get("model", "n")
    lines = ["n,theta,index,string,re,im"]
    energies, ratio_dev = {}, 0.0
    for n in ns:
        energies[n] = []
        for th in _thetas(cfg):
            spec = HamiltonianSpec(n, "PBC", th % (2 * np.pi), epsilon=cfg.get("model", "epsilon"))
            e, psi = ground_state_ed(spec)
            energies[n].append(float(e))
            amps = psi.amplitudes
            for k, a in enumerate(amps):
                s = "".join(map(str, np.unravel_index(k, (3,) * n)))
                lines.append(f"{n},{th!r},{k},{s},{a.real:.12g},{a.imag:.12g}")
            if n == 2:
                ratio_dev = max(ratio_dev, abs(abs(amps[2]) - abs(amps[6])))
    _write(cfg.out / "pbc_states.csv", "\n".join(lines) + "\n")
    out = {"energies": {str(n): v for n, v in energies.items()}, "files": ["pbc_states.csv"]}
    if 2 in ns:
        out["n2_max_abs_alpha_minus_abs_gamma"] = ratio_dev
    return out


def run_berry_exact(cfg: ExperimentConfig, threads: int) -> dict:
    runs = []
    for n in cfg.get("model", "n"):
        r = berry_phase_exact(n, cfg.get("model", "N"), backend=cfg.get("model", "backend"),
                              encoding=cfg.get("experiment", "encoding"), epsilon=cfg.get("model", "epsilon"),
                              gauge_seed=cfg.seed)
        runs.append(r.to_dict())
    _write(cfg.out / "berry_exact.json", json.dumps(runs, indent=2, sort_keys=True) + "\n")
    return {"gamma": [r["gamma"] for r in runs], "gamma_over_pi": [r["gamma"] / np.pi for r in runs],
            "distance_to_quantized": [r["distance_to_quantized"] for r in runs], "files": ["berry_exact.json"]}


def _berry_noisy_point(args) -> dict:
    n, N, params, enc, shots, seed, max_bond = args
    return berry_phase_hadamard(n, N, params, enc, shots=shots or None, seed=seed, max_bond=max_bond).to_dict()


def run_berry_noisy(cfg: ExperimentConfig, threads: int) -> dict:
    base = cfg.noise()
    n = cfg.get("model", "n")[0]
    grid = [(n, cfg.get("model", "N"), base.with_(noise_rate=r), cfg.get("experiment", "encoding"),
             cfg.get("sweep", "shots"), cfg.seed, cfg.get("sweep", "max_bond")) for r in cfg.get("sweep", "noise_rates")]
    runs = _map(_berry_noisy_point, grid, threads)
    lines = ["noise_rate,gamma,gamma_over_pi,distance_to_quantized,min_link_magnitude"]
    for r in runs:
        lines.append(f"{r['noise_rate']!r},{_fmt(r['gamma'])},{_fmt(r['gamma'] / np.pi)},"
                     f"{_fmt(r['distance_to_quantized'])},{_fmt(min(r['link_overlap_magnitudes']))}")
    _write(cfg.out / "berry_noisy.csv", "\n".join(lines) + "\n")
    _write(cfg.out / "berry_noisy.json", json.dumps(runs, indent=2, sort_keys=True) + "\n")
    return {"noise_rates": [r["noise_rate"] for r in runs], "gamma_over_pi": [r["gamma"] / np.pi for r in runs],
            "files": ["berry_noisy.csv", "berry_noisy.json"]}


def _sweep_summary(rows) -> dict:
    out: dict[str, dict] = {}
    for r in rows:
        out.setdefault(r.encoding, {})[f"n={r.n},rate={r.noise_rate!r},dd={r.dd_strength!r}"] = r.f2
    return {"f2": out}


def run_noise_sweep(cfg: ExperimentConfig, threads: int) -> dict:
    base = cfg.noise()
    rows = fidelity_sweep(cfg.get("model", "n"), cfg.get("sweep", "noise_rates"), [base.dd_strength],
                          cfg.get("experiment", "encodings"), base, max_bond=cfg.get("sweep", "max_bond"),
                          threads=threads)
    rows_to_csv(rows, cfg.out / "noise_sweep.csv")
    return {**_sweep_summary(rows), "files": ["noise_sweep.csv"]}


def run_dd_sweep(cfg: ExperimentConfig, threads: int) -> dict:
    base = cfg.noise()
    rows = fidelity_sweep(cfg.get("model", "n"), [base.noise_rate], cfg.get("sweep", "dd_strengths"),
                          cfg.get("experiment", "encodings"), base, max_bond=cfg.get("sweep", "max_bond"),
                          threads=threads)
    rows_to_csv(rows, cfg.out / "dd_sweep.csv")
    per_site: dict[str, list[float]] = {}
    for r in rows:
        per_site.setdefault(f"{r.encoding},n={r.n}", []).append(r.fidelity_per_site)
    return {"fidelity_per_site": per_site, "files": ["dd_sweep.csv"]}


def run_compile_report(cfg: ExperimentConfig, threads: int) -> dict:
    enc = cfg.get("experiment", "encoding")
    c = cfg.values["compile"]
    res = compile_isometry(aklt_ladder_target(enc), tol=c["tol"], max_cnots=c["max_cnots"],
                           restarts=c["restarts"], seed=cfg.seed, decompose=c["decompose"])
    report = {"encoding": enc, "n_cnots": res.structure.n_cnots,
              "cnot_placements": [list(p) for p in res.structure.cnot_placements],
              "cost": res.cost, "structures_tried": res.structures_tried,
              "n_pulses": sum(op.gate.n_pulses for op in res.circuit.ops),
              "circuit": res.circuit.to_dict()}
    _write(cfg.out / "compile_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    return {k: report[k] for k in ("encoding", "n_cnots", "cost", "structures_tried", "n_pulses")} | {
        "files": ["compile_report.json"]}


RUNNERS = {
    "obc_fidelity": run_obc_fidelity,
    "pbc_states": run_pbc_states,
    "berry_exact": run_berry_exact,
    "berry_noisy": run_berry_noisy,
    "noise_sweep": run_noise_sweep,
    "dd_sweep": run_dd_sweep,
    "compile_report": run_compile_report,
}


def _map(fn, items, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    return x


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Run one experiment, write its files and ``summary.json``; returns the summary."""
    cfg.out.mkdir(parents=True, exist_ok=True)
    results = RUNNERS[cfg.experiment](cfg, threads)
    summary = _jsonable({"experiment": cfg.experiment, "seed": cfg.seed, "config": cfg.values, "results": results})
    (cfg.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _print_table(summary: dict) -> None:
    print(f"experiment: {summary['experiment']}  seed: {summary['seed']}")
    for k, v in summary["results"].items():
        print(f"  {k:<28} {json.dumps(v)}")


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="qutrit-aklt", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--seed", type=int, default=None, help="overrides [experiment] seed")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        summary = run_experiment(cfg, args.threads)
    except Exception as exc:  # any module error must give a nonzero exit
        log.debug("experiment failed", exc_info=True)
        print(f"error: {cfg.experiment} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _print_table(summary)
    print(f"wrote {cfg.out} in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
