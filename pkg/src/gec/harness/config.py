"""Experiment configuration: a single TOML file with fixed sections.

Grammar (every key optional unless noted; unknown sections or keys are errors)::

    [problem]
    class = "slr"                 # "slr" or "glm"
    n = 400
    m = 200
    prior = "bernoulli_gaussian"  # gaussian | laplace | bernoulli_gaussian | logcosh
    prior_params = { rho = 0.5, mean = 0.0, var = 1.0 }
    matrix = "iid_gaussian"       # iid_gaussian | row_orthogonal | haar_spectrum
    sigma = [ ... ]               # singular values for haar_spectrum
    gamma_w = 10.0                # noise precision; inf for noiseless data
    likelihood = "gaussian"       # glm only: gaussian | probit
    likelihood_params = { scale = 1.0 }

    [gec]
    mode = "mmse"                 # mmse | map
    diagonalizer = "uniform"      # vector | uniform | block
    blocks = [ ... ]              # block sizes; glm defaults to (n, m)
    schedule = "joint"            # joint | first_order | two_stage_map
    init_gamma1 = 1e-3
    init_gamma2 = 1.0
    max_iters = 500
    fixed_point_tol = 1e-8
    gamma_floor = 1e-8
    damping_factor = 1.0
    first_order_tol = 1e-10
    first_order_max_iters = 10000

    [run]
    seeds = [0, 1, 2]             # required, non-empty
    workers = 1                   # overridden by GEC_WORKERS

    [oracles]
    replica = true
    exact_gaussian = false
    map_solver = false

    [output]
    dir = "out"
    traces = true

    [report]
    formats = ["csv", "text"]     # csv | jsonl | text
"""
import os
import sys
from dataclasses import dataclass, field

from ..diag import Diagonalizer
from ..engine import GecConfig
from ..errors import ConfigError
from ..problems import ProblemSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECTIONS = {
    "problem": {"class", "n", "m", "prior", "prior_params", "matrix", "sigma", "gamma_w",
                "likelihood", "likelihood_params"},
    "gec": {"mode", "diagonalizer", "blocks", "schedule", "init_gamma1", "init_gamma2", "max_iters",
            "fixed_point_tol", "gamma_floor", "damping_factor", "first_order_tol", "first_order_max_iters"},
    "run": {"seeds", "workers"},
    "oracles": {"replica", "exact_gaussian", "map_solver"},
    "output": {"dir", "traces"},
    "report": {"formats"},
}
REPORT_FORMATS = ("csv", "jsonl", "text")


@dataclass
class ExperimentConfig:
    problem: ProblemSpec
    gec: dict
    seeds: list
    workers: int = 1
    oracles: dict = field(default_factory=dict)
    output_dir: str = "out"
    traces: bool = True
    formats: tuple = ("csv", "text")

    def gec_config(self, dim):
        """GecConfig for an instance whose GEC variable has length ``dim``."""
        kw = dict(self.gec)
        kind = kw.pop("diagonalizer", "vector")
        blocks = kw.pop("blocks", None)
        if kind == "block" and blocks is None:
            if self.problem.problem != "glm":
                raise ConfigError("block diagonalizer needs [gec].blocks for slr problems")
            blocks = (self.problem.n, self.problem.m)
        diag = Diagonalizer.from_name(kind, blocks or ())
        diag.check_dim(dim)
        return GecConfig(diagonalizer=diag, **kw)


def _check_keys(section, table):
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    unknown = set(table) - SECTIONS[section]
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")


def parse_config(data):
    """Validate a parsed TOML document and build an :class:`ExperimentConfig`."""
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    for name, table in data.items():
        _check_keys(name, table)
    prob = dict(data.get("problem", {}))
    if "class" in prob:
        prob["problem"] = prob.pop("class")
    for key in ("prior_params", "likelihood_params"):
        if key in prob and not isinstance(prob[key], dict):
            raise ConfigError(f"[problem].{key} must be a table")
    try:
        problem = ProblemSpec(**prob)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    problem.make_prior()

    gec = dict(data.get("gec", {}))
    if gec.get("diagonalizer", "vector") not in ("vector", "uniform", "block"):
        raise ConfigError(f"unknown diagonalizer {gec['diagonalizer']!r}")
    run = data.get("run", {})
    seeds = run.get("seeds")
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("[run].seeds must be a non-empty list of integers")
    if not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError("seeds must be non-negative integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    workers = run.get("workers", 1)
    env = os.environ.get("GEC_WORKERS")
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(f"GEC_WORKERS must be an integer, got {env!r}") from None
    if not isinstance(workers, int) or workers < 1:
        raise ConfigError("worker count must be a positive integer")

    oracles = {"replica": False, "exact_gaussian": False, "map_solver": False}
    for k, v in data.get("oracles", {}).items():
        if not isinstance(v, bool):
            raise ConfigError(f"[oracles].{k} must be true or false")
        oracles[k] = v
    out = data.get("output", {})
    formats = tuple(data.get("report", {}).get("formats", ("csv", "text")))
    bad = [f for f in formats if f not in REPORT_FORMATS]
    if bad:
        raise ConfigError(f"unknown report format(s) {bad}; choose from {REPORT_FORMATS}")
    cfg = ExperimentConfig(problem, gec, list(seeds), workers, oracles, str(out.get("dir", "out")),
                           bool(out.get("traces", True)), formats)
    dim = problem.n + (problem.m if problem.problem == "glm" else 0)
    cfg.gec_config(dim)
    return cfg


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)
