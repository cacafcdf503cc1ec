"""Config generators that regenerate the data behind each figure and table.

A recipe is a set of named run/sweep configs, the column schema of every
output table, and the post-processing fits that turn tables into numbers.
"""

from dataclasses import dataclass, field
import itertools

import numpy as np

from . import io
from .analysis import GridSettings, SweepSpec
from .config import OutputSettings, RunConfig, SweepConfig
from .model import PROTOCOLS, BatteryParams
from .observables import COST_RESCALE_DURATION, default_subsystem
from .propagator import TimeGrid

REFERENCE_POINT = dict(n_spins=50, gamma=-0.1, amplitude=5.0, omega=5.0)
SCALING_RANGE = (3, 50)
TABLE_GAMMAS = (0.1, -0.1, -1.0)
TABLE_AMPLITUDES = (5.0, 10.0)
TABLE_OMEGAS = (5.0, 10.0)
RECIPES = ("fig1", "fig2", "fig3", "fig4", "fig5", "table1")


class UnknownRecipe(KeyError):
    def __str__(self):
        return f"unknown recipe {self.args[0]!r}; choose from {', '.join(RECIPES)}"


@dataclass(frozen=True)
class FitStep:
    table: str
    quantity: str
    protocol: str
    n_range: tuple = SCALING_RANGE


@dataclass
class Recipe:
    name: str
    configs: dict
    schema: dict
    fits: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    def describe(self):
        return {
            "recipe": self.name,
            "tables": {stem: list(cols) for stem, cols in self.schema.items()},
            "fits": [vars(f) | {"n_range": list(f.n_range)} for f in self.fits],
            "constants": self.constants,
        }


def _run(stem, protocol, n_spins=50, gamma=-0.1, amplitude=5.0, omega=5.0):
    params = BatteryParams.build(n_spins, gamma, amplitude,
                                 None if protocol == "constant" else omega, protocol)
    return RunConfig(params, TimeGrid.default_for(params.drive),
                     subsystem=default_subsystem(n_spins),
                     output=OutputSettings(stem=stem, plot=False))


def _sweep(stem, parameter, values, protocols=PROTOCOLS, **point):
    kw = dict(REFERENCE_POINT, **point)
    spec = SweepSpec(parameter, tuple(values), protocols=tuple(protocols),
                     settings=GridSettings(), **kw)
    return SweepConfig(spec, OutputSettings(stem=stem))


def _schema(configs):
    return {stem: (io.SWEEP_COLUMNS if isinstance(cfg, SweepConfig) else io.TIME_SERIES_COLUMNS)
            for stem, cfg in configs.items()}


def _steps(lo, hi, step):
    return [float(v) for v in np.round(np.arange(lo, hi + step / 2, step), 10)]


def _fig1():
    return {f"fig1_{p}": _run(f"fig1_{p}", p) for p in PROTOCOLS}, [], {}


def _fig2():
    configs = {
        "fig2_N": _sweep("fig2_N", "N", range(3, 51)),
        "fig2_gamma": _sweep("fig2_gamma", "gamma", _steps(-1.0, 0.5, 0.02)),
    }
    fits = [FitStep("fig2_N", q, p) for p in PROTOCOLS for q in ("C_max", "P_max")]
    return configs, fits, {}


def _fig3():
    configs = {
        "fig3_A": _sweep("fig3_A", "A", _steps(1.0, 10.0, 0.25)),
        "fig3_omega": _sweep("fig3_omega", "omega", _steps(1.0, 10.0, 0.25)),
    }
    return configs, [], {}


def _fig4():
    return {f"fig4_{p}": _run(f"fig4_{p}", p) for p in PROTOCOLS}, [], {}


def _fig5():
    ns = range(10, 101, 10)
    configs = {f"fig5_N{n}": _run(f"fig5_N{n}", "sta", n_spins=n) for n in ns}
    configs["fig5_N"] = _sweep("fig5_N", "N", ns, protocols=("sta",))
    return configs, [], {"tau_rescale": COST_RESCALE_DURATION, "tau": "t / tau_rescale"}


def _table1():
    configs, fits = {}, []
    for gamma, amp, omega in itertools.product(TABLE_GAMMAS, TABLE_AMPLITUDES, TABLE_OMEGAS):
        for proto in PROTOCOLS:
            stem = f"table1_g{gamma:+g}_A{amp:g}_w{omega:g}_{proto}"
            configs[stem] = _sweep(stem, "N", range(SCALING_RANGE[0], SCALING_RANGE[1] + 1),
                                   protocols=(proto,), gamma=gamma, amplitude=amp, omega=omega)
            fits.append(FitStep(stem, "P_max", proto))
    return configs, fits, {}


_BUILDERS = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3, "fig4": _fig4,
             "fig5": _fig5, "table1": _table1}


def recipe(name) -> Recipe:
    try:
        build = _BUILDERS[name]
    except KeyError:
        raise UnknownRecipe(name) from None
    configs, fits, constants = build()
    return Recipe(name, configs, _schema(configs), fits, constants)
