# virialkit/cli.py
"""Batch front end.

Exit codes: 0 success, 1 certificate refusal or failed self-test,
2 input/domain error, 3 capability limit.
"""
import json
import logging
import math
import sys
from dataclasses import dataclass
from functools import wraps
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import click
from pydantic import ValidationError

from virialkit import settings
from virialkit.applications import (
    GridProfile,
    MixtureSpec,
    RodSystem,
    invert_mixture,
    invert_profile,
    rods_free_energy,
)
from virialkit.errors import CertificateRefused, InputError, VirialKitError
from virialkit.graphs import cayley, class_counts, ursell, ursell_brute
from virialkit.homogeneous import (
    HomogeneousModel,
    bounds_table,
    hom_inversion_selftest,
    virial_table,
)
from virialkit.inversion import GCState, dissymmetry_check, roundtrip_check, zeta_paths_residual
from virialkit.schemas import GridProfileSchema, HomogeneousModelSchema, MixtureSchema, RodSystemSchema
from virialkit.series import exp_series, from_univariate, single_species_egf
from virialkit.species import SpeciesSpace, load_model
from virialkit.trees import tn_via_trees, verify_FP, verify_FPprime
from virialkit.utils.output import emit, render_table
from virialkit.utils.partitions import bell, multi_indices

logger = logging.getLogger(__name__)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

Table = Tuple[List[Dict[str, Any]], List[str], Dict[str, Any]]

# subcommands whose numerics are quadrature, sampling or root finding
FLOAT_ONLY = frozenset({"bounds", "invert", "mixture", "rods"})


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    model: Optional[str] = None
    N: int = 2
    seed: int = 0
    threads: Optional[int] = None
    out: Optional[str] = None
    fmt: str = "csv"
    mode: str = "float"
    samples: Optional[int] = None

    def __post_init__(self):
        if self.N < 1:
            raise InputError("--order must be >= 1")
        if self.mode == "rational" and self.subcommand in FLOAT_ONLY:
            raise InputError(f"{self.subcommand} computes in floating point; --mode rational is not available")


def _read(path: Optional[str], schema):
    if path is None:
        raise InputError("--model is required")
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return schema.model_validate(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except ValidationError as exc:
        raise InputError(f"invalid {path}: {exc.errors()[0]['msg']}") from exc


# -- commands as plain functions -------------------------------------------


def cmd_virial(config: RunConfig) -> Table:
    model = HomogeneousModel.from_schema(_read(config.model, HomogeneousModelSchema), config.mode)
    table = virial_table(model, config.N, seed=config.seed, samples=config.samples, threads=config.threads)
    meta = {"exclusion_distance": model.exclusion_distance, "exclusion_convention": model.exclusion_convention,
            "C_bar": model.c_bar, "seed": config.seed}
    return table.as_rows(), ["n", "beta_n", "method", "stderr"], meta


def cmd_bounds(config: RunConfig) -> Table:
    model = HomogeneousModel.from_schema(_read(config.model, HomogeneousModelSchema))
    return bounds_table(model), ["name", "value", "formula"], {}


def cmd_invert(config: RunConfig) -> Table:
    schema = _read(config.model, GridProfileSchema)
    gp = GridProfile.from_schema(schema)
    kernel = None if schema.kernel is None else schema.kernel.model_dump(mode="json")
    result = invert_profile(gp, kernel, config.N, schema.a, schema.b, threads=config.threads)
    rows = [{"point": i, "v_ext": v} for i, v in enumerate(result["v_ext"])]
    meta = {"certificate": result["certificate"], "uniqueness": result["uniqueness"]}
    return rows, ["point", "v_ext"], meta


def cmd_mixture(config: RunConfig) -> Table:
    schema = _read(config.model, MixtureSchema)
    result = invert_mixture(MixtureSpec.from_schema(schema), config.N, seed=schema.seed,
                            samples=schema.samples or config.samples, threads=config.threads)
    rows = [{"k": k, "z_k": z, "stderr": e} for k, (z, e) in enumerate(zip(result["z"], result["stderr"]))]
    return rows, ["k", "z_k", "stderr"], {"certificate": result["certificate"]}


def cmd_rods(config: RunConfig) -> Table:
    schema = _read(config.model, RodSystemSchema)
    result = rods_free_energy(RodSystem.from_schema(schema), config.N, seed=schema.seed,
                              samples=schema.samples or config.samples, threads=config.threads)
    rows = [{"term": name, "value": value, "stderr": result["stderr"].get(name, 0.0)}
            for name, value in result["terms"].items()]
    rows.append({"term": "total", "value": result["total"], "stderr": math.sqrt(
        sum(e * e for e in result["stderr"].values()))})
    return rows, ["term", "value", "stderr"], {"certificate": result["certificate"]}


def _identity_rows(name: str, st: GCState, tree_order: int) -> List[Dict[str, Any]]:
    reports = [
        verify_FP(st.A, st.t),
        verify_FPprime(st.A, st.t),
        roundtrip_check(st),
        zeta_paths_residual(st),
        dissymmetry_check(st, min(st.N, 4)),
    ]
    rows = [{"check": f"{name}:{r.name}", "passed": r.passed, "max_abs": r.max_abs} for r in reports]
    worst = 0
    S = st.space.size
    for n in range(1, tree_order + 1):
        for key in multi_indices(S, n):
            for q in range(S):
                worst = max(worst, abs(st.t.coeff(q, key) - tn_via_trees(st.A, n, q, key)))
    rows.append({"check": f"{name}:tree oracle", "passed": worst == 0, "max_abs": float(worst)})
    return rows


def _combinatorial_rows() -> List[Dict[str, Any]]:
    rows = []
    space = SpeciesSpace.uniform(1)
    egf = single_species_egf(exp_series(from_univariate(space, [0] + [1] * 5)))
    rows.append({"check": "bell numbers", "passed": egf[1:] == [bell(n) for n in range(1, 6)], "max_abs": 0.0})
    expected = {2: (1, 1), 3: (4, 1), 4: (38, 10), 5: (728, 238)}
    counts = class_counts(5)
    ok = all((c["connected"], c["biconnected"]) == expected[c["n"]] and c["tree"] == cayley(c["n"])
             for c in counts)
    rows.append({"check": "graph class counts", "passed": ok, "max_abs": 0.0})
    pot = load_model(FIXTURES / "species_pair.json", mode="rational")
    worst = max(abs(ursell(pot.mayer, key) - ursell_brute(pot.mayer, key))
                for n in range(1, 6) for key in multi_indices(pot.size, n))
    rows.append({"check": "ursell recursion", "passed": worst == 0, "max_abs": float(worst)})
    return rows


def cmd_selftest(config: RunConfig) -> Table:
    """Exact identity suite on the shipped species fixtures (or --model)."""
    paths = [Path(config.model)] if config.model else sorted(FIXTURES.glob("species_*.json"))
    N = min(config.N, 4) if config.model else 4
    rows = []
    for path in paths:
        st = GCState(load_model(path, mode="rational"), N, threads=config.threads)
        rows.extend(_identity_rows(path.stem, st, tree_order=min(N, 3)))
    if not config.model:
        rows.extend(_combinatorial_rows())
        rods = HomogeneousModel(dimension=1, kind="hard_rod", a=1)
        report = hom_inversion_selftest(rods, 3)
        rows.append({"check": "tonks oracle", "passed": report["passed"], "max_abs": report["zeta_path_residual"]})
    return rows, ["check", "passed", "max_abs"], {}


# -- click wiring ----------------------------------------------------------


def _configure_logging(verbose: int) -> None:
    level = settings.LOG_LEVEL
    if verbose == 1:
        level = "INFO"
    elif verbose > 1:
        level = "DEBUG"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _run(command, config: RunConfig) -> None:
    ctx = click.get_current_context()
    try:
        rows, columns, meta = command(config)
    except CertificateRefused as exc:
        click.echo(f"refused: {exc}", err=True)
        cert = exc.certificate
        margin_rows = [{"index": i, "a": a, "b": b, "margin": m}
                       for i, (a, b, m) in enumerate(zip(cert.a, cert.b, cert.margins))]
        emit(render_table(margin_rows, ["index", "a", "b", "margin"], config.fmt,
                          {"condition": cert.condition}), config.out)
        ctx.exit(exc.exit_code)
    except VirialKitError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(exc.exit_code)
    emit(render_table(rows, columns, config.fmt, meta), config.out)
    if config.subcommand == "selftest" and not all(r["passed"] for r in rows):
        ctx.exit(1)


def common_options(fn):
    @click.option("--model", "model", type=click.Path(dir_okay=False), default=None, help="Input JSON file.")
    @click.option("--order", "N", type=int, default=2, show_default=True, help="Truncation order N.")
    @click.option("--seed", type=int, default=0, show_default=True, help="Monte Carlo seed.")
    @click.option("--threads", type=int, default=None, help="Worker threads (default VIRIALKIT_THREADS).")
    @click.option("--mode", type=click.Choice(["rational", "float"]), default="float", show_default=True,
                  help="Exact rational arithmetic (virial, selftest) or floats.")
    @click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write output here.")
    @click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
    @click.option("--samples", type=int, default=None, help="Monte Carlo samples per integral.")
    @wraps(fn)
    def wrapper(**kwargs):
        return fn(**kwargs)
    return wrapper


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG.")
def main(verbose: int):
    """virialkit: density/activity inversion for multi-species systems."""
    _configure_logging(verbose)


def _subcommand(name: str, command, help_text: str):
    @main.command(name=name, help=help_text)
    @common_options
    def run(**kwargs):
        try:
            config = RunConfig(subcommand=name, **kwargs)
        except VirialKitError as exc:
            click.echo(f"error: {exc}", err=True)
            click.get_current_context().exit(exc.exit_code)
        _run(command, config)
    return run


virial = _subcommand("virial", cmd_virial, "Irreducible cluster integrals beta_n of a homogeneous model.")
bounds = _subcommand("bounds", cmd_bounds, "Radius constants and bound comparisons of a homogeneous model.")
invert = _subcommand("invert", cmd_invert, "External potential reproducing a grid density profile.")
mixture = _subcommand("mixture", cmd_mixture, "Activities of a hard-sphere mixture.")
rods = _subcommand("rods", cmd_rods, "Free energy of thin rods with discrete orientations.")
selftest = _subcommand("selftest", cmd_selftest, "Exact identity suite; exits 1 on any failed check.")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(host: str, port: int):
    """Serve the HTTP interface with uvicorn."""
    import uvicorn

    uvicorn.run("virialkit.main:app", host=host, port=port, log_level=settings.LOG_LEVEL.lower())


if __name__ == "__main__":
    main()
