"""Command-line front end.

Every command writes a JSON manifest next to its main output
(``<out>.manifest.json``) holding the resolved parameters, so
``fdlcp rerun --manifest <file>`` repeats the run exactly.

Exit codes: 0 success, 2 usage or configuration error (including missing
input files), 3 solver stopped at its iteration cap, 4 I/O error.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from fdlcp import __version__
from fdlcp.dictionary import TrainConfig
from fdlcp.errors import ConfigError, FdlcpError, InputError
from fdlcp.image import PatchConfig, make_phantom
from fdlcp.io import read_cimg, read_mask, write_cimg, write_cmap, write_dbank, write_mask
from fdlcp.metrics import rlne, ssim
from fdlcp.sampling import encode, make_cartesian_mask, make_radial_mask, make_random2d_mask, mask_rate
from fdlcp.solver import PipelineConfig, SolverConfig, reconstruct
from fdlcp.sparsity import TRANSFORMS, sweep

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_IO = 0, 2, 3, 4

EVAL_HEADER = ["case", "pattern", "rate", "method", "penalty", "rlne", "ssim"]
TRACE_HEADER = ["iteration", "data_residual", "primal_residual", "objective", "wall_time"]
SWEEP_HEADER = ["transform", "fraction", "rlne"]

logger = logging.getLogger("fdlcp")

InPath = click.Path(exists=True, dir_okay=False)
OutPath = click.Path(dir_okay=False)


class Exit(Exception):
    """Carries a non-zero exit code out of a command body."""

    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code


def manifest_path(out) -> Path:
    return Path(f"{os.fspath(out)}.manifest.json")


def write_manifest(out, command: str, params: dict, inputs: dict, extra: dict | None = None) -> None:
    doc = {
        "tool": "fdlcp",
        "version": __version__,
        "command": command,
        "inputs": {k: os.path.abspath(v) for k, v in inputs.items() if v is not None},
        "output": os.path.abspath(out),
        "params": params,
    }
    if extra:
        doc.update(extra)
    with open(manifest_path(out), "w", encoding="utf-8", newline="\n") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def write_csv(path, header, rows, append: bool = False) -> None:
    new = not (append and os.path.exists(path) and os.path.getsize(path) > 0)
    with open(path, "a" if append else "w", encoding="utf-8", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        if new:
            w.writerow(header)
        w.writerows(rows)


def _csv_floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise ConfigError("empty number list")
    return vals


def _mask_pattern(mask_file) -> str:
    """Pattern name recorded in the mask's manifest, if there is one."""
    try:
        with open(manifest_path(mask_file), encoding="utf-8") as f:
            return json.load(f)["params"]["pattern"]
    except (OSError, KeyError, ValueError):
        return "custom"


@click.group()
@click.version_option(__version__, prog_name="fdlcp")
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def cli(verbose):
    """Compressed-sensing MRI reconstruction with direction-classified dictionaries."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


@cli.command("phantom")
@click.option("--size", type=int, default=128, show_default=True)
@click.option("--kind", type=click.Choice(["shepp_logan", "directional_grid"]), default="shepp_logan",
              show_default=True)
@click.option("--out", type=OutPath, required=True)
def cmd_phantom(size, kind, out):
    """Write a synthetic phantom image."""
    img = make_phantom(size, kind)
    write_cimg(out, img)
    write_manifest(out, "phantom", {"size": size, "kind": kind, "out": out}, {})


@cli.command("mask")
@click.option("--pattern", type=click.Choice(["cartesian", "random2d", "radial"]), required=True)
@click.option("--rate", type=float, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--size", type=int, default=128, show_default=True)
@click.option("--center-fraction", type=float, default=0.04, show_default=True,
              help="Fully sampled centre block (cartesian only).")
@click.option("--out", type=OutPath, required=True)
def cmd_mask(pattern, rate, seed, size, center_fraction, out):
    """Write a k-space sampling mask and print the achieved rate."""
    if pattern == "cartesian":
        m = make_cartesian_mask(size, size, rate, center_fraction, seed=seed)
    elif pattern == "random2d":
        m = make_random2d_mask(size, size, rate, seed=seed)
    else:
        m = make_radial_mask(size, size, rate=rate, seed=seed)
    write_mask(out, m)
    achieved = mask_rate(m)
    write_manifest(out, "mask", {"pattern": pattern, "rate": rate, "seed": seed, "size": size,
                                 "center_fraction": center_fraction, "out": out}, {},
                   {"achieved_rate": achieved})
    click.echo(f"achieved rate {achieved:.6f}")


@cli.command("simulate")
@click.option("--image", type=InPath, required=True)
@click.option("--mask", "mask_file", type=InPath, required=True)
@click.option("--out", type=OutPath, required=True)
def cmd_simulate(image, mask_file, out):
    """Undersample the image's k-space with the mask (unsampled entries are zero)."""
    x = read_cimg(image)
    m = read_mask(mask_file)
    write_cimg(out, encode(x, m))
    write_manifest(out, "simulate", {"image": image, "mask_file": mask_file, "out": out},
                   {"image": image, "mask": mask_file})


@cli.command("recon")
@click.option("--kspace", type=InPath, required=True)
@click.option("--mask", "mask_file", type=InPath, required=True)
@click.option("--method", type=click.Choice(["zerofill", "sidwt", "fdlcp"]), default="fdlcp", show_default=True)
@click.option("--penalty", type=click.Choice(["l1", "l0"]), default="l1", show_default=True)
@click.option("--T", "T", type=int, default=1, show_default=True, help="Reference image updates.")
@click.option("--eta", type=float, default=0.2, show_default=True, help="Training hard threshold.")
@click.option("--lambda", "lam", type=float, default=1e3, show_default=True)
@click.option("--beta", type=float, default=None,
              help="Frame penalty weight [default: 100 for l1, 1000 for l0].")
@click.option("--eps", type=float, default=1e-4, show_default=True)
@click.option("--max-iterations", type=int, default=200, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True, help="Threads for dictionary training.")
@click.option("--out", type=OutPath, required=True)
@click.option("--truth", type=InPath, default=None, help="Ground truth; writes <out>.metrics.csv.")
@click.option("--trace", type=OutPath, default=None, help="Per-iteration CSV of the final solve.")
@click.option("--bank-out", type=click.Path(file_okay=False), default=None,
              help="Directory for the final class map and dictionary bank.")
def cmd_recon(kspace, mask_file, method, penalty, T, eta, lam, beta, eps, max_iterations, workers,
              out, truth, trace, bank_out):
    """Reconstruct an image from undersampled k-space."""
    y = read_cimg(kspace)
    m = read_mask(mask_file)
    if y.shape != m.shape:
        raise ConfigError(f"k-space shape {y.shape} != mask shape {m.shape}")
    x_true = read_cimg(truth) if truth else None
    if x_true is not None and x_true.shape != y.shape:
        raise ConfigError(f"truth shape {x_true.shape} != k-space shape {y.shape}")
    # the wavelet reconstruction is always the l1 model
    solver = SolverConfig(lam=lam, beta=beta, eps=eps, max_iterations=max_iterations,
                          penalty=penalty if method == "fdlcp" else "l1")
    pcfg = PipelineConfig(T=T, patch=PatchConfig(), train=TrainConfig(eta=eta), solver=solver, workers=workers)
    x, report = reconstruct(y, m, method, pcfg)
    write_cimg(out, x)

    params = {"kspace": kspace, "mask_file": mask_file, "method": method, "penalty": penalty, "T": T,
              "eta": eta, "lam": lam, "beta": beta, "eps": eps, "max_iterations": max_iterations,
              "workers": workers, "out": out, "truth": truth, "trace": trace, "bank_out": bank_out}
    resolved = {"n": pcfg.patch.n, "Q": 71 if method == "fdlcp" else None, "beta": solver.beta}
    stages = [{k: v for k, v in s.items() if not isinstance(v, np.ndarray)} for s in report["stages"]]
    write_manifest(out, "recon", params, {"kspace": kspace, "mask": mask_file, "truth": truth},
                   {"resolved": resolved, "stages": stages, "converged": report["converged"]})

    if x_true is not None:
        write_csv(f"{out}.metrics.csv", EVAL_HEADER,
                  [[Path(kspace).stem, _mask_pattern(mask_file), f"{mask_rate(m):.6f}", method,
                    penalty if method == "fdlcp" else "", repr(rlne(x, x_true)), repr(ssim(x, x_true))]])
    state = report.get("state")
    if trace and state is not None:
        write_csv(trace, TRACE_HEADER, [[i, repr(r), repr(p), repr(o), repr(t)]
                                        for i, r, p, o, t in state.trace_rows()])
    if bank_out and report.get("operator") is not None:
        os.makedirs(bank_out, exist_ok=True)
        op = report["operator"]
        write_cmap(os.path.join(bank_out, "classes.cmap"), op.class_map)
        write_dbank(os.path.join(bank_out, "bank.dbank"), op.bank)
    if not report["converged"]:
        raise Exit(EXIT_NONCONVERGED, "solver reached max iterations before the residual met eps")


@cli.command("sweep-sparsity")
@click.option("--image", type=InPath, required=True)
@click.option("--transforms", default=",".join(TRANSFORMS), show_default=True,
              help="Comma-separated subset of haar2d,dct2d,fdl,fdlcp.")
@click.option("--fractions", default="0.01,0.02,0.05,0.1,0.2,0.5,1.0", show_default=True,
              help="Comma-separated retained coefficient fractions.")
@click.option("--eta", type=float, default=0.2, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=OutPath, required=True)
def cmd_sweep_sparsity(image, transforms, fractions, eta, workers, out):
    """Sparse-approximation error against retained coefficient fraction."""
    names = tuple(t.strip() for t in transforms.split(",") if t.strip())
    unknown = [t for t in names if t not in TRANSFORMS]
    if unknown or not names:
        raise ConfigError(f"unknown transform(s) {unknown}; choose from {', '.join(TRANSFORMS)}")
    fr = _csv_floats(fractions)
    x = read_cimg(image)
    rows = sweep(x, names, fr, tcfg=TrainConfig(eta=eta), workers=workers)
    write_csv(out, SWEEP_HEADER, [[t, repr(f), repr(e)] for t, f, e in rows])
    write_manifest(out, "sweep-sparsity", {"image": image, "transforms": transforms, "fractions": fractions,
                                           "eta": eta, "workers": workers, "out": out}, {"image": image})


@cli.command("eval")
@click.option("--recon", type=InPath, required=True)
@click.option("--truth", type=InPath, required=True)
@click.option("--out", type=OutPath, required=True, help="CSV file; a row is appended.")
@click.option("--case", default=None, help="Case label [default: recon file stem].")
@click.option("--pattern", default="", help="Sampling pattern label.")
@click.option("--rate", default="", help="Sampling rate label.")
@click.option("--method", default="", help="Method label.")
@click.option("--penalty", default="", help="Penalty label.")
def cmd_eval(recon, truth, out, case, pattern, rate, method, penalty):
    """Append RLNE and windowed SSIM of a reconstruction to a CSV."""
    xr, xt = read_cimg(recon), read_cimg(truth)
    if xr.shape != xt.shape:
        raise ConfigError(f"shape mismatch {xr.shape} vs {xt.shape}")
    row = [case or Path(recon).stem, pattern, rate, method, penalty, repr(rlne(xr, xt)), repr(ssim(xr, xt))]
    write_csv(out, EVAL_HEADER, [row], append=True)
    click.echo(f"rlne {row[5]} ssim {row[6]}")


@cli.command("rerun")
@click.option("--manifest", type=InPath, required=True)
@click.option("--out", type=OutPath, default=None,
              help="Write the main output here instead; side outputs are skipped.")
@click.pass_context
def cmd_rerun(ctx, manifest, out):
    """Repeat a run from its manifest."""
    try:
        with open(manifest, encoding="utf-8") as f:
            doc = json.load(f)
        command, params = doc["command"], dict(doc["params"])
    except (ValueError, KeyError) as exc:
        raise InputError(f"{manifest} is not a run manifest") from exc
    if command == "rerun" or command not in cli.commands:
        raise ConfigError(f"manifest names unknown command {command!r}")
    if out is not None:
        params["out"] = out
        for side in ("trace", "bank_out"):
            if side in params:
                params[side] = None
    ctx.invoke(cli.commands[command], **params)


def main(argv=None) -> int:
    """Entry point; returns the process exit code."""
    try:
        cli.main(args=argv, prog_name="fdlcp", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_CONFIG
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except Exit as exc:
        if str(exc):
            click.echo(f"warning: {exc}", err=True)
        return exc.code
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO
    except FdlcpError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
