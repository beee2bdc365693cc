"""Command-line entry points: corpus generation, embedding fit, mesh export,
service launch, and the synthetic-user convergence simulator."""

from __future__ import annotations

import json
import math
import sys

import click
import numpy as np

from . import blobshape as bs
from . import embedding as em
from . import roi
from . import simulate as simmod


@click.group()
def main():
    """Design-space exploration engine for Gaussian-blob chair shapes."""


@main.command("gen-corpus")
@click.option("--size", type=int, required=True, help="Number of shapes to generate.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Output JSON Lines file, one shape per line.")
def gen_corpus(size: int, seed: int, out: str):
    """Generate a procedural chair corpus (archetypes round-robin)."""
    if size < 0:
        raise click.BadParameter("size must be >= 0")
    bs.save_corpus(bs.generate_corpus(size, seed), out)
    click.echo(f"wrote {size} shapes to {out}")


@main.command("fit-embedding")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--n-neighbors", type=int, default=50, show_default=True)
@click.option("--min-dist", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=12, show_default=True)
@click.option("--n-epochs", type=int, default=200, show_default=True)
def fit_embedding_cmd(corpus: str, out: str, n_neighbors: int, min_dist: float,
                      seed: int, n_epochs: int):
    """Fit the 2D exploration map and persist the model artifact."""
    shapes = bs.load_corpus(corpus)
    vectors = np.array([bs.flatten(s) for s in shapes])
    params = em.EmbeddingParams(n_neighbors=n_neighbors, min_dist=min_dist,
                                seed=seed, n_epochs=n_epochs)
    model = em.fit_embedding(vectors, params)
    em.save_model(model, out)
    click.echo(f"fitted {len(shapes)} shapes; positions span "
               f"{model.positions.min(axis=0).round(2).tolist()} .. "
               f"{model.positions.max(axis=0).round(2).tolist()}; saved to {out}")


@main.command("export-mesh")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--shape-id", "shape_id", type=str, required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--resolution", type=int, default=bs.DEFAULT_MESH_RESOLUTION, show_default=True)
@click.option("--iso-level", type=float, default=bs.DEFAULT_ISO_LEVEL, show_default=True)
def export_mesh(corpus: str, shape_id: str, out: str, resolution: int, iso_level: float):
    """Extract one corpus shape's isosurface and write a Wavefront OBJ."""
    shapes = {s.id: s for s in bs.load_corpus(corpus)}
    if shape_id not in shapes:
        raise click.ClickException(f"shape {shape_id!r} not found in {corpus}")
    try:
        mesh = bs.extract_mesh(shapes[shape_id], resolution=resolution, iso_level=iso_level)
    except bs.EmptyMeshError as exc:
        raise click.ClickException(str(exc))
    with open(out, "wb") as fh:
        fh.write(bs.export_obj(mesh))
    click.echo(f"wrote {len(mesh.vertices)} vertices / {len(mesh.triangles)} triangles to {out}")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="JSON config: corpus path, embedding path, provider, port.")
@click.option("--host", type=str, default=None, help="Override the configured host.")
@click.option("--port", type=int, default=None, help="Override the configured port.")
def serve(config_path: str, host: str | None, port: int | None):
    """Launch the HTTP service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_file(config_path)
    if host is not None:
        config.host = host
    if port is not None:
        config.port = port
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


def _parse_target(value: str) -> tuple[float, float]:
    try:
        x, y = (float(v) for v in value.split(","))
        return (x, y)
    except ValueError:
        raise click.BadParameter("target must be 'x,y'")


@main.command("simulate")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--rounds", type=int, default=15, show_default=True)
@click.option("--options-per-round", type=int, default=4, show_default=True)
@click.option("--target", type=str, required=True, help="Hidden goodness peak as 'x,y'.")
@click.option("--noise", type=str, default="inf", show_default=True,
              help="Choice sharpness beta; 'inf' means argmax (noiseless).")
@click.option("--seeds", type=int, default=50, show_default=True,
              help="Number of independent synthetic users (seeds 0..K-1).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--plot", type=click.Path(dir_okay=False), default=None,
              help="Optional SVG convergence plot.")
def simulate(corpus: str, model_path: str, rounds: int, options_per_round: int,
             target: str, noise: str, seeds: int, out: str, plot: str | None):
    """Run the synthetic-user ROI-convergence harness and write metrics JSON."""
    shapes = bs.load_corpus(corpus)
    vectors = np.array([bs.flatten(s) for s in shapes])
    model = em.load_model(model_path, vectors)
    beta = math.inf if noise.lower() in ("inf", "none") else float(noise)
    cfg = simmod.SimulationConfig(target=_parse_target(target), rounds=rounds,
                                  options_per_round=options_per_round, noise_beta=beta)
    try:
        metrics = simmod.run_simulation(shapes, model, cfg, seeds=range(seeds))
    except ValueError as exc:
        raise click.ClickException(str(exc))
    simmod.write_metrics(metrics, out)
    if plot:
        simmod.plot_convergence(metrics, plot)
    agg = metrics["aggregate"]
    click.echo(f"success rate {agg['success_rate']:.2f} over {seeds} seeds; "
               f"metrics written to {out}")


if __name__ == "__main__":
    main()
