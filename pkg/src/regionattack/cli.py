"""Command-line client for the attack service.

The CLI is a thin client: every subcommand builds a JSON request and posts
it to the HTTP service. By default the service runs in-process (no server
needed); pass ``--server http://host:port`` to target a running instance
started with ``regionattack serve``, in which case paths in the request are
interpreted on the server.

Options may also come from a config file of ``key = value`` lines
(``#`` comments allowed, repeatable keys accumulate, dashes and underscores
are interchangeable). Command-line flags override config-file values.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
from click.core import ParameterSource

STANDARD_EPSILONS = ("2/255", "4/255", "8/255", "16/255")


def parse_fraction(text: str) -> float:
    """Parse '8/255' or a plain float literal."""
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def parse_region(text: str) -> dict[str, int]:
    """Parse 'x,y,w,h' into region fields (x=left, y=top)."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 4:
        raise click.BadParameter(f"region must be 'x,y,w,h', got {text!r}")
    x, y, w, h = (int(p) for p in parts)
    return {"top": y, "left": x, "height": h, "width": w}


def load_config_file(path: str | Path) -> dict[str, list[str]]:
    values: dict[str, list[str]] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise click.ClickException(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        values.setdefault(key.strip().replace("-", "_"), []).append(value.strip())
    return values


class ServiceClient:
    """Posts requests either to an in-process app or a remote server."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                # starlette's TestClient import warns about httpx pinning; harmless here
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service.app import app

            self._client = TestClient(app)

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except Exception:
                detail = response.text
            raise click.ClickException(f"{path} failed ({response.status_code}): {detail}")
        return response.json()


class _Resolver:
    """Merges click parameters with config-file values (flags win).

    ``file_key`` is the flag-style name used in the config file when it
    differs from click's parameter name (e.g. flag --gen, parameter
    gen_count, file key "gen").
    """

    def __init__(self, ctx: click.Context, config: str | None):
        self.ctx = ctx
        self.file_values = load_config_file(config) if config else {}

    def get(self, name: str, parse=None, multiple: bool = False, file_key: str | None = None):
        key = file_key or name
        from_flag = self.ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE
        if from_flag or key not in self.file_values:
            return self.ctx.params[name]
        raw = self.file_values[key]
        parse = parse or (lambda v: v)
        if multiple:
            return tuple(parse(v) for v in raw)
        return parse(raw[-1])


def _print_summary(data: dict) -> None:
    for model, per_eps in sorted(data.get("miou_pct", {}).items()):
        for eps, pct in per_eps.items():
            click.echo(f"  mIoU[{model}] @ eps={eps}: {pct:.2f}%")
    click.echo(f"records: {data['records_csv']}")
    click.echo(f"summary: {data['summary_csv']}")
    click.echo(f"report:  {data['report_json']}")


def _finish_cells(data: dict) -> None:
    failed = data.get("failed_cells", 0)
    if failed:
        for err in data.get("errors", []):
            click.echo(f"error [{err['image_id']}/{err['cell']}]: {err['error']}", err=True)
        raise SystemExit(1)


@click.group()
def main():
    """Region-level adversarial attacks on promptable segmenters."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("regionattack.service.app:app", host=host, port=port)


def _common_options(fn):
    decorators = [
        click.option("--config", type=click.Path(exists=True), default=None, help="key = value config file"),
        click.option("--server", default=None, help="remote service URL (default: in-process)"),
        click.option("--corpus", default=None, help="existing corpus directory"),
        click.option("--gen", "gen_count", default=20, show_default=True, type=int, help="synthesize N images when no corpus is given"),
        click.option("--height", default=64, show_default=True, type=int),
        click.option("--width", default=64, show_default=True, type=int),
        click.option("--attack", type=click.Choice(["point", "s_ra", "t_ra"]), default="s_ra", show_default=True),
        click.option("--epsilon", "epsilons", multiple=True, default=STANDARD_EPSILONS, show_default=True, help="repeatable; accepts '8/255' or floats"),
        click.option("--rho", "rhos", multiple=True, default=("0.1",), show_default=True),
        click.option("--lambda", "lams", multiple=True, default=("7",), show_default=True, help="attack grid spacing in pixels"),
        click.option("--sigma", default=None, help="spectrum noise std (default: epsilon)"),
        click.option("--steps", default=None, type=int, help="PGD steps (default 40 white-box / 10 transferable)"),
        click.option("--samples", default=20, show_default=True, type=int),
        click.option("--alpha", default="2/255", show_default=True),
        click.option("--neg-th", "neg_th", default=-10.0, show_default=True, type=float),
        click.option("--region", default=None, help="explicit attack region 'x,y,w,h' for every image"),
        click.option("--source-model", default="toy", show_default=True),
        click.option("--eval-model", "eval_models", multiple=True, default=("toy",), show_default=True),
        click.option("--seed", default=0, show_default=True, type=int),
        click.option("--workers", default=1, show_default=True, type=int),
        click.option("--out", required=True, help="output directory (on the server when --server is used)"),
    ]
    for dec in reversed(decorators):
        fn = dec(fn)
    return fn


def _sweep_payload(ctx: click.Context) -> tuple[dict, str | None]:
    r = _Resolver(ctx, ctx.params["config"])
    region = r.get("region")
    payload = {
        "out_dir": r.get("out"),
        "corpus_dir": r.get("corpus"),
        "gen_count": int(r.get("gen_count", parse=int, file_key="gen")),
        "height": int(r.get("height", parse=int)),
        "width": int(r.get("width", parse=int)),
        "attack": r.get("attack"),
        "epsilons": [parse_fraction(e) for e in r.get("epsilons", multiple=True, file_key="epsilon")],
        "rhos": [float(v) for v in r.get("rhos", multiple=True, file_key="rho")],
        "lams": [int(v) for v in r.get("lams", multiple=True, file_key="lambda")],
        "alpha": parse_fraction(r.get("alpha")),
        "steps": r.get("steps", parse=int),
        "samples": int(r.get("samples", parse=int)),
        "sigma": None if r.get("sigma") in (None, "") else parse_fraction(r.get("sigma")),
        "neg_th": float(r.get("neg_th", parse=float)),
        "region": parse_region(region) if region else None,
        "source_model": r.get("source_model"),
        "eval_models": list(r.get("eval_models", multiple=True, file_key="eval_model")),
        "seed": int(r.get("seed", parse=int)),
        "workers": int(r.get("workers", parse=int)),
    }
    return payload, r.get("server")


@main.command("gen-corpus")
@click.option("--n", default=20, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--height", default=64, show_default=True, type=int)
@click.option("--width", default=64, show_default=True, type=int)
@click.option("--region-frac", default=1.0 / 3.0, show_default=True, type=float)
@click.option("--server", default=None)
@click.option("--out", required=True)
def gen_corpus(n, seed, height, width, region_frac, server, out):
    """Generate a synthetic corpus with recorded attack regions."""
    client = ServiceClient(server)
    data = client.post(
        "/corpus/generate",
        {"out_dir": out, "n": n, "seed": seed, "height": height, "width": width, "region_frac": region_frac},
    )
    click.echo(f"wrote {len(data['images'])} images to {data['corpus_dir']}")


@main.command()
@_common_options
@click.pass_context
def attack(ctx, **_kwargs):
    """Compute adversarial bundles (no evaluation)."""
    payload, server = _sweep_payload(ctx)
    data = ServiceClient(server).post("/attack/run", payload)
    click.echo(f"bundles under {data['out_dir']}/bundles ({data['completed_cells']} cells)")
    _finish_cells(data)


@main.command()
@click.option("--bundles", required=True, help="directory holding bundles/ from a previous run")
@click.option("--eval-model", "eval_models", multiple=True, required=True)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--server", default=None)
@click.option("--out", default=None, help="records CSV path (default: <bundles>/eval_records.csv)")
def evaluate(bundles, eval_models, seed, server, out):
    """Evaluate stored adversarial bundles on one or more models."""
    client = ServiceClient(server)
    data = client.post(
        "/evaluate/run",
        {"out_dir": bundles, "eval_models": list(eval_models), "seed": seed, "csv_path": out},
    )
    for model, pct in sorted(data["miou_pct"].items()):
        click.echo(f"  mIoU[{model}]: {pct:.2f}%")
    click.echo(f"records: {data['csv_path']}")
    if data["errors"]:
        for err in data["errors"]:
            click.echo(f"error [{err['bundle']}]: {err['error']}", err=True)
        raise SystemExit(1)


@main.command()
@_common_options
@click.pass_context
def sweep(ctx, **_kwargs):
    """Attack + evaluate across the epsilon/rho/lambda grid."""
    payload, server = _sweep_payload(ctx)
    data = ServiceClient(server).post("/sweep/run", payload)
    _print_summary(data)
    _finish_cells(data)


if __name__ == "__main__":
    sys.exit(main())
