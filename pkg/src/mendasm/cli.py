"""Command-line front door: a thin client over the engine service.

Without --server the service app is mounted in-process, so batch runs need
no separate daemon; with --server URL the same requests go over the network.
"""

from __future__ import annotations

import base64
import json
import sys
from pathlib import Path

import click
import httpx

from .classify import CLASSIFIER_URL_ENV
from .config import Config, load_config

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class EngineClientError(RuntimeError):
    pass


class _InProcessTransport(httpx.BaseTransport):
    """Runs the ASGI app synchronously so the CLI needs no daemon."""

    def __init__(self, app):
        self._inner = httpx.ASGITransport(app=app)

    def handle_request(self, request):
        import asyncio

        async def roundtrip():
            response = await self._inner.handle_async_request(request)
            content = await response.aread()
            await response.aclose()
            return response.status_code, response.headers, content

        status, headers, content = asyncio.run(roundtrip())
        return httpx.Response(status_code=status, headers=headers,
                              content=content, request=request)


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=300.0)
    from .service.app import app

    return httpx.Client(transport=_InProcessTransport(app),
                        base_url="http://engine", timeout=300.0)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    try:
        response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        raise EngineClientError(f"engine unreachable: {exc}") from exc
    if response.status_code != 200:
        detail = response.text
        try:
            detail = response.json().get("detail", detail)
        except ValueError:
            pass
        raise EngineClientError(f"engine error ({response.status_code}): {detail}")
    return response.json()


def _read_meta(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise EngineClientError(f"cannot read metadata {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise EngineClientError(f"bad metadata {path}: {exc}") from exc


def _read_code(path: str) -> str:
    try:
        return base64.b64encode(Path(path).read_bytes()).decode()
    except OSError as exc:
        raise EngineClientError(f"cannot read input {path}: {exc}") from exc


def _parse_classifier(spec: str, endpoint: str | None, seed: int) -> dict:
    if spec.startswith("noisy:"):
        try:
            epsilon = float(spec.split(":", 1)[1])
        except ValueError as exc:
            raise click.UsageError(f"bad noisy epsilon in {spec!r}") from exc
        return {"kind": "noisy", "epsilon": epsilon, "seed": seed}
    if spec == "noisy":
        return {"kind": "noisy", "epsilon": 0.0, "seed": seed}
    if spec in ("oracle", "heuristic"):
        return {"kind": spec, "seed": seed}
    if spec == "remote":
        return {"kind": "remote", "endpoint": endpoint}
    raise click.UsageError(
        f"unknown classifier {spec!r} (oracle, noisy[:eps], heuristic, remote)")


@click.group()
def cli():
    """Obfuscation-resilient x86-64 disassembly engine."""


@cli.command()
@click.option("--input", "input_path", required=True, help="raw code bytes")
@click.option("--meta", "meta_path", required=True, help="sample metadata JSON")
@click.option("--classifier", default="heuristic", show_default=True,
              help="oracle | noisy[:eps] | heuristic | remote")
@click.option("--endpoint", default=None,
              help=f"remote classifier URL (or ${CLASSIFIER_URL_ENV})")
@click.option("--out", "out_path", default=None, help="JSON listing output")
@click.option("--text-out", "text_path", default=None, help="text listing output")
@click.option("--dump-graph", "graph_path", default=None,
              help="write the disassembly graph JSON here")
@click.option("--config", "config_path", default=None,
              help="key=value config file")
@click.option("--print-config", is_flag=True, help="echo the effective config")
@click.option("--seed", default=0, show_default=True)
@click.option("--batch-size", default=None, type=int)
@click.option("--prefilter-window", default=None, type=int)
@click.option("--bfs-limit", default=None, type=int)
@click.option("--server", default=None, help="engine service URL")
def disasm(input_path, meta_path, classifier, endpoint, out_path, text_path,
           graph_path, config_path, print_config, seed, batch_size,
           prefilter_window, bfs_limit, server):
    """Disassemble one code region and emit the repaired listing."""
    config = load_config(config_path, seed=seed, batch_size=batch_size,
                         prefilter_window=prefilter_window,
                         bfs_limit=bfs_limit)
    if print_config:
        for key, value in config.as_dict().items():
            click.echo(f"{key} = {value}")
        return
    payload = {
        "code_b64": _read_code(input_path),
        "meta": _read_meta(meta_path),
        "classifier": _parse_classifier(classifier, endpoint, seed),
        "config": {k: v for k, v in config.as_dict().items()},
        "dump_graph": graph_path is not None,
    }
    with _client(server) as client:
        body = _post(client, "/v1/disassemble", payload)
    listing_doc = {
        "instructions": body["instructions"],
        "data_bytes": body["data_bytes"],
    }
    if body.get("overlapping_valid_pairs"):
        listing_doc["overlapping_valid_pairs"] = body["overlapping_valid_pairs"]
    if out_path:
        Path(out_path).write_text(json.dumps(listing_doc, indent=1) + "\n")
    if text_path:
        Path(text_path).write_text(body["text"])
    if graph_path and body.get("graph") is not None:
        Path(graph_path).write_text(json.dumps(body["graph"], indent=1) + "\n")
    if not out_path and not text_path:
        click.echo(body["text"], nl=False)
    click.echo(
        f"disassembled {len(body['instructions'])} instructions, "
        f"{len(body['data_bytes'])} data bytes", err=True)


@cli.command()
@click.option("--seed", default=0, show_default=True)
@click.option("--blocks", default=50, show_default=True)
@click.option("--junk-max", default=15, show_default=True)
@click.option("--junk-prob", default=0.6, show_default=True)
@click.option("--bogus-prob", default=0.5, show_default=True)
@click.option("--count", default=1, show_default=True)
@click.option("--out-dir", required=True)
@click.option("--stub-bundle", is_flag=True,
              help="also write <name>.stub.json decode tables")
@click.option("--server", default=None, help="engine service URL")
def gen(seed, blocks, junk_max, junk_prob, bogus_prob, count, out_dir,
        stub_bundle, server):
    """Generate obfuscated samples with ground truth."""
    payload = {"seed": seed, "count": count, "blocks": blocks,
               "junk_max": junk_max, "junk_prob": junk_prob,
               "bogus_jump_prob": bogus_prob}
    with _client(server) as client:
        body = _post(client, "/v1/generate", payload)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for sample in body["samples"]:
        data = base64.b64decode(sample["code_b64"])
        (out / f"{sample['name']}.bin").write_bytes(data)
        (out / f"{sample['name']}.json").write_text(
            json.dumps(sample["meta"], indent=1) + "\n")
        if stub_bundle:
            from .corpus import load_sample, write_stub_bundle

            region, truth = load_sample(out / f"{sample['name']}.bin",
                                        out / f"{sample['name']}.json")
            write_stub_bundle(out / f"{sample['name']}.stub.json", region, truth)
    click.echo(f"wrote {len(body['samples'])} sample(s) to {out}", err=True)


@cli.command()
@click.option("--pred", "pred_path", required=True,
              help="prediction file, one hex address per line")
@click.option("--input", "input_path", required=True)
@click.option("--meta", "meta_path", required=True)
@click.option("--csv", "csv_path", default=None)
@click.option("--server", default=None, help="engine service URL")
def score(pred_path, input_path, meta_path, csv_path, server):
    """Score a prediction address list against ground truth."""
    try:
        lines = Path(pred_path).read_text().split()
    except OSError as exc:
        raise EngineClientError(f"cannot read predictions: {exc}") from exc
    try:
        addresses = [int(token, 16) for token in lines]
    except ValueError as exc:
        raise EngineClientError(f"bad prediction address: {exc}") from exc
    payload = {
        "code_b64": _read_code(input_path),
        "meta": _read_meta(meta_path),
        "predicted_addresses": addresses,
    }
    with _client(server) as client:
        body = _post(client, "/v1/score", payload)
    click.echo(body["table"], nl=False)
    if csv_path:
        Path(csv_path).write_text(body["csv"])


@cli.command("emit-dataset")
@click.option("--format", "fmt", type=click.Choice(["mntp", "supervised"]),
              required=True)
@click.option("--input", "input_path", required=True)
@click.option("--meta", "meta_path", required=True)
@click.option("--out", "out_path", required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--server", default=None, help="engine service URL")
def emit_dataset(fmt, input_path, meta_path, out_path, seed, server):
    """Emit a fine-tuning (mntp) or token-classification (supervised) dataset."""
    payload = {
        "code_b64": _read_code(input_path),
        "meta": _read_meta(meta_path),
        "format": fmt,
        "seed": seed,
    }
    with _client(server) as client:
        body = _post(client, "/v1/emit-dataset", payload)
    if fmt == "mntp":
        Path(out_path).write_text(body["text"])
    else:
        with Path(out_path).open("w", encoding="utf-8") as fh:
            for entry in body["entries"]:
                fh.write(json.dumps(entry) + "\n")
    click.echo(f"wrote {out_path}", err=True)


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8300, show_default=True)
def serve(host, port):
    """Run the engine service."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


def main() -> int:
    try:
        cli(standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except (EngineClientError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_RUNTIME
    except click.Abort:
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
