"""Operator command line: ingest, serve, query, and corpus maintenance.

Exit codes are stable for scripting:

* 0: success
* 1: usage or configuration problem
* 2: data integrity problem (corrupt shard, failed rows under --strict, ...)
* 3: an upstream service (embedder, LLM) was unreachable

Option values resolve as flags > environment (``RAS_*``) > ``--config``
JSON file > built-in defaults.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict
from pathlib import Path

import click
import uvicorn

from .errors import (
    ConfigError,
    DimensionError,
    DuplicateDocument,
    IngestLockError,
    IntegrityError,
    InvalidArgument,
    InvalidEmbedding,
    InvalidImage,
    ManifestError,
    NotFound,
    UpstreamUnavailable,
)
from .gateway import HttpEmbedderClient, MockEmbedder
from .ingest import BATCH_SIZE, SUB_BATCH, run_ingest
from .results import build_results
from .scoring import DEFAULT_K, top_k
from .service import ServiceConfig, create_app
from .store import compact, inspect_shard, load_all, verify
from .summarize import OpenAiChatClient

log = logging.getLogger(__name__)

_INTEGRITY_ERRORS = (
    IntegrityError,
    ManifestError,
    IngestLockError,
    DuplicateDocument,
    DimensionError,
    NotFound,
)
_USAGE_ERRORS = (ConfigError, InvalidArgument, InvalidImage, InvalidEmbedding)


def _make_embedder(mock_mode: bool, embedder_url: str | None):
    """Mock unless an embedder URL is given; asking for both is a mistake."""
    if mock_mode and embedder_url:
        raise ConfigError("--mock and --embedder-url are mutually exclusive")
    if embedder_url:
        return HttpEmbedderClient(embedder_url)
    return MockEmbedder()


@click.group(name="ras")
@click.option(
    "--config",
    "config_path",
    envvar="RAS_CONFIG",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON file providing option defaults (flags and env win).",
)
@click.option(
    "--log-level",
    envvar="RAS_LOG_LEVEL",
    default="info",
    show_default=True,
    type=click.Choice(["debug", "info", "warning", "error"], case_sensitive=False),
)
@click.pass_context
def cli(ctx, config_path, log_level):
    """Late-interaction image search: ingest, serve, query, maintain."""
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            defaults = json.load(fh)
        if not isinstance(defaults, dict):
            raise ConfigError(f"{config_path}: config file must hold a JSON object")
        ctx.default_map = {
            "ingest": defaults,
            "serve": defaults,
            "query": defaults,
            "shard": {"inspect": defaults},
            "corpus": {"verify": defaults, "compact": defaults},
        }


@cli.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", "corpus_dir", required=True, envvar="RAS_CORPUS_DIR",
              type=click.Path(file_okay=False))
@click.option("--embedder-url", envvar="RAS_EMBEDDER_URL", default=None)
@click.option("--mock", "mock_mode", is_flag=True, envvar="RAS_MOCK_MODE")
@click.option("--batch-size", default=BATCH_SIZE, show_default=True, type=int)
@click.option("--sub-batch", default=SUB_BATCH, show_default=True, type=int)
@click.option("--iiif-base", envvar="RAS_IIIF_BASE", default=None,
              help="Base URL for bare IIIF identifiers in the manifest.")
@click.option("--reset", is_flag=True, help="Discard checkpoint progress and start over.")
@click.option("--strict", is_flag=True, help="Exit 2 if any row failed.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def ingest(ctx, manifest, corpus_dir, embedder_url, mock_mode, batch_size, sub_batch,
           iiif_base, reset, strict, as_json):
    """Fetch, embed, and shard every document in MANIFEST (resumable)."""
    embedder = _make_embedder(mock_mode, embedder_url)
    report = run_ingest(
        manifest, corpus_dir, embedder,
        batch_size=batch_size, sub_batch=sub_batch, reset=reset, iiif_base=iiif_base,
    )
    if as_json:
        click.echo(json.dumps(asdict(report), sort_keys=True))
    else:
        click.echo(
            f"{report.embedded_now} embedded, {len(report.failed)} failed, "
            f"{report.batches_run}/{report.batches_total} batch(es) run "
            f"({report.batches_skipped} already done)"
        )
        for doc_id, reason in sorted(report.failed.items()):
            click.echo(f"  failed {doc_id}: {reason}", err=True)
    if strict and report.failed:
        ctx.exit(2)


@cli.command()
@click.option("--corpus", "corpus_dir", required=True, envvar="RAS_CORPUS_DIR",
              type=click.Path(file_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--embedder-url", envvar="RAS_EMBEDDER_URL", default=None)
@click.option("--mock", "mock_mode", is_flag=True, envvar="RAS_MOCK_MODE")
@click.option("--llm-url", envvar="RAS_LLM_URL", default=None)
@click.option("--llm-model", envvar="RAS_LLM_MODEL", default=None)
@click.option("--llm-api-key", envvar="RAS_LLM_API_KEY", default=None)
@click.option("--cors-origin", "cors_origins", multiple=True,
              help="Allowed browser origin; repeatable.")
@click.option("--auth-token", envvar="RAS_AUTH_TOKEN", default="",
              help="Require this bearer token on corpus mutations.")
@click.option("--workers", "scan_workers", type=int, default=None,
              help="Thread count for the scoring scan.")
@click.option("--skip-corrupt", is_flag=True,
              help="Serve past corrupt shards instead of aborting.")
def serve(corpus_dir, host, port, embedder_url, mock_mode, llm_url, llm_model,
          llm_api_key, cors_origins, auth_token, scan_workers, skip_corrupt):
    """Load the corpus and serve the HTTP search API."""
    embedder = _make_embedder(mock_mode, embedder_url)
    llm = None
    if llm_url:
        if not llm_model:
            raise ConfigError("--llm-model is required alongside --llm-url")
        llm = OpenAiChatClient(llm_url, llm_model, api_key=llm_api_key)
    config = ServiceConfig(
        corpus_dir=corpus_dir,
        embedder=embedder,
        llm=llm,
        cors_origins=tuple(cors_origins),
        auth_token=auth_token,
        scan_workers=scan_workers,
        skip_corrupt=skip_corrupt,
    )
    app = create_app(config)
    snap = app.state.engine.registry.snapshot()
    click.echo(f"serving {snap.size} document(s), dim={snap.dim}, at http://{host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="info")


@cli.command()
@click.option("--corpus", "corpus_dir", required=True, envvar="RAS_CORPUS_DIR",
              type=click.Path(file_okay=False))
@click.option("--text", required=True, help="Natural-language query.")
@click.option("-k", "k", default=DEFAULT_K, show_default=True, type=int)
@click.option("--embedder-url", envvar="RAS_EMBEDDER_URL", default=None)
@click.option("--mock", "mock_mode", is_flag=True, envvar="RAS_MOCK_MODE")
@click.option("--json", "as_json", is_flag=True)
def query(corpus_dir, text, k, embedder_url, mock_mode, as_json):
    """Search the corpus directly, no server needed."""
    embedder = _make_embedder(mock_mode, embedder_url)
    snapshot = load_all(corpus_dir)
    matrix = embedder.embed_text(text)
    scores = snapshot.scores(matrix)
    hits = top_k(zip((d.doc_id for d in snapshot.docs), scores.tolist()), k)
    results = build_results(hits, snapshot.meta)
    if as_json:
        click.echo(json.dumps(
            {"results": [r.to_dict() for r in results], "corpus_epoch": snapshot.epoch}
        ))
        return
    if not results:
        click.echo("no results")
        return
    for r in results:
        title = r.title or "(untitled)"
        click.echo(f"{r.rank:3d}. {r.score:10.4f}  {r.doc_id}  {title}")


@cli.group()
def shard():
    """Shard file utilities."""


@shard.command("inspect")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True)
def shard_inspect(file, as_json):
    """Verify FILE's checksum and print its layout."""
    info = inspect_shard(file)
    if as_json:
        payload = asdict(info)
        payload["path"] = str(info.path)
        payload["doc_ids"] = list(info.doc_ids)
        click.echo(json.dumps(payload, sort_keys=True))
        return
    flags = [name for name, on in (("normalized", info.normalized), ("f16", info.f16)) if on]
    click.echo(
        f"{info.path}: {info.count} document(s), dim={info.dim}, "
        f"flags=[{', '.join(flags) or 'none'}], {info.size_bytes} bytes"
    )


@cli.group()
def corpus():
    """Corpus directory maintenance."""


@corpus.command("verify")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def corpus_verify(ctx, directory, as_json):
    """Check every shard and the metadata table; exit 2 on any issue."""
    report = verify(directory)
    if as_json:
        click.echo(json.dumps(
            {
                "ok": report.ok,
                "shards": report.shards,
                "documents": report.documents,
                "issues": [asdict(i) for i in report.issues],
            },
            sort_keys=True,
        ))
    else:
        click.echo(f"{report.shards} shard(s), {report.documents} document(s)")
        for issue in report.issues:
            where = f" [{issue.path}]" if issue.path else ""
            click.echo(f"  {issue.kind}: {issue.detail}{where}", err=True)
        if report.ok:
            click.echo("ok")
    if not report.ok:
        ctx.exit(2)


@corpus.command("compact")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--tombstones", "tombstone_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="File of doc ids to drop, one per line.")
@click.option("--json", "as_json", is_flag=True)
def corpus_compact(directory, tombstone_file, as_json):
    """Merge all shards into one, dropping duplicates and tombstoned ids."""
    remove_ids: list[str] = []
    if tombstone_file:
        for line in Path(tombstone_file).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                remove_ids.append(line)
    result = compact(directory, remove_ids=remove_ids)
    if as_json:
        click.echo(json.dumps(
            {
                "shard_path": str(result.shard_path) if result.shard_path else None,
                "kept": result.kept,
                "removed": result.removed,
                "duplicates_dropped": result.duplicates_dropped,
            },
            sort_keys=True,
        ))
    else:
        click.echo(
            f"kept {result.kept}, removed {result.removed}, "
            f"dropped {result.duplicates_dropped} duplicate(s)"
        )


def main(argv=None) -> int:
    """Console entry point; maps failures onto the documented exit codes."""
    try:
        # click returns the Exit code here instead of raising when not standalone
        rv = cli.main(args=argv, prog_name="ras", standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except _INTEGRITY_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except UpstreamUnavailable as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except _USAGE_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
