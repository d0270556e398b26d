"""Operator command line: run the service, seed fixtures, issue tokens, and
move interchange documents in and out.

Every command exits 0 on success and 1 with a one-line error on expected
failures; stack traces are reserved for actual bugs.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys
from pathlib import Path
from typing import Sequence

from .api import create_app
from .errors import DomainError
from .service import Service


def _env_int(name: str, fallback: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        return fallback


def _env_str(name: str, fallback: str) -> str:
    return os.environ.get(name) or fallback


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="devicelab",
        description="crowd-built product profiles: investigate, merge, compare",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_dir(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--data-dir",
            default=_env_str("DATA_DIR", "./data"),
            help="state directory (env DATA_DIR, default ./data)",
        )

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument(
        "--port",
        type=int,
        default=_env_int("PORT", 8080),
        help="listen port (env PORT, default 8080)",
    )
    serve.add_argument("--host", default="127.0.0.1", help="bind address")
    serve.add_argument(
        "--max-asset-mb",
        type=int,
        default=_env_int("MAX_ASSET_MB", 50),
        help="asset size limit in MiB (env MAX_ASSET_MB, default 50)",
    )
    add_data_dir(serve)
    serve.set_defaults(func=_cmd_serve)

    seed = sub.add_parser("seed", help="replace state with a fixture document")
    seed.add_argument("fixture", help="path to an interchange document")
    seed.add_argument("--assets", help="directory of asset blobs named by hash")
    add_data_dir(seed)
    seed.set_defaults(func=_cmd_seed)

    token = sub.add_parser("token", help="create a user (if new) and print a bearer token")
    token.add_argument("display_name", help="user display name")
    token.add_argument("roles", help="comma-separated roles (crowd_worker,admin,student)")
    add_data_dir(token)
    token.set_defaults(func=_cmd_token)

    export = sub.add_parser("export", help="write the interchange document")
    export.add_argument("--out", help="output file (default stdout)")
    export.add_argument("--assets", help="directory to copy asset blobs into")
    add_data_dir(export)
    export.set_defaults(func=_cmd_export)

    imp = sub.add_parser("import", help="load an interchange document")
    imp.add_argument("document", help="path to an interchange document")
    imp.add_argument(
        "--mode",
        choices=("replace", "fail_on_conflict"),
        default="fail_on_conflict",
        help="replace wipes state first; fail_on_conflict rejects collisions",
    )
    imp.add_argument("--assets", help="directory of asset blobs named by hash")
    add_data_dir(imp)
    imp.set_defaults(func=_cmd_import)

    return parser


def _writable_dir(path: str) -> Path:
    directory = Path(path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        probe = directory / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise SystemExit(f"error: cannot write to {directory}: {exc.strerror}")
    return directory


def _service(args: argparse.Namespace, *, seed: bool = True) -> Service:
    directory = _writable_dir(args.data_dir)
    max_mb = getattr(args, "max_asset_mb", None)
    kwargs = {"seed": seed}
    if max_mb is not None:
        kwargs["max_asset_mb"] = max_mb
    return Service(directory, **kwargs)


def _load_document(path: str) -> dict:
    try:
        text = Path(path).read_text("utf-8")
    except FileNotFoundError:
        raise SystemExit(f"error: no such file: {path}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SystemExit(f"error: {path} is not valid JSON: {exc}")


def _load_sidecar(directory: str | None, doc: dict) -> dict[str, bytes]:
    if not directory:
        return {}
    base = Path(directory)
    blobs: dict[str, bytes] = {}
    for entry in doc.get("asset_manifest", []):
        content_hash = entry.get("content_hash", "") if isinstance(entry, dict) else ""
        blob = base / content_hash
        if content_hash and blob.is_file():
            blobs[content_hash] = blob.read_bytes()
    return blobs


def _print_summary(counts: dict[str, int]) -> None:
    print(", ".join(f"{name}: {count}" for name, count in counts.items()))


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    try:
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
            probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            probe.bind((args.host, args.port))
    except OSError:
        print(f"error: port {args.port} on {args.host} is in use", file=sys.stderr)
        return 1

    service = _service(args)
    app = create_app(service)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_seed(args: argparse.Namespace) -> int:
    doc = _load_document(args.fixture)
    service = _service(args)
    counts = service.import_document(doc, "replace", _load_sidecar(args.assets, doc))
    _print_summary(counts)
    return 0


def _cmd_token(args: argparse.Namespace) -> int:
    roles = [part.strip() for part in args.roles.split(",") if part.strip()]
    try:
        token, user = _service(args).issue_token(args.display_name, roles)
    except ValueError:
        print(
            "error: unknown role (choose from crowd_worker, admin, student)",
            file=sys.stderr,
        )
        return 1
    print(token)
    print(f"user: {user.id} roles: {','.join(sorted(r.value for r in user.roles))}", file=sys.stderr)
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    service = _service(args, seed=False)
    text = service.export_text()
    if args.out:
        Path(args.out).write_text(text, "utf-8")
    else:
        sys.stdout.write(text)
    if args.assets:
        target = _writable_dir(args.assets)
        for entry in service.export_document()["asset_manifest"]:
            content_hash = entry["content_hash"]
            (target / content_hash).write_bytes(service.asset_bytes(content_hash))
    return 0


def _cmd_import(args: argparse.Namespace) -> int:
    doc = _load_document(args.document)
    service = _service(args)
    counts = service.import_document(doc, args.mode, _load_sidecar(args.assets, doc))
    _print_summary(counts)
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
