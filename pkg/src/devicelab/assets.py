"""Content-addressed storage for evidence files (PDFs, images, videos,
page snapshots). Bytes are keyed by their sha256 digest, so storing the
same file twice is a no-op and references can never dangle silently.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

from .errors import NotFoundError, StateError, ValidationError

MAX_ASSET_MB_DEFAULT = 50

# Exact types plus the image/* family. Anything else is refused up front.
_ALLOWED_EXACT = {"application/pdf", "video/mp4", "video/webm", "text/html"}
_ALLOWED_PREFIXES = ("image/",)


def media_type_allowed(media_type: str) -> bool:
    base = media_type.split(";", 1)[0].strip().lower()
    if not base:
        return False
    return base in _ALLOWED_EXACT or base.startswith(_ALLOWED_PREFIXES)


def check_asset_policy(data: bytes, media_type: str, max_bytes: int) -> None:
    if not media_type_allowed(media_type):
        raise ValidationError(
            f"media type {media_type!r} is not accepted",
            code="unsupported-media",
            details={"media_type": media_type},
        )
    if len(data) > max_bytes:
        raise ValidationError(
            f"asset of {len(data)} bytes exceeds the {max_bytes} byte limit",
            code="oversize-asset",
            details={"size_bytes": len(data), "max_bytes": max_bytes},
        )


class AssetStore:
    """Blob store, directory-backed when given a path, in-memory otherwise.

    Bytes are append-only: content addressing makes deletion unnecessary and
    keeps old evidence resolvable after an import.
    """

    def __init__(self, directory: Path | None = None) -> None:
        self._directory = directory
        self._blobs: dict[str, bytes] = {}
        if directory is not None:
            directory.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes) -> str:
        content_hash = hashlib.sha256(data).hexdigest()
        if self._directory is None:
            self._blobs.setdefault(content_hash, data)
            return content_hash
        target = self._directory / content_hash
        if not target.exists():
            fd, tmp = tempfile.mkstemp(dir=self._directory, prefix=".incoming-")
            try:
                with os.fdopen(fd, "wb") as handle:
                    handle.write(data)
                os.replace(tmp, target)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        return content_hash

    def get(self, content_hash: str) -> bytes:
        data = self._read(content_hash)
        actual = hashlib.sha256(data).hexdigest()
        if actual != content_hash:
            raise StateError(
                f"stored bytes for {content_hash} no longer match their hash",
                code="corrupt-asset",
                details={"content_hash": content_hash, "actual": actual},
            )
        return data

    def _read(self, content_hash: str) -> bytes:
        if self._directory is None:
            if content_hash not in self._blobs:
                raise NotFoundError(
                    f"no asset with hash {content_hash}",
                    details={"content_hash": content_hash},
                )
            return self._blobs[content_hash]
        target = self._directory / content_hash
        if not target.is_file():
            raise NotFoundError(
                f"no asset with hash {content_hash}",
                details={"content_hash": content_hash},
            )
        return target.read_bytes()

    def __contains__(self, content_hash: str) -> bool:
        if self._directory is None:
            return content_hash in self._blobs
        return (self._directory / content_hash).is_file()

    def hashes(self) -> list[str]:
        if self._directory is None:
            return sorted(self._blobs)
        return sorted(p.name for p in self._directory.iterdir() if p.is_file())
