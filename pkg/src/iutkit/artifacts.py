"""Content-addressed image artifact store.

Layout: <root>/images/<id>.png plus <root>/images/<id>.json sidecar metadata.
The store is append-only; writing the same content twice is a no-op.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

from .errors import TransportError


@dataclass(frozen=True)
class ImageRef:
    id: str
    path: str
    width: int
    height: int
    channels: int = 3

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.channels != 3:
            raise ValueError("only 3-channel images are supported")


def default_artifact_dir() -> Path:
    return Path(os.environ.get("IUT_ARTIFACT_DIR", ".iut-artifacts"))


class ArtifactStore:
    def __init__(self, root: Path | str | None = None):
        self.root = Path(root) if root is not None else default_artifact_dir()
        self.images_dir = self.root / "images"

    def put(self, data: bytes, width: int, height: int, image_id: str | None = None) -> ImageRef:
        image_id = image_id or hashlib.sha256(data).hexdigest()
        self.images_dir.mkdir(parents=True, exist_ok=True)
        path = self.images_dir / f"{image_id}.png"
        if not path.exists():
            path.write_bytes(data)
            ref = ImageRef(image_id, str(path), width, height)
            (self.images_dir / f"{image_id}.json").write_text(json.dumps(asdict(ref), sort_keys=True))
        return ImageRef(image_id, str(path), width, height)

    def get(self, image_id: str) -> ImageRef:
        meta = self.images_dir / f"{image_id}.json"
        if not meta.exists():
            raise TransportError(f"no stored image with id {image_id!r}")
        return ImageRef(**json.loads(meta.read_text()))

    def read_bytes(self, image_id: str) -> bytes:
        path = self.images_dir / f"{image_id}.png"
        if not path.exists():
            raise TransportError(f"no stored image with id {image_id!r}")
        return path.read_bytes()
