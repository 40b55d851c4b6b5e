"""Output directory session: every file written through the store is digested
and listed in manifest.json; a failed run rolls its files back."""

import hashlib
import json
from pathlib import Path
from typing import List, Optional, Union

from loguru import logger
from pydantic import BaseModel

from backscatter_sim.core.config import settings
from backscatter_sim.core.errors import ArtifactIOError, ExitStatus
from backscatter_sim.schemas.config import RunConfig
from backscatter_sim.schemas.results import ArtifactEntry, Manifest

MANIFEST_NAME = "manifest.json"


class ArtifactStore:
    def __init__(self, config: RunConfig, root: Optional[Union[str, Path]] = None):
        self.config = config
        self.root = Path(root) if root is not None else Path(config.output_dir)
        self.status = ExitStatus.OK
        self.entries: List[ArtifactEntry] = []
        self._written: List[Path] = []

    def __enter__(self) -> "ArtifactStore":
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactIOError(f"cannot create output directory {self.root}: {e}", str(self.root))
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is not None:
            self.rollback()
            return False
        try:
            self._write_manifest()
        except ArtifactIOError:
            self.rollback()
            raise
        logger.info(f"Wrote {len(self.entries)} artifacts and the manifest to {self.root}")
        return False

    def _write_bytes(self, relative: str, payload: bytes) -> Path:
        path = self.root / relative
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(payload)
        except OSError as e:
            raise ArtifactIOError(f"cannot write {path}: {e}", str(path))
        return path

    def write_text(self, relative: str, text: str) -> Path:
        payload = text.encode("utf-8")
        path = self._write_bytes(relative, payload)
        self._written.append(path)
        self.entries.append(
            ArtifactEntry(path=Path(relative).as_posix(), sha256=hashlib.sha256(payload).hexdigest(), size=len(payload))
        )
        logger.debug(f"Artifact written: {path}")
        return path

    def write_json(self, relative: str, payload: Union[BaseModel, dict, list]) -> Path:
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="json")
        return self.write_text(relative, json.dumps(payload, indent=2, sort_keys=True) + "\n")

    def rollback(self):
        for path in reversed(self._written):
            try:
                path.unlink()
            except FileNotFoundError:
                pass
            except OSError as e:
                logger.error(f"Rollback could not remove {path}: {e}")
        if self._written:
            logger.warning(f"Rolled back {len(self._written)} artifacts in {self.root}")
        self._written.clear()
        self.entries.clear()

    def _write_manifest(self):
        manifest = Manifest(
            app_name=settings.app_name,
            version=settings.version,
            mode=self.config.mode.value,
            seed=self.config.seed,
            status=int(self.status),
            artifacts=self.entries,
        )
        text = json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
        self._write_bytes(MANIFEST_NAME, text.encode("utf-8"))
