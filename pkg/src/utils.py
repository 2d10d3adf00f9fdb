import hashlib
import json
import os
import re
import time
from datetime import datetime, timezone
from email.utils import format_datetime
from typing import Any, Optional


def ensure_dir(path: str):
    if path and not os.path.exists(path):
        os.makedirs(path, exist_ok=True)


def save_json(data: Any, path: str):
    """Utility function to save JSON data to a specified path, creating folders as needed."""
    ensure_dir(os.path.dirname(path))
    with open(path, "w", encoding="utf-8") as f:
        f.write(canonical_json(data))


def save_bytes(content: bytes, path: str):
    ensure_dir(os.path.dirname(path))
    with open(path, "wb") as f:
        f.write(content)


def load_json_file(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def canonical_json(data: Any) -> str:
    """Stable JSON text: fixed indentation, insertion-ordered keys, trailing newline."""
    return json.dumps(data, ensure_ascii=False, indent=2) + "\n"


def normalize_media_type(media_type: Optional[str]) -> Optional[str]:
    """
    Lowercase a media type and strip its parameters.

    "Application/JSON; charset=UTF-8" -> "application/json"
    """
    if not media_type:
        return None
    base = media_type.split(";", 1)[0].strip().lower()
    return base or None


def sha256_digest(content: bytes) -> str:
    return "sha256:" + hashlib.sha256(content).hexdigest()


def slugify(text: str) -> str:
    """Turn an endpoint template such as /pet/{petId} into a file-name-safe slug (pet-petId)."""
    slug = re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-")
    return slug or "root"


def status_class(code: int) -> int:
    return code // 100


# ----------------------------------------------------------
# Clocks
# ----------------------------------------------------------
class SystemClock:
    fixed = False

    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def monotonic(self) -> float:
        return time.monotonic()


class FixedClock:
    """Clock for reproducible bundles: wall time never advances."""

    fixed = True

    def __init__(self, instant: Optional[datetime] = None):
        self.instant = instant or datetime(2025, 1, 1, tzinfo=timezone.utc)

    def now(self) -> datetime:
        return self.instant

    def monotonic(self) -> float:
        return 0.0


def rfc3339(moment: datetime) -> str:
    return moment.astimezone(timezone.utc).isoformat(timespec="milliseconds").replace("+00:00", "Z")


def parse_rfc3339(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def http_date(moment: datetime) -> str:
    return format_datetime(moment.astimezone(timezone.utc), usegmt=True)
