"""Optional HTTP elevation provider with on-disk response caching.

Speaks the open-elevation/opentopodata convention: GET with a ``locations``
query of ``lat,lon`` pairs, JSON response carrying ``results[].elevation``.
Requests are chunked to at most 100 points; each chunk's response is cached
as one JSON file keyed by the rounded coordinates, so repeated lookups issue
no network I/O. Callers fall back to synthetic terrain on failure.

The HTTP stack (``requests``) is imported lazily; install the ``http`` extra
to use live lookups. Tests inject a fake session instead.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

MAX_POINTS_PER_REQUEST = 100
COORD_DECIMALS = 5  # ~1 m; cache key granularity

_cache_lock = threading.Lock()


class ElevationError(RuntimeError):
    """HTTP failure or malformed elevation response."""


def _round_points(points):
    return [(round(float(lat), COORD_DECIMALS), round(float(lon), COORD_DECIMALS)) for lat, lon in points]


def _cache_key(endpoint: str, chunk) -> str:
    payload = endpoint + "|" + "|".join(f"{lat},{lon}" for lat, lon in chunk)
    return hashlib.sha256(payload.encode()).hexdigest()


def _default_session():
    try:
        import requests
    except ImportError:  # pragma: no cover - depends on extras
        raise ElevationError(
            "the 'requests' package is required for live elevation lookups; "
            "install the [http] extra or pass a session"
        ) from None
    return requests.Session()


def fetch_elevations(
    endpoint: str,
    points,
    cache_dir,
    session=None,
    timeout: float = 10.0,
) -> list[float]:
    """One elevation in metres per (lat, lon) point, order preserved.

    Responses are served from ``cache_dir`` when a byte-identical request was
    made before. Raises :class:`ElevationError` on HTTP or payload problems.
    """
    points = _round_points(points)
    if not points:
        return []
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)

    out: list[float] = []
    for start in range(0, len(points), MAX_POINTS_PER_REQUEST):
        chunk = points[start : start + MAX_POINTS_PER_REQUEST]
        cache_file = cache_dir / f"{_cache_key(endpoint, chunk)}.json"
        if cache_file.is_file():
            with open(cache_file, encoding="utf-8") as fh:
                out.extend(json.load(fh)["elevations"])
            continue
        if session is None:
            session = _default_session()
        locations = "|".join(f"{lat},{lon}" for lat, lon in chunk)
        try:
            response = session.get(endpoint, params={"locations": locations}, timeout=timeout)
        except Exception as exc:
            raise ElevationError(f"elevation request failed: {exc}") from exc
        if getattr(response, "status_code", None) != 200:
            raise ElevationError(
                f"elevation endpoint returned HTTP {getattr(response, 'status_code', '?')}"
            )
        try:
            payload = response.json()
            elevations = [float(r["elevation"]) for r in payload["results"]]
        except Exception as exc:
            raise ElevationError(f"malformed elevation response: {exc}") from exc
        if len(elevations) != len(chunk):
            raise ElevationError(
                f"elevation endpoint returned {len(elevations)} results for {len(chunk)} points"
            )
        with _cache_lock:
            tmp = cache_file.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump({"endpoint": endpoint, "points": chunk, "elevations": elevations}, fh)
            os.replace(tmp, cache_file)
        out.extend(elevations)
    return out
