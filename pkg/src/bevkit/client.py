"""Thin HTTP client for the bevkit service.

Without a server URL the app runs in-process behind the same HTTP interface,
so CLI runs need no running daemon but exercise the identical API surface.
"""

from __future__ import annotations

import httpx


class ServiceError(Exception):
    """The service rejected a request (bad data, bad shapes, bad config)."""


class ServiceClient:
    def __init__(self, server: str | None = None, timeout: float = 300.0):
        if server:
            self._http = httpx.Client(base_url=server, timeout=timeout)
        else:
            from fastapi.testclient import TestClient

            from .service import create_app

            self._http = TestClient(create_app())

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _checked(self, response: httpx.Response) -> dict | list:
        if response.status_code >= 400:
            try:
                detail = response.json().get("detail", response.text)
            except Exception:
                detail = response.text
            raise ServiceError(f"{response.status_code}: {detail}")
        return response.json()

    def get(self, path: str):
        try:
            return self._checked(self._http.get(path))
        except httpx.HTTPError as exc:
            raise ServiceError(f"request failed: {exc}") from exc

    def post(self, path: str, payload: dict):
        try:
            return self._checked(self._http.post(path, json=payload))
        except httpx.HTTPError as exc:
            raise ServiceError(f"request failed: {exc}") from exc
