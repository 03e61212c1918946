"""Paginated GitHub REST client for repository issues."""

from __future__ import annotations

import logging
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from typing import Sequence

import requests

from .corpus import IssueRecord, parse_timestamp

logger = logging.getLogger(__name__)

DEFAULT_BASE_URL = "https://api.github.com"
PER_PAGE = 100
MAX_ATTEMPTS = 3

_SLUG = re.compile(r"^[A-Za-z0-9_.-]+/[A-Za-z0-9_.-]+$")


class GitHubError(RuntimeError):
    pass


class AuthenticationError(GitHubError):
    pass


class RateLimitError(GitHubError):
    def __init__(self, reset_at: datetime | None):
        self.reset_at = reset_at
        when = reset_at.isoformat() if reset_at else "unknown"
        super().__init__(f"GitHub rate limit exhausted; resets at {when}")


class RepoNotFoundError(GitHubError):
    pass


class TransientError(GitHubError):
    pass


class GitHubClient:
    def __init__(
        self,
        token: str | None = None,
        base_url: str = DEFAULT_BASE_URL,
        timeout: float = 30.0,
        backoff: float = 1.0,
        session: requests.Session | None = None,
    ):
        self.token = token if token is not None else os.environ.get("GITHUB_TOKEN")
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.backoff = backoff
        self.session = session or requests.Session()
        self.session.headers["Accept"] = "application/vnd.github+json"
        if self.token:
            self.session.headers["Authorization"] = f"Bearer {self.token}"

    def _get(self, url: str, params: dict | None, repo: str) -> requests.Response:
        last_exc: Exception | None = None
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.get(url, params=params, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                logger.warning("GET %s failed (%s), attempt %d/%d", url, exc, attempt + 1, MAX_ATTEMPTS)
                continue
            if resp.status_code >= 500:
                last_exc = TransientError(f"HTTP {resp.status_code} from {url}")
                logger.warning("GET %s returned %d, attempt %d/%d", url, resp.status_code, attempt + 1, MAX_ATTEMPTS)
                continue
            _raise_for_status(resp, repo)
            return resp
        raise TransientError(f"giving up on {url} after {MAX_ATTEMPTS} attempts: {last_exc}")

    def fetch_issues(self, repo: str, state: str = "all") -> list[IssueRecord]:
        """Every issue (pull requests excluded) of ``repo``, following ``Link: rel="next"``."""
        if not _SLUG.match(repo):
            raise ValueError(f"malformed repository slug: {repo!r}")
        if state not in ("open", "closed", "all"):
            raise ValueError(f"state must be open, closed or all, got {state!r}")
        url: str | None = f"{self.base_url}/repos/{repo}/issues"
        params: dict | None = {"state": state, "per_page": PER_PAGE, "page": 1}
        records: list[IssueRecord] = []
        while url:
            resp = self._get(url, params, repo)
            for item in resp.json():
                if "pull_request" in item:
                    continue
                records.append(issue_from_api(repo, item))
            url = resp.links.get("next", {}).get("url")
            params = None  # the next link carries its own query string
        return records

    def fetch_many(self, repos: Sequence[str], state: str = "all", workers: int = 4) -> dict[str, list[IssueRecord]]:
        with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
            results = pool.map(lambda r: self.fetch_issues(r, state), repos)
            return dict(zip(repos, results))


def _raise_for_status(resp: requests.Response, repo: str) -> None:
    code = resp.status_code
    if code < 400:
        return
    if code in (403, 429) and (resp.headers.get("X-RateLimit-Remaining") == "0" or code == 429):
        reset = resp.headers.get("X-RateLimit-Reset")
        reset_at = datetime.fromtimestamp(int(reset), tz=timezone.utc) if reset else None
        raise RateLimitError(reset_at)
    if code in (401, 403):
        raise AuthenticationError(f"GitHub rejected the credentials (HTTP {code}) for {repo}")
    if code == 404:
        raise RepoNotFoundError(f"repository not found: {repo}")
    raise GitHubError(f"HTTP {code} for {repo}: {resp.text[:200]}")


def issue_from_api(repo: str, item: dict) -> IssueRecord:
    labels = frozenset(lab["name"] if isinstance(lab, dict) else str(lab) for lab in item.get("labels", []))
    return IssueRecord(
        repo=repo,
        number=int(item["number"]),
        title=item.get("title") or "",
        body=item.get("body"),
        state=item.get("state", "open"),
        labels=labels,
        created_at=parse_timestamp(item["created_at"]),
    )


def fetch_issues(repo_slug: str, auth_token: str | None = None, state_filter: str = "all", base_url: str = DEFAULT_BASE_URL) -> list[IssueRecord]:
    return GitHubClient(auth_token, base_url=base_url).fetch_issues(repo_slug, state_filter)
